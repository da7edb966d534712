// Copyright 2026 The tabsan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "properties.h"
#include "tabsan/classifiers.h"
#include "tabsan/dataset.h"
#include "tabsan/metrics.h"
#include "tabsan/nn.h"
#include "tabsan/prompting.h"
#include "tabsan/random.h"
#include "tabsan/trees.h"

namespace tabsan {
namespace {

RecordTable Normalized(size_t rows) {
  RecordTable t = testing::SignalTable(rows, 1);
  t.schema = FitNormalization(t);
  return t;
}

void BM_Encode(benchmark::State& state) {
  const RecordTable t = Normalized(static_cast<size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Encode(t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encode)->Arg(1000)->Arg(10000);

void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(3);
  const std::vector<int> dims = {100, 64, 32};
  const Mlp mlp(dims, Activation::kRelu, Activation::kIdentity, rng);
  const Matrix x = Matrix::Random(256, 100);
  const Matrix g = Matrix::Ones(256, 32);
  for (auto _ : state) {
    MlpTape tape;
    const Matrix y = mlp.Forward(x, &tape);
    MlpGrads grads = mlp.ZeroGrads();
    benchmark::DoNotOptimize(mlp.Backward(tape, g, &grads));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_MlpForwardBackward);

void BM_ForestFit(benchmark::State& state) {
  const RecordTable t = Normalized(5000);
  const Matrix x = Encode(t).values;
  const auto y = TargetLabels(t, Target::kUtility);
  ForestParams p;
  p.n_trees = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(RandomForest::Fit(x, y, p, 1));
}
BENCHMARK(BM_ForestFit)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_BoostingFit(benchmark::State& state) {
  const RecordTable t = Normalized(5000);
  const Matrix x = Encode(t).values;
  const auto y = TargetLabels(t, Target::kUtility);
  BoostingParams p;
  p.rounds = 50;
  for (auto _ : state) benchmark::DoNotOptimize(GradientBoosting::Fit(x, y, p));
}
BENCHMARK(BM_BoostingFit)->Unit(benchmark::kMillisecond);

void BM_Fairness(benchmark::State& state) {
  Rng rng(5);
  const size_t n = static_cast<size_t>(state.range(0));
  std::vector<int> pred(n), label(n), group(n);
  for (size_t i = 0; i < n; ++i) {
    pred[i] = static_cast<int>(rng.Below(2));
    label[i] = static_cast<int>(rng.Below(2));
    group[i] = static_cast<int>(rng.Below(2));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(Score(pred, label));
    benchmark::DoNotOptimize(Fairness(pred, label, group));
  }
}
BENCHMARK(BM_Fairness)->Arg(1000)->Arg(100000);

void BM_PromptBuildAndParse(benchmark::State& state) {
  const RecordTable t = testing::SignalTable(64, 2);
  const PromptConfig config = PromptConfig::Defaults();
  const PromptVariant variant = config.Variant(VariantTag::kP1);
  const auto columns = FeatureNames(t.schema);
  size_t i = 0;
  for (auto _ : state) {
    const size_t r = i++ % t.size();
    benchmark::DoNotOptimize(
        BuildPrompt(t.rows[r], t.labels[r], t.schema, variant, config, r));
    const std::string reply = FormatRecordLines(t.rows[r], t.schema);
    benchmark::DoNotOptimize(ParseResponse(reply, t.schema, columns));
  }
}
BENCHMARK(BM_PromptBuildAndParse);

}  // namespace
}  // namespace tabsan

BENCHMARK_MAIN();
