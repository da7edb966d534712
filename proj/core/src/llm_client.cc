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

#include "tabsan/llm_client.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "tabsan/error.h"
#include "tabsan/hash.h"

namespace tabsan {

ChatRequest ChatRequest::ForPrompt(std::string prompt) {
  ChatRequest r;
  r.messages.push_back({"user", std::move(prompt)});
  return r;
}

nlohmann::json ChatRequest::ToWireJson() const {
  nlohmann::json messages_json = nlohmann::json::array();
  for (const auto& m : messages) {
    messages_json.push_back({{"role", m.role}, {"content", m.content}});
  }
  return {{"model", model_id},
          {"messages", messages_json},
          {"temperature", temperature},
          {"max_tokens", max_output_tokens}};
}

std::string ChatRequest::Fingerprint() const {
  return HashHex(ToWireJson().dump());
}

int64_t EstimateTokens(std::string_view text) {
  return static_cast<int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// MockBackend

void MockBackend::Add(std::string channel, size_t index, std::string response) {
  by_index_[{std::move(channel), index}] = std::move(response);
}

void MockBackend::AddAttempt(std::string channel, size_t index, int attempt,
                             std::string response) {
  by_attempt_[{std::move(channel), index, attempt}] = std::move(response);
}

void MockBackend::AddFingerprint(std::string fingerprint, std::string response) {
  by_fingerprint_[std::move(fingerprint)] = std::move(response);
}

void MockBackend::SetDefault(std::string response) {
  default_ = std::move(response);
}

size_t MockBackend::size() const {
  return by_attempt_.size() + by_index_.size() + by_fingerprint_.size() +
         (default_ ? 1 : 0);
}

MockBackend MockBackend::FromJson(const nlohmann::json& j) {
  if (!j.is_array()) {
    throw Error(ErrorCode::kConfigError, "mock script must be a JSON list");
  }
  MockBackend mock;
  for (const auto& entry : j) {
    if (!entry.is_object() || !entry.contains("response")) {
      throw Error(ErrorCode::kConfigError,
                  "mock entry needs a response: " + entry.dump());
    }
    std::string response = entry.at("response").get<std::string>();
    if (entry.contains("fingerprint")) {
      mock.AddFingerprint(entry.at("fingerprint").get<std::string>(),
                          std::move(response));
      continue;
    }
    if (!entry.contains("index")) {
      mock.SetDefault(std::move(response));
      continue;
    }
    const auto index = entry.at("index").get<size_t>();
    std::string channel = entry.value("channel", std::string("sanitize"));
    if (entry.contains("attempt")) {
      mock.AddAttempt(std::move(channel), index, entry.at("attempt").get<int>(),
                      std::move(response));
    } else {
      mock.Add(std::move(channel), index, std::move(response));
    }
  }
  return mock;
}

MockBackend MockBackend::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
  return FromJson(j);
}

nlohmann::json MockBackend::ToJson() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, response] : by_attempt_) {
    out.push_back({{"channel", std::get<0>(key)},
                   {"index", std::get<1>(key)},
                   {"attempt", std::get<2>(key)},
                   {"response", response}});
  }
  for (const auto& [key, response] : by_index_) {
    out.push_back(
        {{"channel", key.first}, {"index", key.second}, {"response", response}});
  }
  for (const auto& [fp, response] : by_fingerprint_) {
    out.push_back({{"fingerprint", fp}, {"response", response}});
  }
  if (default_) out.push_back({{"response", *default_}});
  return out;
}

Completion MockBackend::Send(const ChatRequest& request,
                             const RequestContext& context) {
  const std::string* found = nullptr;
  if (auto it = by_attempt_.find({context.channel, context.index, context.attempt});
      it != by_attempt_.end()) {
    found = &it->second;
  } else if (auto it2 = by_index_.find({context.channel, context.index});
             it2 != by_index_.end()) {
    found = &it2->second;
  } else if (!by_fingerprint_.empty()) {
    if (auto it3 = by_fingerprint_.find(request.Fingerprint());
        it3 != by_fingerprint_.end()) {
      found = &it3->second;
    }
  }
  if (!found && default_) found = &*default_;
  if (!found) {
    throw Error(ErrorCode::kMockMiss,
                "no scripted response for " + context.channel + "#" +
                    std::to_string(context.index));
  }
  Completion c;
  c.text = *found;
  for (const auto& m : request.messages) {
    c.usage.prompt_tokens += EstimateTokens(m.content);
  }
  c.usage.completion_tokens = EstimateTokens(c.text);
  return c;
}

nlohmann::json MockBackend::Describe() const {
  return {{"kind", "mock"}, {"entries", size()}};
}

// ---------------------------------------------------------------------------
// LiveBackend

LiveBackend::LiveBackend(LiveBackendConfig config)
    : config_(std::move(config)),
      transport_(MakeHttpTransport(config_.timeout)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (const char* key = std::getenv(config_.credential_env.c_str())) {
    credential_ = key;
  }
}

LiveBackend::LiveBackend(LiveBackendConfig config, HttpTransport transport,
                         Sleeper sleeper, std::string credential)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      credential_(std::move(credential)) {}

nlohmann::json LiveBackend::Describe() const {
  return {{"kind", "live"},
          {"endpoint", config_.endpoint},
          {"credential_env", config_.credential_env},
          {"max_retries", config_.max_retries}};
}

Completion LiveBackend::Send(const ChatRequest& request,
                             const RequestContext& context) {
  if (credential_.empty()) {
    throw Error(ErrorCode::kAuthFailure,
                "environment variable " + config_.credential_env + " is not set");
  }
  const std::string body = request.ToWireJson().dump();
  const std::map<std::string, std::string> headers = {
      {"Authorization", "Bearer " + credential_},
      {"Content-Type", "application/json"}};

  std::chrono::milliseconds backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
    const HttpResult res = transport_(config_.endpoint, body, headers);
    if (res.status == 401 || res.status == 403) {
      throw Error(ErrorCode::kAuthFailure,
                  "endpoint rejected credentials (HTTP " +
                      std::to_string(res.status) + ")");
    }
    if (res.status == 200) {
      try {
        const auto j = nlohmann::json::parse(res.body);
        Completion c;
        c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
          const auto& u = j.at("usage");
          c.usage.prompt_tokens = u.value("prompt_tokens", int64_t{0});
          c.usage.completion_tokens = u.value("completion_tokens", int64_t{0});
        }
        c.attempts = attempt;
        return c;
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("unparseable response body: ") + e.what();
      }
    } else if (res.status == 0 || res.status == 429 || res.status >= 500) {
      last_error = res.status == 0 ? "connection failed"
                                   : "HTTP " + std::to_string(res.status);
    } else {
      throw Error(ErrorCode::kTransportFailure,
                  "HTTP " + std::to_string(res.status) + " for " +
                      context.channel + "#" + std::to_string(context.index));
    }
    if (attempt <= config_.max_retries) {
      sleeper_(backoff);
      backoff = std::min(backoff * 2, config_.max_backoff);
    }
  }
  throw Error(ErrorCode::kTransportFailure,
              last_error + " after " + std::to_string(config_.max_retries + 1) +
                  " attempts");
}

// ---------------------------------------------------------------------------
// TokenBudget

TokenBudget::TokenBudget(int64_t limit, std::chrono::seconds window,
                         Policy policy, Clock clock, Sleeper sleeper)
    : limit_(limit),
      window_(window),
      policy_(policy),
      clock_(clock ? std::move(clock) : Clock(&std::chrono::steady_clock::now)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) {
                           std::this_thread::sleep_for(d);
                         })) {
  if (limit_ <= 0) throw Error(ErrorCode::kConfigError, "budget limit must be > 0");
  window_start_ = clock_();
}

void TokenBudget::RollWindowLocked() {
  const auto now = clock_();
  if (now - window_start_ >= window_) {
    spent_ = 0;
    overshoot_ = 0;
    window_start_ = now;
  }
}

void TokenBudget::Reserve(int64_t tokens) {
  if (tokens < 0) throw Error(ErrorCode::kInvalidArgument, "negative reservation");
  std::unique_lock lock(mu_);
  if (tokens > limit_) {
    throw Error(ErrorCode::kBudgetExhausted,
                "request of " + std::to_string(tokens) +
                    " tokens exceeds the whole budget of " + std::to_string(limit_));
  }
  for (;;) {
    RollWindowLocked();
    const int64_t available = limit_ - spent_ - reserved_;
    if (tokens <= available) {
      reserved_ += tokens;
      return;
    }
    if (policy_ == Policy::kReject) {
      throw Error(ErrorCode::kBudgetExhausted,
                  "request of " + std::to_string(tokens) + " tokens, " +
                      std::to_string(std::max<int64_t>(available, 0)) +
                      " remaining");
    }
    const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(
        window_start_ + window_ - clock_());
    lock.unlock();
    sleeper_(std::max(wait, std::chrono::milliseconds(1)));
    lock.lock();
  }
}

void TokenBudget::Settle(int64_t reserved, int64_t actual) {
  std::lock_guard lock(mu_);
  reserved_ = std::max<int64_t>(reserved_ - reserved, 0);
  spent_ += std::max<int64_t>(actual, 0);
  if (spent_ > limit_) {
    overshoot_ += spent_ - limit_;
    spent_ = limit_;
  }
}

void TokenBudget::Release(int64_t reserved) { Settle(reserved, 0); }

int64_t TokenBudget::spent() const {
  std::lock_guard lock(mu_);
  return spent_;
}

int64_t TokenBudget::reserved() const {
  std::lock_guard lock(mu_);
  return reserved_;
}

int64_t TokenBudget::remaining() const {
  std::lock_guard lock(mu_);
  return limit_ - spent_ - reserved_;
}

int64_t TokenBudget::overshoot() const {
  std::lock_guard lock(mu_);
  return overshoot_;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

void ValidateRequest(const ChatRequest& request) {
  size_t users = 0;
  for (const auto& m : request.messages) {
    if (m.role == "user") {
      ++users;
    } else if (m.role != "system") {
      throw Error(ErrorCode::kInvalidArgument, "unsupported role " + m.role);
    }
  }
  if (users != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected exactly one user message, got " + std::to_string(users));
  }
  if (request.temperature < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  }
}

int64_t ReservationFor(const ChatRequest& request) {
  int64_t tokens = request.max_output_tokens;
  for (const auto& m : request.messages) tokens += EstimateTokens(m.content);
  return tokens;
}

Completion SendAndSettle(const ChatRequest& request, Backend& backend,
                         TokenBudget& budget, const RequestContext& context,
                         int64_t reservation) {
  Completion c;
  try {
    c = backend.Send(request, context);
  } catch (...) {
    budget.Release(reservation);
    throw;
  }
  budget.Settle(reservation, c.usage.total());
  return c;
}

}  // namespace

Completion Complete(const ChatRequest& request, Backend& backend,
                    TokenBudget& budget, const RequestContext& context) {
  ValidateRequest(request);
  const int64_t reservation = ReservationFor(request);
  budget.Reserve(reservation);
  return SendAndSettle(request, backend, budget, context, reservation);
}

std::string_view DispatchStatusName(DispatchStatus status) {
  switch (status) {
    case DispatchStatus::kOk: return "ok";
    case DispatchStatus::kBudgetExhausted: return "budget_exhausted";
    case DispatchStatus::kMockMiss: return "mock_miss";
    case DispatchStatus::kFailed: return "failed";
  }
  return "failed";
}

std::vector<DispatchResult> DispatchBatch(std::span<const BatchRequest> batch,
                                          Backend& backend, TokenBudget& budget,
                                          int parallelism) {
  if (parallelism < 1) {
    throw Error(ErrorCode::kInvalidArgument, "parallelism must be >= 1");
  }
  std::vector<DispatchResult> results(batch.size());
  std::mutex order_mu;
  size_t next = 0;

  auto worker = [&] {
    for (;;) {
      size_t i = 0;
      int64_t reservation = 0;
      {
        std::lock_guard lock(order_mu);
        if (next >= batch.size()) return;
        i = next++;
        const auto& req = batch[i].request;
        try {
          ValidateRequest(req);
          reservation = ReservationFor(req);
          budget.Reserve(reservation);
        } catch (const Error& e) {
          results[i].status = e.code() == ErrorCode::kBudgetExhausted
                                  ? DispatchStatus::kBudgetExhausted
                                  : DispatchStatus::kFailed;
          results[i].error = e.what();
          continue;
        }
      }
      const auto start = std::chrono::steady_clock::now();
      try {
        results[i].completion = SendAndSettle(batch[i].request, backend, budget,
                                              batch[i].context, reservation);
        results[i].status = DispatchStatus::kOk;
      } catch (const Error& e) {
        results[i].status = e.code() == ErrorCode::kMockMiss
                                ? DispatchStatus::kMockMiss
                                : DispatchStatus::kFailed;
        results[i].error = e.what();
      } catch (const std::exception& e) {
        results[i].status = DispatchStatus::kFailed;
        results[i].error = e.what();
      }
      results[i].latency_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
    }
  };

  const size_t n_workers =
      std::min<size_t>(static_cast<size_t>(parallelism), batch.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return results;
}

std::vector<BatchItem> RunBatch(std::span<const PromptBundle> bundles,
                                const FeatureSchema& schema,
                                const ChatRequest& request_template,
                                Backend& backend, TokenBudget& budget,
                                int parallelism,
                                std::span<const std::string> refusal_phrases,
                                int attempt) {
  std::vector<BatchRequest> batch;
  batch.reserve(bundles.size());
  for (const auto& b : bundles) {
    BatchRequest r;
    r.request = request_template;
    r.request.messages.push_back({"user", b.text});
    r.context = {"sanitize", b.record_index, attempt};
    batch.push_back(std::move(r));
  }
  auto dispatched = DispatchBatch(batch, backend, budget, parallelism);
  std::vector<BatchItem> out(bundles.size());
  for (size_t i = 0; i < bundles.size(); ++i) {
    out[i].dispatch = std::move(dispatched[i]);
    if (out[i].dispatch.status == DispatchStatus::kOk) {
      out[i].parsed = ParseResponse(out[i].dispatch.completion.text, schema,
                                    bundles[i].expected_columns, refusal_phrases);
    } else {
      out[i].parsed.status = ParseStatus::kMalformed;
      out[i].parsed.diagnostics.push_back(out[i].dispatch.error);
    }
  }
  return out;
}

}  // namespace tabsan
