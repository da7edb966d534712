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


#ifndef TABSAN_LLM_CLIENT_H_
#define TABSAN_LLM_CLIENT_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabsan/prompting.h"

namespace tabsan {

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string content;
};

struct ChatRequest {
  std::string model_id = "gpt-4-1106-preview";
  std::vector<ChatMessage> messages;
  double temperature = 0.1;
  int max_output_tokens = 1024;

  static ChatRequest ForPrompt(std::string prompt);
  // Hash over model, temperature, token cap and messages.
  std::string Fingerprint() const;
  nlohmann::json ToWireJson() const;
};

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
  int64_t total() const { return prompt_tokens + completion_tokens; }
};

struct Completion {
  std::string text;
  TokenUsage usage;
  int attempts = 1;
};

// Identifies the request to the mock backend and to logs.
struct RequestContext {
  std::string channel = "sanitize";  // or "classify:<column>"
  size_t index = 0;
  int attempt = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion Send(const ChatRequest& request,
                          const RequestContext& context) = 0;
  // Non-secret description for provenance.
  virtual nlohmann::json Describe() const = 0;
};

// Upper-bound heuristic: ceil(bytes / 4).
int64_t EstimateTokens(std::string_view text);

class MockBackend : public Backend {
 public:
  MockBackend() = default;

  // Lookup order: (channel, index, attempt), (channel, index), request
  // fingerprint, default response. Otherwise MockMiss.
  void Add(std::string channel, size_t index, std::string response);
  void AddAttempt(std::string channel, size_t index, int attempt,
                  std::string response);
  void AddFingerprint(std::string fingerprint, std::string response);
  void SetDefault(std::string response);

  // JSON list of {"index", "response", optional "channel", optional
  // "attempt"}.
  static MockBackend FromJson(const nlohmann::json& j);
  static MockBackend LoadFile(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  Completion Send(const ChatRequest& request,
                  const RequestContext& context) override;
  nlohmann::json Describe() const override;

  size_t size() const;

 private:
  std::map<std::tuple<std::string, size_t, int>, std::string> by_attempt_;
  std::map<std::pair<std::string, size_t>, std::string> by_index_;
  std::map<std::string, std::string> by_fingerprint_;
  std::optional<std::string> default_;
};

struct LiveBackendConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  // Name of the environment variable that holds the API key.
  std::string credential_env = "OPENAI_API_KEY";
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_backoff{60000};
  std::chrono::seconds timeout{120};
};

// Result of one HTTP exchange; status 0 means the connection failed.
struct HttpResult {
  int status = 0;
  std::string body;
};

using HttpTransport = std::function<HttpResult(
    const std::string& url, const std::string& body,
    const std::map<std::string, std::string>& headers)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

class LiveBackend : public Backend {
 public:
  explicit LiveBackend(LiveBackendConfig config);
  // For tests: replaces the network and the clock.
  LiveBackend(LiveBackendConfig config, HttpTransport transport,
              Sleeper sleeper, std::string credential);

  Completion Send(const ChatRequest& request,
                  const RequestContext& context) override;
  nlohmann::json Describe() const override;

 private:
  LiveBackendConfig config_;
  HttpTransport transport_;
  Sleeper sleeper_;
  std::string credential_;
};

HttpTransport MakeHttpTransport(std::chrono::seconds timeout);

class TokenBudget {
 public:
  enum class Policy { kReject, kWait };
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit TokenBudget(int64_t limit = 500000,
                       std::chrono::seconds window = std::chrono::hours(24),
                       Policy policy = Policy::kReject, Clock clock = {},
                       Sleeper sleeper = {});

  // Reserves `tokens` or throws BudgetExhausted (kReject). Under kWait,
  // sleeps until the window rolls over; a request larger than the whole
  // limit is always rejected.
  void Reserve(int64_t tokens);
  // Replaces a reservation with the actual usage. Overshoot beyond the
  // limit is clamped and counted in overshoot().
  void Settle(int64_t reserved, int64_t actual);
  void Release(int64_t reserved);

  int64_t limit() const { return limit_; }
  int64_t spent() const;
  int64_t reserved() const;
  int64_t remaining() const;
  int64_t overshoot() const;

 private:
  void RollWindowLocked();

  const int64_t limit_;
  const std::chrono::seconds window_;
  const Policy policy_;
  Clock clock_;
  Sleeper sleeper_;
  mutable std::mutex mu_;
  std::chrono::steady_clock::time_point window_start_;
  int64_t spent_ = 0;
  int64_t reserved_ = 0;
  int64_t overshoot_ = 0;
};

// Reserve, send, settle. Validates that the request has exactly one user
// message.
Completion Complete(const ChatRequest& request, Backend& backend,
                    TokenBudget& budget, const RequestContext& context = {});

enum class DispatchStatus { kOk, kBudgetExhausted, kMockMiss, kFailed };
std::string_view DispatchStatusName(DispatchStatus status);

struct DispatchResult {
  DispatchStatus status = DispatchStatus::kFailed;
  Completion completion;
  std::string error;
  double latency_ms = 0.0;
};

struct BatchRequest {
  ChatRequest request;
  RequestContext context;
};

// At most `parallelism` requests in flight. Budget reservations are taken in
// input order, so with a tight budget the earliest requests win.
std::vector<DispatchResult> DispatchBatch(std::span<const BatchRequest> batch,
                                          Backend& backend,
                                          TokenBudget& budget,
                                          int parallelism);

struct BatchItem {
  ParsedResponse parsed;
  DispatchResult dispatch;
};

std::vector<BatchItem> RunBatch(std::span<const PromptBundle> bundles,
                                const FeatureSchema& schema,
                                const ChatRequest& request_template,
                                Backend& backend, TokenBudget& budget,
                                int parallelism,
                                std::span<const std::string> refusal_phrases,
                                int attempt = 0);

}  // namespace tabsan

#endif  // TABSAN_LLM_CLIENT_H_
