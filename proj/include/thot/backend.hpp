#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "thot/domain.hpp"

namespace thot {

struct DecodeParams {
  double temperature = 0.0;  // 0 = greedy
  int max_output_tokens = 512;

  bool operator==(const DecodeParams&) const = default;
};

struct BackendConfig {
  std::string backend_id;
  std::string endpoint_url;
  std::string model_name;
  DecodeParams decode{0.0, 512};         // first-step and single-step calls
  DecodeParams answer_decode{0.0, 128};  // answer-extraction calls
  int timeout_ms = 60000;
  int max_retries = 5;
  std::string auth_env_var;  // empty: send no Authorization header
  std::optional<std::string> system_message;

  bool operator==(const BackendConfig&) const = default;
};

// Canonical bytes identifying one request: compact JSON with sorted keys
// {"max_output_tokens","model","prompt","temperature"}.
std::string canonical_request(std::string_view model_name, std::string_view prompt,
                              const DecodeParams& decode);
std::string request_hash(std::string_view model_name, std::string_view prompt,
                         const DecodeParams& decode);

struct RawCompletion {
  CompletionResult result;
  std::string raw_json;  // backend response body as received (or synthesized)
};

// A chat-completion endpoint. Implementations must allow concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendConfig& config() const = 0;
  virtual RawCompletion complete_raw(const PromptBundle& prompt) = 0;

  CompletionResult complete(const PromptBundle& prompt) { return complete_raw(prompt).result; }
  const std::string& id() const { return config().backend_id; }
  const DecodeParams& decode_for(Phase phase) const;
  std::string request_hash_for(const PromptBundle& prompt) const;
};

// All set conditions must hold; an empty matcher matches everything.
struct PromptMatcher {
  std::vector<std::string> contains;
  std::optional<std::string> starts_with;
  std::optional<std::string> ends_with;
  std::optional<std::string> regex;  // ECMAScript, searched
};

struct ScriptEntry {
  PromptMatcher when;
  std::string response;
};

// Scripted deterministic backend. First matching entry wins; anything else
// gets kUnmatched. Never touches the network.
class MockBackend final : public Backend {
 public:
  static constexpr std::string_view kUnmatched = "UNMATCHED";

  explicit MockBackend(std::vector<ScriptEntry> script, BackendConfig config = default_config(),
                       std::chrono::milliseconds simulated_latency = std::chrono::milliseconds{0});

  static BackendConfig default_config();

  const BackendConfig& config() const override { return config_; }
  RawCompletion complete_raw(const PromptBundle& prompt) override;

  std::size_t call_count() const;
  std::vector<std::string> call_log() const;

 private:
  bool matches(std::size_t entry, std::string_view prompt) const;

  std::vector<ScriptEntry> script_;
  std::vector<std::optional<std::regex>> compiled_;
  BackendConfig config_;
  std::chrono::milliseconds latency_;
  mutable std::mutex mu_;
  std::vector<std::string> log_;
};

std::shared_ptr<MockBackend> mock_backend(std::vector<ScriptEntry> script);

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Raw HTTP POST. Throws Error(kTimeout) on timeouts and Error(kTransport)
// when no response was received.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                            std::chrono::milliseconds timeout) = 0;
};

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  std::chrono::milliseconds cap{60000};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
  std::optional<std::uint64_t> jitter_seed;
};

// Exponential delay for a 0-based retry attempt with "equal jitter": half the
// capped delay is fixed, the other half uniform. unit_draw is in [0, 1).
std::chrono::milliseconds backoff_delay(int attempt, const RetryPolicy& policy, double unit_draw);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

std::string build_chat_request_body(const BackendConfig& config, std::string_view prompt,
                                    const DecodeParams& decode);
// choices[0].message.content; throws Error(kMalformedResponse).
std::string parse_chat_response(std::string_view body);

// Chat-completions JSON client. Timeouts, 429 and 5xx are retried up to
// max_retries times; the last error is rethrown after that.
class ChatCompletionsBackend final : public Backend {
 public:
  ChatCompletionsBackend(BackendConfig config, std::shared_ptr<Transport> transport, RetryPolicy retry = {},
                         EnvLookup env = process_env());

  const BackendConfig& config() const override { return config_; }
  RawCompletion complete_raw(const PromptBundle& prompt) override;

 private:
  double next_draw();

  BackendConfig config_;
  std::shared_ptr<Transport> transport_;
  RetryPolicy retry_;
  EnvLookup env_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

// Content-addressed response cache in front of another backend. Files are
// {dir}/{request_hash}.json holding the raw response. Concurrent requests for
// the same hash are collapsed into one upstream call.
class CachingBackend final : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);

  const BackendConfig& config() const override { return inner_->config(); }
  RawCompletion complete_raw(const PromptBundle& prompt) override;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::shared_ptr<std::mutex> key_lock(const std::string& hash);
  std::optional<RawCompletion> load(const std::string& hash) const;
  void store(const std::string& hash, const RawCompletion& completion) const;

  std::shared_ptr<Backend> inner_;
  std::filesystem::path dir_;
  std::mutex locks_mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

}  // namespace thot
