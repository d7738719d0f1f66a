#include "thot/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "thot/errors.hpp"
#include "thot/hashing.hpp"
#include "thot/serialization.hpp"

namespace thot {

std::string canonical_request(std::string_view model_name, std::string_view prompt,
                              const DecodeParams& decode) {
  json j = json::object();
  j["max_output_tokens"] = decode.max_output_tokens;
  j["model"] = model_name;
  j["prompt"] = prompt;
  j["temperature"] = decode.temperature;
  return j.dump();
}

std::string request_hash(std::string_view model_name, std::string_view prompt, const DecodeParams& decode) {
  return sha256_hex(canonical_request(model_name, prompt, decode));
}

const DecodeParams& Backend::decode_for(Phase phase) const {
  return phase == Phase::kSecond ? config().answer_decode : config().decode;
}

std::string Backend::request_hash_for(const PromptBundle& prompt) const {
  return request_hash(config().model_name, prompt.rendered, decode_for(prompt.phase));
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(std::vector<ScriptEntry> script, BackendConfig config,
                         std::chrono::milliseconds simulated_latency)
    : script_(std::move(script)), config_(std::move(config)), latency_(simulated_latency) {
  compiled_.reserve(script_.size());
  for (const auto& entry : script_) {
    if (entry.when.regex) {
      compiled_.emplace_back(std::regex(*entry.when.regex, std::regex::ECMAScript));
    } else {
      compiled_.emplace_back(std::nullopt);
    }
  }
}

BackendConfig MockBackend::default_config() {
  BackendConfig config;
  config.backend_id = "mock";
  config.model_name = "mock";
  config.max_retries = 0;
  return config;
}

bool MockBackend::matches(std::size_t entry, std::string_view prompt) const {
  const PromptMatcher& m = script_[entry].when;
  for (const auto& needle : m.contains) {
    if (prompt.find(needle) == std::string_view::npos) return false;
  }
  if (m.starts_with && !prompt.starts_with(*m.starts_with)) return false;
  if (m.ends_with && !prompt.ends_with(*m.ends_with)) return false;
  if (compiled_[entry] && !std::regex_search(prompt.begin(), prompt.end(), *compiled_[entry])) return false;
  return true;
}

RawCompletion MockBackend::complete_raw(const PromptBundle& prompt) {
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  {
    std::lock_guard lock(mu_);
    log_.push_back(prompt.rendered);
  }
  std::string text(kUnmatched);
  for (std::size_t i = 0; i < script_.size(); ++i) {
    if (matches(i, prompt.rendered)) {
      text = script_[i].response;
      break;
    }
  }
  RawCompletion out;
  out.result.text = text;
  out.result.request_hash = request_hash_for(prompt);
  out.result.backend_id = config_.backend_id;
  out.result.latency_ms = latency_.count();
  out.raw_json = json{{"text", text}}.dump();
  return out;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::vector<std::string> MockBackend::call_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::shared_ptr<MockBackend> mock_backend(std::vector<ScriptEntry> script) {
  return std::make_shared<MockBackend>(std::move(script));
}

// ---------------------------------------------------------------------------
// ChatCompletionsBackend

std::chrono::milliseconds backoff_delay(int attempt, const RetryPolicy& policy, double unit_draw) {
  const auto shift = std::min(attempt, 30);
  const double exp = static_cast<double>(policy.base.count()) * static_cast<double>(1LL << shift);
  const double capped = std::min(exp, static_cast<double>(policy.cap.count()));
  const double draw = std::clamp(unit_draw, 0.0, 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped / 2.0 + draw * capped / 2.0));
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* value = std::getenv(name.c_str());
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
  };
}

std::string build_chat_request_body(const BackendConfig& config, std::string_view prompt,
                                    const DecodeParams& decode) {
  json messages = json::array();
  if (config.system_message) messages.push_back({{"role", "system"}, {"content", *config.system_message}});
  messages.push_back({{"role", "user"}, {"content", prompt}});
  json body = {{"model", config.model_name},
               {"messages", std::move(messages)},
               {"temperature", decode.temperature},
               {"max_tokens", decode.max_output_tokens}};
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kMalformedResponse, "response body is not JSON");
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorCode::kMalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("unexpected response shape: ") + e.what());
  }
}

ChatCompletionsBackend::ChatCompletionsBackend(BackendConfig config, std::shared_ptr<Transport> transport,
                                               RetryPolicy retry, EnvLookup env)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      retry_(std::move(retry)),
      env_(std::move(env)),
      rng_(retry_.jitter_seed.value_or(std::random_device{}())) {
  if (!transport_) throw Error(ErrorCode::kInvalidArgument, "chat backend needs a transport");
  if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

double ChatCompletionsBackend::next_draw() {
  std::lock_guard lock(rng_mu_);
  return std::generate_canonical<double, 53>(rng_);
}

RawCompletion ChatCompletionsBackend::complete_raw(const PromptBundle& prompt) {
  HttpHeaders headers = {{"Content-Type", "application/json"}};
  if (!config_.auth_env_var.empty()) {
    const auto key = env_(config_.auth_env_var);
    if (!key) throw Error(ErrorCode::kAuthMissing, "environment variable " + config_.auth_env_var + " is not set");
    headers.emplace_back("Authorization", "Bearer " + *key);
  }

  const DecodeParams& decode = decode_for(prompt.phase);
  const std::string body = build_chat_request_body(config_, prompt.rendered, decode);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);

  std::optional<Error> last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) retry_.sleep(backoff_delay(attempt - 1, retry_, next_draw()));
    const auto start = std::chrono::steady_clock::now();
    HttpResponse response;
    try {
      response = transport_->post(config_.endpoint_url, body, headers, timeout);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTimeout && e.code() != ErrorCode::kTransport) throw;
      last = e;
      continue;
    }
    if (response.status == 429) {
      last = Error(ErrorCode::kRateLimited, "HTTP 429 from " + config_.endpoint_url);
      continue;
    }
    if (response.status >= 500) {
      last = Error(ErrorCode::kTransport, "HTTP " + std::to_string(response.status) + " from " + config_.endpoint_url);
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw Error(ErrorCode::kTransport, "HTTP " + std::to_string(response.status) + ": " + response.body);
    }
    RawCompletion out;
    out.result.text = parse_chat_response(response.body);
    out.result.request_hash = request_hash(config_.model_name, prompt.rendered, decode);
    out.result.backend_id = config_.backend_id;
    out.result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
    out.raw_json = std::move(response.body);
    return out;
  }
  throw *last;
}

// ---------------------------------------------------------------------------
// CachingBackend

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  if (!inner_) throw Error(ErrorCode::kInvalidArgument, "caching backend needs an inner backend");
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create cache dir " + dir_.string() + ": " + ec.message());
}

std::shared_ptr<std::mutex> CachingBackend::key_lock(const std::string& hash) {
  std::lock_guard lock(locks_mu_);
  auto& slot = locks_[hash];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

std::optional<RawCompletion> CachingBackend::load(const std::string& hash) const {
  std::ifstream in(dir_ / (hash + ".json"));
  if (!in) return std::nullopt;
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("text")) return std::nullopt;
  RawCompletion out;
  out.result.text = j.at("text").get<std::string>();
  out.result.request_hash = hash;
  out.result.backend_id = inner_->id();
  out.result.latency_ms = 0;
  out.result.from_cache = true;
  out.raw_json = j.contains("response") ? j.at("response").dump() : std::string{};
  return out;
}

void CachingBackend::store(const std::string& hash, const RawCompletion& completion) const {
  json j = {{"request_hash", hash}, {"backend_id", inner_->id()}, {"text", completion.result.text}};
  const json raw = json::parse(completion.raw_json, nullptr, false);
  j["response"] = raw.is_discarded() ? json(completion.raw_json) : raw;

  const auto final_path = dir_ / (hash + ".json");
  std::ostringstream tmp_name;
  tmp_name << hash << ".tmp." << std::this_thread::get_id();
  const auto tmp_path = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp_path, std::ios::trunc);
    out << j.dump();
    if (!out) throw Error(ErrorCode::kIo, "cannot write cache file " + tmp_path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot publish cache file " + final_path.string() + ": " + ec.message());
}

RawCompletion CachingBackend::complete_raw(const PromptBundle& prompt) {
  const std::string hash = inner_->request_hash_for(prompt);
  const auto lock_ptr = key_lock(hash);
  std::lock_guard lock(*lock_ptr);
  if (auto cached = load(hash)) {
    ++hits_;
    return *cached;
  }
  ++misses_;
  RawCompletion fresh = inner_->complete_raw(prompt);
  store(hash, fresh);
  return fresh;
}

}  // namespace thot
