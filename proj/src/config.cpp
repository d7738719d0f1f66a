#include "thot/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "thot/errors.hpp"
#include "thot/hashing.hpp"
#include "thot/trigger_catalog.hpp"

namespace thot {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfig, field + ": " + what);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& ctx) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    config_error(ctx + "." + key, e.what());
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& ctx) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) config_error(ctx + "." + key, "is required");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    config_error(ctx + "." + key, e.what());
  }
}

std::string read_text_file(const fs::path& path, const std::string& ctx) {
  std::ifstream in(path);
  if (!in) config_error(ctx, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

FieldMapping parse_fields(const json& j, FieldMapping m, const std::string& ctx) {
  if (!j.is_object()) config_error(ctx, "must be an object");
  m.record_id = get_or(j, "record_id", m.record_id, ctx);
  m.question = get_or(j, "question", m.question, ctx);
  m.answers = get_or(j, "answers", m.answers, ctx);
  m.passages = get_or(j, "passages", m.passages, ctx);
  m.passage_id = get_or(j, "passage_id", m.passage_id, ctx);
  m.passage_text = get_or(j, "passage_text", m.passage_text, ctx);
  m.passage_title = get_or(j, "passage_title", m.passage_title, ctx);
  m.passage_gold = get_or(j, "passage_gold", m.passage_gold, ctx);
  return m;
}

json fields_to_json(const FieldMapping& m) {
  return json{{"record_id", m.record_id},       {"question", m.question},
              {"answers", m.answers},           {"passages", m.passages},
              {"passage_id", m.passage_id},     {"passage_text", m.passage_text},
              {"passage_title", m.passage_title}, {"passage_gold", m.passage_gold}};
}

std::vector<ScriptEntry> load_script_file(const fs::path& path, const std::string& ctx) {
  const std::string text = read_text_file(path, ctx);
  const json j = json::parse(text, nullptr, false);
  std::vector<ScriptEntry> out;
  if (!j.is_discarded() && j.is_array()) {
    for (const auto& item : j) out.push_back(parse_script_entry(item));
    return out;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json entry = json::parse(line, nullptr, false);
    if (entry.is_discarded()) config_error(ctx, "script file " + path.string() + " is neither a JSON list nor JSONL");
    out.push_back(parse_script_entry(entry));
  }
  return out;
}

}  // namespace

ScriptEntry parse_script_entry(const json& j) {
  const std::string ctx = "script entry";
  if (!j.is_object()) config_error(ctx, "must be an object");
  ScriptEntry e;
  e.response = require<std::string>(j, "response", ctx);
  if (const auto it = j.find("contains"); it != j.end() && !it->is_null()) {
    if (it->is_string()) {
      e.when.contains.push_back(it->get<std::string>());
    } else {
      e.when.contains = get_or(j, "contains", std::vector<std::string>{}, ctx);
    }
  }
  if (j.contains("starts_with")) e.when.starts_with = require<std::string>(j, "starts_with", ctx);
  if (j.contains("ends_with")) e.when.ends_with = require<std::string>(j, "ends_with", ctx);
  if (j.contains("regex")) e.when.regex = require<std::string>(j, "regex", ctx);
  return e;
}

json script_entry_to_json(const ScriptEntry& entry) {
  json j = {{"contains", entry.when.contains}, {"response", entry.response}};
  if (entry.when.starts_with) j["starts_with"] = *entry.when.starts_with;
  if (entry.when.ends_with) j["ends_with"] = *entry.when.ends_with;
  if (entry.when.regex) j["regex"] = *entry.when.regex;
  return j;
}

BackendSpec parse_backend_spec(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) config_error("backend", "must be an object");
  BackendSpec spec;
  const std::string id = require<std::string>(j, "backend_id", "backend");
  const std::string ctx = "backends[" + id + "]";
  spec.kind = get_or<std::string>(j, "kind", "chat_completions", ctx);
  if (spec.kind != "chat_completions" && spec.kind != "mock") config_error(ctx + ".kind", "must be chat_completions or mock");

  BackendConfig& c = spec.config;
  c.backend_id = id;
  c.endpoint_url = get_or<std::string>(j, "endpoint_url", "", ctx);
  c.model_name = get_or<std::string>(j, "model_name", spec.kind == "mock" ? "mock" : "", ctx);
  c.decode.temperature = get_or(j, "temperature", 0.0, ctx);
  c.decode.max_output_tokens = get_or(j, "max_output_tokens", 512, ctx);
  c.answer_decode.temperature = c.decode.temperature;
  c.answer_decode.max_output_tokens = get_or(j, "answer_max_output_tokens", 128, ctx);
  c.timeout_ms = get_or(j, "timeout_ms", 60000, ctx);
  c.max_retries = get_or(j, "max_retries", spec.kind == "mock" ? 0 : 5, ctx);
  c.auth_env_var = get_or<std::string>(j, "auth_env_var", "", ctx);
  if (const auto it = j.find("system_message"); it != j.end() && !it->is_null()) {
    c.system_message = require<std::string>(j, "system_message", ctx);
  }
  spec.cache = get_or(j, "cache", true, ctx);
  spec.simulated_latency_ms = get_or<std::int64_t>(j, "simulated_latency_ms", 0, ctx);

  if (c.decode.temperature < 0) config_error(ctx + ".temperature", "must be non-negative");
  if (c.decode.max_output_tokens <= 0 || c.answer_decode.max_output_tokens <= 0) {
    config_error(ctx + ".max_output_tokens", "must be positive");
  }
  if (c.timeout_ms <= 0) config_error(ctx + ".timeout_ms", "must be positive");
  if (c.max_retries < 0) config_error(ctx + ".max_retries", "must be non-negative");

  if (spec.kind == "mock") {
    if (const auto it = j.find("script"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) config_error(ctx + ".script", "must be a list");
      for (const auto& entry : *it) spec.script.push_back(parse_script_entry(entry));
    }
    if (const auto it = j.find("script_path"); it != j.end() && !it->is_null()) {
      auto more = load_script_file(resolve(base_dir, it->get<std::string>()), ctx + ".script_path");
      spec.script.insert(spec.script.end(), more.begin(), more.end());
    }
  } else {
    if (c.endpoint_url.empty()) config_error(ctx + ".endpoint_url", "is required");
    if (c.model_name.empty()) config_error(ctx + ".model_name", "is required");
  }
  return spec;
}

json backend_spec_to_json(const BackendSpec& spec) {
  const BackendConfig& c = spec.config;
  json j = {{"backend_id", c.backend_id},
            {"kind", spec.kind},
            {"endpoint_url", c.endpoint_url},
            {"model_name", c.model_name},
            {"temperature", c.decode.temperature},
            {"max_output_tokens", c.decode.max_output_tokens},
            {"answer_max_output_tokens", c.answer_decode.max_output_tokens},
            {"timeout_ms", c.timeout_ms},
            {"max_retries", c.max_retries},
            {"auth_env_var", c.auth_env_var},
            {"cache", spec.cache}};
  j["system_message"] = c.system_message ? json(*c.system_message) : json(nullptr);
  if (spec.kind == "mock") {
    json script = json::array();
    for (const auto& e : spec.script) script.push_back(script_entry_to_json(e));
    j["script"] = std::move(script);
  }
  return j;
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) config_error("config", "must be a JSON object");
  RunConfig cfg;

  cfg.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "runs", "config"));
  if (const auto it = j.find("cache_dir"); it != j.end() && !it->is_null()) {
    cfg.cache_dir = resolve(base_dir, it->get<std::string>());
  }
  cfg.worker_limit = get_or(j, "worker_limit", 1, "config");
  if (cfg.worker_limit < 1) config_error("config.worker_limit", "must be positive");

  const auto datasets = j.find("datasets");
  if (datasets == j.end() || !datasets->is_array() || datasets->empty()) {
    config_error("config.datasets", "needs at least one dataset");
  }
  std::set<std::string> names;
  for (const auto& d : *datasets) {
    DatasetManifest m;
    m.name = require<std::string>(d, "name", "datasets");
    const std::string ctx = "datasets[" + m.name + "]";
    if (!names.insert(m.name).second) config_error(ctx, "duplicate dataset name");
    try {
      m.task_kind = parse_task_kind(get_or<std::string>(d, "task_kind", "retrieval_qa", ctx));
      m.format = get_or<std::string>(d, "format", "canonical", ctx);
      m.fields = FieldMapping::preset(m.format);
    } catch (const Error& e) {
      config_error(ctx, e.what());
    }
    if (const auto f = d.find("fields"); f != d.end() && !f->is_null()) m.fields = parse_fields(*f, m.fields, ctx + ".fields");
    m.path = require<std::string>(d, "path", ctx);
    m.resolved_path = resolve(base_dir, m.path);
    m.sample_seed = get_or<std::uint64_t>(d, "sample_seed", 0, ctx);
    if (const auto s = d.find("sample_size"); s != d.end() && !s->is_null()) {
      const auto n = get_or<long long>(d, "sample_size", 0, ctx);
      if (n <= 0) config_error(ctx + ".sample_size", "must be positive");
      m.sample_size = static_cast<std::size_t>(n);
    }
    cfg.datasets.push_back(std::move(m));
  }

  const auto backends = j.find("backends");
  if (backends == j.end() || !backends->is_array() || backends->empty()) {
    config_error("config.backends", "needs at least one backend");
  }
  std::set<std::string> ids;
  for (const auto& b : *backends) {
    BackendSpec spec = parse_backend_spec(b, base_dir);
    if (!ids.insert(spec.config.backend_id).second) config_error("backends[" + spec.config.backend_id + "]", "duplicate id");
    cfg.backends.push_back(std::move(spec));
  }

  if (const auto it = j.find("strategies"); it != j.end() && !it->is_null()) {
    cfg.strategies.clear();
    for (const auto& name : get_or(j, "strategies", std::vector<std::string>{}, "config")) {
      try {
        cfg.strategies.push_back(parse_strategy(name));
      } catch (const Error& e) {
        config_error("config.strategies", e.what());
      }
    }
  }
  if (cfg.strategies.empty()) config_error("config.strategies", "needs at least one strategy");

  cfg.trigger_ids = get_or(j, "trigger_ids", cfg.trigger_ids, "config");
  if (cfg.trigger_ids.empty()) config_error("config.trigger_ids", "needs at least one trigger id");
  for (const int id : cfg.trigger_ids) {
    if (id < 1 || id > static_cast<int>(trigger_catalog().size())) {
      config_error("config.trigger_ids", "id " + std::to_string(id) + " is not in the catalog");
    }
  }
  if (const auto it = j.find("position_indices"); it != j.end() && !it->is_null()) {
    cfg.position_indices = get_or(j, "position_indices", std::vector<int>{}, "config");
    for (const int p : *cfg.position_indices) {
      if (p < 0) config_error("config.position_indices", "positions must be non-negative");
    }
  }

  if (const auto p = j.find("prompts"); p != j.end() && !p->is_null()) {
    const std::string ctx = "config.prompts";
    PromptSettings& s = cfg.prompts;
    s.qa_instruction = get_or(*p, "qa_instruction", s.qa_instruction, ctx);
    s.mtcr_instruction = get_or(*p, "mtcr_instruction", s.mtcr_instruction, ctx);
    s.passage_prefix_format = get_or(*p, "passage_prefix_format", s.passage_prefix_format, ctx);
    s.joiner = get_or(*p, "joiner", s.joiner, ctx);
    s.cot.text = get_or(*p, "cot_trigger", s.cot.text, ctx);
    s.answer_trigger.text = get_or(*p, "answer_trigger", s.answer_trigger.text, ctx);
    if (s.cot.text.empty()) config_error(ctx + ".cot_trigger", "must be non-empty");
    if (s.answer_trigger.text.empty()) config_error(ctx + ".answer_trigger", "must be non-empty");
  }
  if (const auto e = j.find("em"); e != j.end() && !e->is_null()) {
    cfg.em.strip_articles = get_or(*e, "strip_articles", true, "config.em");
  }
  if (const auto jd = j.find("judge"); jd != j.end() && !jd->is_null()) {
    JudgeConfig judge;
    judge.backend = parse_backend_spec(require<json>(*jd, "backend", "config.judge"), base_dir);
    if (const auto t = jd->find("template_path"); t != jd->end() && !t->is_null()) {
      judge.template_text = read_text_file(resolve(base_dir, t->get<std::string>()), "config.judge.template_path");
    }
    judge.template_text = get_or(*jd, "template", judge.template_text, "config.judge");
    judge.scale.min = get_or(*jd, "scale_min", judge.scale.min, "config.judge");
    judge.scale.max = get_or(*jd, "scale_max", judge.scale.max, "config.judge");
    if (judge.scale.min >= judge.scale.max) config_error("config.judge", "scale_min must be below scale_max");
    cfg.judge = std::move(judge);
  }
  if (const auto c = j.find("mtcr_construction"); c != j.end() && !c->is_null()) {
    const std::string ctx = "config.mtcr_construction";
    if (const auto t = c->find("stage1_path"); t != c->end()) cfg.construction.stage1 = read_text_file(resolve(base_dir, t->get<std::string>()), ctx);
    if (const auto t = c->find("stage2_path"); t != c->end()) cfg.construction.stage2 = read_text_file(resolve(base_dir, t->get<std::string>()), ctx);
    cfg.construction.stage1 = get_or(*c, "stage1", cfg.construction.stage1, ctx);
    cfg.construction.stage2 = get_or(*c, "stage2", cfg.construction.stage2, ctx);
  }
  if (const auto s = j.find("screening"); s != j.end() && !s->is_null()) {
    cfg.screening.leakage_threshold = get_or(*s, "leakage_threshold", cfg.screening.leakage_threshold, "config.screening");
    cfg.screening.relevance_window = get_or(*s, "relevance_window", cfg.screening.relevance_window, "config.screening");
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfig, path.string() + " is not valid JSON");
  return parse_run_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json RunConfig::canonical_json() const {
  json j = json::object();
  json ds = json::array();
  for (const auto& d : datasets) {
    json entry = {{"name", d.name},
                  {"task_kind", to_string(d.task_kind)},
                  {"path", d.path},
                  {"fields", fields_to_json(d.fields)},
                  {"sample_seed", d.sample_seed}};
    entry["sample_size"] = d.sample_size ? json(*d.sample_size) : json(nullptr);
    ds.push_back(std::move(entry));
  }
  j["datasets"] = std::move(ds);
  json bs = json::array();
  for (const auto& b : backends) bs.push_back(backend_spec_to_json(b));
  j["backends"] = std::move(bs);
  json ss = json::array();
  for (const auto s : strategies) ss.push_back(to_string(s));
  j["strategies"] = std::move(ss);
  j["trigger_ids"] = trigger_ids;
  j["position_indices"] = position_indices ? json(*position_indices) : json(nullptr);
  j["prompts"] = {{"qa_instruction", prompts.qa_instruction},
                  {"mtcr_instruction", prompts.mtcr_instruction},
                  {"passage_prefix_format", prompts.passage_prefix_format},
                  {"joiner", prompts.joiner},
                  {"cot_trigger", prompts.cot.text},
                  {"answer_trigger", prompts.answer_trigger.text}};
  j["em"] = {{"strip_articles", em.strip_articles}};
  if (judge) {
    j["judge"] = {{"backend", backend_spec_to_json(judge->backend)},
                  {"template", judge->template_text},
                  {"scale_min", judge->scale.min},
                  {"scale_max", judge->scale.max}};
  } else {
    j["judge"] = nullptr;
  }
  j["mtcr_construction"] = {{"stage1", construction.stage1}, {"stage2", construction.stage2}};
  j["screening"] = {{"leakage_threshold", screening.leakage_threshold},
                    {"relevance_window", screening.relevance_window}};
  return j;
}

std::string RunConfig::config_hash() const { return sha256_hex(canonical_json().dump()); }

std::string RunConfig::default_run_id() const { return "run-" + config_hash().substr(0, 12); }

const BackendSpec& RunConfig::backend(const std::string& id) const {
  for (const auto& b : backends) {
    if (b.config.backend_id == id) return b;
  }
  throw Error(ErrorCode::kConfig, "no backend with id '" + id + "'");
}

}  // namespace thot
