#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thot/backend.hpp"
#include "thot/corpus.hpp"
#include "thot/metrics.hpp"
#include "thot/prompt_engine.hpp"
#include "thot/serialization.hpp"

namespace thot {

struct DatasetManifest {
  std::string name;
  TaskKind task_kind = TaskKind::kRetrievalQA;
  std::string path;                     // as written in the config
  std::filesystem::path resolved_path;  // relative to the config file
  std::string format = "canonical";     // field mapping preset
  FieldMapping fields;
  std::size_t record_count = 0;         // filled in after loading
  std::uint64_t sample_seed = 0;
  std::optional<std::size_t> sample_size;
};

struct BackendSpec {
  std::string kind = "chat_completions";  // or "mock"
  BackendConfig config;
  std::vector<ScriptEntry> script;        // mock only
  std::int64_t simulated_latency_ms = 0;  // mock only
  bool cache = true;
};

struct JudgeConfig {
  BackendSpec backend;
  std::string template_text{default_judge_template()};
  JudgeScale scale;
};

struct RunConfig {
  std::vector<DatasetManifest> datasets;
  std::vector<BackendSpec> backends;
  std::vector<Strategy> strategies{Strategy::kVanilla, Strategy::kRetrieval, Strategy::kCoT, Strategy::kThoT};
  std::vector<int> trigger_ids{30};
  std::optional<std::vector<int>> position_indices;
  int worker_limit = 1;
  std::filesystem::path output_dir = "runs";
  std::optional<std::filesystem::path> cache_dir;
  PromptSettings prompts;
  EmOptions em;
  std::optional<JudgeConfig> judge;
  ConstructionPrompts construction = ConstructionPrompts::defaults();
  ScreenOptions screening;

  // Everything that can change results. output_dir, cache_dir and
  // worker_limit are left out so relocating or re-parallelising a run keeps
  // its identity.
  json canonical_json() const;
  std::string config_hash() const;
  std::string default_run_id() const;
  const BackendSpec& backend(const std::string& id) const;
};

// Throws Error(kConfig) with a field path on any invalid or missing value.
RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

json backend_spec_to_json(const BackendSpec& spec);
BackendSpec parse_backend_spec(const json& j, const std::filesystem::path& base_dir);

ScriptEntry parse_script_entry(const json& j);
json script_entry_to_json(const ScriptEntry& entry);

}  // namespace thot
