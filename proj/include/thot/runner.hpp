#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thot/backend.hpp"
#include "thot/config.hpp"
#include "thot/domain.hpp"
#include "thot/report.hpp"

namespace thot {

// Milliseconds since the epoch. Injected so ledgers can be made reproducible.
using Clock = std::function<std::int64_t()>;
Clock system_clock_ms();

// Scoring and prompt settings for one cell. judge may be null, in which case
// MTCR cells are recorded without scores.
struct CellSettings {
  PromptSettings prompts;
  EmOptions em;
  Backend* judge = nullptr;
  std::string judge_template{default_judge_template()};
  JudgeScale judge_scale;
  Clock clock;
};

// One record through one strategy. Two-step strategies make two sequential
// calls; the others one, whose text is the answer. Backend and judge errors
// are caught and recorded as a failed outcome. The key's dataset and
// position are left for the caller.
RecordOutcome run_record(const Record& record, Strategy strategy, std::optional<int> trigger_id, Backend& backend,
                         const CellSettings& settings = {});

using BackendFactory = std::function<std::shared_ptr<Backend>(const BackendSpec&)>;

// Mock specs become MockBackend; chat_completions specs use the transport
// (an HttpTransport when null).
BackendFactory default_backend_factory(std::shared_ptr<Transport> transport = nullptr);

struct RunOptions {
  std::optional<std::string> run_id;         // default: config.default_run_id()
  bool require_existing = false;             // resume: the ledger must already exist
  bool dry_run = false;                      // write prompts.jsonl only
  std::optional<std::size_t> stop_after_cells;  // simulated interruption
  Clock clock;                               // default: system clock
  BackendFactory backend_factory;            // default: default_backend_factory()
  std::ostream* log = nullptr;
};

struct RunStats {
  std::size_t cells_total = 0;
  std::size_t cells_done_before = 0;  // already in the ledger when the run started
  std::size_t cells_run = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t prompts_sent = 0;     // calls issued by the cells run
  std::size_t upstream_calls = 0;   // calls that reached the backend (cache misses)
  std::size_t cache_hits = 0;
  bool interrupted = false;
};

struct RunSummary {
  std::string run_id;
  std::filesystem::path run_dir;
  std::filesystem::path ledger_path;
  std::vector<RecordOutcome> outcomes;  // whole ledger after the run
  RunStats stats;
};

// Cells run in order dataset, backend, record, strategy, trigger, position;
// cells already present in the ledger are skipped. Results are appended in
// chunks of at least ten and fsynced per chunk.
// Files: output_dir/run_id/{ledger.jsonl, report.md, report.csv, prompts.jsonl}.
// Responses are cached under cache_dir (default output_dir/cache).
// Only configuration problems throw (kConfig and loader errors).
RunSummary run_experiment(const RunConfig& config, const RunOptions& options = {});

struct SweepResult {
  RunSummary run;
  RenderedReport table;
};

// ThoT over every given trigger; QA datasets only.
SweepResult sweep_triggers(RunConfig config, std::span<const TriggerSentence> catalog, const RunOptions& options = {});

// Every record with its gold passage moved to each index in turn. Records
// without a single gold passage, or too short for an index, are skipped.
SweepResult sweep_positions(RunConfig config, std::span<const int> indices, const RunOptions& options = {});

}  // namespace thot
