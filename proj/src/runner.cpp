#include "thot/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "thot/corpus.hpp"
#include "thot/errors.hpp"
#include "thot/http_transport.hpp"
#include "thot/ledger.hpp"
#include "thot/metrics.hpp"
#include "thot/prompt_engine.hpp"
#include "thot/serialization.hpp"
#include "thot/trigger_catalog.hpp"

namespace thot {
namespace {

// Counts calls that reach the real backend, below any cache.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  const BackendConfig& config() const override { return inner_->config(); }
  RawCompletion complete_raw(const PromptBundle& prompt) override {
    ++calls_;
    return inner_->complete_raw(prompt);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<std::size_t> calls_{0};
};

struct LiveBackend {
  std::shared_ptr<CountingBackend> counter;
  std::shared_ptr<CachingBackend> cache;  // null when caching is off
  Backend& top() const { return cache ? static_cast<Backend&>(*cache) : static_cast<Backend&>(*counter); }
};

LiveBackend make_backend(const BackendSpec& spec, const BackendFactory& factory, const std::filesystem::path& cache_root) {
  LiveBackend b;
  b.counter = std::make_shared<CountingBackend>(factory(spec));
  if (spec.cache) b.cache = std::make_shared<CachingBackend>(b.counter, cache_root / spec.config.backend_id);
  return b;
}

struct LoadedDataset {
  const DatasetManifest* manifest = nullptr;
  std::vector<Record> records;
};

LoadedDataset load_dataset(const DatasetManifest& m) {
  LoadedDataset out;
  out.manifest = &m;
  if (m.task_kind == TaskKind::kRetrievalQA) {
    auto all = load_qa_dataset(m.resolved_path, m.fields);
    if (m.sample_size) all = sample_test_set<QARecord>(all, *m.sample_size, m.sample_seed);
    for (auto& r : all) out.records.emplace_back(std::move(r));
  } else {
    auto all = load_conversation_dataset(m.resolved_path);
    if (m.sample_size) all = sample_test_set<ConversationRecord>(all, *m.sample_size, m.sample_seed);
    for (auto& r : all) out.records.emplace_back(std::move(r));
  }
  return out;
}

struct Cell {
  std::size_t dataset = 0;
  std::size_t backend = 0;
  std::size_t record = 0;
  CellKey key;
};

std::vector<Cell> enumerate_cells(const RunConfig& config, const std::vector<LoadedDataset>& datasets) {
  std::vector<std::optional<int>> positions{std::nullopt};
  if (config.position_indices) {
    positions.clear();
    for (const int p : *config.position_indices) positions.emplace_back(p);
  }
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto task = datasets[d].manifest->task_kind;
    for (std::size_t b = 0; b < config.backends.size(); ++b) {
      for (std::size_t r = 0; r < datasets[d].records.size(); ++r) {
        for (const Strategy s : config.strategies) {
          if (task == TaskKind::kMTCR && s == Strategy::kRetrieval) continue;
          std::vector<std::optional<int>> triggers{std::nullopt};
          if (s == Strategy::kThoT) triggers.assign(config.trigger_ids.begin(), config.trigger_ids.end());
          for (const auto& t : triggers) {
            for (const auto& p : positions) {
              Cell c{d, b, r, {}};
              c.key.dataset = datasets[d].manifest->name;
              c.key.backend_id = config.backends[b].config.backend_id;
              c.key.record_id = record_id_of(datasets[d].records[r]);
              c.key.strategy = s;
              c.key.trigger_id = t;
              c.key.position_index = p;
              cells.push_back(std::move(c));
            }
          }
        }
      }
    }
  }
  return cells;
}

void check_position_sweep(const RunConfig& config, const std::vector<LoadedDataset>& datasets) {
  if (!config.position_indices) return;
  for (const auto& d : datasets) {
    if (d.manifest->task_kind != TaskKind::kRetrievalQA) {
      throw Error(ErrorCode::kConfig, "position sweeps need QA datasets; '" + d.manifest->name + "' is MTCR");
    }
    const bool any_gold = std::any_of(d.records.begin(), d.records.end(), [](const Record& r) {
      return std::get<QARecord>(r).context.gold_count() > 0;
    });
    if (!any_gold) {
      throw Error(ErrorCode::kConfig, "position sweeps need gold-marked passages; '" + d.manifest->name + "' has none");
    }
  }
}

// The record as dispatched for a cell, or the reason the cell is skipped.
std::variant<Record, std::string> prepare_record(const Record& record, const CellKey& key) {
  if (!key.position_index) return record;
  try {
    return Record{place_gold_at(std::get<QARecord>(record), static_cast<std::size_t>(*key.position_index))};
  } catch (const Error& e) {
    return std::string(e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp);
    out << content;
    if (!out) throw Error(ErrorCode::kIo, "short write on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

json key_json(const CellKey& key) {
  json j;
  to_json(j, key);
  return j;
}

}  // namespace

Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

RecordOutcome run_record(const Record& record, Strategy strategy, std::optional<int> trigger_id, Backend& backend,
                         const CellSettings& settings) {
  RecordOutcome out;
  out.key.record_id = record_id_of(record);
  out.key.backend_id = backend.id();
  out.key.strategy = strategy;
  if (strategy == Strategy::kThoT) out.key.trigger_id = trigger_id.value_or(kThoTTriggerId);
  out.task = task_kind_of(record);
  const Clock clock = settings.clock ? settings.clock : system_clock_ms();
  out.started_at_ms = clock();

  try {
    const PromptBundle first = render_strategy(strategy, out.task, record, out.key.trigger_id, settings.prompts);
    ++out.backend_calls;
    const CompletionResult r1 = backend.complete(first);
    out.first_response = r1.text;
    if (is_two_step(strategy)) {
      const PromptBundle second =
          build_second_prompt(first, r1, settings.prompts.answer_trigger, settings.prompts.joiner);
      ++out.backend_calls;
      out.final_answer = backend.complete(second).text;
    } else {
      out.final_answer = r1.text;
    }

    if (const auto* qa = std::get_if<QARecord>(&record)) {
      out.scores.em = exact_match(out.final_answer, qa->gold_aliases, settings.em);
    } else if (settings.judge) {
      const auto& conv = std::get<ConversationRecord>(record);
      try {
        const PromptBundle judge_prompt =
            build_judge_prompt(conv.persona, out.final_answer, settings.judge_template, strategy, conv.record_id);
        const std::string verdict = settings.judge->complete(judge_prompt).text;
        out.scores.judge = parse_judge_scores(verdict, settings.judge_scale);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnparseableJudgeOutput && e.code() != ErrorCode::kMissingResponse) throw;
        out.scores.judge_rejected = true;
        out.error = e.what();
      }
    }
  } catch (const std::exception& e) {
    out.status = OutcomeStatus::kFailed;
    out.error = e.what();
    out.scores = {};
  }
  out.finished_at_ms = clock();
  return out;
}

BackendFactory default_backend_factory(std::shared_ptr<Transport> transport) {
  return [transport](const BackendSpec& spec) -> std::shared_ptr<Backend> {
    if (spec.kind == "mock") {
      return std::make_shared<MockBackend>(spec.script, spec.config,
                                           std::chrono::milliseconds{spec.simulated_latency_ms});
    }
    if (spec.kind == "chat_completions") {
      auto t = transport ? transport : std::make_shared<HttpTransport>();
      return std::make_shared<ChatCompletionsBackend>(spec.config, std::move(t));
    }
    throw Error(ErrorCode::kConfig, "unknown backend kind '" + spec.kind + "'");
  };
}

RunSummary run_experiment(const RunConfig& config, const RunOptions& options) {
  if (config.datasets.empty()) throw Error(ErrorCode::kConfig, "no datasets configured");
  if (config.backends.empty()) throw Error(ErrorCode::kConfig, "no backends configured");

  std::vector<LoadedDataset> datasets;
  for (const auto& m : config.datasets) datasets.push_back(load_dataset(m));
  check_position_sweep(config, datasets);
  const std::vector<Cell> cells = enumerate_cells(config, datasets);

  RunSummary summary;
  summary.run_id = options.run_id.value_or(config.default_run_id());
  summary.run_dir = config.output_dir / summary.run_id;
  summary.ledger_path = summary.run_dir / "ledger.jsonl";
  summary.stats.cells_total = cells.size();
  std::filesystem::create_directories(summary.run_dir);

  const Clock clock = options.clock ? options.clock : system_clock_ms();
  const auto log = [&](const std::string& line) {
    if (options.log) *options.log << "[" << summary.run_id << "] " << line << "\n";
  };

  if (options.dry_run) {
    std::string lines;
    for (const auto& c : cells) {
      auto prepared = prepare_record(datasets[c.dataset].records[c.record], c.key);
      if (std::holds_alternative<std::string>(prepared)) {
        ++summary.stats.skipped;
        continue;
      }
      const auto& rec = std::get<Record>(prepared);
      json j = key_json(c.key);
      j["prompt"] = render_strategy(c.key.strategy, task_kind_of(rec), rec, c.key.trigger_id, config.prompts).rendered;
      lines += j.dump() + "\n";
    }
    write_file(summary.run_dir / "prompts.jsonl", lines);
    log(fmt::format("dry run: {} prompts written", cells.size() - summary.stats.skipped));
    return summary;
  }

  if (options.require_existing && !std::filesystem::exists(summary.ledger_path)) {
    throw Error(ErrorCode::kConfig, "no ledger to resume at " + summary.ledger_path.string());
  }
  RunLedger ledger = RunLedger::open(summary.ledger_path, summary.run_id, config.config_hash());

  std::vector<const Cell*> pending;
  for (const auto& c : cells) {
    if (ledger.contains(c.key)) {
      ++summary.stats.cells_done_before;
    } else {
      pending.push_back(&c);
    }
  }
  if (options.stop_after_cells && *options.stop_after_cells < pending.size()) {
    pending.resize(*options.stop_after_cells);
    summary.stats.interrupted = true;
  }

  const BackendFactory factory = options.backend_factory ? options.backend_factory : default_backend_factory();
  const std::filesystem::path cache_root = config.cache_dir.value_or(config.output_dir / "cache");
  std::vector<LiveBackend> backends;
  if (!pending.empty()) {
    for (const auto& spec : config.backends) backends.push_back(make_backend(spec, factory, cache_root));
  }
  std::optional<LiveBackend> judge;
  const bool has_mtcr = std::any_of(datasets.begin(), datasets.end(),
                                    [](const auto& d) { return d.manifest->task_kind == TaskKind::kMTCR; });
  if (config.judge && has_mtcr && !pending.empty()) judge = make_backend(config.judge->backend, factory, cache_root);

  CellSettings settings;
  settings.prompts = config.prompts;
  settings.em = config.em;
  settings.clock = clock;
  if (judge) {
    settings.judge = &judge->top();
    settings.judge_template = config.judge->template_text;
    settings.judge_scale = config.judge->scale;
  }

  const auto run_cell = [&](const Cell& c) {
    auto prepared = prepare_record(datasets[c.dataset].records[c.record], c.key);
    if (auto* reason = std::get_if<std::string>(&prepared)) {
      RecordOutcome skipped;
      skipped.key = c.key;
      skipped.task = datasets[c.dataset].manifest->task_kind;
      skipped.status = OutcomeStatus::kSkipped;
      skipped.error = *reason;
      skipped.started_at_ms = skipped.finished_at_ms = clock();
      return skipped;
    }
    RecordOutcome o =
        run_record(std::get<Record>(prepared), c.key.strategy, c.key.trigger_id, backends[c.backend].top(), settings);
    o.key = c.key;
    return o;
  };

  const int workers = std::max(1, config.worker_limit);
  const std::size_t chunk = std::max<std::size_t>(10, static_cast<std::size_t>(workers));
  for (std::size_t begin = 0; begin < pending.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, pending.size() - begin);
    std::vector<RecordOutcome> batch(n);
    if (workers == 1) {
      for (std::size_t i = 0; i < n; ++i) batch[i] = run_cell(*pending[begin + i]);
    } else {
      const long long count = static_cast<long long>(n);
#pragma omp parallel for num_threads(workers) schedule(dynamic)
      for (long long i = 0; i < count; ++i) {
        batch[static_cast<std::size_t>(i)] = run_cell(*pending[begin + static_cast<std::size_t>(i)]);
      }
    }
    ledger.append(batch);
    for (const auto& o : batch) {
      ++summary.stats.cells_run;
      summary.stats.prompts_sent += static_cast<std::size_t>(o.backend_calls);
      if (o.status == OutcomeStatus::kFailed) ++summary.stats.failed;
      if (o.status == OutcomeStatus::kSkipped) ++summary.stats.skipped;
    }
    log(fmt::format("{}/{} pending cells done", begin + n, pending.size()));
  }

  for (const auto& b : backends) {
    summary.stats.upstream_calls += b.counter->calls();
    if (b.cache) summary.stats.cache_hits += b.cache->hits();
  }

  summary.outcomes = ledger.entries();
  if (!summary.outcomes.empty()) {
    const RenderedReport rendered = render_all_reports(summary.outcomes);
    write_file(summary.run_dir / "report.md", rendered.markdown);
    write_file(summary.run_dir / "report.csv", rendered.csv);
  }
  log(fmt::format("{} cells run, {} failed, {} skipped, {} backend calls, {} cache hits{}", summary.stats.cells_run,
                  summary.stats.failed, summary.stats.skipped, summary.stats.upstream_calls, summary.stats.cache_hits,
                  summary.stats.interrupted ? " (stopped early)" : ""));
  return summary;
}

SweepResult sweep_triggers(RunConfig config, std::span<const TriggerSentence> catalog, const RunOptions& options) {
  if (catalog.empty()) throw Error(ErrorCode::kConfig, "trigger sweep needs at least one trigger");
  for (const auto& d : config.datasets) {
    if (d.task_kind != TaskKind::kRetrievalQA) {
      throw Error(ErrorCode::kConfig, "trigger sweeps need QA datasets; '" + d.name + "' is MTCR");
    }
  }
  config.strategies = {Strategy::kThoT};
  config.trigger_ids.clear();
  for (const auto& t : catalog) {
    if (t.id < 1 || t.id > static_cast<int>(trigger_catalog().size())) {
      throw Error(ErrorCode::kConfig, fmt::format("trigger id {} is not in the catalog", t.id));
    }
    config.trigger_ids.push_back(t.id);
  }
  std::sort(config.trigger_ids.begin(), config.trigger_ids.end());
  config.trigger_ids.erase(std::unique(config.trigger_ids.begin(), config.trigger_ids.end()), config.trigger_ids.end());

  SweepResult out;
  out.run = run_experiment(config, options);
  if (!out.run.outcomes.empty()) out.table = report(out.run.outcomes, ReportShape::kTriggers);
  return out;
}

SweepResult sweep_positions(RunConfig config, std::span<const int> indices, const RunOptions& options) {
  if (indices.empty()) throw Error(ErrorCode::kConfig, "position sweep needs at least one index");
  for (const int i : indices) {
    if (i < 0) throw Error(ErrorCode::kConfig, "positions must be non-negative");
  }
  config.position_indices = std::vector<int>(indices.begin(), indices.end());

  SweepResult out;
  out.run = run_experiment(config, options);
  if (!out.run.outcomes.empty()) out.table = report(out.run.outcomes, ReportShape::kPositions);
  return out;
}

}  // namespace thot
