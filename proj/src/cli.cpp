#include "thot/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "thot/config.hpp"
#include "thot/corpus.hpp"
#include "thot/errors.hpp"
#include "thot/ledger.hpp"
#include "thot/metrics.hpp"
#include "thot/report.hpp"
#include "thot/trigger_catalog.hpp"

namespace thot {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand. Values given here win over the config file.
struct CommonFlags {
  std::string config;
  std::string output_dir;
  std::vector<std::string> backends;
  std::vector<std::string> strategies;
  std::vector<int> trigger_ids;
  std::string positions;
  bool dry_run = false;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config, "Run config (JSON)");
  cmd.add_option("--output-dir", f.output_dir, "Output directory; overrides output_dir in the config");
  cmd.add_option("--backend", f.backends, "Only use these backend ids (repeatable)");
  cmd.add_option("--strategy", f.strategies, "vanilla, retrieval, cot or thot (repeatable)");
  cmd.add_option("--trigger-id", f.trigger_ids, "ThoT trigger ids from the catalog (repeatable)");
  cmd.add_option("--positions", f.positions, "Comma-separated gold passage indices, e.g. 0,4,9");
  cmd.add_flag("--dry-run", f.dry_run, "Render prompts to prompts.jsonl without calling any backend");
  cmd.add_option("--resume", f.resume, "Continue the run with this id");
  cmd.add_option("--seed", f.seed, "Sampling seed for every dataset");
  cmd.add_option("--workers", f.workers, "Concurrent record pipelines")->check(CLI::PositiveNumber);
}

std::vector<int> parse_positions(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item.empty()) continue;
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || value < 0) throw UsageError("--positions: '" + item + "' is not a non-negative integer");
    out.push_back(value);
  }
  if (out.empty()) throw UsageError("--positions: empty list");
  return out;
}

RunConfig load_config(const CommonFlags& f) {
  if (f.config.empty()) throw UsageError("--config is required");
  RunConfig cfg = load_run_config(f.config);
  if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
  if (!f.backends.empty()) {
    std::vector<BackendSpec> kept;
    for (const auto& id : f.backends) kept.push_back(cfg.backend(id));
    cfg.backends = std::move(kept);
  }
  if (!f.strategies.empty()) {
    cfg.strategies.clear();
    for (const auto& s : f.strategies) {
      try {
        cfg.strategies.push_back(parse_strategy(s));
      } catch (const Error& e) {
        throw UsageError(std::string("--strategy: ") + e.what());
      }
    }
  }
  if (!f.trigger_ids.empty()) {
    for (const int id : f.trigger_ids) {
      if (id < 1 || id > static_cast<int>(trigger_catalog().size())) {
        throw UsageError(fmt::format("--trigger-id: {} is not in the catalog (1-{})", id, trigger_catalog().size()));
      }
    }
    cfg.trigger_ids = f.trigger_ids;
  }
  if (!f.positions.empty()) cfg.position_indices = parse_positions(f.positions);
  if (f.seed) {
    for (auto& d : cfg.datasets) d.sample_seed = *f.seed;
  }
  if (f.workers) cfg.worker_limit = *f.workers;
  return cfg;
}

RunOptions run_options(const CommonFlags& f, const CliEnv& env, std::ostream& err) {
  RunOptions o;
  if (!f.resume.empty()) {
    o.run_id = f.resume;
    o.require_existing = true;
  }
  o.dry_run = f.dry_run;
  o.clock = env.clock;
  o.backend_factory = env.backend_factory ? env.backend_factory : default_backend_factory(env.transport);
  o.log = &err;
  return o;
}

void print_summary(const RunSummary& s, std::ostream& out) {
  out << fmt::format("run {} in {}\n", s.run_id, s.run_dir.string());
  out << fmt::format("cells: {} total, {} already done, {} run, {} failed, {} skipped\n", s.stats.cells_total,
                     s.stats.cells_done_before, s.stats.cells_run, s.stats.failed, s.stats.skipped);
  out << fmt::format("backend calls: {} issued, {} upstream, {} cache hits\n", s.stats.prompts_sent,
                     s.stats.upstream_calls, s.stats.cache_hits);
  if (s.stats.interrupted) out << "run stopped before all cells were done; rerun to continue\n";
}

void print_report_file(const RunSummary& s, std::ostream& out) {
  std::ifstream in(s.run_dir / "report.md");
  if (in) out << "\n" << in.rdbuf();
}

int cmd_run(const CommonFlags& f, const CliEnv& env, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(f);
  const RunSummary s = run_experiment(cfg, run_options(f, env, err));
  if (f.dry_run) {
    out << fmt::format("dry run {}: prompts written to {}\n", s.run_id, (s.run_dir / "prompts.jsonl").string());
    return 0;
  }
  print_summary(s, out);
  print_report_file(s, out);
  return 0;
}

int cmd_sweep_triggers(const CommonFlags& f, const CliEnv& env, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(f);
  std::vector<TriggerSentence> triggers;
  if (f.trigger_ids.empty()) {
    triggers = trigger_catalog();
  } else {
    for (const int id : f.trigger_ids) triggers.push_back(catalog_trigger(id));
  }
  const SweepResult r = sweep_triggers(cfg, triggers, run_options(f, env, err));
  if (f.dry_run) {
    out << fmt::format("dry run {}: prompts written to {}\n", r.run.run_id, (r.run.run_dir / "prompts.jsonl").string());
    return 0;
  }
  print_summary(r.run, out);
  out << "\n" << r.table.markdown;
  return 0;
}

int cmd_sweep_positions(const CommonFlags& f, const CliEnv& env, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(f);
  if (!cfg.position_indices) throw UsageError("sweep-positions needs --positions or position_indices in the config");
  const std::vector<int> indices = *cfg.position_indices;
  const SweepResult r = sweep_positions(cfg, indices, run_options(f, env, err));
  if (f.dry_run) {
    out << fmt::format("dry run {}: prompts written to {}\n", r.run.run_id, (r.run.run_dir / "prompts.jsonl").string());
    return 0;
  }
  print_summary(r.run, out);
  out << "\n" << r.table.markdown;
  return 0;
}

int cmd_build_mtcr(const CommonFlags& f, const std::string& input, std::string output, const CliEnv& env,
                   std::ostream& out) {
  const RunConfig cfg = load_config(f);
  if (cfg.backends.empty()) throw Error(ErrorCode::kConfig, "no backend to build with");
  const auto conversations = load_conversation_dataset(input, false);
  if (f.dry_run) {
    out << fmt::format("dry run: {} conversations, {} construction calls\n", conversations.size(),
                       2 * conversations.size());
    return 0;
  }
  const BackendFactory factory = env.backend_factory ? env.backend_factory : default_backend_factory(env.transport);
  const BackendSpec& spec = cfg.backends.front();
  std::shared_ptr<Backend> backend = factory(spec);
  if (spec.cache) {
    backend = std::make_shared<CachingBackend>(backend, cfg.cache_dir.value_or(cfg.output_dir / "cache") /
                                                            spec.config.backend_id);
  }
  const MtcrBuildResult built = build_mtcr_dataset(conversations, *backend, cfg.construction, cfg.screening);
  if (output.empty()) output = (cfg.output_dir / "mtcr.jsonl").string();
  std::filesystem::create_directories(std::filesystem::absolute(output).parent_path());
  std::ofstream file(output, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + output);
  write_conversation_dataset(file, built.accepted);
  out << fmt::format("{} accepted, {} rejected, written to {}\n", built.accepted.size(), built.rejected.size(), output);
  for (const auto& [record, verdict] : built.rejected) {
    out << fmt::format("  {}: {} ({})\n", record.record_id, to_string(verdict.kind), verdict.reason);
  }
  return 0;
}

int cmd_score(const std::string& prediction, const std::vector<std::string>& gold, bool keep_articles,
              const std::string& judge_text, std::ostream& out) {
  if (!judge_text.empty()) {
    const JudgeScores s = parse_judge_scores(judge_text);
    out << fmt::format("relevance {} accuracy {} persona {} average {}\n", format_score(s.relevance),
                       format_score(s.accuracy), format_score(s.persona), format_score(s.average));
    return 0;
  }
  if (gold.empty()) throw UsageError("score needs --gold (repeatable) or --judge-text");
  EmOptions opts;
  opts.strip_articles = !keep_articles;
  out << fmt::format("em {}\nprediction: {}\n", exact_match(prediction, gold, opts), normalize_answer(prediction, opts));
  for (const auto& g : gold) out << "gold: " << normalize_answer(g, opts) << "\n";
  return 0;
}

int cmd_report(const CommonFlags& f, const std::string& ledger_path, const std::string& shape, bool csv,
               std::ostream& out) {
  std::filesystem::path path = ledger_path;
  if (path.empty()) {
    const RunConfig cfg = load_config(f);
    const std::string run_id = f.resume.empty() ? cfg.default_run_id() : f.resume;
    path = cfg.output_dir / run_id / "ledger.jsonl";
  }
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kConfig, "no ledger at " + path.string());
  const auto contents = read_ledger(path);
  RenderedReport r;
  if (shape == "all") {
    r = render_all_reports(contents.entries);
  } else {
    const ReportShape s = shape == "methods"    ? ReportShape::kMethods
                          : shape == "triggers" ? ReportShape::kTriggers
                                                : ReportShape::kPositions;
    r = report(contents.entries, s);
  }
  out << (csv ? r.csv : r.markdown);
  return 0;
}

int cmd_catalog(std::ostream& out) {
  for (const auto& t : trigger_catalog()) {
    out << fmt::format("{:>2}  {}  {}\n", t.id, t.reference_em ? fmt::format("{:.2f}", *t.reference_em) : "-", t.text);
  }
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliEnv& env) {
  CLI::App app{"Prompting experiments over chaotic contexts", "thot"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  CommonFlags flags;
  auto* run = app.add_subcommand("run", "Run every configured cell and write the ledger and reports");
  auto* sweep_t = app.add_subcommand("sweep-triggers", "ThoT over catalog triggers (all 30 unless --trigger-id)");
  auto* sweep_p = app.add_subcommand("sweep-positions", "Move the gold passage to each of --positions");
  auto* build = app.add_subcommand("build-mtcr", "Generate and screen conversation responses");
  auto* score = app.add_subcommand("score", "Exact match of one prediction, or parse one judge output");
  auto* rep = app.add_subcommand("report", "Render tables from a ledger");
  auto* cat = app.add_subcommand("catalog", "List the trigger catalog with reference EM");
  for (auto* cmd : {run, sweep_t, sweep_p, build, score, rep, cat}) add_common(*cmd, flags);

  std::string mtcr_input, mtcr_output;
  build->add_option("--input", mtcr_input, "Conversations (JSONL)")->required();
  build->add_option("--out", mtcr_output, "Accepted records (default <output-dir>/mtcr.jsonl)");

  std::string prediction, judge_text;
  std::vector<std::string> gold;
  bool keep_articles = false;
  score->add_option("--prediction", prediction, "Model answer");
  score->add_option("--gold", gold, "Gold alias (repeatable)");
  score->add_flag("--keep-articles", keep_articles, "Do not drop a/an/the before matching");
  score->add_option("--judge-text", judge_text, "Judge output to parse instead");

  std::string ledger_path, shape = "all";
  bool csv = false;
  rep->add_option("--ledger", ledger_path, "Ledger file (default: the config's run)");
  rep->add_option("--shape", shape, "methods, triggers, positions or all")
      ->check(CLI::IsMember({"methods", "triggers", "positions", "all"}));
  rep->add_flag("--csv", csv, "Print CSV instead of markdown");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run) return cmd_run(flags, env, out, err);
    if (*sweep_t) return cmd_sweep_triggers(flags, env, out, err);
    if (*sweep_p) return cmd_sweep_positions(flags, env, out, err);
    if (*build) return cmd_build_mtcr(flags, mtcr_input, mtcr_output, env, out);
    if (*score) return cmd_score(prediction, gold, keep_articles, judge_text, out);
    if (*rep) return cmd_report(flags, ledger_path, shape, csv, out);
    if (*cat) return cmd_catalog(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace thot
