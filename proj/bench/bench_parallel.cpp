// Serial reference vs OpenMP paths: batch EM scoring and record dispatch.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <omp.h>

#include "CLI11.hpp"
#include "thot/corpus.hpp"
#include "thot/metrics.hpp"
#include "thot/runner.hpp"

namespace {

template <typename F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<std::string> kWords{"the", "red", "hearts", "garage", "punk", "band", "los", "angeles",
                                      "Formed", "in", "2004,", "music", "jazz!", "a", "an", "pop"};

std::string sentence(std::mt19937& rng, int len) {
  std::string s;
  for (int i = 0; i < len; ++i) {
    if (i) s += ' ';
    s += kWords[rng() % kWords.size()];
  }
  return s;
}

void bench_em(std::size_t n, int threads) {
  std::mt19937 rng(7);
  std::vector<std::string> preds;
  std::vector<std::vector<std::string>> gold;
  for (std::size_t i = 0; i < n; ++i) {
    preds.push_back(sentence(rng, 12 + static_cast<int>(rng() % 20)));
    gold.push_back({sentence(rng, 1 + static_cast<int>(rng() % 2)), sentence(rng, 2)});
  }
  std::vector<int> serial, parallel;
  const double ts = time_ms([&] { serial = thot::score_em_batch_serial(preds, gold); });
  const double tp = time_ms([&] { parallel = thot::score_em_batch(preds, gold, {}, threads); });
  fmt::print("em_batch      n={:<6} serial {:8.1f} ms   omp({}) {:8.1f} ms   speedup {:5.2f}  {}\n", n, ts, threads, tp,
             ts / tp, serial == parallel ? "match" : "MISMATCH");
}

void bench_dispatch(std::size_t records, int latency_ms, int workers) {
  const auto dir = std::filesystem::temp_directory_path() / fmt::format("thot_bench_{}", ::getpid());
  std::filesystem::create_directories(dir);
  std::vector<thot::QARecord> qa;
  for (std::size_t i = 0; i < records; ++i) {
    thot::QARecord r;
    r.record_id = fmt::format("b{}", i);
    r.question = thot::Query(fmt::format("Which band is number {}?", i));
    r.gold_aliases = {"band"};
    r.context = thot::ChaoticContext({{"p1", "a band", true}, {"p2", "noise", false}});
    qa.push_back(std::move(r));
  }
  {
    std::ofstream out(dir / "data.jsonl");
    thot::write_qa_dataset(out, qa);
  }
  thot::RunConfig cfg;
  thot::DatasetManifest m;
  m.name = "bench";
  m.path = (dir / "data.jsonl").string();
  m.resolved_path = dir / "data.jsonl";
  cfg.datasets = {m};
  thot::BackendSpec spec;
  spec.kind = "mock";
  spec.config = thot::MockBackend::default_config();
  spec.cache = false;
  spec.simulated_latency_ms = latency_ms;
  spec.script = {{{}, "the band"}};
  cfg.backends = {spec};

  std::vector<double> times;
  std::vector<std::string> ledgers;
  for (const int w : {1, workers}) {
    cfg.worker_limit = w;
    cfg.output_dir = dir / fmt::format("w{}", w);
    thot::RunOptions opts;
    opts.clock = [] { return std::int64_t{0}; };
    thot::RunSummary s;
    times.push_back(time_ms([&] { s = thot::run_experiment(cfg, opts); }));
    std::ifstream in(s.ledger_path);
    ledgers.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fmt::print("dispatch      cells={:<4} latency {} ms   serial {:8.1f} ms   omp({}) {:8.1f} ms   speedup {:5.2f}  {}\n",
             records * 4, latency_ms, times[0], workers, times[1], times[0] / times[1],
             ledgers[0] == ledgers[1] ? "identical ledgers" : "LEDGERS DIFFER");
  std::filesystem::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP benchmarks"};
  std::size_t em_cases = 20000;
  std::size_t records = 20;
  int latency = 5;
  int threads = std::max(4, omp_get_max_threads());
  app.add_option("--em-cases", em_cases);
  app.add_option("--records", records);
  app.add_option("--latency-ms", latency);
  app.add_option("--threads", threads);
  CLI11_PARSE(app, argc, argv);

  fmt::print("hardware threads: {}\n", omp_get_num_procs());
  bench_em(em_cases, threads);
  bench_dispatch(records, latency, threads);
  return 0;
}
