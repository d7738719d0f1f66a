#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include "thot/cli.hpp"
#include "thot/corpus.hpp"
#include "thot/ledger.hpp"

using namespace thot;

namespace {

class CountingTransport final : public Transport {
 public:
  HttpResponse post(const std::string&, const std::string&, const HttpHeaders&, std::chrono::milliseconds) override {
    ++calls;
    return {500, ""};
  }
  std::atomic<int> calls{0};
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args, const CliEnv& env = {}) {
  std::ostringstream out, err;
  const int code = cli_run(args, out, err, env);
  return {code, out.str(), err.str()};
}

CliEnv fixed_env(std::shared_ptr<Transport> transport = nullptr) {
  CliEnv env;
  env.transport = std::move(transport);
  env.clock = [] { return std::int64_t{0}; };
  return env;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("catalog lists thirty triggers") {
  const auto r = cli({"catalog"});
  CHECK(r.code == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 30);
  CHECK(lines[29].rfind("30  0.55  Walk me through this context in manageable parts step by step", 0) == 0);
  CHECK(lines[0].rfind(" 1  0.43  ", 0) == 0);
}

TEST_CASE("usage errors exit 2, runtime errors exit 1") {
  CHECK(cli({}).code == 2);
  const auto unknown = cli({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK_FALSE(unknown.err.empty());
  CHECK(cli({"run", "--no-such-flag"}).code == 2);
  CHECK(cli({"run"}).code == 2);  // --config missing
  CHECK(cli({"report", "--shape", "pie", "--ledger", "x"}).code == 2);
  CHECK(cli({"run", "--config", test::fixture("qa_config.json").string(), "--trigger-id", "31", "--dry-run"}).code == 2);
  CHECK(cli({"run", "--config", test::fixture("qa_config.json").string(), "--positions", "1,x", "--dry-run"}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  test::TempDir dir;
  test::spit(dir / "bad.json", R"({"datasets": []})");
  const auto bad = cli({"run", "--config", (dir / "bad.json").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("config.datasets") != std::string::npos);
  CHECK(cli({"run", "--config", (dir / "missing.json").string()}).code == 1);
  CHECK(cli({"run", "--config", test::fixture("qa_config.json").string(), "--output-dir", dir.path().string(),
             "--backend", "nope"})
            .code == 1);
}

TEST_CASE("score") {
  const auto em = cli({"score", "--prediction", "The Red Hearts play garage punk music.", "--gold", "garage punk"});
  CHECK(em.code == 0);
  CHECK(em.out.rfind("em 1\n", 0) == 0);
  CHECK(cli({"score", "--prediction", "garage-punk", "--gold", "garage punk"}).out.rfind("em 0\n", 0) == 0);
  const auto judge = cli({"score", "--judge-text", "Relevance: 4\nAccuracy: 4\nPersona: 3"});
  CHECK(judge.out == "relevance 4.000 accuracy 4.000 persona 3.000 average 3.667\n");
  CHECK(cli({"score", "--prediction", "x"}).code == 2);
}

TEST_CASE("dry run writes prompts and sends nothing") {
  test::TempDir dir;
  auto transport = std::make_shared<CountingTransport>();
  const auto r = cli({"run", "--config", test::fixture("qa_config.json").string(), "--output-dir", dir.path().string(),
                      "--dry-run", "--strategy", "thot", "--strategy", "cot"},
                     fixed_env(transport));
  CHECK(r.code == 0);
  CHECK(transport->calls == 0);
  std::vector<std::filesystem::path> found;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (e.path().filename() == "prompts.jsonl") found.push_back(e.path());
    CHECK(e.path().filename() != "ledger.jsonl");
  }
  REQUIRE(found.size() == 1);
  CHECK(lines_of(test::slurp(found[0])).size() == 50);
}

TEST_CASE("run, resume and report through the command line") {
  test::TempDir dir;
  const std::string config = test::fixture("qa_config.json").string();
  const auto env = fixed_env(std::make_shared<CountingTransport>());
  const auto r = cli({"run", "--config", config, "--output-dir", dir.path().string(), "--workers", "3"}, env);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("cells: 100 total, 0 already done, 100 run, 0 failed, 0 skipped") != std::string::npos);
  CHECK(r.out.find("| ThoT |") != std::string::npos);

  const std::string run_id = load_run_config(config).default_run_id();
  const auto again = cli({"run", "--config", config, "--output-dir", dir.path().string(), "--resume", run_id}, env);
  CHECK(again.code == 0);
  CHECK(again.out.find("100 already done, 0 run") != std::string::npos);
  CHECK(cli({"run", "--config", config, "--output-dir", dir.path().string(), "--resume", "nope"}, env).code == 1);

  const auto csv = cli({"report", "--config", config, "--output-dir", dir.path().string(), "--csv", "--shape", "methods"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("method,backend,metric,value,n,excluded,dataset,trigger_id,position\n", 0) == 0);
  CHECK(lines_of(csv.out).size() == 5);

  const auto ledger = (dir / run_id) / "ledger.jsonl";
  const auto md = cli({"report", "--ledger", ledger.string(), "--shape", "positions"});
  CHECK(md.out == "(no cells for this report shape)\n");
  CHECK(cli({"report", "--ledger", (dir / "none.jsonl").string()}).code == 1);
}

TEST_CASE("sweeps through the command line") {
  test::TempDir dir;
  const std::string config = test::fixture("qa_config.json").string();
  const auto t = cli({"sweep-triggers", "--config", config, "--output-dir", dir.path().string(), "--trigger-id", "30",
                      "--trigger-id", "1"},
                     fixed_env());
  CHECK(t.code == 0);
  CHECK(t.out.find("trigger sweep") != std::string::npos);
  CHECK(t.out.find("| 30 | ") != std::string::npos);

  const auto p = cli({"sweep-positions", "--config", config, "--output-dir", dir.path().string(), "--positions", "0,9",
                      "--strategy", "retrieval"},
                     fixed_env());
  CHECK(p.code == 0);
  CHECK(p.out.find("gold passage at position 9") != std::string::npos);
  CHECK(cli({"sweep-positions", "--config", config}).code == 2);
}

TEST_CASE("build-mtcr") {
  test::TempDir dir;
  const std::string config = test::fixture("mtcr_config.json").string();
  const auto out = (dir / "built.jsonl").string();
  const auto dry = cli({"build-mtcr", "--config", config, "--input", test::fixture("conversations_raw.jsonl").string(),
                        "--backend", "builder", "--dry-run"});
  CHECK(dry.out == "dry run: 6 conversations, 12 construction calls\n");

  const auto r = cli({"build-mtcr", "--config", config, "--output-dir", dir.path().string(), "--input",
                      test::fixture("conversations_raw.jsonl").string(), "--backend", "builder", "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("4 accepted, 2 rejected", 0) == 0);
  CHECK(r.out.find("conv-1: persona_leakage") != std::string::npos);
  CHECK(r.out.find("conv-4: irrelevance") != std::string::npos);
  CHECK(load_conversation_dataset(out).size() == 4);
  CHECK(cli({"build-mtcr", "--config", config}).code == 2);
}
