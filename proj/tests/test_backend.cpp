#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <deque>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "thot/backend.hpp"
#include "thot/hashing.hpp"
#include "thot/http_transport.hpp"
#include "thot/prompt_engine.hpp"
#include "thot/serialization.hpp"
#include "thot/trigger_catalog.hpp"

using namespace thot;
using namespace std::chrono_literals;

namespace {

PromptBundle prompt(std::string text, Phase phase = Phase::kFirst) {
  PromptBundle p;
  p.rendered = std::move(text);
  p.phase = phase;
  return p;
}

ScriptEntry contains(std::vector<std::string> needles, std::string response) {
  ScriptEntry e;
  e.when.contains = std::move(needles);
  e.response = std::move(response);
  return e;
}

// Replays queued outcomes; an empty queue answers 200 with a fixed body.
class FakeTransport final : public Transport {
 public:
  struct Step {
    int status = 200;
    std::string body;
    std::optional<ErrorCode> throws;
  };

  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                    std::chrono::milliseconds timeout) override {
    std::lock_guard lock(mu_);
    ++calls;
    last_url = url;
    last_body = body;
    last_headers = headers;
    last_timeout = timeout;
    Step s{200, ok_body("fake answer"), std::nullopt};
    if (!steps.empty()) {
      s = steps.front();
      if (steps.size() > 1 || !repeat_last) steps.pop_front();
    }
    if (s.throws) throw Error(*s.throws, "scripted failure");
    return {s.status, s.body};
  }

  static std::string ok_body(const std::string& text) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
  }

  std::mutex mu_;
  std::deque<Step> steps;
  bool repeat_last = false;
  int calls = 0;
  std::string last_url, last_body;
  HttpHeaders last_headers;
  std::chrono::milliseconds last_timeout{0};
};

BackendConfig chat_config(int retries = 3) {
  BackendConfig c;
  c.backend_id = "live";
  c.endpoint_url = "http://example.invalid/v1/chat/completions";
  c.model_name = "model-x";
  c.max_retries = retries;
  c.timeout_ms = 1234;
  return c;
}

RetryPolicy recording_retry(std::vector<std::chrono::milliseconds>& sleeps) {
  RetryPolicy r;
  r.sleep = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d); };
  r.jitter_seed = 42;
  return r;
}

EnvLookup fixed_env(std::optional<std::string> value) {
  return [value](const std::string&) { return value; };
}

}  // namespace

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("request hash is the sha256 of the canonical request bytes") {
  const DecodeParams d{0.0, 512};
  // hand-built canonical form: sorted keys, compact separators
  const std::string expected_bytes = R"({"max_output_tokens":512,"model":"gpt-x","prompt":"Q: hi\nA:","temperature":0.0})";
  CHECK(canonical_request("gpt-x", "Q: hi\nA:", d) == expected_bytes);
  CHECK(request_hash("gpt-x", "Q: hi\nA:", d) == sha256_hex(expected_bytes));
  CHECK(request_hash("gpt-x", "Q: hi\nA:", d) == request_hash("gpt-x", "Q: hi\nA:", d));
  CHECK(request_hash("gpt-x", "Q: hi\nA:", d) != request_hash("gpt-y", "Q: hi\nA:", d));
  CHECK(request_hash("gpt-x", "Q: hi\nA:", d) != request_hash("gpt-x", "Q: hi\nA:", DecodeParams{0.0, 128}));
  CHECK(request_hash("gpt-x", "Q: hi\nA:", d) != request_hash("gpt-x", "Q: hi\nA:", DecodeParams{0.5, 512}));

  MockBackend m({});
  CHECK(m.request_hash_for(prompt("p", Phase::kFirst)) == request_hash("mock", "p", DecodeParams{0.0, 512}));
  CHECK(m.request_hash_for(prompt("p", Phase::kSecond)) == request_hash("mock", "p", DecodeParams{0.0, 128}));
}

TEST_CASE("decode defaults are greedy") {
  const BackendConfig c;
  CHECK(c.decode.temperature == 0.0);
  CHECK(c.decode.max_output_tokens == 512);
  CHECK(c.answer_decode.max_output_tokens == 128);
}

TEST_CASE("mock backend scripting") {
  SUBCASE("empty script answers UNMATCHED") {
    auto m = mock_backend({});
    CHECK(m->complete(prompt("anything")).text == "UNMATCHED");
    CHECK(m->call_count() == 1);
  }
  SUBCASE("case-study entry") {
    auto m = mock_backend({contains({"Red Hearts"}, "The Red Hearts play garage punk music.")});
    const auto r = m->complete(prompt("Q: What genre is The Red Hearts?\nA:"));
    CHECK(r.text == "The Red Hearts play garage punk music.");
    CHECK(r.backend_id == "mock");
    CHECK_FALSE(r.from_cache);
    CHECK(r.request_hash == m->request_hash_for(prompt("Q: What genre is The Red Hearts?\nA:")));
  }
  SUBCASE("anchors and regex") {
    ScriptEntry starts;
    starts.when.starts_with = "Answer";
    starts.response = "S";
    ScriptEntry ends;
    ends.when.ends_with = "A:";
    ends.response = "E";
    ScriptEntry rx;
    rx.when.regex = "Passage-[0-9]+: x";
    rx.response = "R";
    MockBackend m({rx, starts, ends});
    CHECK(m.complete(prompt("Answer me")).text == "S");
    CHECK(m.complete(prompt("Q\nA:")).text == "E");
    CHECK(m.complete(prompt("Answer\nPassage-12: x\nA:")).text == "R");
    CHECK(m.complete(prompt("nothing")).text == "UNMATCHED");
    const auto log = m.call_log();
    REQUIRE(log.size() == 4);
    CHECK(log[0] == "Answer me");
  }
}

TEST_CASE("first matching script entry wins, as a linear scan would") {
  std::mt19937 rng(77);
  const std::vector<std::string> vocab{"red", "hearts", "punk", "band", "step", "Q:", "A:"};
  for (int round = 0; round < 200; ++round) {
    std::vector<ScriptEntry> script;
    for (int k = static_cast<int>(rng() % 6); k > 0; --k) {
      std::vector<std::string> needles;
      for (int n = 1 + static_cast<int>(rng() % 2); n > 0; --n) needles.push_back(vocab[rng() % vocab.size()]);
      script.push_back(contains(needles, "resp" + std::to_string(script.size())));
    }
    std::string text;
    for (int w = static_cast<int>(rng() % 6); w > 0; --w) text += vocab[rng() % vocab.size()] + " ";

    std::string expected = "UNMATCHED";
    for (const auto& e : script) {
      bool all = true;
      for (const auto& n : e.when.contains) all = all && text.find(n) != std::string::npos;
      if (all) {
        expected = e.response;
        break;
      }
    }
    MockBackend m(script);
    CHECK(m.complete(prompt(text)).text == expected);
  }
}

TEST_CASE("an entry keyed on the ThoT trigger fires only for ThoT prompts") {
  const auto record = test::make_qa("r", "What genre is The Red Hearts?", {"garage punk"},
                                    {{"The Red Hearts are a garage punk band.", true}});
  MockBackend m({contains({test::kThoT30}, "thot")});
  for (const auto s : {Strategy::kVanilla, Strategy::kRetrieval, Strategy::kCoT, Strategy::kThoT}) {
    const auto p = render_strategy(s, TaskKind::kRetrievalQA, record, 30);
    CHECK((m.complete(p).text == "thot") == (s == Strategy::kThoT));
  }
}

TEST_CASE("mock backend is safe under concurrent calls") {
  MockBackend m({contains({"x"}, "y")});
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 100; ++i) CHECK(m.complete(prompt("x" + std::to_string(i))).text == "y");
    });
  }
  for (auto& t : threads) t.join();
  CHECK(m.call_count() == 800);
}

TEST_CASE("chat request and response wire format") {
  auto transport = std::make_shared<FakeTransport>();
  BackendConfig cfg = chat_config();
  cfg.auth_env_var = "THOT_TEST_KEY";
  ChatCompletionsBackend b(cfg, transport, {}, fixed_env("sk-test"));

  const auto r = b.complete(prompt("P1"));
  CHECK(r.text == "fake answer");
  CHECK(r.backend_id == "live");
  CHECK(r.request_hash == request_hash("model-x", "P1", cfg.decode));
  CHECK(transport->last_url == cfg.endpoint_url);
  CHECK(transport->last_timeout == 1234ms);

  const json body = json::parse(transport->last_body);
  CHECK(body["model"] == "model-x");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["max_tokens"] == 512);
  REQUIRE(body["messages"].size() == 1);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "P1");
  const auto auth = std::find_if(transport->last_headers.begin(), transport->last_headers.end(),
                                 [](const auto& h) { return h.first == "Authorization"; });
  REQUIRE(auth != transport->last_headers.end());
  CHECK(auth->second == "Bearer sk-test");

  b.complete(prompt("P2", Phase::kSecond));
  CHECK(json::parse(transport->last_body)["max_tokens"] == 128);

  cfg.system_message = "Be brief.";
  ChatCompletionsBackend with_system(cfg, transport, {}, fixed_env("k"));
  with_system.complete(prompt("P3"));
  const json b3 = json::parse(transport->last_body);
  REQUIRE(b3["messages"].size() == 2);
  CHECK(b3["messages"][0]["role"] == "system");
}

TEST_CASE("missing credentials fail before any request") {
  auto transport = std::make_shared<FakeTransport>();
  BackendConfig cfg = chat_config();
  cfg.auth_env_var = "THOT_SURELY_UNSET";
  ChatCompletionsBackend b(cfg, transport, {}, fixed_env(std::nullopt));
  CHECK_THROWS_CODE(b.complete(prompt("x")), ErrorCode::kAuthMissing);
  CHECK(transport->calls == 0);
}

TEST_CASE("retry bound: a failing endpoint gets exactly max_retries + 1 attempts") {
  for (const int retries : {0, 1, 3, 5}) {
    for (const auto& [step, code] : std::vector<std::pair<FakeTransport::Step, ErrorCode>>{
             {{503, "busy", std::nullopt}, ErrorCode::kTransport},
             {{429, "slow down", std::nullopt}, ErrorCode::kRateLimited},
             {{0, "", ErrorCode::kTimeout}, ErrorCode::kTimeout},
             {{0, "", ErrorCode::kTransport}, ErrorCode::kTransport}}) {
      auto transport = std::make_shared<FakeTransport>();
      transport->steps = {step};
      transport->repeat_last = true;
      std::vector<std::chrono::milliseconds> sleeps;
      ChatCompletionsBackend b(chat_config(retries), transport, recording_retry(sleeps), fixed_env(std::nullopt));
      CHECK_THROWS_CODE(b.complete(prompt("x")), code);
      CHECK(transport->calls == retries + 1);
      CHECK(sleeps.size() == static_cast<std::size_t>(retries));
      for (std::size_t i = 0; i < sleeps.size(); ++i) {
        const auto full = std::min<std::int64_t>(1000LL << i, 60000);
        CHECK(sleeps[i].count() >= full / 2);
        CHECK(sleeps[i].count() <= full);
      }
    }
  }
}

TEST_CASE("non-retryable failures surface at once") {
  auto transport = std::make_shared<FakeTransport>();
  transport->steps = {{400, "bad request", std::nullopt}};
  std::vector<std::chrono::milliseconds> sleeps;
  ChatCompletionsBackend b(chat_config(5), transport, recording_retry(sleeps), fixed_env(std::nullopt));
  CHECK_THROWS_CODE(b.complete(prompt("x")), ErrorCode::kTransport);
  CHECK(transport->calls == 1);

  transport->steps = {{200, "{\"choices\": []}", std::nullopt}};
  CHECK_THROWS_CODE(b.complete(prompt("x")), ErrorCode::kMalformedResponse);
  CHECK(transport->calls == 2);
}

TEST_CASE("transient failures recover") {
  auto transport = std::make_shared<FakeTransport>();
  transport->steps = {{503, "", std::nullopt}, {0, "", ErrorCode::kTimeout}, {200, FakeTransport::ok_body("done"), std::nullopt}};
  std::vector<std::chrono::milliseconds> sleeps;
  ChatCompletionsBackend b(chat_config(5), transport, recording_retry(sleeps), fixed_env(std::nullopt));
  CHECK(b.complete(prompt("x")).text == "done");
  CHECK(transport->calls == 3);
  CHECK(sleeps.size() == 2);
}

TEST_CASE("backoff delay uses equal jitter under a cap") {
  RetryPolicy p;
  CHECK(backoff_delay(0, p, 0.0) == 500ms);
  CHECK(backoff_delay(0, p, 1.0) == 1000ms);
  CHECK(backoff_delay(2, p, 0.0) == 2000ms);
  CHECK(backoff_delay(10, p, 0.0) == 30000ms);
  CHECK(backoff_delay(10, p, 1.0) == 60000ms);
  CHECK(backoff_delay(100, p, 0.5) == 45000ms);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const int attempt = static_cast<int>(rng() % 20);
    const auto d = backoff_delay(attempt, p, u(rng));
    const auto full = std::min<double>(1000.0 * std::pow(2.0, attempt), 60000.0);
    CHECK(d.count() >= static_cast<std::int64_t>(full / 2));
    CHECK(d.count() <= static_cast<std::int64_t>(full));
  }
}

TEST_CASE("chat response parsing") {
  CHECK(parse_chat_response(FakeTransport::ok_body("hi")) == "hi");
  CHECK_THROWS_CODE(parse_chat_response("not json"), ErrorCode::kMalformedResponse);
  CHECK_THROWS_CODE(parse_chat_response("{}"), ErrorCode::kMalformedResponse);
  CHECK_THROWS_CODE(parse_chat_response(R"({"choices":[{"message":{"content":null}}]})"), ErrorCode::kMalformedResponse);
}

TEST_CASE("cache serves repeats without calling the backend") {
  test::TempDir dir;
  auto inner = mock_backend({contains({"Red Hearts"}, "The Red Hearts play garage punk music.")});
  CachingBackend cache(inner, dir / "mock");

  const auto p = prompt("What genre is The Red Hearts?");
  const auto first = cache.complete(p);
  CHECK_FALSE(first.from_cache);
  const auto second = cache.complete(p);
  CHECK(second.from_cache);
  CHECK(second.text == first.text);
  CHECK(second.request_hash == first.request_hash);
  CHECK(inner->call_count() == 1);
  CHECK(cache.hits() == 1);
  CHECK(cache.misses() == 1);

  const auto file = dir / "mock" / (first.request_hash + ".json");
  REQUIRE(std::filesystem::exists(file));
  const json stored = json::parse(test::slurp(file));
  CHECK(stored["request_hash"] == first.request_hash);
  CHECK(stored["text"] == first.text);
  CHECK(stored["backend_id"] == "mock");

  // a fresh wrapper over the same directory still hits
  CachingBackend again(inner, dir / "mock");
  CHECK(again.complete(p).from_cache);
  CHECK(inner->call_count() == 1);

  // corrupt entries are treated as misses and rewritten
  test::spit(file, "{broken");
  CHECK_FALSE(again.complete(p).from_cache);
  CHECK(inner->call_count() == 2);
  CHECK(again.complete(p).from_cache);
}

TEST_CASE("cache invariant: upstream calls equal distinct request hashes") {
  test::TempDir dir;
  auto transport = std::make_shared<FakeTransport>();
  auto live = std::make_shared<ChatCompletionsBackend>(chat_config(0), transport, RetryPolicy{}, fixed_env(std::nullopt));
  CachingBackend cache(live, dir.path());
  std::mt19937 rng(12);
  std::set<std::string> hashes;
  for (int i = 0; i < 300; ++i) {
    const auto p = prompt("prompt " + std::to_string(rng() % 40), rng() % 2 ? Phase::kFirst : Phase::kSecond);
    hashes.insert(cache.complete(p).request_hash);
  }
  CHECK(static_cast<std::size_t>(transport->calls) == hashes.size());
  CHECK(cache.misses() == hashes.size());
  CHECK(cache.hits() == 300 - hashes.size());
}

TEST_CASE("concurrent identical requests collapse into one upstream call") {
  test::TempDir dir;
  auto inner = std::make_shared<MockBackend>(std::vector<ScriptEntry>{}, MockBackend::default_config(), 20ms);
  CachingBackend cache(inner, dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) threads.emplace_back([&] { cache.complete(prompt("same")); });
  for (auto& t : threads) t.join();
  CHECK(inner->call_count() == 1);
  CHECK(cache.hits() == 7);
}

TEST_CASE("url splitting") {
  const auto u = split_url("https://api.example.com/v1/chat/completions");
  CHECK(u.scheme_host_port == "https://api.example.com");
  CHECK(u.path == "/v1/chat/completions");
  const auto local = split_url("http://127.0.0.1:8080");
  CHECK(local.scheme_host_port == "http://127.0.0.1:8080");
  CHECK(local.path == "/");
  CHECK_THROWS_CODE(split_url("ftp://x/y"), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(split_url("http:///nohost"), ErrorCode::kInvalidArgument);
}

TEST_CASE("http transport against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const json body = json::parse(req.body);
    const std::string prompt_text = body["messages"][0]["content"];
    if (prompt_text == "slow") std::this_thread::sleep_for(1500ms);
    if (prompt_text == "fail") {
      res.status = 500;
      return;
    }
    res.set_content(FakeTransport::ok_body("echo: " + prompt_text + " " + req.get_header_value("Authorization")),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  BackendConfig cfg = chat_config(0);
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.auth_env_var = "KEY";
  cfg.timeout_ms = 500;
  ChatCompletionsBackend b(cfg, std::make_shared<HttpTransport>(), {}, fixed_env("abc"));

  CHECK(b.complete(prompt("hello")).text == "echo: hello Bearer abc");
  CHECK_THROWS_CODE(b.complete(prompt("slow")), ErrorCode::kTimeout);
  CHECK_THROWS_CODE(b.complete(prompt("fail")), ErrorCode::kTransport);

  BackendConfig closed = cfg;
  closed.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  ChatCompletionsBackend nowhere(closed, std::make_shared<HttpTransport>(), {}, fixed_env("abc"));
  try {
    nowhere.complete(prompt("x"));
    FAIL_CHECK("expected a connection failure");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::kTransport || e.code() == ErrorCode::kTimeout));
  }

  server.stop();
  worker.join();
  CHECK(hits >= 3);
}
