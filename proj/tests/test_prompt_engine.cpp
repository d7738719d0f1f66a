#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include "thot/corpus.hpp"
#include "thot/prompt_engine.hpp"
#include "thot/trigger_catalog.hpp"

using namespace thot;

namespace {

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::string line;
  std::istringstream in(s);
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

StrategyTemplate tmpl(Strategy s, std::string instruction = "") {
  StrategyTemplate t;
  t.strategy = s;
  t.instruction = std::move(instruction);
  return t;
}

ConversationRecord small_conversation() {
  ConversationRecord c;
  c.record_id = "c1";
  c.turns = {{Speaker::kS1, "Do you have pets?"}, {Speaker::kS2, "Yes, two of them."}};
  c.persona = {"I have two dogs.", "I work as a nurse."};
  c.speaker1_response = "What are their names?";
  return c;
}

}  // namespace

TEST_CASE("render_context lays out one numbered line per passage") {
  CHECK(render_context(ChaoticContext{}, tmpl(Strategy::kRetrieval)) == "");
  CHECK(render_context(ChaoticContext({{"a", "The Red Hearts are a garage punk band.", true}}), tmpl(Strategy::kRetrieval)) ==
        "Passage-1: The Red Hearts are a garage punk band.");

  const ChaoticContext three({{"a", "first", false}, {"b", "second", false}, {"c", "third", false}});
  const auto lines = split_lines(render_context(three, tmpl(Strategy::kRetrieval)));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "Passage-1: first");
  CHECK(lines[1] == "Passage-2: second");
  CHECK(lines[2] == "Passage-3: third");

  // embedded newlines would break the line-per-passage layout
  const ChaoticContext wrapped({{"a", "two\nlines", false}});
  CHECK(render_context(wrapped, tmpl(Strategy::kRetrieval)) == "Passage-1: two lines");

  StrategyTemplate custom = tmpl(Strategy::kRetrieval);
  custom.passage_prefix_format = "[{i}] ";
  CHECK(render_context(three, custom) == "[1] first\n[2] second\n[3] third");
}

TEST_CASE("first prompt layout") {
  const ChaoticContext ctx({{"a", "The Red Hearts are a garage punk band.", true}});
  const Query q("What genre is The Red Hearts?");

  const auto thot = build_first_prompt(ctx, q, catalog_trigger(30), tmpl(Strategy::kThoT), "r");
  CHECK(test::count_occurrences(thot.rendered, test::kThoT30) == 1);
  CHECK(thot.rendered == "Passage-1: The Red Hearts are a garage punk band.\nQ: What genre is The Red Hearts? " +
                             test::kThoT30 + "\nA:");
  CHECK(thot.phase == Phase::kFirst);
  CHECK(thot.trigger_id == 30);
  CHECK(thot.record_id == "r");

  const auto cot = build_first_prompt(ctx, q, cot_trigger(), tmpl(Strategy::kCoT));
  CHECK(cot.rendered.find("Let's think step by step") != std::string::npos);
  CHECK(cot.trigger_id == 0);

  const auto vanilla = build_first_prompt(ChaoticContext{}, q, std::nullopt, tmpl(Strategy::kVanilla));
  CHECK(vanilla.rendered == "Q: What genre is The Red Hearts?\nA:");
  CHECK_FALSE(vanilla.trigger_id);

  const auto with_instruction = build_first_prompt(ctx, q, std::nullopt, tmpl(Strategy::kVanilla, "Answer it."));
  CHECK(with_instruction.rendered == "Answer it.\nQ: What genre is The Red Hearts?\nA:");

  CHECK_THROWS_CODE(build_first_prompt(ctx, q, std::nullopt, tmpl(Strategy::kThoT)), ErrorCode::kPrecondition);
  CHECK_THROWS_CODE(build_first_prompt(ctx, q, TriggerSentence{0, "", {}}, tmpl(Strategy::kCoT)), ErrorCode::kPrecondition);
}

TEST_CASE("second prompt extends the first") {
  const ChaoticContext ctx({{"a", "x", true}});
  const auto first = build_first_prompt(ctx, Query("Q?"), catalog_trigger(30), tmpl(Strategy::kThoT));
  const CompletionResult z{"Passage 1 says x.", "h", "mock", 0, false};

  const auto second = build_second_prompt(first, z, AnswerTrigger{});
  CHECK(second.phase == Phase::kSecond);
  CHECK(second.rendered == first.rendered + "\nPassage 1 says x.\nTherefore, the answer:");
  CHECK(second.rendered.ends_with("Therefore, the answer:"));

  const auto empty = build_second_prompt(first, CompletionResult{}, AnswerTrigger{"A!"});
  CHECK(empty.rendered == first.rendered + "\n\nA!");

  CHECK_THROWS_CODE(build_second_prompt(second, z, AnswerTrigger{}), ErrorCode::kPhaseError);
}

TEST_CASE("prefix law and determinism over random inputs") {
  std::mt19937 rng(99);
  for (int i = 0; i < 300; ++i) {
    std::vector<Passage> ps;
    const int n = static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) ps.push_back({"p" + std::to_string(k), test::random_phrase(rng, 0, 10), false});
    const ChaoticContext ctx(ps);
    const Query q("q " + test::random_phrase(rng, 1, 6));
    const int trig = 1 + static_cast<int>(rng() % 30);
    const auto strategy = static_cast<Strategy>(rng() % 4);
    const std::optional<TriggerSentence> t =
        strategy == Strategy::kCoT ? std::optional(cot_trigger())
        : strategy == Strategy::kThoT ? std::optional(catalog_trigger(trig))
                                      : std::nullopt;
    const auto first = build_first_prompt(ctx, q, t, tmpl(strategy, "Do it."));
    CHECK(first == build_first_prompt(ctx, q, t, tmpl(strategy, "Do it.")));
    const CompletionResult z{test::random_phrase(rng, 0, 20), "", "", 0, false};
    const auto second = build_second_prompt(first, z, AnswerTrigger{});
    CHECK(second.rendered.starts_with(first.rendered));
    if (strategy == Strategy::kThoT) CHECK(test::count_occurrences(first.rendered, catalog_trigger(trig).text) == 1);
  }
}

TEST_CASE("every catalog trigger appears exactly once in its ThoT prompt") {
  const auto record = test::make_qa("r", "What genre is The Red Hearts?", {"garage punk"},
                                    {{"The Red Hearts are a garage punk band.", true}, {"Other text.", false}});
  for (const auto& t : trigger_catalog()) {
    const auto p = render_strategy(Strategy::kThoT, TaskKind::kRetrievalQA, record, t.id);
    CHECK(test::count_occurrences(p.rendered, t.text) == 1);
    CHECK(p.trigger_id == t.id);
  }
}

TEST_CASE("render_strategy slot layouts") {
  const auto record = test::make_qa("r", "Which one?", {"x"},
                                    {{"alpha passage", false}, {"beta passage", true}, {"gamma passage", false}});
  const PromptSettings settings;

  const auto retrieval = render_strategy(Strategy::kRetrieval, TaskKind::kRetrievalQA, record, std::nullopt);
  const auto lines = split_lines(retrieval.rendered);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == settings.qa_instruction);
  CHECK(lines[1] == "Passage-1: alpha passage");
  CHECK(lines[3] == "Passage-3: gamma passage");
  CHECK(lines[4] == "Q: Which one?");
  CHECK(lines[5] == "A:");

  const auto vanilla = render_strategy(Strategy::kVanilla, TaskKind::kRetrievalQA, record, std::nullopt);
  CHECK(vanilla.rendered.find("Passage-") == std::string::npos);
  CHECK(vanilla.rendered.find("alpha passage") == std::string::npos);

  const auto thot_default = render_strategy(Strategy::kThoT, TaskKind::kRetrievalQA, record, std::nullopt);
  CHECK(thot_default.trigger_id == kThoTTriggerId);

  const Record conv = small_conversation();
  const auto mtcr = render_strategy(Strategy::kThoT, TaskKind::kMTCR, conv, 30);
  CHECK(mtcr.rendered == "Continue the conversation as Speaker2.\n" + test::kThoT30 +
                             "\nSpeaker2's persona: I have two dogs. I work as a nurse.\n"
                             "Speaker1: Do you have pets?\nSpeaker2: Yes, two of them.\nSpeaker1: What are their names?");
  CHECK(mtcr.rendered.find(test::kThoT30) < mtcr.rendered.find("Speaker1:"));
  CHECK_FALSE(mtcr.rendered.ends_with("A:"));

  const auto mtcr_vanilla = render_strategy(Strategy::kVanilla, TaskKind::kMTCR, conv, std::nullopt);
  CHECK(mtcr_vanilla.rendered.find("step") == std::string::npos);

  CHECK_THROWS_CODE(render_strategy(Strategy::kRetrieval, TaskKind::kMTCR, conv, std::nullopt),
                    ErrorCode::kUnsupportedCombination);
  CHECK_THROWS_CODE(render_strategy(Strategy::kThoT, TaskKind::kMTCR, Record{record}, 30), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(render_strategy(Strategy::kThoT, TaskKind::kRetrievalQA, record, 31), ErrorCode::kInvalidArgument);
}

TEST_CASE("slot completeness over random contexts") {
  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::pair<std::string, bool>> ps;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) ps.push_back({"unique-" + std::to_string(i) + "-" + std::to_string(k) + " " + test::random_phrase(rng, 0, 5), k == 0});
    const auto record = test::make_qa("r", "Which?", {"x"}, ps);
    for (const auto s : {Strategy::kVanilla, Strategy::kRetrieval, Strategy::kCoT, Strategy::kThoT}) {
      const auto p = render_strategy(s, TaskKind::kRetrievalQA, record, 30);
      for (const auto& [text, gold] : ps) {
        if (s == Strategy::kVanilla) {
          CHECK(p.rendered.find(text) == std::string::npos);
        } else {
          CHECK(p.rendered.find(text) != std::string::npos);
        }
      }
    }
  }
}

TEST_CASE("settings override the instruction, joiner and cues") {
  PromptSettings s;
  s.qa_instruction = "INSTR";
  s.joiner = "\n\n";
  s.cot = TriggerSentence{0, "Think.", std::nullopt};
  const auto record = test::make_qa("r", "Q?", {"x"}, {{"p", true}});
  const auto p = render_strategy(Strategy::kCoT, TaskKind::kRetrievalQA, record, std::nullopt, s);
  CHECK(p.rendered == "INSTR\n\nPassage-1: p\n\nQ: Q? Think.\n\nA:");
}

TEST_CASE("catalog matches the transcribed table") {
  const auto& cat = trigger_catalog();
  REQUIRE(cat.size() == 30);
  CHECK(catalog_trigger(30).reference_em == 0.55);
  CHECK(catalog_trigger(1).reference_em == 0.43);
  CHECK(catalog_trigger(30).text == test::kThoT30);

  const auto lines = split_lines(test::slurp(test::golden("trigger_catalog.tsv")));
  REQUIRE(lines.size() == 30);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tab1 = lines[i].find('\t');
    const auto tab2 = lines[i].find('\t', tab1 + 1);
    const int id = std::stoi(lines[i].substr(0, tab1));
    const double em = std::stod(lines[i].substr(tab1 + 1, tab2 - tab1 - 1));
    const std::string text = lines[i].substr(tab2 + 1);
    CHECK(cat[i].id == id);
    CHECK(cat[i].text == text);
    REQUIRE(cat[i].reference_em);
    CHECK(*cat[i].reference_em == doctest::Approx(em).epsilon(1e-12));
  }
  CHECK_THROWS_CODE(catalog_trigger(0), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(catalog_trigger(31), ErrorCode::kInvalidArgument);
  CHECK(cot_trigger().text == "Let's think step by step.");
}

TEST_CASE("golden ThoT prompts for the case-study record") {
  const auto records = load_qa_dataset(test::fixture("qa_fixture.jsonl"));
  REQUIRE(!records.empty());
  const auto first = render_strategy(Strategy::kThoT, TaskKind::kRetrievalQA, records[0], 30);
  CHECK(first.rendered == test::slurp(test::golden("thot_first_prompt.txt")));
  const CompletionResult z{
      "Passage 6 links The Red Hearts to other Los Angeles bands. Passage 8 says The Red Hearts are a garage punk band "
      "from Los Angeles. So the genre is garage punk.",
      "", "mock", 0, false};
  const auto second = build_second_prompt(first, z, AnswerTrigger{});
  CHECK(second.rendered == test::slurp(test::golden("thot_second_prompt.txt")));
}
