#include "thot/serialization.hpp"

#include "thot/errors.hpp"

namespace thot {
namespace {

template <typename T>
std::optional<T> optional_field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
void put_optional(json& j, const char* name, const std::optional<T>& value) {
  if (value) {
    j[name] = *value;
  } else {
    j[name] = nullptr;
  }
}

}  // namespace

void to_json(json& j, const Passage& p) {
  j = json{{"id", p.id}, {"text", p.text}, {"is_gold", p.is_gold}};
}

void from_json(const json& j, Passage& p) {
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.is_gold = j.value("is_gold", false);
}

void to_json(json& j, const ChaoticContext& c) { j = c.passages(); }

void from_json(const json& j, ChaoticContext& c) {
  c = ChaoticContext(j.get<std::vector<Passage>>());
}

void to_json(json& j, const TriggerSentence& t) {
  j = json{{"id", t.id}, {"text", t.text}};
  put_optional(j, "reference_em", t.reference_em);
}

void from_json(const json& j, TriggerSentence& t) {
  t.id = j.at("id").get<int>();
  t.text = j.at("text").get<std::string>();
  t.reference_em = optional_field<double>(j, "reference_em");
}

void to_json(json& j, const AnswerTrigger& a) { j = json{{"text", a.text}}; }
void from_json(const json& j, AnswerTrigger& a) { a.text = j.at("text").get<std::string>(); }

void to_json(json& j, const PromptBundle& b) {
  j = json{{"rendered", b.rendered},
           {"strategy", to_string(b.strategy)},
           {"phase", to_string(b.phase)},
           {"record_id", b.record_id}};
  put_optional(j, "trigger_id", b.trigger_id);
}

void from_json(const json& j, PromptBundle& b) {
  b.rendered = j.at("rendered").get<std::string>();
  b.strategy = parse_strategy(j.at("strategy").get<std::string>());
  b.phase = parse_phase(j.at("phase").get<std::string>());
  b.record_id = j.value("record_id", std::string{});
  b.trigger_id = optional_field<int>(j, "trigger_id");
}

void to_json(json& j, const CompletionResult& c) {
  j = json{{"text", c.text},
           {"request_hash", c.request_hash},
           {"backend_id", c.backend_id},
           {"latency_ms", c.latency_ms},
           {"from_cache", c.from_cache}};
}

void from_json(const json& j, CompletionResult& c) {
  c.text = j.at("text").get<std::string>();
  c.request_hash = j.value("request_hash", std::string{});
  c.backend_id = j.value("backend_id", std::string{});
  c.latency_ms = j.value("latency_ms", std::int64_t{0});
  c.from_cache = j.value("from_cache", false);
}

void to_json(json& j, const QARecord& r) {
  j = json{{"record_id", r.record_id},
           {"question", r.question.text()},
           {"gold_aliases", r.gold_aliases},
           {"passages", r.context}};
}

void from_json(const json& j, QARecord& r) {
  r.record_id = j.at("record_id").get<std::string>();
  r.question = Query(j.at("question").get<std::string>());
  r.gold_aliases = j.at("gold_aliases").get<std::vector<std::string>>();
  r.context = j.contains("passages") ? j.at("passages").get<ChaoticContext>() : ChaoticContext{};
}

void to_json(json& j, const Turn& t) {
  j = json{{"speaker", to_string(t.speaker)}, {"text", t.utterance}};
}

void from_json(const json& j, Turn& t) {
  t.speaker = parse_speaker(j.at("speaker").get<std::string>());
  t.utterance = j.at("text").get<std::string>();
}

void to_json(json& j, const ConversationRecord& r) {
  j = json{{"record_id", r.record_id},
           {"turns", r.turns},
           {"persona", r.persona},
           {"speaker1_response", r.speaker1_response}};
}

void from_json(const json& j, ConversationRecord& r) {
  r.record_id = j.at("record_id").get<std::string>();
  r.turns = j.at("turns").get<std::vector<Turn>>();
  r.persona = j.value("persona", std::vector<std::string>{});
  r.speaker1_response = j.value("speaker1_response", std::string{});
}

void to_json(json& j, const JudgeScores& s) {
  j = json{{"relevance", s.relevance},
           {"accuracy", s.accuracy},
           {"persona", s.persona},
           {"average", s.average}};
}

void from_json(const json& j, JudgeScores& s) {
  s = JudgeScores::from_components(j.at("relevance").get<double>(), j.at("accuracy").get<double>(),
                                   j.at("persona").get<double>());
}

void to_json(json& j, const CellKey& k) {
  j = json{{"dataset", k.dataset},
           {"backend", k.backend_id},
           {"record_id", k.record_id},
           {"strategy", to_string(k.strategy)}};
  put_optional(j, "trigger_id", k.trigger_id);
  put_optional(j, "position", k.position_index);
}

void from_json(const json& j, CellKey& k) {
  k.dataset = j.at("dataset").get<std::string>();
  k.backend_id = j.at("backend").get<std::string>();
  k.record_id = j.at("record_id").get<std::string>();
  k.strategy = parse_strategy(j.at("strategy").get<std::string>());
  k.trigger_id = optional_field<int>(j, "trigger_id");
  k.position_index = optional_field<int>(j, "position");
}

void to_json(json& j, const RecordOutcome& o) {
  j = json(o.key);
  j["task"] = to_string(o.task);
  j["status"] = to_string(o.status);
  j["error"] = o.error;
  j["first_response"] = o.first_response;
  j["final_answer"] = o.final_answer;
  json scores = json::object();
  put_optional(scores, "em", o.scores.em);
  if (o.scores.judge) {
    scores["judge"] = *o.scores.judge;
  } else {
    scores["judge"] = nullptr;
  }
  scores["judge_rejected"] = o.scores.judge_rejected;
  j["scores"] = std::move(scores);
  j["backend_calls"] = o.backend_calls;
  j["started_at_ms"] = o.started_at_ms;
  j["finished_at_ms"] = o.finished_at_ms;
}

void from_json(const json& j, RecordOutcome& o) {
  o.key = j.get<CellKey>();
  o.task = parse_task_kind(j.at("task").get<std::string>());
  o.status = parse_outcome_status(j.at("status").get<std::string>());
  o.error = j.value("error", std::string{});
  o.first_response = j.value("first_response", std::string{});
  o.final_answer = j.value("final_answer", std::string{});
  const json& scores = j.at("scores");
  o.scores.em = optional_field<int>(scores, "em");
  o.scores.judge = optional_field<JudgeScores>(scores, "judge");
  o.scores.judge_rejected = scores.value("judge_rejected", false);
  o.backend_calls = j.value("backend_calls", 0);
  o.started_at_ms = j.value("started_at_ms", std::int64_t{0});
  o.finished_at_ms = j.value("finished_at_ms", std::int64_t{0});
}

}  // namespace thot
