#include "thot/domain.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "thot/errors.hpp"

namespace thot {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kVanilla: return "Vanilla";
    case Strategy::kRetrieval: return "Retrieval";
    case Strategy::kCoT: return "CoT";
    case Strategy::kThoT: return "ThoT";
  }
  return "?";
}

std::string_view to_string(Phase p) { return p == Phase::kFirst ? "first" : "second"; }

std::string_view to_string(TaskKind k) {
  return k == TaskKind::kRetrievalQA ? "retrieval_qa" : "mtcr";
}

std::string_view to_string(Speaker s) { return s == Speaker::kS1 ? "S1" : "S2"; }

Strategy parse_strategy(std::string_view name) {
  const std::string n = lower(name);
  if (n == "vanilla") return Strategy::kVanilla;
  if (n == "retrieval") return Strategy::kRetrieval;
  if (n == "cot") return Strategy::kCoT;
  if (n == "thot") return Strategy::kThoT;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

Phase parse_phase(std::string_view name) {
  const std::string n = lower(name);
  if (n == "first") return Phase::kFirst;
  if (n == "second") return Phase::kSecond;
  throw Error(ErrorCode::kInvalidArgument, "unknown phase '" + std::string(name) + "'");
}

TaskKind parse_task_kind(std::string_view name) {
  const std::string n = lower(name);
  if (n == "retrieval_qa" || n == "qa" || n == "retrievalqa") return TaskKind::kRetrievalQA;
  if (n == "mtcr") return TaskKind::kMTCR;
  throw Error(ErrorCode::kInvalidArgument, "unknown task kind '" + std::string(name) + "'");
}

Speaker parse_speaker(std::string_view name) {
  const std::string n = lower(name);
  if (n == "s1" || n == "speaker1") return Speaker::kS1;
  if (n == "s2" || n == "speaker2") return Speaker::kS2;
  throw Error(ErrorCode::kInvalidArgument, "unknown speaker '" + std::string(name) + "'");
}

ChaoticContext::ChaoticContext(std::vector<Passage> passages) : passages_(std::move(passages)) {
  std::unordered_set<std::string> seen;
  for (const auto& p : passages_) {
    if (!seen.insert(p.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate passage id '" + p.id + "'");
    }
  }
}

std::size_t ChaoticContext::gold_count() const {
  return static_cast<std::size_t>(
      std::count_if(passages_.begin(), passages_.end(), [](const Passage& p) { return p.is_gold; }));
}

std::optional<std::size_t> ChaoticContext::single_gold_index() const {
  if (gold_count() != 1) return std::nullopt;
  const auto it =
      std::find_if(passages_.begin(), passages_.end(), [](const Passage& p) { return p.is_gold; });
  return static_cast<std::size_t>(it - passages_.begin());
}

Query::Query(std::string_view text) : text_(trim(text)) {
  if (text_.empty()) throw Error(ErrorCode::kEmptyQuery, "query text is empty");
}

const std::string& record_id_of(const Record& record) {
  return std::visit([](const auto& r) -> const std::string& { return r.record_id; }, record);
}

TaskKind task_kind_of(const Record& record) {
  return std::holds_alternative<QARecord>(record) ? TaskKind::kRetrievalQA : TaskKind::kMTCR;
}

void validate(const QARecord& record) {
  if (record.record_id.empty()) throw Error(ErrorCode::kSchemaError, "record_id is empty");
  if (record.gold_aliases.empty()) {
    throw Error(ErrorCode::kSchemaError, "record '" + record.record_id + "' has no gold aliases");
  }
  for (const auto& alias : record.gold_aliases) {
    if (trim(alias).empty()) {
      throw Error(ErrorCode::kSchemaError, "record '" + record.record_id + "' has an empty alias");
    }
  }
}

void validate(const ConversationRecord& record) {
  if (record.record_id.empty()) throw Error(ErrorCode::kSchemaError, "record_id is empty");
  if (record.turns.empty()) {
    throw Error(ErrorCode::kSchemaError, "conversation '" + record.record_id + "' has no turns");
  }
  for (std::size_t i = 1; i < record.turns.size(); ++i) {
    if (record.turns[i].speaker == record.turns[i - 1].speaker) {
      throw Error(ErrorCode::kSchemaError, "conversation '" + record.record_id +
                                               "': speakers do not alternate at turn " +
                                               std::to_string(i));
    }
  }
}

JudgeScores JudgeScores::from_components(double relevance, double accuracy, double persona) {
  return JudgeScores{relevance, accuracy, persona, (relevance + accuracy + persona) / 3.0};
}

std::string describe(const CellKey& key) {
  std::string out = key.dataset + "/" + key.backend_id + "/" + key.record_id + "/" +
                    std::string(to_string(key.strategy));
  if (key.trigger_id) out += "/t" + std::to_string(*key.trigger_id);
  if (key.position_index) out += "/p" + std::to_string(*key.position_index);
  return out;
}

std::string_view to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::kOk: return "ok";
    case OutcomeStatus::kFailed: return "failed";
    case OutcomeStatus::kSkipped: return "skipped";
  }
  return "?";
}

OutcomeStatus parse_outcome_status(std::string_view name) {
  if (name == "ok") return OutcomeStatus::kOk;
  if (name == "failed") return OutcomeStatus::kFailed;
  if (name == "skipped") return OutcomeStatus::kSkipped;
  throw Error(ErrorCode::kInvalidArgument, "unknown outcome status '" + std::string(name) + "'");
}

}  // namespace thot
