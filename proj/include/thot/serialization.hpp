#pragma once

#include "json.hpp"
#include "thot/domain.hpp"

// JSON forms of the domain types. These are the canonical shapes used in
// dataset files, the run ledger and the response cache.
namespace thot {

using json = nlohmann::json;

void to_json(json& j, const Passage& p);
void from_json(const json& j, Passage& p);
void to_json(json& j, const ChaoticContext& c);
void from_json(const json& j, ChaoticContext& c);
void to_json(json& j, const TriggerSentence& t);
void from_json(const json& j, TriggerSentence& t);
void to_json(json& j, const AnswerTrigger& a);
void from_json(const json& j, AnswerTrigger& a);
void to_json(json& j, const PromptBundle& b);
void from_json(const json& j, PromptBundle& b);
void to_json(json& j, const CompletionResult& c);
void from_json(const json& j, CompletionResult& c);
void to_json(json& j, const QARecord& r);
void from_json(const json& j, QARecord& r);
void to_json(json& j, const Turn& t);
void from_json(const json& j, Turn& t);
void to_json(json& j, const ConversationRecord& r);
void from_json(const json& j, ConversationRecord& r);
void to_json(json& j, const JudgeScores& s);
void from_json(const json& j, JudgeScores& s);
void to_json(json& j, const CellKey& k);
void from_json(const json& j, CellKey& k);
void to_json(json& j, const RecordOutcome& o);
void from_json(const json& j, RecordOutcome& o);

}  // namespace thot
