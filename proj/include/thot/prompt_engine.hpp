#pragma once

#include <optional>
#include <string>

#include "thot/domain.hpp"
#include "thot/trigger_catalog.hpp"

namespace thot {

// Slot layout for one (strategy, task) pair.
struct StrategyTemplate {
  Strategy strategy = Strategy::kThoT;
  TaskKind task_kind = TaskKind::kRetrievalQA;
  std::string instruction;
  // "{i}" is replaced by the 1-based passage number.
  std::string passage_prefix_format = "Passage-{i}: ";
  std::string joiner = "\n";
};

// Configurable text pieces shared by every rendered prompt. The instruction
// defaults are placeholders of our own; override them from the run config.
struct PromptSettings {
  std::string qa_instruction = "Answer the question based on the given passages.";
  std::string mtcr_instruction = "Continue the conversation as Speaker2.";
  std::string passage_prefix_format = "Passage-{i}: ";
  std::string joiner = "\n";
  TriggerSentence cot = cot_trigger();
  AnswerTrigger answer_trigger;

  bool operator==(const PromptSettings&) const = default;
};

StrategyTemplate template_for(Strategy strategy, TaskKind task, const PromptSettings& settings);

// One line per passage, prefixed and in order. Newlines inside a passage
// are folded to spaces so the one-line-per-passage layout holds.
std::string render_context(const ChaoticContext& context, const StrategyTemplate& tmpl);

// "{instruction}\n{context}\nQ: {query} {trigger}\nA:" with empty slots
// dropped. Vanilla templates never render the context. CoT and ThoT require
// a non-empty trigger (kPrecondition).
PromptBundle build_first_prompt(const ChaoticContext& context, const Query& query,
                                const std::optional<TriggerSentence>& trigger,
                                const StrategyTemplate& tmpl, std::string record_id = {});

// first.rendered + joiner + response + joiner + answer trigger.
PromptBundle build_second_prompt(const PromptBundle& first, const CompletionResult& response,
                                 const AnswerTrigger& answer_trigger,
                                 std::string_view joiner = "\n");

// Persona line, the turns, then the Speaker1 response to be answered.
std::string render_conversation(const ConversationRecord& record);

// Trigger used by a strategy: none for Vanilla/Retrieval, the configured CoT
// cue for CoT, and the catalog entry (default 30) for ThoT.
std::optional<TriggerSentence> resolve_trigger(Strategy strategy, std::optional<int> trigger_id,
                                               const PromptSettings& settings);

// First-step prompt for any strategy/task/record combination.
// Throws kUnsupportedCombination for Retrieval on MTCR and kInvalidArgument
// when the record does not match the task kind.
PromptBundle render_strategy(Strategy strategy, TaskKind task, const Record& record,
                             std::optional<int> trigger_id, const PromptSettings& settings = {});

}  // namespace thot
