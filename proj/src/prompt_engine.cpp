#include "thot/prompt_engine.hpp"

#include <vector>

#include "thot/errors.hpp"

namespace thot {
namespace {

std::string join_slots(const std::vector<std::string>& slots, std::string_view joiner) {
  std::string out;
  bool first = true;
  for (const auto& slot : slots) {
    if (slot.empty()) continue;
    if (!first) out.append(joiner);
    out.append(slot);
    first = false;
  }
  return out;
}

std::string one_line(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string passage_prefix(const std::string& format, std::size_t number) {
  std::string out = format;
  const std::string token = "{i}";
  for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos)) {
    const std::string digits = std::to_string(number);
    out.replace(pos, token.size(), digits);
    pos += digits.size();
  }
  return out;
}

std::string_view speaker_label(Speaker s) { return s == Speaker::kS1 ? "Speaker1" : "Speaker2"; }

}  // namespace

StrategyTemplate template_for(Strategy strategy, TaskKind task, const PromptSettings& settings) {
  StrategyTemplate tmpl;
  tmpl.strategy = strategy;
  tmpl.task_kind = task;
  tmpl.instruction = task == TaskKind::kRetrievalQA ? settings.qa_instruction : settings.mtcr_instruction;
  tmpl.passage_prefix_format = settings.passage_prefix_format;
  tmpl.joiner = settings.joiner;
  return tmpl;
}

std::string render_context(const ChaoticContext& context, const StrategyTemplate& tmpl) {
  std::string out;
  const auto& passages = context.passages();
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += passage_prefix(tmpl.passage_prefix_format, i + 1);
    out += one_line(passages[i].text);
  }
  return out;
}

PromptBundle build_first_prompt(const ChaoticContext& context, const Query& query,
                                const std::optional<TriggerSentence>& trigger,
                                const StrategyTemplate& tmpl, std::string record_id) {
  if (query.text().empty()) throw Error(ErrorCode::kEmptyQuery, "query text is empty");
  const bool has_trigger = trigger && !trigger->text.empty();
  if (is_two_step(tmpl.strategy) && !has_trigger) {
    throw Error(ErrorCode::kPrecondition,
                std::string(to_string(tmpl.strategy)) + " prompts need a non-empty trigger");
  }

  std::string question_line = "Q: " + query.text();
  if (has_trigger) question_line += " " + trigger->text;

  const bool with_context = tmpl.strategy != Strategy::kVanilla;
  PromptBundle bundle;
  bundle.rendered = join_slots(
      {tmpl.instruction, with_context ? render_context(context, tmpl) : std::string{}, question_line, "A:"},
      tmpl.joiner);
  bundle.strategy = tmpl.strategy;
  bundle.phase = Phase::kFirst;
  if (has_trigger) bundle.trigger_id = trigger->id;
  bundle.record_id = std::move(record_id);
  return bundle;
}

PromptBundle build_second_prompt(const PromptBundle& first, const CompletionResult& response,
                                 const AnswerTrigger& answer_trigger, std::string_view joiner) {
  if (first.phase != Phase::kFirst) {
    throw Error(ErrorCode::kPhaseError, "second-step prompts must extend a first-step prompt");
  }
  PromptBundle bundle = first;
  bundle.phase = Phase::kSecond;
  bundle.rendered.reserve(first.rendered.size() + response.text.size() + answer_trigger.text.size() +
                          2 * joiner.size());
  bundle.rendered.append(joiner);
  bundle.rendered.append(response.text);
  bundle.rendered.append(joiner);
  bundle.rendered.append(answer_trigger.text);
  return bundle;
}

std::string render_conversation(const ConversationRecord& record) {
  std::vector<std::string> lines;
  if (!record.persona.empty()) {
    std::string persona = "Speaker2's persona:";
    for (const auto& sentence : record.persona) persona += " " + one_line(sentence);
    lines.push_back(std::move(persona));
  }
  for (const auto& turn : record.turns) {
    lines.push_back(std::string(speaker_label(turn.speaker)) + ": " + one_line(turn.utterance));
  }
  if (!record.speaker1_response.empty()) {
    lines.push_back("Speaker1: " + one_line(record.speaker1_response));
  }
  return join_slots(lines, "\n");
}

std::optional<TriggerSentence> resolve_trigger(Strategy strategy, std::optional<int> trigger_id,
                                               const PromptSettings& settings) {
  switch (strategy) {
    case Strategy::kVanilla:
    case Strategy::kRetrieval:
      return std::nullopt;
    case Strategy::kCoT:
      return settings.cot;
    case Strategy::kThoT:
      return catalog_trigger(trigger_id.value_or(kThoTTriggerId));
  }
  return std::nullopt;
}

PromptBundle render_strategy(Strategy strategy, TaskKind task, const Record& record,
                             std::optional<int> trigger_id, const PromptSettings& settings) {
  if (task_kind_of(record) != task) {
    throw Error(ErrorCode::kInvalidArgument, "record '" + record_id_of(record) + "' is not a " +
                                                 std::string(to_string(task)) + " record");
  }
  const auto trigger = resolve_trigger(strategy, trigger_id, settings);
  const StrategyTemplate tmpl = template_for(strategy, task, settings);

  if (task == TaskKind::kRetrievalQA) {
    const auto& qa = std::get<QARecord>(record);
    return build_first_prompt(qa.context, qa.question, trigger, tmpl, qa.record_id);
  }

  if (strategy == Strategy::kRetrieval) {
    throw Error(ErrorCode::kUnsupportedCombination, "the Retrieval strategy has no MTCR format");
  }
  const auto& conversation = std::get<ConversationRecord>(record);
  PromptBundle bundle;
  bundle.rendered = join_slots({tmpl.instruction, trigger ? trigger->text : std::string{},
                                render_conversation(conversation)},
                               tmpl.joiner);
  bundle.strategy = strategy;
  bundle.phase = Phase::kFirst;
  if (trigger) bundle.trigger_id = trigger->id;
  bundle.record_id = conversation.record_id;
  return bundle;
}

}  // namespace thot
