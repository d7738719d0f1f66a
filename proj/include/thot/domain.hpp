#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace thot {

enum class Strategy { kVanilla, kRetrieval, kCoT, kThoT };
enum class Phase { kFirst, kSecond };
enum class TaskKind { kRetrievalQA, kMTCR };
enum class Speaker { kS1, kS2 };

std::string_view to_string(Strategy s);
std::string_view to_string(Phase p);
std::string_view to_string(TaskKind k);
std::string_view to_string(Speaker s);

// Case-insensitive; accepts "vanilla", "retrieval", "cot", "thot".
Strategy parse_strategy(std::string_view name);
Phase parse_phase(std::string_view name);
// Accepts "retrieval_qa"/"qa" and "mtcr".
TaskKind parse_task_kind(std::string_view name);
Speaker parse_speaker(std::string_view name);

// Strategies that run a reasoning call followed by an answer-extraction call.
constexpr bool is_two_step(Strategy s) { return s == Strategy::kCoT || s == Strategy::kThoT; }

struct Passage {
  std::string id;
  std::string text;
  bool is_gold = false;

  bool operator==(const Passage&) const = default;
};

// Ordered passages handed to the model. Order is meaningful; only the
// explicit permutation helpers in corpus reorder it.
class ChaoticContext {
 public:
  ChaoticContext() = default;
  // Throws Error(kInvalidArgument) on duplicate passage ids.
  explicit ChaoticContext(std::vector<Passage> passages);

  const std::vector<Passage>& passages() const { return passages_; }
  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  std::size_t gold_count() const;
  // Index of the gold passage when exactly one is marked.
  std::optional<std::size_t> single_gold_index() const;

  bool operator==(const ChaoticContext&) const = default;

 private:
  std::vector<Passage> passages_;
};

// Question text, trimmed. Empty text is rejected with kEmptyQuery.
class Query {
 public:
  explicit Query(std::string_view text);

  const std::string& text() const { return text_; }

  bool operator==(const Query&) const = default;

 private:
  std::string text_;
};

struct TriggerSentence {
  int id = 0;  // 1-30 for catalog entries, 0 for custom
  std::string text;
  std::optional<double> reference_em;

  bool operator==(const TriggerSentence&) const = default;
};

struct AnswerTrigger {
  std::string text = "Therefore, the answer:";

  bool operator==(const AnswerTrigger&) const = default;
};

struct PromptBundle {
  std::string rendered;
  Strategy strategy = Strategy::kVanilla;
  Phase phase = Phase::kFirst;
  std::optional<int> trigger_id;
  std::string record_id;

  bool operator==(const PromptBundle&) const = default;
};

struct CompletionResult {
  std::string text;
  std::string request_hash;
  std::string backend_id;
  std::int64_t latency_ms = 0;
  bool from_cache = false;

  bool operator==(const CompletionResult&) const = default;
};

struct QARecord {
  std::string record_id;
  Query question{"?"};
  std::vector<std::string> gold_aliases;
  ChaoticContext context;

  bool operator==(const QARecord&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::kS1;
  std::string utterance;

  bool operator==(const Turn&) const = default;
};

struct ConversationRecord {
  std::string record_id;
  std::vector<Turn> turns;
  std::vector<std::string> persona;  // Speaker2's persona sentences
  std::string speaker1_response;

  bool operator==(const ConversationRecord&) const = default;
};

using Record = std::variant<QARecord, ConversationRecord>;

const std::string& record_id_of(const Record& record);
TaskKind task_kind_of(const Record& record);

// Validation used by the loaders; throws Error(kSchemaError).
void validate(const QARecord& record);
void validate(const ConversationRecord& record);

struct JudgeScores {
  double relevance = 0.0;
  double accuracy = 0.0;
  double persona = 0.0;
  double average = 0.0;

  static JudgeScores from_components(double relevance, double accuracy, double persona);

  bool operator==(const JudgeScores&) const = default;
};

// Identifies one experiment cell. dataset and backend_id widen the cell
// tuple so multi-dataset, multi-backend runs share one ledger.
struct CellKey {
  std::string dataset;
  std::string backend_id;
  std::string record_id;
  Strategy strategy = Strategy::kVanilla;
  std::optional<int> trigger_id;
  std::optional<int> position_index;

  auto operator<=>(const CellKey&) const = default;
  bool operator==(const CellKey&) const = default;
};

std::string describe(const CellKey& key);

enum class OutcomeStatus { kOk, kFailed, kSkipped };
std::string_view to_string(OutcomeStatus s);
OutcomeStatus parse_outcome_status(std::string_view name);

struct OutcomeScores {
  std::optional<int> em;
  std::optional<JudgeScores> judge;
  bool judge_rejected = false;

  bool operator==(const OutcomeScores&) const = default;
};

struct RecordOutcome {
  CellKey key;
  TaskKind task = TaskKind::kRetrievalQA;
  OutcomeStatus status = OutcomeStatus::kOk;
  std::string error;
  std::string first_response;
  std::string final_answer;
  OutcomeScores scores;
  int backend_calls = 0;
  std::int64_t started_at_ms = 0;
  std::int64_t finished_at_ms = 0;

  bool operator==(const RecordOutcome&) const = default;
};

}  // namespace thot
