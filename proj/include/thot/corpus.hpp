#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thot/backend.hpp"
#include "thot/domain.hpp"

namespace thot {

// Names of the source fields for one QA dataset. Empty passage_title or
// passage_gold means the source has no such field.
struct FieldMapping {
  std::string record_id = "record_id";
  std::string question = "question";
  std::string answers = "gold_aliases";
  std::string passages = "passages";
  std::string passage_id = "id";
  std::string passage_text = "text";
  std::string passage_title;
  std::string passage_gold = "is_gold";

  // "canonical", "popqa" or "entityq"; kInvalidArgument otherwise.
  static FieldMapping preset(std::string_view name);

  bool operator==(const FieldMapping&) const = default;
};

// One JSON object per line. Missing record ids become "q{index}", missing
// passage ids "p{index}" (zero-based). The answers field may be a list, a
// string holding a JSON list, or a single string.
// Errors: kParseError / kSchemaError, both naming the 1-based line.
std::vector<QARecord> parse_qa_lines(std::istream& in, const FieldMapping& mapping = {},
                                     std::string_view source = "<stream>");
std::vector<QARecord> load_qa_dataset(const std::filesystem::path& path, const FieldMapping& mapping = {});
void write_qa_dataset(std::ostream& out, std::span<const QARecord> records);

// Canonical conversation schema: {record_id, turns:[{speaker,text}], persona, speaker1_response}.
std::vector<ConversationRecord> parse_conversation_lines(std::istream& in, std::string_view source = "<stream>",
                                                         bool require_response = true);
std::vector<ConversationRecord> load_conversation_dataset(const std::filesystem::path& path,
                                                          bool require_response = true);
void write_conversation_dataset(std::ostream& out, std::span<const ConversationRecord> records);

// Seeded partial Fisher-Yates over [0, total); returns n distinct indices in
// ascending order. Throws kSampleTooLarge when n > total.
std::vector<std::size_t> sample_indices(std::size_t total, std::size_t n, std::uint64_t seed);

template <typename T>
std::vector<T> sample_test_set(std::span<const T> records, std::size_t n, std::uint64_t seed) {
  std::vector<T> out;
  out.reserve(n);
  for (const auto i : sample_indices(records.size(), n, seed)) out.push_back(records[i]);
  return out;
}

// Moves the single gold passage to `index`; the other passages keep their
// relative order. Errors: kNoGoldPassage, kMultipleGoldPassages, kIndexOutOfRange.
QARecord place_gold_at(const QARecord& record, std::size_t index);

// Two construction stages. stage1 takes {conversation} and {persona}; stage2
// takes {conversation} and {draft} (the stage-1 output). The defaults are
// our own wording.
struct ConstructionPrompts {
  std::string stage1;
  std::string stage2;

  static ConstructionPrompts defaults();
  bool operator==(const ConstructionPrompts&) const = default;
};

// Turns as "Speaker1: ..." lines, no persona.
std::string render_turns(std::span<const Turn> turns);

// Runs both stages in order on the backend and returns the stage-2 text.
// An empty persona is a kPrecondition error.
std::string build_mtcr_candidate(std::span<const Turn> conversation, std::span<const std::string> persona,
                                 Backend& backend, const ConstructionPrompts& prompts);

struct ScreenOptions {
  double leakage_threshold = 0.6;     // fraction of a persona sentence's content words
  std::size_t relevance_window = 2;   // trailing turns that must share a content word

  bool operator==(const ScreenOptions&) const = default;
};

struct ScreenVerdict {
  enum class Kind { kPass, kPersonaLeakage, kIrrelevance };
  Kind kind = Kind::kPass;
  std::string reason;

  bool passed() const { return kind == Kind::kPass; }
};

std::string_view to_string(ScreenVerdict::Kind kind);

// Lowercased alphanumeric tokens minus English stopwords, deduplicated.
std::vector<std::string> content_words(std::string_view text);

ScreenVerdict screen_mtcr(std::string_view candidate, std::span<const std::string> persona,
                          std::span<const Turn> conversation, const ScreenOptions& options = {});

struct MtcrBuildResult {
  std::vector<ConversationRecord> accepted;
  std::vector<std::pair<ConversationRecord, ScreenVerdict>> rejected;
};

// Construction plus screening over a set of conversations. Records carry
// the candidate in speaker1_response.
MtcrBuildResult build_mtcr_dataset(std::span<const ConversationRecord> conversations, Backend& backend,
                                   const ConstructionPrompts& prompts, const ScreenOptions& options = {});

}  // namespace thot
