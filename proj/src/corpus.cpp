#include "thot/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

#include "thot/errors.hpp"
#include "thot/serialization.hpp"

namespace thot {
namespace {

std::string at_line(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> read_answers(const json& value, const std::string& where) {
  if (value.is_array()) {
    std::vector<std::string> out;
    for (const auto& item : value) {
      if (!item.is_string()) throw Error(ErrorCode::kSchemaError, where + "answer entries must be strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }
  if (value.is_string()) {
    const std::string text = value.get<std::string>();
    const json nested = json::parse(text, nullptr, false);
    if (!nested.is_discarded() && nested.is_array()) return read_answers(nested, where);
    return {text};
  }
  throw Error(ErrorCode::kSchemaError, where + "answers must be a list or a string");
}

Passage read_passage(const json& value, const FieldMapping& m, std::size_t index, const std::string& where) {
  Passage p;
  p.id = "p" + std::to_string(index);
  if (value.is_string()) {
    p.text = value.get<std::string>();
    return p;
  }
  if (!value.is_object()) throw Error(ErrorCode::kSchemaError, where + "passages must be objects or strings");
  if (const auto it = value.find(m.passage_id); it != value.end() && !it->is_null()) {
    p.id = it->is_string() ? it->get<std::string>() : it->dump();
  }
  const auto text = value.find(m.passage_text);
  if (text == value.end() || !text->is_string()) {
    throw Error(ErrorCode::kSchemaError, where + "passage " + std::to_string(index) + " lacks '" + m.passage_text + "'");
  }
  p.text = text->get<std::string>();
  if (!m.passage_title.empty()) {
    if (const auto title = value.find(m.passage_title); title != value.end() && title->is_string() &&
                                                       !title->get<std::string>().empty()) {
      p.text = title->get<std::string>() + ": " + p.text;
    }
  }
  if (!m.passage_gold.empty()) {
    if (const auto gold = value.find(m.passage_gold); gold != value.end() && gold->is_boolean()) {
      p.is_gold = gold->get<bool>();
    }
  }
  return p;
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  // Rejection sampling keeps the draw unbiased and independent of the
  // standard library's distribution implementation.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

std::string fill(std::string text, std::string_view placeholder, std::string_view value) {
  for (auto pos = text.find(placeholder); pos != std::string::npos; pos = text.find(placeholder, pos + value.size())) {
    text.replace(pos, placeholder.size(), value);
  }
  return text;
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "above", "after", "again", "all", "am", "an", "and", "any", "are", "as", "at", "be",
      "because", "been", "before", "being", "both", "but", "by", "can", "could", "did", "do", "does",
      "doing", "don", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
      "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "im",
      "in", "into", "is", "it", "its", "itself", "just", "ll", "me", "more", "most", "my", "myself", "no",
      "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves",
      "out", "over", "own", "re", "s", "same", "she", "should", "so", "some", "such", "t", "than", "that",
      "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
      "through", "to", "too", "under", "until", "up", "ve", "very", "was", "we", "were", "what", "when",
      "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
      "yourself", "yourselves", "yes", "yeah", "oh", "really", "also", "like", "well", "get", "got"};
  return words;
}

}  // namespace

FieldMapping FieldMapping::preset(std::string_view name) {
  if (name == "canonical") return FieldMapping{};
  if (name == "popqa" || name == "entityq") {
    FieldMapping m;
    m.record_id = "id";
    m.question = "question";
    m.answers = "answers";
    m.passages = "ctxs";
    m.passage_id = "id";
    m.passage_text = "text";
    m.passage_title = "title";
    m.passage_gold = "";
    return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown field mapping preset '" + std::string(name) + "'");
}

std::vector<QARecord> parse_qa_lines(std::istream& in, const FieldMapping& m, std::string_view source) {
  std::vector<QARecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = at_line(source, line_no);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kParseError, where + "not a JSON object");

    const auto question = j.find(m.question);
    if (question == j.end() || !question->is_string()) {
      throw Error(ErrorCode::kSchemaError, where + "missing question field '" + m.question + "'");
    }
    const auto answers = j.find(m.answers);
    if (answers == j.end() || answers->is_null()) {
      throw Error(ErrorCode::kSchemaError, where + "missing answers field '" + m.answers + "'");
    }

    QARecord r;
    if (const auto id = j.find(m.record_id); id != j.end() && !id->is_null()) {
      r.record_id = id->is_string() ? id->get<std::string>() : id->dump();
    } else {
      r.record_id = "q" + std::to_string(records.size());
    }
    try {
      r.question = Query(question->get<std::string>());
    } catch (const Error&) {
      throw Error(ErrorCode::kSchemaError, where + "question is empty");
    }
    r.gold_aliases = read_answers(*answers, where);

    std::vector<Passage> passages;
    if (const auto ps = j.find(m.passages); ps != j.end() && !ps->is_null()) {
      if (!ps->is_array()) throw Error(ErrorCode::kSchemaError, where + "'" + m.passages + "' must be a list");
      for (std::size_t i = 0; i < ps->size(); ++i) passages.push_back(read_passage((*ps)[i], m, i, where));
    }
    try {
      r.context = ChaoticContext(std::move(passages));
      validate(r);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaError, where + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<QARecord> load_qa_dataset(const std::filesystem::path& path, const FieldMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  return parse_qa_lines(in, mapping, path.string());
}

void write_qa_dataset(std::ostream& out, std::span<const QARecord> records) {
  for (const auto& r : records) out << json(r).dump() << '\n';
}

std::vector<ConversationRecord> parse_conversation_lines(std::istream& in, std::string_view source,
                                                         bool require_response) {
  std::vector<ConversationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = at_line(source, line_no);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kParseError, where + "not a JSON object");
    ConversationRecord r;
    try {
      if (!j.contains("record_id")) {
        json copy = j;
        copy["record_id"] = "c" + std::to_string(records.size());
        r = copy.get<ConversationRecord>();
      } else {
        r = j.get<ConversationRecord>();
      }
      validate(r);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaError, where + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchemaError, where + e.what());
    }
    if (require_response && r.speaker1_response.empty()) {
      throw Error(ErrorCode::kSchemaError, where + "missing speaker1_response");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<ConversationRecord> load_conversation_dataset(const std::filesystem::path& path, bool require_response) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  return parse_conversation_lines(in, path.string(), require_response);
}

void write_conversation_dataset(std::ostream& out, std::span<const ConversationRecord> records) {
  for (const auto& r : records) out << json(r).dump() << '\n';
}

std::vector<std::size_t> sample_indices(std::size_t total, std::size_t n, std::uint64_t seed) {
  if (n > total) {
    throw Error(ErrorCode::kSampleTooLarge,
                "cannot sample " + std::to_string(n) + " of " + std::to_string(total) + " records");
  }
  std::vector<std::size_t> pool(total);
  for (std::size_t i = 0; i < total; ++i) pool[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded_draw(rng, total - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

QARecord place_gold_at(const QARecord& record, std::size_t index) {
  const std::size_t gold = record.context.gold_count();
  if (gold == 0) throw Error(ErrorCode::kNoGoldPassage, "record '" + record.record_id + "' has no gold passage");
  if (gold > 1) {
    throw Error(ErrorCode::kMultipleGoldPassages, "record '" + record.record_id + "' has " + std::to_string(gold) +
                                                      " gold passages");
  }
  const auto& passages = record.context.passages();
  if (index >= passages.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "position " + std::to_string(index) + " with " +
                                                 std::to_string(passages.size()) + " passages");
  }
  std::vector<Passage> reordered = passages;
  const auto from = static_cast<std::ptrdiff_t>(*record.context.single_gold_index());
  const auto to = static_cast<std::ptrdiff_t>(index);
  if (from < to) {
    std::rotate(reordered.begin() + from, reordered.begin() + from + 1, reordered.begin() + to + 1);
  } else if (from > to) {
    std::rotate(reordered.begin() + to, reordered.begin() + from, reordered.begin() + from + 1);
  }
  QARecord out = record;
  out.context = ChaoticContext(std::move(reordered));
  return out;
}

ConstructionPrompts ConstructionPrompts::defaults() {
  return ConstructionPrompts{
      "Here is a conversation between Speaker1 and Speaker2.\n{conversation}\n"
      "Speaker2's persona:\n{persona}\n"
      "Write the next message from Speaker1. It should ask about or build on something Speaker2 "
      "could answer from their persona, without quoting the persona.",
      "Here is a conversation between Speaker1 and Speaker2.\n{conversation}\n"
      "Draft of Speaker1's next message:\n{draft}\n"
      "Rewrite the draft so it reads naturally and stays on the conversation's topic. "
      "Reply with the final Speaker1 message only."};
}

std::string render_turns(std::span<const Turn> turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += turns[i].speaker == Speaker::kS1 ? "Speaker1: " : "Speaker2: ";
    out += turns[i].utterance;
  }
  return out;
}

std::string build_mtcr_candidate(std::span<const Turn> conversation, std::span<const std::string> persona,
                                 Backend& backend, const ConstructionPrompts& prompts) {
  if (persona.empty()) throw Error(ErrorCode::kPrecondition, "MTCR construction needs Speaker2's persona");
  if (prompts.stage1.empty() || prompts.stage2.empty()) {
    throw Error(ErrorCode::kPrecondition, "both construction stage templates are required");
  }
  std::string persona_block;
  for (std::size_t i = 0; i < persona.size(); ++i) {
    if (i > 0) persona_block.push_back('\n');
    persona_block += persona[i];
  }
  const std::string turns = render_turns(conversation);

  PromptBundle stage1;
  stage1.rendered = fill(fill(prompts.stage1, "{conversation}", turns), "{persona}", persona_block);
  stage1.strategy = Strategy::kVanilla;
  const std::string draft = backend.complete(stage1).text;

  PromptBundle stage2;
  stage2.rendered = fill(fill(prompts.stage2, "{conversation}", turns), "{draft}", draft);
  stage2.strategy = Strategy::kVanilla;
  return backend.complete(stage2).text;
}

std::string_view to_string(ScreenVerdict::Kind kind) {
  switch (kind) {
    case ScreenVerdict::Kind::kPass: return "pass";
    case ScreenVerdict::Kind::kPersonaLeakage: return "persona_leakage";
    case ScreenVerdict::Kind::kIrrelevance: return "irrelevance";
  }
  return "?";
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string word;
  const auto flush = [&] {
    if (!word.empty() && !stopwords().contains(word) && seen.insert(word).second) out.push_back(word);
    word.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (c != '\'') {
      flush();
    }
  }
  flush();
  return out;
}

ScreenVerdict screen_mtcr(std::string_view candidate, std::span<const std::string> persona,
                          std::span<const Turn> conversation, const ScreenOptions& options) {
  const auto words = content_words(candidate);
  if (words.empty()) return {ScreenVerdict::Kind::kIrrelevance, "candidate has no content words"};
  const std::unordered_set<std::string> candidate_words(words.begin(), words.end());

  for (const auto& sentence : persona) {
    const auto persona_words = content_words(sentence);
    if (persona_words.empty()) continue;
    const auto shared = std::count_if(persona_words.begin(), persona_words.end(),
                                      [&](const std::string& w) { return candidate_words.contains(w); });
    const double ratio = static_cast<double>(shared) / static_cast<double>(persona_words.size());
    if (ratio >= options.leakage_threshold) {
      return {ScreenVerdict::Kind::kPersonaLeakage, "repeats persona sentence: " + sentence};
    }
  }

  const std::size_t window = std::min(options.relevance_window, conversation.size());
  for (std::size_t i = conversation.size() - window; i < conversation.size(); ++i) {
    for (const auto& w : content_words(conversation[i].utterance)) {
      if (candidate_words.contains(w)) return {ScreenVerdict::Kind::kPass, {}};
    }
  }
  return {ScreenVerdict::Kind::kIrrelevance, "shares no content words with the last turns"};
}

MtcrBuildResult build_mtcr_dataset(std::span<const ConversationRecord> conversations, Backend& backend,
                                   const ConstructionPrompts& prompts, const ScreenOptions& options) {
  MtcrBuildResult result;
  for (const auto& conversation : conversations) {
    ConversationRecord record = conversation;
    record.speaker1_response = build_mtcr_candidate(record.turns, record.persona, backend, prompts);
    ScreenVerdict verdict = screen_mtcr(record.speaker1_response, record.persona, record.turns, options);
    if (verdict.passed()) {
      result.accepted.push_back(std::move(record));
    } else {
      result.rejected.emplace_back(std::move(record), std::move(verdict));
    }
  }
  return result;
}

}  // namespace thot
