#include "thot/metrics.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <fmt/format.h>
#include <omp.h>

#include <array>
#include <cctype>
#include <numeric>
#include <regex>

#include "thot/errors.hpp"

namespace thot {
namespace {

bool is_article(std::string_view word) { return word == "a" || word == "an" || word == "the"; }

bool strip_char(UChar32 c) {
  if (c < 128) return std::ispunct(static_cast<int>(c)) != 0;
  return u_ispunct(c) != 0;
}

void check_gold_lists(std::span<const std::string> predictions,
                      std::span<const std::vector<std::string>> gold_aliases) {
  if (predictions.size() != gold_aliases.size()) {
    throw Error(ErrorCode::kInvalidArgument, "predictions and gold lists differ in length");
  }
  for (const auto& aliases : gold_aliases) {
    if (aliases.empty()) throw Error(ErrorCode::kEmptyGold, "a gold alias list is empty");
  }
}

const std::regex& score_pattern(std::size_t which) {
  static const std::array<std::regex, 3> patterns = {
      std::regex(R"(relevance\W*?[:=]\W*?(-?\d+(?:\.\d+)?))", std::regex::icase),
      std::regex(R"(accuracy\W*?[:=]\W*?(-?\d+(?:\.\d+)?))", std::regex::icase),
      std::regex(R"(persona\W*?[:=]\W*?(-?\d+(?:\.\d+)?))", std::regex::icase),
  };
  return patterns[which];
}

constexpr std::array<std::string_view, 3> kScoreLabels = {"Relevance", "Accuracy", "Persona"};

}  // namespace

std::string normalize_answer(std::string_view text, const EmOptions& options) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::kInvalidArgument, "ICU NFKC normalizer unavailable");

  icu::UnicodeString input =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString folded = nfkc->normalize(input, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::kInvalidArgument, "NFKC normalization failed");
  folded.toLower(icu::Locale::getRoot());

  icu::UnicodeString cleaned;
  for (int32_t i = 0; i < folded.length();) {
    const UChar32 c = folded.char32At(i);
    i += U16_LENGTH(c);
    if (strip_char(c)) continue;
    if (u_isUWhiteSpace(c)) {
      cleaned.append(static_cast<UChar>(' '));
    } else {
      cleaned.append(c);
    }
  }
  std::string utf8;
  cleaned.toUTF8String(utf8);

  std::string out;
  std::size_t pos = 0;
  while (pos < utf8.size()) {
    const auto start = utf8.find_first_not_of(' ', pos);
    if (start == std::string::npos) break;
    auto end = utf8.find(' ', start);
    if (end == std::string::npos) end = utf8.size();
    const std::string_view word(utf8.data() + start, end - start);
    if (!(options.strip_articles && is_article(word))) {
      if (!out.empty()) out.push_back(' ');
      out.append(word);
    }
    pos = end;
  }
  return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> gold_aliases,
                const EmOptions& options) {
  if (gold_aliases.empty()) throw Error(ErrorCode::kEmptyGold, "no gold aliases given");
  const std::string haystack = " " + normalize_answer(prediction, options) + " ";
  for (const auto& alias : gold_aliases) {
    const std::string needle = normalize_answer(alias, options);
    if (needle.empty()) continue;
    if (haystack.find(" " + needle + " ") != std::string::npos) return 1;
  }
  return 0;
}

double aggregate_em(std::span<const int> outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::kEmptyOutcomes, "no outcomes to aggregate");
  const long total = std::accumulate(outcomes.begin(), outcomes.end(), 0L);
  return static_cast<double>(total) / static_cast<double>(outcomes.size());
}

std::string format_score(double value) { return fmt::format("{:.3f}", value); }

std::vector<int> score_em_batch_serial(std::span<const std::string> predictions,
                                       std::span<const std::vector<std::string>> gold_aliases,
                                       const EmOptions& options) {
  check_gold_lists(predictions, gold_aliases);
  std::vector<int> out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out[i] = exact_match(predictions[i], gold_aliases[i], options);
  }
  return out;
}

std::vector<int> score_em_batch(std::span<const std::string> predictions,
                                std::span<const std::vector<std::string>> gold_aliases,
                                const EmOptions& options, int num_threads) {
  if (num_threads <= 1) return score_em_batch_serial(predictions, gold_aliases, options);
  check_gold_lists(predictions, gold_aliases);
  std::vector<int> out(predictions.size());
  const auto n = static_cast<std::ptrdiff_t>(predictions.size());
#pragma omp parallel for num_threads(num_threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = exact_match(predictions[k], gold_aliases[k], options);
  }
  return out;
}

std::string_view default_judge_template() {
  return "You are grading a reply written for Speaker2 in a multi-turn conversation.\n"
         "Known condition, Speaker2's persona:\n"
         "{persona}\n"
         "Reply written for Speaker2:\n"
         "{response}\n"
         "Score the reply from 1 (poor) to 5 (excellent) on Relevance to the conversation, "
         "factual Accuracy, and consistency with the Persona.\n"
         "Answer with exactly three lines:\n"
         "Relevance: <score>\n"
         "Accuracy: <score>\n"
         "Persona: <score>";
}

PromptBundle build_judge_prompt(std::span<const std::string> persona, std::string_view response,
                                std::string_view judge_template, Strategy judged_strategy,
                                std::string record_id) {
  if (judge_template.empty()) throw Error(ErrorCode::kMissingTemplate, "judge template is empty");
  if (response.empty()) throw Error(ErrorCode::kMissingResponse, "judge needs a non-empty response");

  static const std::regex placeholder(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  bool saw_persona = false;
  bool saw_response = false;
  const std::string tmpl(judge_template);
  for (auto it = std::sregex_iterator(tmpl.begin(), tmpl.end(), placeholder); it != std::sregex_iterator(); ++it) {
    const std::string name = (*it)[1].str();
    if (name == "persona") {
      saw_persona = true;
    } else if (name == "response") {
      saw_response = true;
    } else {
      throw Error(ErrorCode::kMissingTemplate, "judge template placeholder {" + name + "} has no value");
    }
  }
  if (!saw_persona || !saw_response) {
    throw Error(ErrorCode::kMissingTemplate, "judge template must contain {persona} and {response}");
  }

  std::string persona_block;
  for (std::size_t i = 0; i < persona.size(); ++i) {
    if (i > 0) persona_block.push_back('\n');
    persona_block += persona[i];
  }

  // Single left-to-right pass so substituted text is never rescanned.
  std::string rendered;
  std::size_t pos = 0;
  for (auto it = std::sregex_iterator(tmpl.begin(), tmpl.end(), placeholder); it != std::sregex_iterator(); ++it) {
    rendered.append(tmpl, pos, static_cast<std::size_t>(it->position()) - pos);
    rendered += (*it)[1].str() == "persona" ? persona_block : std::string(response);
    pos = static_cast<std::size_t>(it->position() + it->length());
  }
  rendered.append(tmpl, pos);

  PromptBundle bundle;
  bundle.rendered = std::move(rendered);
  bundle.strategy = judged_strategy;
  bundle.phase = Phase::kFirst;
  bundle.record_id = std::move(record_id);
  return bundle;
}

JudgeScores parse_judge_scores(std::string_view judge_text, const JudgeScale& scale) {
  const std::string text(judge_text);
  std::array<double, 3> values{};
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::smatch match;
    if (!std::regex_search(text, match, score_pattern(k))) {
      throw Error(ErrorCode::kUnparseableJudgeOutput,
                  "no numeric " + std::string(kScoreLabels[k]) + " score in judge output");
    }
    values[k] = std::stod(match[1].str());
    if (!scale.contains(values[k])) {
      throw Error(ErrorCode::kUnparseableJudgeOutput,
                  std::string(kScoreLabels[k]) + " score " + match[1].str() + " is outside the scale");
    }
  }
  return JudgeScores::from_components(values[0], values[1], values[2]);
}

JudgeAggregate aggregate_judge(std::span<const std::optional<JudgeScores>> scores) {
  JudgeAggregate agg;
  for (const auto& s : scores) {
    if (!s) {
      ++agg.rejected;
      continue;
    }
    agg.relevance += s->relevance;
    agg.accuracy += s->accuracy;
    agg.persona += s->persona;
    ++agg.scored;
  }
  if (agg.scored > 0) {
    const auto n = static_cast<double>(agg.scored);
    agg.relevance /= n;
    agg.accuracy /= n;
    agg.persona /= n;
    agg.average = (agg.relevance + agg.accuracy + agg.persona) / 3.0;
  }
  return agg;
}

}  // namespace thot
