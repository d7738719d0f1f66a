#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thot/domain.hpp"

namespace thot {

struct EmOptions {
  bool strip_articles = true;

  bool operator==(const EmOptions&) const = default;
};

// NFKC, lowercase, punctuation removed, articles (a/an/the) dropped as whole
// words, whitespace collapsed and trimmed.
std::string normalize_answer(std::string_view text, const EmOptions& options = {});

// 1 iff some normalized alias occurs word-aligned inside the normalized
// prediction. Aliases that normalize to nothing never match.
// Throws Error(kEmptyGold) when gold_aliases is empty.
int exact_match(std::string_view prediction, std::span<const std::string> gold_aliases,
                const EmOptions& options = {});

// Mean of 0/1 outcomes. Throws Error(kEmptyOutcomes) on empty input.
double aggregate_em(std::span<const int> outcomes);

// Fixed three-decimal rendering used in every report.
std::string format_score(double value);

// Batch EM. The OpenMP kernel and the serial reference must agree exactly;
// num_threads <= 1 runs the serial path.
std::vector<int> score_em_batch(std::span<const std::string> predictions,
                                std::span<const std::vector<std::string>> gold_aliases,
                                const EmOptions& options, int num_threads);
std::vector<int> score_em_batch_serial(std::span<const std::string> predictions,
                                       std::span<const std::vector<std::string>> gold_aliases,
                                       const EmOptions& options = {});

struct JudgeScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const JudgeScale&) const = default;
};

// Default judging rubric. Our own wording; replace it from the run config.
std::string_view default_judge_template();

// Fills {persona} (one sentence per line) and {response}. The template must
// use both placeholders and nothing else in braces, otherwise kMissingTemplate.
// An empty response is kMissingResponse.
PromptBundle build_judge_prompt(std::span<const std::string> persona, std::string_view response,
                                 std::string_view judge_template, Strategy judged_strategy = Strategy::kThoT,
                                 std::string record_id = {});

// Reads "Relevance: n", "Accuracy: n", "Persona: n" (case-insensitive, any
// order). Missing, non-numeric or out-of-scale values raise
// Error(kUnparseableJudgeOutput).
JudgeScores parse_judge_scores(std::string_view judge_text, const JudgeScale& scale = {});

struct JudgeAggregate {
  double relevance = 0.0;
  double accuracy = 0.0;
  double persona = 0.0;
  double average = 0.0;
  std::size_t scored = 0;
  std::size_t rejected = 0;
};

// Means over the scored entries; nullopt entries count as rejected.
JudgeAggregate aggregate_judge(std::span<const std::optional<JudgeScores>> scores);

}  // namespace thot
