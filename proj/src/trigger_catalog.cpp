#include "thot/trigger_catalog.hpp"

#include <string>

#include "thot/errors.hpp"

namespace thot {

const std::vector<TriggerSentence>& trigger_catalog() {
  static const std::vector<TriggerSentence> catalog = {
      {1, "Let's read through the document section by section, analyzing each part carefully as we go.", 0.43},
      {2, "Take me through this long document step-by-step, making sure not to miss any important details.", 0.47},
      {3, "Divide the document into manageable parts and guide me through each one, providing insights as we move along.", 0.51},
      {4, "Analyze this extensive document in sections, summarizing each one and noting any key points.", 0.47},
      {5, "Let's go through this document piece by piece, paying close attention to each section.", 0.50},
      {6, "Examine the document in chunks, evaluating each part critically before moving to the next.", 0.49},
      {7, "Walk me through this lengthy document segment by segment, focusing on each part's significance.", 0.52},
      {8, "Let's dissect this document bit by bit, making sure to understand the nuances of each section.", 0.45},
      {9, "Systematically work through this document, summarizing and analyzing each portion as we go.", 0.45},
      {10, "Navigate through this long document by breaking it into smaller parts and summarizing each, so we don't miss anything.", 0.48},
      {11, "Let's explore the context step-by-step, carefully examining each segment.", 0.44},
      {12, "Take me through the context bit by bit, making sure we capture all important aspects.", 0.49},
      {13, "Let's navigate through the context section by section, identifying key elements in each part.", 0.47},
      {14, "Systematically go through the context, focusing on each part individually.", 0.46},
      {15, "Let's dissect the context into smaller pieces, reviewing each one for its importance and relevance.", 0.47},
      {16, "Analyze the context by breaking it down into sections, summarizing each as we move forward.", 0.49},
      {17, "Guide me through the context part by part, providing insights along the way.", 0.52},
      {18, "Examine each segment of the context meticulously, and let's discuss the findings.", 0.44},
      {19, "Approach the context incrementally, taking the time to understand each portion fully.", 0.42},
      {20, "Carefully analyze the context piece by piece, highlighting relevant points for each question.", 0.47},
      {21, "In a step-by-step manner, go through the context, surfacing important information that could be useful.", 0.53},
      {22, "Methodically examine the context, focusing on key segments that may answer the query.", 0.45},
      {23, "Progressively sift through the context, ensuring we capture all pertinent details.", 0.46},
      {24, "Navigate through the context incrementally, identifying and summarizing relevant portions.", 0.48},
      {25, "Let's scrutinize the context in chunks, keeping an eye out for information that answers our queries.", 0.42},
      {26, "Take a modular approach to the context, summarizing each part before drawing any conclusions.", 0.47},
      {27, "Read the context in sections, concentrating on gathering insights that answer the question at hand.", 0.48},
      {28, "Proceed through the context systematically, zeroing in on areas that could provide the answers we're seeking.", 0.49},
      {29, "Let's take a segmented approach to the context, carefully evaluating each part for its relevance to the questions posed.", 0.39},
      {30, "Walk me through this context in manageable parts step by step, summarizing and analyzing as we go.", 0.55},
  };
  return catalog;
}

const TriggerSentence& catalog_trigger(int id) {
  const auto& catalog = trigger_catalog();
  if (id < 1 || id > static_cast<int>(catalog.size())) {
    throw Error(ErrorCode::kInvalidArgument, "trigger id " + std::to_string(id) + " is not in the catalog");
  }
  return catalog[static_cast<std::size_t>(id - 1)];
}

TriggerSentence cot_trigger() { return {kCustomTriggerId, "Let's think step by step.", std::nullopt}; }

}  // namespace thot
