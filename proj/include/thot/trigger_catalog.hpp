#pragma once

#include <vector>

#include "thot/domain.hpp"

namespace thot {

inline constexpr int kThoTTriggerId = 30;
inline constexpr int kCustomTriggerId = 0;

// The 30 context-walkthrough trigger sentences with their reported EM,
// ordered by id (1..30). Wrapped table rows are joined with one space.
const std::vector<TriggerSentence>& trigger_catalog();

// Throws Error(kInvalidArgument) for ids outside 1..30.
const TriggerSentence& catalog_trigger(int id);

// The chain-of-thought cue, carried as a custom (id 0) trigger.
TriggerSentence cot_trigger();

}  // namespace thot
