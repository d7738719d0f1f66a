#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thot/domain.hpp"
#include "thot/metrics.hpp"

namespace thot {

enum class ReportShape {
  kMethods,    // method x backend, EM or judge columns, one table per dataset
  kTriggers,   // one row per ThoT trigger id with the reference EM alongside
  kPositions,  // method x backend per gold position
};

struct GroupKey {
  std::string dataset;
  Strategy strategy = Strategy::kVanilla;
  std::optional<int> trigger_id;
  std::optional<int> position_index;
  std::string backend_id;

  auto operator<=>(const GroupKey&) const = default;
};

struct GroupStats {
  TaskKind task = TaskKind::kRetrievalQA;
  std::vector<int> em;
  std::vector<std::optional<JudgeScores>> judge;
  std::size_t failed = 0;
  std::size_t skipped = 0;

  std::size_t scored() const;
  std::size_t excluded() const;
  std::optional<double> em_mean() const;
  JudgeAggregate judge_mean() const;
};

struct LedgerSummary {
  std::map<GroupKey, GroupStats> groups;
  std::vector<std::string> dataset_order;  // first appearance in the ledger
  std::vector<std::string> backend_order;
};

LedgerSummary summarize(std::span<const RecordOutcome> ledger);

struct RenderedReport {
  std::string markdown;
  std::string csv;
};

inline constexpr std::string_view kReportCsvHeader = "method,backend,metric,value,n,excluded,dataset,trigger_id,position";

// Deterministic rendering; scores to three decimals. Throws kEmptyLedger on
// an empty ledger.
RenderedReport report(std::span<const RecordOutcome> ledger, ReportShape shape);

// Every shape that has data, with one CSV covering all groups.
RenderedReport render_all_reports(std::span<const RecordOutcome> ledger);

}  // namespace thot
