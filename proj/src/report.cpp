#include "thot/report.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "thot/errors.hpp"
#include "thot/trigger_catalog.hpp"

namespace thot {
namespace {

std::size_t index_in(const std::vector<std::string>& order, const std::string& value) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), value) - order.begin());
}

// Groups in presentation order: dataset and backend by first appearance,
// then strategy, trigger and position ascending.
std::vector<const std::pair<const GroupKey, GroupStats>*> ordered_groups(const LedgerSummary& s) {
  std::vector<const std::pair<const GroupKey, GroupStats>*> out;
  for (const auto& g : s.groups) out.push_back(&g);
  std::sort(out.begin(), out.end(), [&](const auto* a, const auto* b) {
    const auto ka = std::make_tuple(index_in(s.dataset_order, a->first.dataset), a->first.strategy,
                                    a->first.trigger_id, a->first.position_index,
                                    index_in(s.backend_order, a->first.backend_id));
    const auto kb = std::make_tuple(index_in(s.dataset_order, b->first.dataset), b->first.strategy,
                                    b->first.trigger_id, b->first.position_index,
                                    index_in(s.backend_order, b->first.backend_id));
    return ka < kb;
  });
  return out;
}

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string{}; }

std::string value_or_na(const std::optional<double>& v) { return v ? format_score(*v) : std::string("NA"); }

void append_csv_rows(std::string& csv, const GroupKey& key, const GroupStats& stats) {
  const auto row = [&](std::string_view metric, const std::optional<double>& value) {
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(key.strategy), key.backend_id, metric,
                       value_or_na(value), stats.scored(), stats.excluded(), key.dataset, opt_int(key.trigger_id),
                       opt_int(key.position_index));
  };
  if (stats.task == TaskKind::kRetrievalQA) {
    row("em", stats.em_mean());
    return;
  }
  const JudgeAggregate agg = stats.judge_mean();
  const auto v = [&](double x) { return agg.scored > 0 ? std::optional<double>(x) : std::nullopt; };
  row("relevance", v(agg.relevance));
  row("accuracy", v(agg.accuracy));
  row("persona", v(agg.persona));
  row("average", v(agg.average));
}

struct RowId {
  Strategy strategy;
  std::optional<int> trigger_id;
  auto operator<=>(const RowId&) const = default;
};

std::string method_label(const RowId& row, bool several_triggers) {
  std::string label(to_string(row.strategy));
  if (several_triggers && row.strategy == Strategy::kThoT && row.trigger_id) label += " #" + std::to_string(*row.trigger_id);
  return label;
}

std::string table_separator(std::size_t columns) {
  std::string out = "|";
  for (std::size_t i = 0; i < columns; ++i) out += "---|";
  return out + "\n";
}

// Method x backend table over the groups accepted by `pick`.
template <typename Pick>
std::string method_table(const LedgerSummary& s, const std::string& dataset, Pick pick) {
  std::set<RowId> rows;
  std::set<int> thot_triggers;
  TaskKind task = TaskKind::kRetrievalQA;
  std::size_t excluded = 0;
  for (const auto& [key, stats] : s.groups) {
    if (key.dataset != dataset || !pick(key)) continue;
    rows.insert(RowId{key.strategy, key.trigger_id});
    if (key.strategy == Strategy::kThoT && key.trigger_id) thot_triggers.insert(*key.trigger_id);
    task = stats.task;
    excluded += stats.excluded();
  }
  if (rows.empty()) return {};

  std::vector<std::string> backends;
  for (const auto& b : s.backend_order) {
    const bool used = std::any_of(s.groups.begin(), s.groups.end(), [&](const auto& g) {
      return g.first.dataset == dataset && g.first.backend_id == b && pick(g.first);
    });
    if (used) backends.push_back(b);
  }

  std::string md = "| Method |";
  std::size_t columns = 1;
  for (const auto& b : backends) {
    if (task == TaskKind::kRetrievalQA) {
      md += " " + b + " |";
      ++columns;
    } else {
      md += fmt::format(" {0} Relevance | {0} Accuracy | {0} Persona | {0} Average |", b);
      columns += 4;
    }
  }
  md += "\n" + table_separator(columns);

  const bool several = thot_triggers.size() > 1;
  for (const auto& row : rows) {
    md += "| " + method_label(row, several) + " |";
    for (const auto& b : backends) {
      const GroupStats* stats = nullptr;
      for (const auto& [key, st] : s.groups) {
        if (key.dataset == dataset && key.backend_id == b && key.strategy == row.strategy &&
            key.trigger_id == row.trigger_id && pick(key)) {
          stats = &st;
          break;
        }
      }
      if (task == TaskKind::kRetrievalQA) {
        md += " " + (stats ? value_or_na(stats->em_mean()) : std::string("-")) + " |";
      } else if (!stats || stats->judge_mean().scored == 0) {
        md += " - | - | - | - |";
      } else {
        const auto agg = stats->judge_mean();
        md += fmt::format(" {} | {} | {} | {} |", format_score(agg.relevance), format_score(agg.accuracy),
                          format_score(agg.persona), format_score(agg.average));
      }
    }
    md += "\n";
  }
  if (excluded > 0) md += fmt::format("\nExcluded cells (failed, skipped or unscorable): {}\n", excluded);
  return md;
}

std::string methods_markdown(const LedgerSummary& s) {
  std::string md;
  for (const auto& dataset : s.dataset_order) {
    const auto table = method_table(s, dataset, [](const GroupKey& k) { return !k.position_index; });
    if (table.empty()) continue;
    const bool qa = std::any_of(s.groups.begin(), s.groups.end(), [&](const auto& g) {
      return g.first.dataset == dataset && g.second.task == TaskKind::kRetrievalQA;
    });
    md += fmt::format("## {}: {}\n\n{}\n", dataset, qa ? "exact match" : "judge scores", table);
  }
  return md;
}

std::string triggers_markdown(const LedgerSummary& s) {
  std::string md;
  for (const auto& dataset : s.dataset_order) {
    std::set<int> triggers;
    std::vector<std::string> backends;
    for (const auto& [key, stats] : s.groups) {
      if (key.dataset != dataset || key.strategy != Strategy::kThoT || key.position_index || !key.trigger_id ||
          stats.task != TaskKind::kRetrievalQA) {
        continue;
      }
      triggers.insert(*key.trigger_id);
    }
    if (triggers.empty()) continue;
    for (const auto& b : s.backend_order) {
      if (s.groups.count(GroupKey{dataset, Strategy::kThoT, *triggers.begin(), std::nullopt, b})) backends.push_back(b);
    }
    md += fmt::format("## {}: trigger sweep\n\n| No. | Template | Reference EM |", dataset);
    for (const auto& b : backends) md += " " + b + " |";
    md += "\n" + table_separator(3 + backends.size());
    for (const int id : triggers) {
      const bool in_catalog = id >= 1 && id <= static_cast<int>(trigger_catalog().size());
      const TriggerSentence* t = in_catalog ? &catalog_trigger(id) : nullptr;
      md += fmt::format("| {} | {} | {} |", id, t ? t->text : std::string("(custom)"),
                        t && t->reference_em ? fmt::format("{:.2f}", *t->reference_em) : std::string("-"));
      for (const auto& b : backends) {
        const auto it = s.groups.find(GroupKey{dataset, Strategy::kThoT, id, std::nullopt, b});
        md += " " + (it != s.groups.end() ? value_or_na(it->second.em_mean()) : std::string("-")) + " |";
      }
      md += "\n";
    }
    md += "\n";
  }
  return md;
}

std::string positions_markdown(const LedgerSummary& s) {
  std::string md;
  for (const auto& dataset : s.dataset_order) {
    std::set<int> positions;
    for (const auto& [key, stats] : s.groups) {
      if (key.dataset == dataset && key.position_index) positions.insert(*key.position_index);
    }
    for (const int p : positions) {
      const auto table = method_table(s, dataset, [p](const GroupKey& k) { return k.position_index == p; });
      md += fmt::format("## {}: gold passage at position {}\n\n{}\n", dataset, p, table);
    }
  }
  return md;
}

template <typename Pick>
std::string csv_for(const LedgerSummary& s, Pick pick) {
  std::string csv(kReportCsvHeader);
  csv += "\n";
  for (const auto* g : ordered_groups(s)) {
    if (pick(g->first, g->second)) append_csv_rows(csv, g->first, g->second);
  }
  return csv;
}

}  // namespace

std::size_t GroupStats::scored() const {
  return task == TaskKind::kRetrievalQA
             ? em.size()
             : static_cast<std::size_t>(std::count_if(judge.begin(), judge.end(), [](const auto& j) { return j.has_value(); }));
}

std::size_t GroupStats::excluded() const {
  const std::size_t rejected = task == TaskKind::kMTCR ? judge.size() - scored() : 0;
  return failed + skipped + rejected;
}

std::optional<double> GroupStats::em_mean() const {
  if (em.empty()) return std::nullopt;
  return aggregate_em(em);
}

JudgeAggregate GroupStats::judge_mean() const { return aggregate_judge(judge); }

LedgerSummary summarize(std::span<const RecordOutcome> ledger) {
  LedgerSummary s;
  for (const auto& o : ledger) {
    if (std::find(s.dataset_order.begin(), s.dataset_order.end(), o.key.dataset) == s.dataset_order.end()) {
      s.dataset_order.push_back(o.key.dataset);
    }
    if (std::find(s.backend_order.begin(), s.backend_order.end(), o.key.backend_id) == s.backend_order.end()) {
      s.backend_order.push_back(o.key.backend_id);
    }
    GroupStats& g = s.groups[GroupKey{o.key.dataset, o.key.strategy, o.key.trigger_id, o.key.position_index,
                                      o.key.backend_id}];
    g.task = o.task;
    if (o.status == OutcomeStatus::kFailed) {
      ++g.failed;
    } else if (o.status == OutcomeStatus::kSkipped) {
      ++g.skipped;
    } else if (o.task == TaskKind::kRetrievalQA) {
      if (o.scores.em) {
        g.em.push_back(*o.scores.em);
      } else {
        ++g.failed;
      }
    } else {
      g.judge.push_back(o.scores.judge);
    }
  }
  return s;
}

RenderedReport report(std::span<const RecordOutcome> ledger, ReportShape shape) {
  if (ledger.empty()) throw Error(ErrorCode::kEmptyLedger, "nothing to report");
  const LedgerSummary s = summarize(ledger);
  RenderedReport out;
  switch (shape) {
    case ReportShape::kMethods:
      out.markdown = methods_markdown(s);
      out.csv = csv_for(s, [](const GroupKey& k, const GroupStats&) { return !k.position_index; });
      break;
    case ReportShape::kTriggers:
      out.markdown = triggers_markdown(s);
      out.csv = csv_for(s, [](const GroupKey& k, const GroupStats& g) {
        return k.strategy == Strategy::kThoT && !k.position_index && g.task == TaskKind::kRetrievalQA;
      });
      break;
    case ReportShape::kPositions:
      out.markdown = positions_markdown(s);
      out.csv = csv_for(s, [](const GroupKey& k, const GroupStats&) { return k.position_index.has_value(); });
      break;
  }
  if (out.markdown.empty()) out.markdown = "(no cells for this report shape)\n";
  return out;
}

RenderedReport render_all_reports(std::span<const RecordOutcome> ledger) {
  if (ledger.empty()) throw Error(ErrorCode::kEmptyLedger, "nothing to report");
  const LedgerSummary s = summarize(ledger);
  RenderedReport out;
  out.markdown = "# Results\n\n" + methods_markdown(s);

  std::set<std::pair<std::string, int>> thot_triggers;
  for (const auto& [key, stats] : s.groups) {
    if (key.strategy == Strategy::kThoT && key.trigger_id && !key.position_index) thot_triggers.insert({key.dataset, *key.trigger_id});
  }
  bool sweep = false;
  for (const auto& d : s.dataset_order) {
    const auto n = std::count_if(thot_triggers.begin(), thot_triggers.end(), [&](const auto& p) { return p.first == d; });
    sweep = sweep || n > 1;
  }
  if (sweep) out.markdown += triggers_markdown(s);
  out.markdown += positions_markdown(s);
  out.csv = csv_for(s, [](const GroupKey&, const GroupStats&) { return true; });
  return out;
}

}  // namespace thot
