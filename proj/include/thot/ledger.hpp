#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "thot/domain.hpp"

namespace thot {

struct LedgerHeader {
  std::string run_id;
  std::string config_hash;
};

struct LedgerContents {
  LedgerHeader header;
  std::vector<RecordOutcome> entries;
  bool torn_tail = false;  // last line was incomplete and has been ignored
};

// Reads a ledger file: one header line, then one outcome per line.
// A partially written final line is ignored; any other bad line is a
// kParseError.
LedgerContents read_ledger(const std::filesystem::path& path);

// Append-only JSONL run ledger. Each append() writes whole lines and fsyncs.
class RunLedger {
 public:
  // Creates the file with a header, or reopens it. Reopening with a
  // different config hash is a kConfig error. A torn final line is cut off
  // so later appends start on a clean line.
  static RunLedger open(const std::filesystem::path& path, const std::string& run_id,
                        const std::string& config_hash);

  RunLedger(RunLedger&& other) noexcept;
  RunLedger& operator=(RunLedger&& other) noexcept;
  RunLedger(const RunLedger&) = delete;
  RunLedger& operator=(const RunLedger&) = delete;
  ~RunLedger();

  const LedgerHeader& header() const { return header_; }
  const std::vector<RecordOutcome>& entries() const { return entries_; }
  const std::filesystem::path& path() const { return path_; }
  bool contains(const CellKey& key) const { return keys_.contains(key); }

  // Rejects the whole batch with kInvalidArgument if any key is already
  // present (or repeated within the batch).
  void append(std::span<const RecordOutcome> batch);

 private:
  RunLedger() = default;
  void write_all(const std::string& bytes);

  std::filesystem::path path_;
  LedgerHeader header_;
  std::vector<RecordOutcome> entries_;
  std::set<CellKey> keys_;
  int fd_ = -1;
};

}  // namespace thot
