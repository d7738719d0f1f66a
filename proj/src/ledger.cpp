#include "thot/ledger.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "thot/errors.hpp"
#include "thot/serialization.hpp"

namespace thot {
namespace fs = std::filesystem;

namespace {

struct ParsedLedger {
  LedgerContents contents;
  std::size_t valid_bytes = 0;
};

ParsedLedger parse_ledger(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read ledger " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();

  ParsedLedger out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string line = data.substr(pos, complete ? nl - pos : std::string::npos);
    const std::size_t next = complete ? nl + 1 : data.size();
    ++line_no;

    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      if (!complete) {
        out.contents.torn_tail = true;
        break;
      }
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    try {
      if (line_no == 1) {
        if (j.value("type", "") != "header") throw Error(ErrorCode::kParseError, "first line is not a header");
        out.contents.header.run_id = j.at("run_id").get<std::string>();
        out.contents.header.config_hash = j.at("config_hash").get<std::string>();
      } else {
        out.contents.entries.push_back(j.get<RecordOutcome>());
      }
    } catch (const json::exception& e) {
      if (!complete) {
        out.contents.torn_tail = true;
        break;
      }
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    // A syntactically complete object without its newline is still a torn
    // write: the next append would glue onto it.
    if (!complete) {
      if (line_no > 1) {
        out.contents.entries.pop_back();
      } else {
        out.contents.header = {};
      }
      out.contents.torn_tail = true;
      break;
    }
    pos = next;
    out.valid_bytes = next;
  }
  if (out.valid_bytes == 0 && !out.contents.torn_tail) {
    throw Error(ErrorCode::kParseError, path.string() + ": missing header");
  }
  return out;
}

}  // namespace

LedgerContents read_ledger(const fs::path& path) { return parse_ledger(path).contents; }

RunLedger RunLedger::open(const fs::path& path, const std::string& run_id, const std::string& config_hash) {
  RunLedger ledger;
  ledger.path_ = path;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());

  bool exists = fs::exists(path) && fs::file_size(path) > 0;
  if (exists) {
    ParsedLedger parsed = parse_ledger(path);
    if (parsed.valid_bytes == 0) {
      // Only a torn header was written.
      fs::resize_file(path, 0);
      exists = false;
    }
  }
  if (exists) {
    ParsedLedger parsed = parse_ledger(path);
    if (parsed.contents.header.config_hash != config_hash) {
      throw Error(ErrorCode::kConfig, "ledger " + path.string() + " belongs to config " +
                                          parsed.contents.header.config_hash.substr(0, 12) +
                                          ", not " + config_hash.substr(0, 12));
    }
    if (parsed.contents.torn_tail) fs::resize_file(path, parsed.valid_bytes);
    ledger.header_ = parsed.contents.header;
    ledger.entries_ = std::move(parsed.contents.entries);
    for (const auto& e : ledger.entries_) ledger.keys_.insert(e.key);
  } else {
    ledger.header_ = LedgerHeader{run_id, config_hash};
  }

  ledger.fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (ledger.fd_ < 0) throw Error(ErrorCode::kIo, "cannot open ledger " + path.string() + ": " + std::strerror(errno));
  if (!exists) {
    const json header = {{"type", "header"}, {"run_id", run_id}, {"config_hash", config_hash}, {"format", 1}};
    ledger.write_all(header.dump() + "\n");
  }
  return ledger;
}

RunLedger::RunLedger(RunLedger&& other) noexcept
    : path_(std::move(other.path_)),
      header_(std::move(other.header_)),
      entries_(std::move(other.entries_)),
      keys_(std::move(other.keys_)),
      fd_(other.fd_) {
  other.fd_ = -1;
}

RunLedger& RunLedger::operator=(RunLedger&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    header_ = std::move(other.header_);
    entries_ = std::move(other.entries_);
    keys_ = std::move(other.keys_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

RunLedger::~RunLedger() {
  if (fd_ >= 0) ::close(fd_);
}

void RunLedger::write_all(const std::string& bytes) {
  std::size_t written = 0;
  while (written < bytes.size()) {
    const auto n = ::write(fd_, bytes.data() + written, bytes.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, "ledger write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error(ErrorCode::kIo, "ledger fsync failed: " + std::string(std::strerror(errno)));
}

void RunLedger::append(std::span<const RecordOutcome> batch) {
  std::set<CellKey> fresh;
  for (const auto& outcome : batch) {
    if (keys_.contains(outcome.key) || !fresh.insert(outcome.key).second) {
      throw Error(ErrorCode::kInvalidArgument, "ledger already has cell " + describe(outcome.key));
    }
  }
  std::string bytes;
  for (const auto& outcome : batch) {
    json j = outcome;
    j["type"] = "outcome";
    bytes += j.dump();
    bytes.push_back('\n');
  }
  if (!bytes.empty()) write_all(bytes);
  for (const auto& outcome : batch) {
    keys_.insert(outcome.key);
    entries_.push_back(outcome);
  }
}

}  // namespace thot
