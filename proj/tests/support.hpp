#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "thot/domain.hpp"
#include "thot/errors.hpp"

#define CHECK_THROWS_CODE(expr, expected)                                 \
  do {                                                                    \
    try {                                                                 \
      (void)(expr);                                                       \
      FAIL_CHECK("expected thot::Error " #expected);                      \
    } catch (const thot::Error& thrown_) {                                \
      CHECK_MESSAGE(thrown_.code() == (expected), thrown_.what());        \
    }                                                                     \
  } while (0)

namespace test {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(THOT_FIXTURE_DIR) / name; }
inline std::filesystem::path golden(const std::string& name) { return std::filesystem::path(THOT_GOLDEN_DIR) / name; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open " << p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("thot_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline thot::QARecord make_qa(std::string id, std::string question, std::vector<std::string> aliases,
                              std::vector<std::pair<std::string, bool>> passages) {
  thot::QARecord r;
  r.record_id = std::move(id);
  r.question = thot::Query(question);
  r.gold_aliases = std::move(aliases);
  std::vector<thot::Passage> ps;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    ps.push_back({"p" + std::to_string(i), passages[i].first, passages[i].second});
  }
  r.context = thot::ChaoticContext(std::move(ps));
  return r;
}

inline const std::string kThoT30 =
    "Walk me through this context in manageable parts step by step, summarizing and analyzing as we go.";

inline std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

// Random word drawn from a small mixed vocabulary, some with punctuation
// or capitals so normalisation has work to do.
inline std::string random_word(std::mt19937& rng) {
  static const std::vector<std::string> words{"garage", "punk", "Red",   "hearts", "band",  "music", "jazz",
                                              "Los",    "angeles", "rock", "pop",  "Folk", "duo",   "K-pop",
                                              "blues",  "soul",  "a",     "the",   "an",    "2004", "Café"};
  return words[rng() % words.size()];
}

inline std::string random_phrase(std::mt19937& rng, int min_words, int max_words) {
  std::uniform_int_distribution<int> len(min_words, max_words);
  const int n = len(rng);
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += random_word(rng);
  }
  return s;
}

}  // namespace test
