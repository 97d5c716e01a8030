#ifndef ASRTK_CORPUS_HH
#define ASRTK_CORPUS_HH

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace asrtk {

// Reserved sentence/unknown markers. These never enter Vocabulary::words.
inline constexpr const char* kSentBegin = "<s>";
inline constexpr const char* kSentEnd = "</s>";
inline constexpr const char* kUnknown = "<unk>";

bool is_special_token(const std::string& w);

// Word frequency table for one or more corpora. Mergeable; merge order does
// not matter.
class TokenCountTable {
 public:
  void add(const std::string& word, uint64_t n = 1);
  void merge(const TokenCountTable& other);

  uint64_t count(const std::string& word) const;
  uint64_t total_tokens() const { return total_; }
  size_t distinct() const { return counts_.size(); }
  const std::map<std::string, uint64_t>& counts() const { return counts_; }

  // "word<TAB>count" per line, sorted by word.
  void write(std::ostream& out) const;
  static TokenCountTable read(std::istream& in, const std::string& name);

 private:
  std::map<std::string, uint64_t> counts_;
  uint64_t total_ = 0;
};

// Closed word set. Iteration order is lexicographic; the special markers are
// kept out of the word list.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  bool contains(const std::string& w) const { return set_.count(w) != 0; }
  size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  // One word per line, sorted, specials excluded.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in, const std::string& name);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<std::string> words_;  // sorted, unique
  std::unordered_set<std::string> set_;
};

// Counts every whitespace-delimited token of a line-oriented stream.
TokenCountTable count_tokens(std::istream& in);

// Selection rule: keep base-dictionary words seen at least once plus any word
// seen at least min_count times. Special markers are dropped if present.
Vocabulary build_vocabulary(const TokenCountTable& counts,
                            const std::set<std::string>& base_dict_words,
                            uint64_t min_count = 4);

// Fraction of running tokens outside the vocabulary. Empty input is a
// DataError.
double oov_rate(const std::vector<std::string>& tokens, const Vocabulary& vocab);

}  // namespace asrtk

#endif
