#include "asrtk/corpus.hh"

#include <algorithm>
#include <fstream>

#include "asrtk/util.hh"

namespace asrtk {

bool is_special_token(const std::string& w) {
  return w == kSentBegin || w == kSentEnd || w == kUnknown;
}

void TokenCountTable::add(const std::string& word, uint64_t n) {
  counts_[word] += n;
  total_ += n;
}

void TokenCountTable::merge(const TokenCountTable& other) {
  for (const auto& [w, c] : other.counts_) counts_[w] += c;
  total_ += other.total_;
}

uint64_t TokenCountTable::count(const std::string& word) const {
  auto it = counts_.find(word);
  return it == counts_.end() ? 0 : it->second;
}

void TokenCountTable::write(std::ostream& out) const {
  for (const auto& [w, c] : counts_) out << w << '\t' << c << '\n';
}

TokenCountTable TokenCountTable::read(std::istream& in, const std::string& name) {
  TokenCountTable table;
  uint64_t lineno = 0;
  for_each_line(in, [&](const std::string& line) {
    ++lineno;
    if (line.empty()) return;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(name, lineno, "expected word<TAB>count");
    std::string word = line.substr(0, tab);
    uint64_t c = 0;
    try {
      c = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(name, lineno, "bad count field");
    }
    table.add(word, c);
  });
  return table;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
  std::erase_if(words_, [](const std::string& w) { return is_special_token(w); });
  set_.insert(words_.begin(), words_.end());
}

void Vocabulary::write(std::ostream& out) const {
  for (const auto& w : words_) out << w << '\n';
}

Vocabulary Vocabulary::read(std::istream& in, const std::string& name) {
  std::vector<std::string> words;
  uint64_t lineno = 0;
  for_each_line(in, [&](const std::string& line) {
    ++lineno;
    std::string w = trim(line);
    if (w.empty()) return;
    if (w.find(' ') != std::string::npos)
      throw ParseError(name, lineno, "vocabulary entries must be single words");
    words.push_back(std::move(w));
  });
  return Vocabulary(std::move(words));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read(in, path);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out;
  open_out_or_throw(out, path);
  write(out);
  if (!out) throw IoError("write failed: " + path);
}

TokenCountTable count_tokens(std::istream& in) {
  TokenCountTable table;
  for_each_line(in, [&](const std::string& line) {
    for (auto& tok : split_ws(line)) table.add(tok);
  });
  return table;
}

Vocabulary build_vocabulary(const TokenCountTable& counts,
                            const std::set<std::string>& base_dict_words,
                            uint64_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::vector<std::string> words;
  for (const auto& [w, c] : counts.counts()) {
    if (c >= min_count || (c >= 1 && base_dict_words.count(w))) words.push_back(w);
  }
  return Vocabulary(std::move(words));
}

double oov_rate(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) throw DataError("oov_rate: empty token sequence");
  uint64_t oov = 0;
  for (const auto& t : tokens)
    if (!vocab.contains(t)) ++oov;
  return static_cast<double>(oov) / static_cast<double>(tokens.size());
}

}  // namespace asrtk
