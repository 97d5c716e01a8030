#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsup {

// Seeded sentence sampler over a fixed word list with a skewed (roughly
// Zipfian) pick distribution, so count-of-count statistics are non-trivial.
inline std::vector<std::vector<std::string>> random_sentences(
    const std::vector<std::string>& words, int n, unsigned seed,
    int min_len = 1, int max_len = 8) {
  std::mt19937 rng(seed);
  std::vector<double> weights;
  for (size_t i = 0; i < words.size(); ++i)
    weights.push_back(1.0 / static_cast<double>(i + 1));
  std::discrete_distribution<size_t> pick(weights.begin(), weights.end());
  std::uniform_int_distribution<int> len(min_len, max_len);

  std::vector<std::vector<std::string>> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> sent;
    int l = len(rng);
    for (int j = 0; j < l; ++j) sent.push_back(words[pick(rng)]);
    out.push_back(std::move(sent));
  }
  return out;
}

inline std::string as_text(const std::vector<std::vector<std::string>>& sents) {
  std::ostringstream os;
  for (const auto& s : sents) {
    for (size_t i = 0; i < s.size(); ++i) {
      if (i) os << ' ';
      os << s[i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace testsup
