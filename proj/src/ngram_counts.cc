#include <algorithm>
#include <cmath>

#include "asrtk/ngram.hh"
#include "asrtk/util.hh"

namespace asrtk {

NgramCounts count_ngrams(std::istream& corpus, int order, const Vocabulary& vocab) {
  if (order < 1 || order > kMaxNgramOrder)
    throw ConfigError("n-gram order must be in [1," +
                      std::to_string(kMaxNgramOrder) + "]");

  NgramCounts counts;
  counts.order = order;
  counts.bos = counts.symbols.intern(kSentBegin);
  counts.eos = counts.symbols.intern(kSentEnd);
  counts.unk = counts.symbols.intern(kUnknown);
  std::vector<TokenId> word_ids;
  word_ids.reserve(vocab.size());
  for (const auto& w : vocab.words()) word_ids.push_back(counts.symbols.intern(w));

  // Raw occurrence counts per order over <s> w1..wn </s> windows.
  std::vector<std::unordered_map<Gram, uint64_t, GramHash>> raw(order);
  std::vector<TokenId> padded;
  for_each_line(corpus, [&](const std::string& line) {
    padded.clear();
    padded.push_back(counts.bos);
    for (const auto& tok : split_ws(line)) {
      auto id = counts.symbols.find(tok);
      // Only vocabulary words keep their identity; everything else (including
      // literal marker strings in the text) becomes <unk>.
      if (id && *id != counts.bos && *id != counts.eos && *id != counts.unk)
        padded.push_back(*id);
      else
        padded.push_back(counts.unk);
    }
    padded.push_back(counts.eos);
    ++counts.sentences;
    for (int k = 1; k <= order; ++k) {
      if (padded.size() < static_cast<size_t>(k)) continue;
      for (size_t start = 0; start + k <= padded.size(); ++start)
        ++raw[k - 1][Gram::of({padded.data() + start, static_cast<size_t>(k)})];
    }
  });

  // Adjusted counts: raw at the top order and for <s>-initial n-grams,
  // otherwise the number of distinct single-token left extensions.
  counts.table.resize(order);
  for (int k = order - 1; k >= 1; --k) {
    auto& adj = counts.table[k - 1];
    for (const auto& [g, c] : raw[k - 1])
      if (g.ids[0] == counts.bos) adj[g] = c;
    for (const auto& [g, c] : raw[k]) {
      (void)c;
      Gram tail = g.drop_first();
      if (tail.ids[0] != counts.bos) ++adj[tail];
    }
  }
  counts.table[order - 1] = std::move(raw[order - 1]);
  return counts;
}

NgramCounts prune_counts(const NgramCounts& counts,
                         std::span<const uint64_t> thresholds) {
  if (static_cast<int>(thresholds.size()) > counts.order)
    throw ConfigError("more prune thresholds than model orders");
  auto thr = [&](int k) -> uint64_t {
    return k <= static_cast<int>(thresholds.size()) ? thresholds[k - 1] : 0;
  };
  if (thr(1) > 0) throw ConfigError("pruning unigrams is not supported");
  // The published model settings never prune below order 3; an order-2 model
  // may still prune its own top order.
  if (counts.order >= 3 && thr(2) > 0)
    throw ConfigError("pruning bigrams of a higher-order model is not supported");

  NgramCounts pruned;
  pruned.order = counts.order;
  pruned.symbols = counts.symbols;
  pruned.bos = counts.bos;
  pruned.eos = counts.eos;
  pruned.unk = counts.unk;
  pruned.sentences = counts.sentences;
  pruned.table.resize(counts.order);
  for (int k = 1; k <= counts.order; ++k) {
    uint64_t t = thr(k);
    for (const auto& [g, c] : counts.at(k))
      if (c > t) pruned.table[k - 1].emplace(g, c);
  }
  return pruned;
}

Discounts discounts_from_cocs(uint64_t n1, uint64_t n2, uint64_t n3, uint64_t n4) {
  Discounts d;
  const bool y_ok = n1 > 0 && n2 > 0;
  const double y = y_ok ? static_cast<double>(n1) / (n1 + 2.0 * n2) : 0.0;
  auto clamp = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
  if (y_ok) d.d1 = clamp(1.0 - 2.0 * y * n2 / n1, 1.0);
  if (y_ok && n3 > 0) d.d2 = clamp(2.0 - 3.0 * y * n3 / n2, 2.0);
  if (y_ok && n3 > 0 && n4 > 0) d.d3plus = clamp(3.0 - 4.0 * y * n4 / n3, 3.0);
  return d;
}

DiscountSet estimate_discounts(const NgramCounts& counts) {
  DiscountSet set;
  Gram bos_gram = Gram::single(counts.bos);
  for (int k = 1; k <= counts.order; ++k) {
    uint64_t n[5] = {0, 0, 0, 0, 0};
    for (const auto& [g, c] : counts.at(k)) {
      if (k == 1 && g == bos_gram) continue;  // <s> is never a predicted event
      if (c >= 1 && c <= 4) ++n[c];
    }
    set.per_order.push_back(discounts_from_cocs(n[1], n[2], n[3], n[4]));
  }
  return set;
}

}  // namespace asrtk
