#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "asrtk/ngram.hh"
#include "asrtk/util.hh"

namespace asrtk {

namespace {

// <s> is a context but never a predicted event; its unigram probability is a
// sentinel, as in the usual ARPA convention.
constexpr double kBosSentinelLog10 = -99.0;

uint64_t get_count(const std::unordered_map<Gram, uint64_t, GramHash>& t,
                   const Gram& g) {
  auto it = t.find(g);
  return it == t.end() ? 0 : it->second;
}

std::vector<std::pair<Gram, uint64_t>> sorted_items(
    const std::unordered_map<Gram, uint64_t, GramHash>& t) {
  std::vector<std::pair<Gram, uint64_t>> items(t.begin(), t.end());
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return items;
}

}  // namespace

NgramModel train(const NgramCounts& raw_counts,
                 std::span<const uint64_t> prune_thresholds) {
  const int K = raw_counts.order;
  if (raw_counts.at(K).empty()) throw DataError("train: no n-gram counts");
  NgramCounts counts = prune_counts(raw_counts, prune_thresholds);
  if (counts.at(K).empty())
    throw DataError("train: pruning removed every order-" + std::to_string(K) +
                    " n-gram");

  const DiscountSet disc = estimate_discounts(counts);
  const TokenId bos = counts.bos;

  NgramModel model(K);
  model.symbols() = counts.symbols;
  model.refresh_specials();

  // Predicted event space: every symbol except <s>.
  std::vector<TokenId> events;
  for (TokenId id = 0; id < counts.symbols.size(); ++id)
    if (id != bos) events.push_back(id);
  const double uniform = 1.0 / static_cast<double>(events.size());

  // Pruning can remove an n-gram whose extension survives at the next order.
  // Such prefixes come back as context-only entries so the stored tables stay
  // prefix-closed.
  std::vector<std::unordered_set<Gram, GramHash>> needed(K + 1);
  for (int k = K; k >= 3; --k) {
    auto require_prefix = [&](const Gram& g) {
      Gram p = g.prefix();
      if (!counts.at(k - 1).count(p)) needed[k - 1].insert(p);
    };
    for (const auto& [g, c] : counts.at(k)) {
      (void)c;
      require_prefix(g);
    }
    for (const Gram& g : needed[k]) require_prefix(g);
  }

  // Unigram level: absolute-discounted counts interpolated with the uniform
  // ground distribution.
  {
    const Discounts& d = disc.per_order[0];
    const auto& uni = counts.at(1);
    double denom = 0.0, discounted = 0.0;
    for (TokenId w : events) {
      uint64_t a = get_count(uni, Gram::single(w));
      denom += static_cast<double>(a);
      discounted += d.for_count(a);
    }
    if (denom <= 0.0) throw DataError("train: no unigram counts");
    const double gamma = discounted / denom;
    for (TokenId w : events) {
      uint64_t a = get_count(uni, Gram::single(w));
      double p = std::max(static_cast<double>(a) - d.for_count(a), 0.0) / denom +
                 gamma * uniform;
      model.add_entry(Gram::single(w), std::log10(p));
    }
    model.add_entry(Gram::single(bos), kBosSentinelLog10);
  }

  for (int k = 2; k <= K; ++k) {
    const Discounts& d = disc.per_order[k - 1];
    auto items = sorted_items(counts.at(k));

    struct CtxData {
      double sum = 0.0;
      double discounted = 0.0;
      double gamma = 0.0;
    };
    std::unordered_map<Gram, CtxData, GramHash> ctxs;
    for (const auto& [g, c] : items) {
      auto& cd = ctxs[g.prefix()];
      cd.sum += static_cast<double>(c);
      cd.discounted += d.for_count(c);
    }
    for (auto& [ctx, cd] : ctxs) cd.gamma = cd.discounted / cd.sum;

    auto lower_prob = [&](const Gram& g) {
      return std::pow(10.0, model.log10_prob(g.prefix().drop_first().tokens(),
                                             g.back()));
    };

    for (const auto& [g, c] : items) {
      const CtxData& cd = ctxs.at(g.prefix());
      double p = std::max(static_cast<double>(c) - d.for_count(c), 0.0) / cd.sum +
                 cd.gamma * lower_prob(g);
      model.add_entry(g, std::log10(p));
    }

    std::vector<Gram> ctx_keys;
    ctx_keys.reserve(ctxs.size());
    for (const auto& [ctx, cd] : ctxs) {
      (void)cd;
      ctx_keys.push_back(ctx);
    }
    std::sort(ctx_keys.begin(), ctx_keys.end());
    for (const Gram& ctx : ctx_keys)
      model.set_backoff(ctx, std::log10(ctxs.at(ctx).gamma));

    // Context-only entries score exactly what backoff would give, so storing
    // them keeps closure without changing the distribution.
    std::vector<Gram> extra(needed[k].begin(), needed[k].end());
    std::sort(extra.begin(), extra.end());
    for (const Gram& g : extra) {
      auto it = ctxs.find(g.prefix());
      double p = (it != ctxs.end() ? it->second.gamma : 1.0) * lower_prob(g);
      model.add_entry(g, std::log10(p));
      if (it == ctxs.end()) {
        const NgramEntry* pe = model.find(g.prefix());
        if (!pe || !pe->has_backoff) model.set_backoff(g.prefix(), 0.0);
      }
    }
  }
  return model;
}

}  // namespace asrtk
