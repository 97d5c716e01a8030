#include "asrtk/decoder.hh"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "asrtk/util.hh"

namespace asrtk {
namespace {

// Joins collapsed subword tokens into words at the word-start marker.
std::vector<std::string> detokenize_subwords(const std::vector<std::string>& toks,
                                             const std::string& marker) {
  std::vector<std::string> words;
  bool open = false;
  for (const std::string& tok : toks) {
    if (tok.rfind(marker, 0) == 0) {
      words.push_back(tok.substr(marker.size()));
      open = true;
    } else if (open) {
      words.back() += tok;
    } else {
      words.push_back(tok);
      open = true;
    }
  }
  words.erase(std::remove(words.begin(), words.end(), std::string()),
              words.end());
  return words;
}

void require_subword(const LabelInventory& inv) {
  if (inv.kind != LabelInventory::Kind::kSubword) {
    throw ConfigError(
        "phoneme labels are only supported with prefix tree decoding");
  }
}

void require_shape(const EmissionMatrix& em, const LabelInventory& inv) {
  if (inv.size() != em.labels) {
    throw DataError("emission matrix has " + std::to_string(em.labels) +
                    " labels but the inventory lists " +
                    std::to_string(inv.size()));
  }
}

}  // namespace

void DecoderConfig::validate() const {
  if (beam_size < 1) {
    throw ConfigError("beam size must be at least 1");
  }
  if (score_threshold && (!std::isfinite(*score_threshold) ||
                          *score_threshold < 0.0)) {
    throw ConfigError("score threshold must be non-negative");
  }
  if (!std::isfinite(lm_scale) || lm_scale < 0.0) {
    throw ConfigError("lm scale must be non-negative");
  }
  if (!std::isfinite(prior_scale) || prior_scale < 0.0) {
    throw ConfigError("prior scale must be non-negative");
  }
  if (!std::isfinite(word_insertion_score)) {
    throw ConfigError("word insertion score must be finite");
  }
}

std::vector<std::string> greedy_decode(const EmissionMatrix& em,
                                       const LabelInventory& inv) {
  require_shape(em, inv);
  require_subword(inv);
  std::vector<std::string> toks;
  uint32_t last = inv.blank_index;
  for (uint32_t t = 0; t < em.frames; ++t) {
    uint32_t best = 0;
    for (uint32_t l = 1; l < em.labels; ++l) {
      if (em.at(t, l) > em.at(t, best)) best = l;
    }
    if (best != inv.blank_index && best != last) {
      toks.push_back(inv.symbols[best]);
    }
    last = best;
  }
  return detokenize_subwords(toks, inv.marker);
}

std::vector<std::string> beam_search_open(const EmissionMatrix& em,
                                          const LabelInventory& inv,
                                          const DecoderConfig& config,
                                          double* best_score) {
  require_shape(em, inv);
  require_subword(inv);
  config.validate();

  // State = (collapsed label sequence, last raw label); merging keeps the max
  // path score, so an unlimited beam is exact over paths.
  using State = std::pair<std::vector<uint32_t>, uint32_t>;
  struct Hyp {
    std::vector<uint32_t> seq;
    uint32_t last = 0;
    double score = 0.0;
  };
  const uint32_t blank = inv.blank_index;
  std::vector<Hyp> beam{{{}, blank, 0.0}};

  for (uint32_t t = 0; t < em.frames; ++t) {
    std::map<State, double> merged;
    for (const Hyp& h : beam) {
      for (uint32_t l = 0; l < em.labels; ++l) {
        State next{h.seq, l};
        if (l != blank && l != h.last) next.first.push_back(l);
        const double score = h.score + em.at(t, l);
        auto [it, fresh] = merged.emplace(std::move(next), score);
        if (!fresh && score > it->second) it->second = score;
      }
    }
    std::vector<Hyp> next;
    next.reserve(merged.size());
    for (auto& [state, score] : merged) {
      next.push_back({state.first, state.second, score});
    }
    // Ties prefer the lower last label so a one-wide beam retraces greedy's
    // lowest-index argmax, then the shorter/smaller sequence.
    std::sort(next.begin(), next.end(), [](const Hyp& a, const Hyp& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.last != b.last) return a.last < b.last;
      return a.seq < b.seq;
    });
    if (next.size() > size_t(config.beam_size)) next.resize(config.beam_size);
    if (config.score_threshold && !next.empty()) {
      const double floor = next.front().score - *config.score_threshold;
      while (next.size() > 1 && next.back().score < floor) next.pop_back();
    }
    beam = std::move(next);
  }

  const Hyp* best = &beam.front();
  for (const Hyp& h : beam) {
    if (h.score > best->score ||
        (h.score == best->score && h.seq < best->seq)) {
      best = &h;
    }
  }
  if (best_score) *best_score = best->score;
  std::vector<std::string> toks;
  toks.reserve(best->seq.size());
  for (uint32_t l : best->seq) toks.push_back(inv.symbols[l]);
  return detokenize_subwords(toks, inv.marker);
}

LabelInventory inventory_for_tree(const PrefixTree& tree) {
  LabelInventory inv;
  inv.kind = LabelInventory::Kind::kPhoneme;
  inv.blank_index = 0;
  inv.symbols.push_back(kBlankSymbol);
  for (uint32_t j = 0; j < tree.label_count(); ++j) {
    inv.symbols.push_back(tree.label_name(j));
  }
  return inv;
}

namespace {

struct LexHyp {
  uint32_t node = 0;
  uint32_t last = 0;  // emission index; 0 is blank
  LmState lm_state;
  double score = 0.0;
  std::vector<uint32_t> words;
};

// score desc, then word sequence, then structural fields: a total order so
// pruning is deterministic with or without recombination.
bool lex_better(const LexHyp& a, const LexHyp& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.words != b.words) return a.words < b.words;
  if (a.node != b.node) return a.node < b.node;
  if (a.last != b.last) return a.last < b.last;
  return a.lm_state.context < b.lm_state.context;
}

}  // namespace

LexicalResult beam_search_lexical(const EmissionMatrix& em,
                                  const PrefixTree& tree,
                                  const LabelInventory& inv,
                                  const NgramModel* lm,
                                  const PriorVector* prior,
                                  const DecoderConfig& config,
                                  std::vector<LexicalResult>* nbest,
                                  size_t nbest_size) {
  require_shape(em, inv);
  config.validate();
  if (inv.blank_index != 0 || inv.symbols.empty() ||
      inv.symbols[0] != kBlankSymbol) {
    throw DataError("lexical decoding expects the blank as label 0");
  }
  if (inv.size() != size_t(tree.label_count()) + 1) {
    throw DataError("inventory lists " + std::to_string(inv.size()) +
                    " labels but the tree needs " +
                    std::to_string(tree.label_count() + 1));
  }
  for (uint32_t j = 0; j < tree.label_count(); ++j) {
    if (inv.symbols[j + 1] != tree.label_name(j)) {
      throw DataError("inventory label " + inv.symbols[j + 1] +
                      " does not match tree label " + tree.label_name(j));
    }
  }
  if (prior && prior->size() != em.labels) {
    throw DataError("prior lists " + std::to_string(prior->size()) +
                    " labels but emissions carry " + std::to_string(em.labels));
  }
  if (em.frames == 0) {
    throw DataError("lexical decoding needs at least one frame");
  }
  // A zero LM weight must reproduce LM-free decoding exactly, so drop the
  // model rather than carry state that only perturbs recombination.
  if (config.lm_scale == 0.0) lm = nullptr;
  std::vector<TokenId> lm_token;
  if (lm) {
    if (!lm->eos()) {
      throw DataError("language model lacks a sentence-end token");
    }
    lm_token.reserve(tree.words.size());
    for (const std::string& w : tree.words) lm_token.push_back(lm->id_or_unk(w));
  }

  std::vector<LexHyp> beam;
  beam.push_back({0, 0, lm ? lm->begin_state() : LmState{}, 0.0, {}});
  std::vector<double> ac(em.labels);

  for (uint32_t t = 0; t < em.frames; ++t) {
    for (uint32_t l = 0; l < em.labels; ++l) {
      ac[l] = double(em.at(t, l));
      if (prior && config.prior_scale != 0.0) {
        ac[l] -= config.prior_scale * prior->log_prior[l];
      }
    }
    using Key = std::tuple<uint32_t, uint32_t, Gram>;
    std::map<Key, LexHyp> merged;
    std::vector<LexHyp> loose;
    auto add = [&](LexHyp&& h) {
      if (!config.recombine) {
        loose.push_back(std::move(h));
        return;
      }
      Key key{h.node, h.last, h.lm_state.context};
      // try_emplace leaves h intact when the key already exists.
      auto [it, fresh] = merged.try_emplace(std::move(key), std::move(h));
      if (!fresh && lex_better(h, it->second)) it->second = std::move(h);
    };
    for (const LexHyp& h : beam) {
      add({h.node, 0, h.lm_state, h.score + ac[0], h.words});
      if (h.last != 0) {
        add({h.node, h.last, h.lm_state, h.score + ac[h.last], h.words});
      }
      for (const auto& [label, child] : tree.nodes[h.node].arcs) {
        const uint32_t e = label + 1;
        if (e == h.last) continue;  // a repeat needs an intervening blank
        if (!tree.is_final_label(label)) {
          add({child, e, h.lm_state, h.score + ac[e], h.words});
          continue;
        }
        for (const PrefixTree::WordEnd& we : tree.nodes[child].word_ends) {
          LexHyp out{0, e, h.lm_state,
                     h.score + ac[e] + we.weight + config.word_insertion_score,
                     h.words};
          out.words.push_back(we.word);
          if (lm) {
            const ScoreResult sr = lm->score(h.lm_state, lm_token[we.word]);
            out.score += config.lm_scale * std::numbers::ln10 * sr.log10_prob;
            out.lm_state = sr.next;
          }
          add(std::move(out));
        }
      }
    }
    std::vector<LexHyp> next;
    if (config.recombine) {
      next.reserve(merged.size());
      for (auto& [key, h] : merged) next.push_back(std::move(h));
    } else {
      next = std::move(loose);
    }
    std::sort(next.begin(), next.end(), lex_better);
    if (next.size() > size_t(config.beam_size)) next.resize(config.beam_size);
    if (config.score_threshold && !next.empty()) {
      const double floor = next.front().score - *config.score_threshold;
      while (next.size() > 1 && next.back().score < floor) next.pop_back();
    }
    beam = std::move(next);
  }

  // Only hypotheses back at the root spell complete words; with an LM they
  // also pay the sentence-end probability.
  std::map<std::vector<uint32_t>, double> finals;
  for (const LexHyp& h : beam) {
    if (h.node != 0) continue;
    double score = h.score;
    if (lm) {
      score += config.lm_scale * std::numbers::ln10 *
               lm->score(h.lm_state, *lm->eos()).log10_prob;
    }
    auto [it, fresh] = finals.emplace(h.words, score);
    if (!fresh && score > it->second) it->second = score;
  }
  if (finals.empty()) {
    throw DataError("no hypothesis ended at a word boundary");
  }
  std::vector<std::pair<std::vector<uint32_t>, double>> ranked(finals.begin(),
                                                              finals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  auto realize = [&](const std::pair<std::vector<uint32_t>, double>& r) {
    LexicalResult res;
    res.score = r.second;
    res.words.reserve(r.first.size());
    for (uint32_t w : r.first) res.words.push_back(tree.words[w]);
    return res;
  };
  if (nbest) {
    nbest->clear();
    for (size_t i = 0; i < ranked.size() && i < nbest_size; ++i) {
      nbest->push_back(realize(ranked[i]));
    }
  }
  return realize(ranked.front());
}

}  // namespace asrtk
