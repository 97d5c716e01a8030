#ifndef ASRTK_G2P_HH
#define ASRTK_G2P_HH

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "asrtk/ngram.hh"

namespace asrtk {

// One alignment unit of the joint letter/phoneme sequence: at most one letter
// and at most one phoneme, never both empty. Empty sides express insertions
// and deletions between the two streams.
struct Graphone {
  std::string letter;
  std::string phoneme;

  bool operator==(const Graphone&) const = default;
  bool operator<(const Graphone& o) const {
    return std::tie(letter, phoneme) < std::tie(o.letter, o.phoneme);
  }
};

struct PronunciationHypothesis {
  std::vector<std::string> phonemes;
  double log_joint = 0.0;  // natural log of the joint word/phoneme probability
  double posterior = 0.0;  // renormalized over the returned n-best list
};

using G2pDictionary =
    std::vector<std::pair<std::string, std::vector<std::string>>>;

// Ramp-up diagnostics, filled by train_g2p when requested.
struct G2pTrainLog {
  std::vector<double> held_out_ll_by_order;
  std::vector<double> discounts;  // chosen per order; order 1 uses none (0)
  uint64_t holdout_pairs = 0;     // 0 means training likelihood was monitored
};

// Joint-sequence n-gram over graphone ids with absolute discounting on
// fractional counts, backing off level by level to a plain unigram. The
// serialized form keeps only the top-order counts; lower levels are
// re-marginalized on load, which makes the file round-trip stable.
class GraphoneModel {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kFirstGraphone = 2;

  GraphoneModel() = default;
  GraphoneModel(int order, std::vector<std::string> phonemes,
                std::vector<Graphone> inventory, std::vector<double> discounts,
                std::map<Gram, double> top_counts);

  int order() const { return order_; }
  const std::vector<std::string>& phoneme_alphabet() const { return phonemes_; }
  const std::vector<Graphone>& inventory() const { return inventory_; }
  const std::vector<double>& discounts() const { return discounts_; }
  const std::map<Gram, double>& top_counts() const { return top_counts_; }

  TokenId graphone_id(size_t index) const {
    return kFirstGraphone + static_cast<TokenId>(index);
  }
  const Graphone& graphone(TokenId id) const {
    return inventory_[id - kFirstGraphone];
  }
  size_t event_count() const { return inventory_.size() + 1; }  // + EOS

  // History of order-1 sentence-begin markers.
  Gram begin_context() const;

  // log p(event | history); the history is truncated to the model's window.
  // Events never include kBos.
  double log_prob(const Gram& history, TokenId event) const;

  void write(std::ostream& out) const;
  static GraphoneModel read(std::istream& in, const std::string& name);
  static GraphoneModel load(const std::string& path);
  void save(const std::string& path) const;

 private:
  void rebuild();

  int order_ = 1;
  std::vector<std::string> phonemes_;   // sorted alphabet
  std::vector<Graphone> inventory_;     // sorted; id = index + kFirstGraphone
  std::vector<double> discounts_;       // [level-1]
  std::map<Gram, double> top_counts_;   // keys of length order_: history+event

  struct Level {
    std::map<Gram, double> events;                       // length == level
    std::map<Gram, std::pair<double, double>> contexts;  // total, discount mass
  };
  std::vector<Level> levels_;
};

// EM over the per-entry alignment lattices with order ramp-up 1..order. Each
// ramp-up stage picks its discount from a fixed grid by held-out likelihood
// (training likelihood when the held-out split is empty). Deterministic for a
// fixed (dictionary order, seed, holdout_fraction).
GraphoneModel train_g2p(const G2pDictionary& dictionary, int order = 5,
                        double holdout_fraction = 0.05, uint64_t seed = 1,
                        G2pTrainLog* log = nullptr);

// Beam search over graphone sequences whose letter projection is exactly
// `word` (uppercased). Hypotheses with equal phoneme sequences are merged by
// summing path probabilities; the result is sorted by log_joint descending
// with lexicographic phoneme order breaking ties.
std::vector<PronunciationHypothesis> apply_g2p(const GraphoneModel& model,
                                               const std::string& word,
                                               int n_best = 10);

}  // namespace asrtk

#endif
