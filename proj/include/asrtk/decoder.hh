#ifndef ASRTK_DECODER_HH
#define ASRTK_DECODER_HH

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asrtk/emissions.hh"
#include "asrtk/lexicon.hh"
#include "asrtk/ngram.hh"

namespace asrtk {

struct DecoderConfig {
  int beam_size = 512;
  // Keeps only hypotheses within this absolute score distance of the frame
  // best; unset means beam pruning alone.
  std::optional<double> score_threshold;
  double lm_scale = 0.0;
  double prior_scale = 0.0;
  double word_insertion_score = 0.0;
  // Merging hypotheses that agree on (tree node, last label, LM state) never
  // changes the best-path score; the switch exists so tests can check that.
  bool recombine = true;

  void validate() const;  // ConfigError on out-of-range values
};

// Per-frame argmax, collapse repeats, drop blanks, split words at the
// inventory's word-start marker. Subword inventories only.
std::vector<std::string> greedy_decode(const EmissionMatrix& em,
                                       const LabelInventory& inv);

// Label-synchronous beam search over collapsed label sequences (Viterbi
// approximation: hypotheses merging to the same collapsed sequence and last
// raw label keep the max path score). beam_size 1 reproduces greedy_decode;
// best_score receives the winning path score when non-null.
std::vector<std::string> beam_search_open(const EmissionMatrix& em,
                                          const LabelInventory& inv,
                                          const DecoderConfig& config,
                                          double* best_score = nullptr);

struct LexicalResult {
  std::vector<std::string> words;
  double score = 0.0;
};

// Time-synchronous beam search over a pronunciation prefix tree. The
// inventory must list the blank first and then the tree's labels in order
// (internal phonemes, then word-final variants). Per frame each hypothesis
// can stay on its last non-blank label, take a blank, or advance along an
// arc; acoustic scores are emission minus prior_scale times the log prior.
// Completing a word adds its variant weight, word_insertion_score and
// lm_scale times the natural-log LM probability, then re-enters the root.
// With an LM the sentence-end probability is added on the final frame; only
// hypotheses at a word boundary can win. lm and prior may be null.
LexicalResult beam_search_lexical(const EmissionMatrix& em,
                                  const PrefixTree& tree,
                                  const LabelInventory& inv,
                                  const NgramModel* lm,
                                  const PriorVector* prior,
                                  const DecoderConfig& config,
                                  std::vector<LexicalResult>* nbest = nullptr,
                                  size_t nbest_size = 0);

// [<blank>, internal phonemes, word-final variants] — the emission layout
// beam_search_lexical expects for this tree.
LabelInventory inventory_for_tree(const PrefixTree& tree);

}  // namespace asrtk

#endif
