#ifndef ASRTK_LEXICON_HH
#define ASRTK_LEXICON_HH

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "asrtk/corpus.hh"
#include "asrtk/g2p.hh"

namespace asrtk {

// Removes a trailing stress digit (0-2) from each symbol: AH0 -> AH. Symbols
// without one pass through unchanged.
std::vector<std::string> strip_stress(const std::vector<std::string>& pron);

struct Pronunciation {
  enum class Source { kBaseDict, kG2p };

  std::vector<std::string> phonemes;
  Source source = Source::kBaseDict;
  double weight = 0.0;  // log scale; unweighted variants carry log 1 = 0
};

struct LexiconEntry {
  std::vector<Pronunciation> prons;  // sorted by phoneme sequence, distinct
};

// Word -> pronunciations, uppercase words. The text form is one line per
// variant, `WORD<TAB>PH1 PH2 ...`, sorted by word then pronunciation; source
// and weight are not serialized.
class Lexicon {
 public:
  // Deduplicates by phoneme sequence within the word's entry.
  void add(const std::string& word, std::vector<std::string> phonemes,
           Pronunciation::Source source, double weight = 0.0);

  const std::map<std::string, LexiconEntry>& entries() const {
    return entries_;
  }
  const LexiconEntry* find(const std::string& word) const;
  size_t word_count() const { return entries_.size(); }
  size_t pronunciation_count() const;
  std::vector<std::string> phoneme_alphabet() const;  // sorted union

  void write(std::ostream& out) const;
  static Lexicon read(std::istream& in, const std::string& name);
  static Lexicon load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::map<std::string, LexiconEntry> entries_;
};

// Raw pronunciation dictionary: uppercase word -> variants, stress markers
// preserved as found in the file.
using BaseDictionary = std::map<std::string, std::vector<std::vector<std::string>>>;

// CMUdict-style text: `WORD  PH1 PH2 ...` with ;;; comments and WORD(2)
// variant suffixes.
BaseDictionary read_base_dictionary(std::istream& in, const std::string& name);
BaseDictionary load_base_dictionary(const std::string& path);

struct VariantPolicy {
  enum class Kind { kSingle, kThreshold };

  Kind kind = Kind::kSingle;
  double threshold = 0.0;

  static VariantPolicy single() { return {}; }
  static VariantPolicy with_threshold(double t);
  // Accepts "single", "threshold-0.6", "threshold-0.8", ...
  static VariantPolicy parse(const std::string& text);
};

// Base-dictionary words keep every stress-stripped variant. All other
// vocabulary words get their top G2P pronunciation, plus the runner-up when
// the policy is threshold-T and the top renormalized posterior is below T.
Lexicon build_lexicon(const Vocabulary& vocab, const BaseDictionary& base,
                      const GraphoneModel& g2p, const VariantPolicy& policy);

// Pronunciation prefix tree with end-of-word label augmentation: labels
// 0..P-1 are the word-internal phonemes, P..2P-1 their word-final copies. A
// pronunciation p1..pk is the arc path p1..p(k-1) followed by the word-final
// variant of pk; the terminal node lists (word id, variant weight) pairs, so
// homophones share one node.
struct PrefixTree {
  struct WordEnd {
    uint32_t word = 0;
    double weight = 0.0;
    bool operator==(const WordEnd&) const = default;
  };
  struct Node {
    std::map<uint32_t, uint32_t> arcs;  // label id -> child node id
    std::vector<WordEnd> word_ends;     // sorted by word id
    bool operator==(const Node&) const = default;
  };

  std::vector<std::string> words;     // sorted; index = word id
  std::vector<std::string> phonemes;  // sorted alphabet
  std::vector<Node> nodes;            // nodes[0] is the root

  uint32_t label_count() const {
    return static_cast<uint32_t>(2 * phonemes.size());
  }
  bool is_final_label(uint32_t label) const {
    return label >= phonemes.size();
  }
  uint32_t phoneme_of(uint32_t label) const {
    return is_final_label(label) ? label - static_cast<uint32_t>(phonemes.size())
                                 : label;
  }
  uint32_t final_label(uint32_t phoneme) const {
    return phoneme + static_cast<uint32_t>(phonemes.size());
  }
  std::string label_name(uint32_t label) const {
    return is_final_label(label) ? phonemes[phoneme_of(label)] + "#"
                                 : phonemes[label];
  }

  void write(std::ostream& out) const;
  static PrefixTree read(std::istream& in, const std::string& name);
  static PrefixTree load(const std::string& path);
  void save(const std::string& path) const;
};

PrefixTree compile_prefix_tree(const Lexicon& lexicon);

struct TreePronunciation {
  std::string word;
  std::vector<std::string> phonemes;
  double weight = 0.0;
};

// Enumerates every root-to-word-end path, sorted by word then pronunciation;
// the inverse of compile_prefix_tree up to pronunciation multisets.
std::vector<TreePronunciation> decompile_prefix_tree(const PrefixTree& tree);

}  // namespace asrtk

#endif
