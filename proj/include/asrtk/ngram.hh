#ifndef ASRTK_NGRAM_HH
#define ASRTK_NGRAM_HH

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "asrtk/corpus.hh"

namespace asrtk {

using TokenId = uint32_t;
inline constexpr int kMaxNgramOrder = 6;

// Fixed-capacity token tuple used as n-gram key and LM context. Unused slots
// stay zero so equality and hashing can look at the whole array.
struct Gram {
  uint8_t len = 0;
  std::array<TokenId, kMaxNgramOrder> ids{};

  static Gram single(TokenId id) {
    Gram g;
    g.push(id);
    return g;
  }
  static Gram of(std::span<const TokenId> toks) {
    Gram g;
    for (TokenId t : toks) g.push(t);
    return g;
  }

  void push(TokenId id) { ids[len++] = id; }
  TokenId back() const { return ids[len - 1]; }
  bool empty() const { return len == 0; }

  // First len-1 tokens.
  Gram prefix() const {
    Gram g = *this;
    --g.len;
    g.ids[g.len] = 0;
    return g;
  }
  // Last len-1 tokens.
  Gram drop_first() const {
    Gram g;
    for (uint8_t i = 1; i < len; ++i) g.push(ids[i]);
    return g;
  }
  // Last n tokens (n >= len returns a copy).
  Gram suffix(uint8_t n) const {
    if (n >= len) return *this;
    Gram g;
    for (uint8_t i = len - n; i < len; ++i) g.push(ids[i]);
    return g;
  }
  // this + id, keeping only the trailing max_len tokens.
  Gram extended(TokenId id, uint8_t max_len) const {
    Gram g = *this;
    if (g.len == max_len && max_len > 0) g = g.drop_first();
    if (g.len < max_len) g.push(id);
    return g;
  }
  std::span<const TokenId> tokens() const { return {ids.data(), len}; }

  bool operator==(const Gram&) const = default;
  // Unused trailing slots are always zero, so whole-array comparison matches
  // elementwise comparison with a shorter-first tie break.
  bool operator<(const Gram& o) const {
    if (ids != o.ids) return ids < o.ids;
    return len < o.len;
  }
};

struct GramHash {
  size_t operator()(const Gram& g) const {
    uint64_t h = 1469598103934665603ull;
    for (uint8_t i = 0; i < g.len; ++i) {
      h ^= g.ids[i];
      h *= 1099511628211ull;
    }
    h ^= g.len;
    h *= 1099511628211ull;
    return static_cast<size_t>(h);
  }
};

class SymbolTable {
 public:
  TokenId intern(const std::string& sym);
  std::optional<TokenId> find(const std::string& sym) const;
  const std::string& name(TokenId id) const { return syms_[id]; }
  size_t size() const { return syms_.size(); }

 private:
  std::vector<std::string> syms_;
  std::unordered_map<std::string, TokenId> index_;
};

// Per-order count tables ready for estimation: raw occurrence counts at the
// maximum order, continuation (left-extension) counts below it, except that
// sentence-begin n-grams always keep raw counts.
struct NgramCounts {
  int order = 0;
  SymbolTable symbols;  // ids 0..2 are <s>, </s>, <unk>; then vocab words
  TokenId bos = 0, eos = 1, unk = 2;
  std::vector<std::unordered_map<Gram, uint64_t, GramHash>> table;  // [k-1]
  uint64_t sentences = 0;

  const std::unordered_map<Gram, uint64_t, GramHash>& at(int k) const {
    return table[k - 1];
  }
};

NgramCounts count_ngrams(std::istream& corpus, int order, const Vocabulary& vocab);

// Drops n-grams at order k with count <= thresholds[k-1]. Missing trailing
// thresholds default to 0 (keep all).
NgramCounts prune_counts(const NgramCounts& counts,
                         std::span<const uint64_t> thresholds);

// Modified Kneser-Ney discounts for one order.
struct Discounts {
  double d1 = 0.5, d2 = 0.5, d3plus = 0.5;
  double for_count(uint64_t c) const {
    if (c == 0) return 0.0;
    if (c == 1) return d1;
    if (c == 2) return d2;
    return d3plus;
  }
};

struct DiscountSet {
  std::vector<Discounts> per_order;  // [k-1]
};

// Closed-form discounts from counts-of-counts; any required nk of zero makes
// the affected discount fall back to 0.5. Each discount is clamped to the
// count it applies to.
Discounts discounts_from_cocs(uint64_t n1, uint64_t n2, uint64_t n3, uint64_t n4);

DiscountSet estimate_discounts(const NgramCounts& counts);

struct NgramEntry {
  double log10_prob = 0.0;
  double log10_backoff = 0.0;
  bool has_backoff = false;
};

// Context for sequential scoring: the longest stored suffix of the word
// history that can still influence a future query.
struct LmState {
  Gram context;
  bool operator==(const LmState&) const = default;
};

struct ScoreResult {
  double log10_prob;
  LmState next;
};

// Backoff n-gram model over log10 probabilities, ARPA-serializable.
class NgramModel {
 public:
  explicit NgramModel(int order = 1);

  int order() const { return order_; }
  const SymbolTable& symbols() const { return symbols_; }
  SymbolTable& symbols() { return symbols_; }
  size_t ngram_count(int k) const { return table_[k - 1].size(); }

  std::optional<TokenId> token_id(const std::string& sym) const {
    return symbols_.find(sym);
  }
  std::optional<TokenId> bos() const { return bos_; }
  std::optional<TokenId> eos() const { return eos_; }
  std::optional<TokenId> unk() const { return unk_; }
  void refresh_specials();  // re-derive <s>/</s>/<unk> ids from the symbols

  // Maps a raw word to a scoreable id, falling back to <unk>. DataError if
  // the word is unknown and the model has no <unk>.
  TokenId id_or_unk(const std::string& word) const;

  void add_entry(const Gram& g, double log10_prob);
  void set_backoff(const Gram& g, double log10_backoff);
  const NgramEntry* find(const Gram& g) const;
  const std::unordered_map<Gram, NgramEntry, GramHash>& entries(int k) const {
    return table_[k - 1];
  }

  // Backoff walk over an explicit history (longest stored suffix wins).
  double log10_prob(std::span<const TokenId> history, TokenId word) const;

  LmState begin_state() const;  // context [<s>] when present
  ScoreResult score(const LmState& state, TokenId word) const;

 private:
  LmState next_state(const Gram& extended) const;

  int order_;
  SymbolTable symbols_;
  std::optional<TokenId> bos_, eos_, unk_;
  std::vector<std::unordered_map<Gram, NgramEntry, GramHash>> table_;
};

// Interpolated modified Kneser-Ney estimation with per-order pruning.
NgramModel train(const NgramCounts& counts,
                 std::span<const uint64_t> prune_thresholds = {});

// ARPA text codec. read_arpa validates section counts, token coverage and
// prefix closure, reporting file:line on failure.
void write_arpa(const NgramModel& model, std::ostream& out);
NgramModel read_arpa(std::istream& in, const std::string& name);
NgramModel load_arpa(const std::string& path);
void save_arpa(const NgramModel& model, const std::string& path);

struct PplReport {
  double ppl = 0.0;
  double oov_percent = 0.0;
  uint64_t tokens = 0;      // scored tokens, </s> included
  uint64_t word_tokens = 0; // running text tokens
  uint64_t oov_tokens = 0;
  double total_log10 = 0.0;
};

// Scores w1..wn </s> per sentence from a <s> context; OOV tokens contribute
// the <unk> probability and are tallied separately.
PplReport perplexity(const NgramModel& model, std::istream& test);

}  // namespace asrtk

#endif
