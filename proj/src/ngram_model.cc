#include <cmath>

#include "asrtk/ngram.hh"
#include "asrtk/util.hh"

namespace asrtk {

TokenId SymbolTable::intern(const std::string& sym) {
  auto it = index_.find(sym);
  if (it != index_.end()) return it->second;
  TokenId id = static_cast<TokenId>(syms_.size());
  syms_.push_back(sym);
  index_.emplace(sym, id);
  return id;
}

std::optional<TokenId> SymbolTable::find(const std::string& sym) const {
  auto it = index_.find(sym);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NgramModel::NgramModel(int order) : order_(order) {
  if (order < 1 || order > kMaxNgramOrder)
    throw ConfigError("n-gram order must be in [1," +
                      std::to_string(kMaxNgramOrder) + "]");
  table_.resize(order);
}

void NgramModel::refresh_specials() {
  bos_ = symbols_.find(kSentBegin);
  eos_ = symbols_.find(kSentEnd);
  unk_ = symbols_.find(kUnknown);
}

TokenId NgramModel::id_or_unk(const std::string& word) const {
  if (auto id = symbols_.find(word)) return *id;
  if (unk_) return *unk_;
  throw DataError("word '" + word + "' is unknown and the model has no " +
                  kUnknown + " entry");
}

void NgramModel::add_entry(const Gram& g, double log10_prob) {
  table_[g.len - 1][g].log10_prob = log10_prob;
}

void NgramModel::set_backoff(const Gram& g, double log10_backoff) {
  auto& e = table_[g.len - 1][g];
  e.log10_backoff = log10_backoff;
  e.has_backoff = true;
}

const NgramEntry* NgramModel::find(const Gram& g) const {
  if (g.len == 0 || g.len > order_) return nullptr;
  const auto& t = table_[g.len - 1];
  auto it = t.find(g);
  return it == t.end() ? nullptr : &it->second;
}

double NgramModel::log10_prob(std::span<const TokenId> history, TokenId word) const {
  size_t maxlen = std::min(history.size(), static_cast<size_t>(order_ - 1));
  Gram ctx = Gram::of(history.subspan(history.size() - maxlen));
  double backoff_sum = 0.0;
  for (;;) {
    Gram g = ctx;
    g.push(word);
    if (const NgramEntry* e = find(g)) return backoff_sum + e->log10_prob;
    if (ctx.empty())
      throw DataError("token id " + std::to_string(word) +
                      " has no unigram entry");
    if (const NgramEntry* c = find(ctx); c && c->has_backoff)
      backoff_sum += c->log10_backoff;
    ctx = ctx.drop_first();
  }
}

LmState NgramModel::begin_state() const {
  LmState s;
  if (bos_ && order_ > 1) s.context = Gram::single(*bos_);
  return s;
}

LmState NgramModel::next_state(const Gram& extended) const {
  // Keep the longest stored suffix that still has a backoff weight: anything
  // shorter scores identically, anything without extensions cannot matter.
  Gram g = extended;
  while (!g.empty()) {
    if (const NgramEntry* e = find(g); e && e->has_backoff) return LmState{g};
    g = g.drop_first();
  }
  return LmState{};
}

ScoreResult NgramModel::score(const LmState& state, TokenId word) const {
  double lp = log10_prob(state.context.tokens(), word);
  Gram ext = state.context.extended(word, static_cast<uint8_t>(order_ - 1));
  return {lp, next_state(ext)};
}

PplReport perplexity(const NgramModel& model, std::istream& test) {
  if (!model.eos())
    throw DataError("model has no " + std::string(kSentEnd) + " entry");
  PplReport rep;
  uint64_t nonempty = 0;
  for_each_line(test, [&](const std::string& line) {
    auto tokens = split_ws(line);
    ++nonempty;
    LmState state = model.begin_state();
    for (const auto& tok : tokens) {
      ++rep.word_tokens;
      auto found = model.token_id(tok);
      bool oov = !found || is_special_token(tok);
      TokenId id;
      if (oov) {
        ++rep.oov_tokens;
        id = model.id_or_unk(kUnknown);
      } else {
        id = *found;
      }
      auto [lp, next] = model.score(state, id);
      rep.total_log10 += lp;
      ++rep.tokens;
      state = next;
    }
    auto [lp, next] = model.score(state, *model.eos());
    (void)next;
    rep.total_log10 += lp;
    ++rep.tokens;
  });
  if (nonempty == 0 || rep.tokens == 0) throw DataError("perplexity: empty test set");
  rep.ppl = std::pow(10.0, -rep.total_log10 / static_cast<double>(rep.tokens));
  rep.oov_percent = rep.word_tokens == 0
                        ? 0.0
                        : 100.0 * static_cast<double>(rep.oov_tokens) /
                              static_cast<double>(rep.word_tokens);
  return rep;
}

}  // namespace asrtk
