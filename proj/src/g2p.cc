#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asrtk/g2p.hh"
#include "asrtk/util.hh"

namespace asrtk {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Evidence floor: graphones whose expected count falls below this are dropped
// from the inventory, so degenerate alignments die out instead of lingering
// with smoothing mass.
constexpr double kTrimThreshold = 1e-6;
// Stand-in log likelihood for a pair with no surviving alignment path.
constexpr double kUnreachablePairLl = -690.0;
constexpr int kEmMaxIterations = 20;
constexpr double kEmTolerancePerPair = 1e-4;
constexpr size_t kApplyBeam = 256;
constexpr int kMaxEpsilonRun = 3;  // word-internal phoneme insertions in a row

double lse(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

bool valid_phoneme(const std::string& p) {
  if (p.empty() || p.size() > 8) return false;
  for (char c : p)
    if (c < 'A' || c > 'Z') return false;
  return true;
}

struct PreppedPair {
  std::vector<std::string> letters;
  std::vector<std::string> phones;
};

}  // namespace

GraphoneModel::GraphoneModel(int order, std::vector<std::string> phonemes,
                             std::vector<Graphone> inventory,
                             std::vector<double> discounts,
                             std::map<Gram, double> top_counts)
    : order_(order),
      phonemes_(std::move(phonemes)),
      inventory_(std::move(inventory)),
      discounts_(std::move(discounts)),
      top_counts_(std::move(top_counts)) {
  if (order_ < 1 || order_ > kMaxNgramOrder)
    throw ConfigError("g2p: order must be in [1," +
                      std::to_string(kMaxNgramOrder) + "]");
  if (discounts_.size() != static_cast<size_t>(order_))
    throw ConfigError("g2p: one discount per order expected");
  rebuild();
}

Gram GraphoneModel::begin_context() const {
  Gram g;
  for (int i = 0; i < order_ - 1; ++i) g.push(kBos);
  return g;
}

void GraphoneModel::rebuild() {
  levels_.assign(static_cast<size_t>(order_), {});
  levels_[static_cast<size_t>(order_ - 1)].events = top_counts_;
  for (int j = order_ - 1; j >= 1; --j) {
    auto& src = levels_[static_cast<size_t>(j)].events;
    auto& dst = levels_[static_cast<size_t>(j - 1)].events;
    for (const auto& [g, c] : src) dst[g.drop_first()] += c;
  }
  for (int j = 1; j <= order_; ++j) {
    auto& lv = levels_[static_cast<size_t>(j - 1)];
    double d = discounts_[static_cast<size_t>(j - 1)];
    for (const auto& [g, c] : lv.events) {
      auto& ctx = lv.contexts[g.prefix()];
      ctx.first += c;
      ctx.second += std::min(c, d);
    }
  }
}

double GraphoneModel::log_prob(const Gram& history, TokenId event) const {
  Gram h = history.suffix(static_cast<uint8_t>(order_ - 1));
  // Built bottom-up: start from the uniform ground distribution and apply
  // each level's "discounted count + leftover * lower" step; levels whose
  // context never occurred are identities.
  double p = 1.0 / static_cast<double>(event_count());
  for (int j = 1; j <= order_; ++j) {
    const auto& lv = levels_[static_cast<size_t>(j - 1)];
    Gram ctx = h.suffix(static_cast<uint8_t>(j - 1));
    auto it = lv.contexts.find(ctx);
    if (it == lv.contexts.end()) continue;
    double total = it->second.first;
    double gamma = it->second.second / total;
    Gram full = ctx;
    full.push(event);
    auto ev = lv.events.find(full);
    double c = ev == lv.events.end() ? 0.0 : ev->second;
    double d = discounts_[static_cast<size_t>(j - 1)];
    p = std::max(c - d, 0.0) / total + gamma * p;
  }
  return std::log(p);
}

void GraphoneModel::write(std::ostream& out) const {
  out << "G2P1\n";
  out << "order " << order_ << "\n";
  out << "discounts";
  for (double d : discounts_) out << ' ' << format_sig(d, 17);
  out << "\n";
  out << "phonemes";
  for (const auto& p : phonemes_) out << ' ' << p;
  out << "\n";
  out << "graphones " << inventory_.size() << "\n";
  for (const auto& g : inventory_) out << g.letter << '\t' << g.phoneme << '\n';
  out << "counts " << top_counts_.size() << "\n";
  for (const auto& [g, c] : top_counts_) {
    for (uint8_t i = 0; i < g.len; ++i) {
      if (i) out << ' ';
      out << g.ids[i];
    }
    out << '\t' << format_sig(c, 17) << '\n';
  }
  out << "end\n";
  if (!out) throw IoError("failed writing graphone model");
}

namespace {

bool parse_num(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

bool parse_u32(const std::string& s, uint32_t* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  unsigned long v = std::strtoul(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || v > 0xfffffffful) return false;
  *out = static_cast<uint32_t>(v);
  return true;
}

}  // namespace

GraphoneModel GraphoneModel::read(std::istream& in, const std::string& name) {
  size_t ln = 0;
  std::string line;
  auto next = [&]() {
    if (!std::getline(in, line))
      throw ParseError(name, ln, "unexpected end of graphone model file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++ln;
  };

  next();
  if (line != "G2P1")
    throw ParseError(name, ln, "expected G2P1 magic, got '" + line + "'");

  next();
  auto fields = split_ws(line);
  uint32_t order = 0;
  if (fields.size() != 2 || fields[0] != "order" ||
      !parse_u32(fields[1], &order) || order < 1 ||
      order > static_cast<uint32_t>(kMaxNgramOrder))
    throw ParseError(name, ln, "expected 'order <1..6>'");

  next();
  fields = split_ws(line);
  if (fields.empty() || fields[0] != "discounts" ||
      fields.size() != 1 + order)
    throw ParseError(name, ln, "expected 'discounts' with one value per order");
  std::vector<double> discounts;
  for (size_t i = 1; i < fields.size(); ++i) {
    double d = 0.0;
    if (!parse_num(fields[i], &d) || !(d >= 0.0))
      throw ParseError(name, ln, "bad discount '" + fields[i] + "'");
    discounts.push_back(d);
  }

  next();
  fields = split_ws(line);
  if (fields.empty() || fields[0] != "phonemes")
    throw ParseError(name, ln, "expected 'phonemes' line");
  std::vector<std::string> phonemes(fields.begin() + 1, fields.end());
  std::set<std::string> phoneme_set(phonemes.begin(), phonemes.end());
  if (phoneme_set.size() != phonemes.size())
    throw ParseError(name, ln, "duplicate phoneme in alphabet");

  next();
  fields = split_ws(line);
  uint32_t n_graphones = 0;
  if (fields.size() != 2 || fields[0] != "graphones" ||
      !parse_u32(fields[1], &n_graphones))
    throw ParseError(name, ln, "expected 'graphones <count>'");
  std::vector<Graphone> inventory;
  std::set<Graphone> seen;
  for (uint32_t i = 0; i < n_graphones; ++i) {
    next();
    auto parts = split_char(line, '\t');
    if (parts.size() != 2)
      throw ParseError(name, ln, "expected 'letter<TAB>phoneme'");
    Graphone g{parts[0], parts[1]};
    if (g.letter.empty() && g.phoneme.empty())
      throw ParseError(name, ln, "graphone with both sides empty");
    if (utf8_codepoints(g.letter).size() > 1)
      throw ParseError(name, ln, "graphone letter side longer than one character");
    if (!g.phoneme.empty() && !phoneme_set.count(g.phoneme))
      throw ParseError(name, ln,
                       "graphone phoneme '" + g.phoneme + "' not in alphabet");
    if (!seen.insert(g).second)
      throw ParseError(name, ln, "duplicate graphone");
    inventory.push_back(std::move(g));
  }

  next();
  fields = split_ws(line);
  uint32_t n_counts = 0;
  if (fields.size() != 2 || fields[0] != "counts" ||
      !parse_u32(fields[1], &n_counts))
    throw ParseError(name, ln, "expected 'counts <count>'");
  std::map<Gram, double> counts;
  const uint32_t max_id =
      kFirstGraphone + static_cast<uint32_t>(inventory.size());
  for (uint32_t i = 0; i < n_counts; ++i) {
    next();
    auto parts = split_char(line, '\t');
    if (parts.size() != 2)
      throw ParseError(name, ln, "expected 'ids<TAB>count'");
    auto ids = split_ws(parts[0]);
    if (ids.size() != order)
      throw ParseError(name, ln, "expected " + std::to_string(order) +
                                     " ids, got " + std::to_string(ids.size()));
    Gram g;
    for (size_t t = 0; t < ids.size(); ++t) {
      uint32_t id = 0;
      if (!parse_u32(ids[t], &id) || id >= max_id)
        throw ParseError(name, ln, "graphone id out of range: '" + ids[t] + "'");
      bool is_event = t + 1 == ids.size();
      if (is_event && id == kBos)
        throw ParseError(name, ln, "sequence-begin marker used as an event");
      if (!is_event && id == kEos)
        throw ParseError(name, ln, "sequence-end marker inside a history");
      g.push(id);
    }
    double c = 0.0;
    if (!parse_num(parts[1], &c) || !(c > 0.0) || !std::isfinite(c))
      throw ParseError(name, ln, "bad count '" + parts[1] + "'");
    if (!counts.emplace(g, c).second)
      throw ParseError(name, ln, "duplicate count entry");
  }

  next();
  if (line != "end")
    throw ParseError(name, ln, "expected 'end', got '" + line + "'");

  return GraphoneModel(static_cast<int>(order), std::move(phonemes),
                       std::move(inventory), std::move(discounts),
                       std::move(counts));
}

GraphoneModel GraphoneModel::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read(in, path);
}

void GraphoneModel::save(const std::string& path) const {
  std::ofstream out;
  open_out_or_throw(out, path);
  write(out);
  if (!out) throw IoError("failed writing " + path);
}

namespace {

// Forward-backward over one pair's alignment lattice at history length k-1.
// Arcs consume one letter, one phoneme, or one of each; every event must be
// an alive inventory graphone. Returns log P(pair); -inf when no path
// survives. When `counts` is given, expected (history,event) counts of
// gram-length k are accumulated into it.
double pair_forward_backward(const PreppedPair& pr, int k,
                             const GraphoneModel* scorer, double flat_lp,
                             const std::map<Graphone, TokenId>& index,
                             const std::vector<char>& alive,
                             std::map<Gram, double>* counts) {
  const size_t m = pr.letters.size(), n = pr.phones.size();
  const uint8_t hist_len = static_cast<uint8_t>(k - 1);
  auto at = [n](size_t i, size_t j) { return i * (n + 1) + j; };

  struct Arc {
    size_t ni, nj;
    TokenId event;
  };
  auto arcs_from = [&](size_t i, size_t j) {
    std::vector<Arc> arcs;
    auto try_add = [&](const Graphone& g, size_t ni, size_t nj) {
      auto it = index.find(g);
      if (it == index.end()) return;
      if (!alive[it->second - GraphoneModel::kFirstGraphone]) return;
      arcs.push_back({ni, nj, it->second});
    };
    if (i < m) try_add({pr.letters[i], ""}, i + 1, j);
    if (j < n) try_add({"", pr.phones[j]}, i, j + 1);
    if (i < m && j < n) try_add({pr.letters[i], pr.phones[j]}, i + 1, j + 1);
    return arcs;
  };
  auto score = [&](const Gram& h, TokenId e) {
    return scorer ? scorer->log_prob(h, e) : flat_lp;
  };

  std::vector<std::map<Gram, double>> fwd((m + 1) * (n + 1));
  Gram begin;
  for (uint8_t t = 0; t < hist_len; ++t) begin.push(GraphoneModel::kBos);
  fwd[0][begin] = 0.0;

  for (size_t i = 0; i <= m; ++i)
    for (size_t j = 0; j <= n; ++j) {
      const auto& here = fwd[at(i, j)];
      if (here.empty()) continue;
      for (const auto& arc : arcs_from(i, j))
        for (const auto& [h, lw] : here) {
          double w = lw + score(h, arc.event);
          auto [it, fresh] =
              fwd[at(arc.ni, arc.nj)].try_emplace(h.extended(arc.event, hist_len), w);
          if (!fresh) it->second = lse(it->second, w);
        }
    }

  double total = kNegInf;
  for (const auto& [h, lw] : fwd[at(m, n)])
    total = lse(total, lw + score(h, GraphoneModel::kEos));
  if (total == kNegInf || counts == nullptr) return total;

  std::vector<std::map<Gram, double>> bwd((m + 1) * (n + 1));
  for (const auto& [h, lw] : fwd[at(m, n)]) {
    (void)lw;
    bwd[at(m, n)][h] = score(h, GraphoneModel::kEos);
  }
  for (size_t ri = 0; ri <= m; ++ri)
    for (size_t rj = 0; rj <= n; ++rj) {
      size_t i = m - ri, j = n - rj;
      if (i == m && j == n) continue;
      auto arcs = arcs_from(i, j);
      for (const auto& [h, lw] : fwd[at(i, j)]) {
        (void)lw;
        double b = kNegInf;
        for (const auto& arc : arcs) {
          auto it = bwd[at(arc.ni, arc.nj)].find(h.extended(arc.event, hist_len));
          if (it == bwd[at(arc.ni, arc.nj)].end()) continue;  // dead end
          b = lse(b, score(h, arc.event) + it->second);
        }
        bwd[at(i, j)][h] = b;
      }
    }

  for (size_t i = 0; i <= m; ++i)
    for (size_t j = 0; j <= n; ++j) {
      auto arcs = arcs_from(i, j);
      for (const auto& [h, lw] : fwd[at(i, j)]) {
        if (i == m && j == n) {
          Gram key = h;
          key.push(GraphoneModel::kEos);
          (*counts)[key] +=
              std::exp(lw + score(h, GraphoneModel::kEos) - total);
          continue;
        }
        for (const auto& arc : arcs) {
          auto it = bwd[at(arc.ni, arc.nj)].find(h.extended(arc.event, hist_len));
          if (it == bwd[at(arc.ni, arc.nj)].end() || it->second == kNegInf)
            continue;
          double post =
              std::exp(lw + score(h, arc.event) + it->second - total);
          Gram key = h;
          key.push(arc.event);
          (*counts)[key] += post;
        }
      }
    }
  return total;
}

struct EmRun {
  GraphoneModel model;
  double eval_ll = kNegInf;
  std::vector<char> alive;
};

// One EM-to-convergence run at ramp-up stage k with a fixed discount for the
// new top level. The first E-step is scored by the previous stage's model
// (or a flat distribution at stage 1).
EmRun run_em(int k, double top_discount, const std::vector<double>& lower,
             const GraphoneModel* init, const std::vector<std::string>& phonemes,
             const std::vector<Graphone>& inventory,
             const std::map<Graphone, TokenId>& index,
             const std::vector<char>& alive0,
             const std::vector<PreppedPair>& train,
             const std::vector<PreppedPair>& held) {
  EmRun run;
  std::vector<double> discounts = lower;
  discounts.push_back(k == 1 ? 0.0 : top_discount);
  const double flat_lp = -std::log(static_cast<double>(inventory.size() + 1));
  const size_t monitored = held.empty() ? train.size() : held.size();
  GraphoneModel current;
  std::vector<char> alive = alive0;
  bool have_model = false;
  double prev_eval = kNegInf;

  for (int it = 0; it < kEmMaxIterations; ++it) {
    const GraphoneModel* scorer = have_model ? &current : init;
    std::map<Gram, double> counts;
    for (const auto& p : train)
      pair_forward_backward(p, k, scorer, flat_lp, index, alive, &counts);

    std::vector<double> mass(inventory.size(), 0.0);
    for (const auto& [g, c] : counts)
      if (g.back() >= GraphoneModel::kFirstGraphone)
        mass[g.back() - GraphoneModel::kFirstGraphone] += c;
    bool trimmed = false;
    for (size_t idx = 0; idx < inventory.size(); ++idx)
      if (alive[idx] && mass[idx] < kTrimThreshold) {
        alive[idx] = false;
        trimmed = true;
      }
    if (trimmed) {
      auto dead = [&](TokenId id) {
        return id >= GraphoneModel::kFirstGraphone &&
               !alive[id - GraphoneModel::kFirstGraphone];
      };
      for (auto it2 = counts.begin(); it2 != counts.end();) {
        bool drop = false;
        for (uint8_t t = 0; t < it2->first.len; ++t)
          if (dead(it2->first.ids[t])) drop = true;
        it2 = drop ? counts.erase(it2) : std::next(it2);
      }
    }

    current = GraphoneModel(k, phonemes, inventory, discounts,
                            std::move(counts));
    have_model = true;

    const auto& eval_set = held.empty() ? train : held;
    double eval = 0.0;
    for (const auto& p : eval_set) {
      double ll =
          pair_forward_backward(p, k, &current, 0.0, index, alive, nullptr);
      eval += ll == kNegInf ? kUnreachablePairLl : ll;
    }
    // Early stopping keeps the best model seen, not the last one; the
    // monitored likelihood can dip once the alignments start overfitting.
    if (eval > run.eval_ll) {
      run.model = current;
      run.eval_ll = eval;
      run.alive = alive;
    }
    if (it > 0 &&
        eval - prev_eval < kEmTolerancePerPair * static_cast<double>(monitored))
      break;
    prev_eval = eval;
  }
  return run;
}

}  // namespace

GraphoneModel train_g2p(const G2pDictionary& dictionary, int order,
                        double holdout_fraction, uint64_t seed,
                        G2pTrainLog* log) {
  if (dictionary.empty()) throw DataError("g2p: empty dictionary");
  if (order < 1 || order > kMaxNgramOrder)
    throw ConfigError("g2p: order must be in [1," +
                      std::to_string(kMaxNgramOrder) + "]");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw ConfigError("g2p: holdout fraction must be in [0,1)");

  std::vector<PreppedPair> pairs;
  std::set<std::string> alphabet;
  for (const auto& [word, pron] : dictionary) {
    if (word.empty()) throw DataError("g2p: empty word in dictionary");
    if (pron.empty())
      throw DataError("g2p: entry '" + word + "': empty pronunciation");
    PreppedPair p;
    p.letters = utf8_codepoints(to_upper(word));
    for (const auto& ph : pron) {
      if (!valid_phoneme(ph))
        throw DataError("g2p: entry '" + word + "': unknown phoneme symbol '" +
                        ph + "'");
      alphabet.insert(ph);
    }
    p.phones = pron;
    pairs.push_back(std::move(p));
  }

  // Seeded split: shuffle indices, hold out the first floor(n*fraction).
  std::vector<size_t> order_idx(pairs.size());
  for (size_t i = 0; i < order_idx.size(); ++i) order_idx[i] = i;
  std::mt19937 rng(static_cast<uint32_t>(seed));
  for (size_t i = order_idx.size(); i > 1; --i)
    std::swap(order_idx[i - 1], order_idx[rng() % i]);
  size_t n_held =
      static_cast<size_t>(std::floor(static_cast<double>(pairs.size()) *
                                     holdout_fraction));
  std::set<size_t> held_idx(order_idx.begin(), order_idx.begin() +
                                                   static_cast<long>(n_held));
  std::vector<PreppedPair> train, held;
  for (size_t i = 0; i < pairs.size(); ++i)
    (held_idx.count(i) ? held : train).push_back(pairs[i]);
  if (train.empty())
    throw DataError("g2p: hold-out split leaves no training data");

  // Initial inventory: every graphone any training lattice can use.
  std::set<Graphone> inv_set;
  for (const auto& p : train) {
    for (const auto& l : p.letters) inv_set.insert({l, ""});
    for (const auto& ph : p.phones) inv_set.insert({"", ph});
    for (const auto& l : p.letters)
      for (const auto& ph : p.phones) inv_set.insert({l, ph});
  }
  std::vector<Graphone> inventory(inv_set.begin(), inv_set.end());
  std::map<Graphone, TokenId> index;
  for (size_t i = 0; i < inventory.size(); ++i)
    index[inventory[i]] =
        GraphoneModel::kFirstGraphone + static_cast<TokenId>(i);
  std::vector<std::string> phonemes(alphabet.begin(), alphabet.end());

  std::vector<char> alive(inventory.size(), 1);
  std::vector<double> chosen;
  GraphoneModel stage_model;
  bool have_stage = false;

  for (int k = 1; k <= order; ++k) {
    std::vector<double> grid =
        k == 1 ? std::vector<double>{0.0}
               : std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9};
    EmRun best;
    double best_d = 0.0;
    bool have_best = false;
    for (double d : grid) {
      EmRun r = run_em(k, d, chosen, have_stage ? &stage_model : nullptr,
                       phonemes, inventory, index, alive, train, held);
      if (!have_best || r.eval_ll > best.eval_ll) {  // ties keep the smaller d
        best = std::move(r);
        best_d = d;
        have_best = true;
      }
    }
    chosen.push_back(k == 1 ? 0.0 : best_d);
    stage_model = std::move(best.model);
    have_stage = true;
    alive = best.alive;
    if (log) log->held_out_ll_by_order.push_back(best.eval_ll);
  }
  if (log) {
    log->discounts = chosen;
    log->holdout_pairs = held.size();
  }

  // Compact to the surviving inventory; scores are unchanged because the
  // uniform ground term carries no weight (level-1 discount is zero).
  std::vector<Graphone> final_inv;
  std::vector<TokenId> remap(inventory.size() + GraphoneModel::kFirstGraphone, 0);
  remap[GraphoneModel::kBos] = GraphoneModel::kBos;
  remap[GraphoneModel::kEos] = GraphoneModel::kEos;
  for (size_t i = 0; i < inventory.size(); ++i)
    if (alive[i]) {
      remap[GraphoneModel::kFirstGraphone + i] =
          GraphoneModel::kFirstGraphone +
          static_cast<TokenId>(final_inv.size());
      final_inv.push_back(inventory[i]);
    }
  std::map<Gram, double> final_counts;
  for (const auto& [g, c] : stage_model.top_counts()) {
    Gram ng;
    for (uint8_t t = 0; t < g.len; ++t) ng.push(remap[g.ids[t]]);
    final_counts.emplace(ng, c);
  }
  return GraphoneModel(order, phonemes, std::move(final_inv), chosen,
                       std::move(final_counts));
}

std::vector<PronunciationHypothesis> apply_g2p(const GraphoneModel& model,
                                               const std::string& word,
                                               int n_best) {
  if (n_best < 1) throw ConfigError("g2p: n_best must be at least 1");
  auto letters = utf8_codepoints(to_upper(word));
  if (letters.empty()) throw DataError("g2p: empty word");

  std::set<std::string> covered;
  for (const auto& g : model.inventory())
    if (!g.letter.empty()) covered.insert(g.letter);
  std::set<std::string> missing;
  for (const auto& l : letters)
    if (!covered.count(l)) missing.insert(l);
  if (!missing.empty()) {
    std::string list;
    for (const auto& c : missing) {
      if (!list.empty()) list += ", ";
      list += "'" + c + "'";
    }
    throw DataError("g2p: no graphone covers character " + list + " in word '" +
                    word + "'");
  }

  std::map<std::string, uint32_t> ph_index;
  for (size_t i = 0; i < model.phoneme_alphabet().size(); ++i)
    ph_index[model.phoneme_alphabet()[i]] = static_cast<uint32_t>(i);

  struct ApplyArc {
    TokenId event;
    bool has_phoneme;
    uint32_t phoneme;
  };
  std::vector<ApplyArc> eps_arcs;
  std::map<std::string, std::vector<ApplyArc>> letter_arcs;
  for (size_t i = 0; i < model.inventory().size(); ++i) {
    const Graphone& g = model.inventory()[i];
    ApplyArc arc{model.graphone_id(i), !g.phoneme.empty(),
                 g.phoneme.empty() ? 0 : ph_index.at(g.phoneme)};
    if (g.letter.empty())
      eps_arcs.push_back(arc);
    else
      letter_arcs[g.letter].push_back(arc);
  }

  const uint8_t hist_len = static_cast<uint8_t>(model.order() - 1);
  using Key = std::pair<Gram, std::vector<uint32_t>>;
  std::map<Key, double> layer;
  layer[{model.begin_context(), {}}] = 0.0;

  auto add = [](std::map<Key, double>& dst, const Key& key, double lp) {
    auto [it, fresh] = dst.try_emplace(key, lp);
    if (!fresh) it->second = lse(it->second, lp);
  };

  // Phoneme-only graphones keep the position; cap their run length so the
  // frontier stays finite.
  auto closure = [&](std::map<Key, double>& lay) {
    std::map<Key, double> frontier = lay;
    for (int round = 0; round < kMaxEpsilonRun && !frontier.empty(); ++round) {
      std::map<Key, double> fresh;
      for (const auto& [key, lp] : frontier)
        for (const auto& arc : eps_arcs) {
          double w = model.log_prob(key.first, arc.event);
          if (w == kNegInf) continue;
          Key nk{key.first.extended(arc.event, hist_len), key.second};
          nk.second.push_back(arc.phoneme);
          add(fresh, nk, lp + w);
        }
      for (const auto& [key, lp] : fresh) add(lay, key, lp);
      frontier = std::move(fresh);
    }
  };

  auto prune = [&](std::map<Key, double>& lay) {
    if (lay.size() <= kApplyBeam) return;
    std::vector<std::pair<Key, double>> v(lay.begin(), lay.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      if (a.first.second != b.first.second) return a.first.second < b.first.second;
      return a.first.first < b.first.first;
    });
    v.resize(kApplyBeam);
    lay = std::map<Key, double>(v.begin(), v.end());
  };

  for (const auto& letter : letters) {
    closure(layer);
    prune(layer);
    std::map<Key, double> next;
    auto it = letter_arcs.find(letter);
    for (const auto& [key, lp] : layer)
      for (const auto& arc : it->second) {
        double w = model.log_prob(key.first, arc.event);
        if (w == kNegInf) continue;
        Key nk{key.first.extended(arc.event, hist_len), key.second};
        if (arc.has_phoneme) nk.second.push_back(arc.phoneme);
        add(next, nk, lp + w);
      }
    layer = std::move(next);
    prune(layer);
    if (layer.empty())
      throw DataError("g2p: no hypothesis survived for word '" + word + "'");
  }
  closure(layer);

  std::map<std::vector<uint32_t>, double> finals;
  for (const auto& [key, lp] : layer) {
    double w = model.log_prob(key.first, GraphoneModel::kEos);
    if (w == kNegInf) continue;
    auto [it, fresh] = finals.try_emplace(key.second, lp + w);
    if (!fresh) it->second = lse(it->second, lp + w);
  }
  if (finals.empty())
    throw DataError("g2p: no hypothesis survived for word '" + word + "'");

  std::vector<std::pair<std::vector<uint32_t>, double>> ranked(finals.begin(),
                                                               finals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > static_cast<size_t>(n_best))
    ranked.resize(static_cast<size_t>(n_best));

  double z = kNegInf;
  for (const auto& [ph, lp] : ranked) {
    (void)ph;
    z = lse(z, lp);
  }
  std::vector<PronunciationHypothesis> out;
  for (const auto& [ph, lp] : ranked) {
    PronunciationHypothesis h;
    for (uint32_t id : ph) h.phonemes.push_back(model.phoneme_alphabet()[id]);
    h.log_joint = lp;
    h.posterior = std::exp(lp - z);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace asrtk
