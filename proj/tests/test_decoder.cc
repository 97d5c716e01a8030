#include "asrtk/decoder.hh"

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "asrtk/corpus.hh"
#include "asrtk/ngram.hh"
#include "asrtk/util.hh"
#include "doctest.h"
#include "test_support.hh"

using namespace asrtk;

namespace {

EmissionMatrix em_from_rows(const std::vector<std::vector<double>>& rows) {
  EmissionMatrix em;
  em.frames = uint32_t(rows.size());
  em.labels = rows.empty() ? 0 : uint32_t(rows[0].size());
  for (const auto& row : rows) {
    REQUIRE(row.size() == em.labels);
    for (double p : row) em.values.push_back(float(std::log(p)));
  }
  return em;
}

EmissionMatrix random_em(std::mt19937& rng, uint32_t frames, uint32_t labels) {
  std::uniform_real_distribution<double> logit(-2.0, 2.0);
  std::vector<std::vector<double>> rows(frames, std::vector<double>(labels));
  for (auto& row : rows) {
    double sum = 0.0;
    for (double& p : row) {
      p = std::exp(logit(rng));
      sum += p;
    }
    for (double& p : row) p /= sum;
  }
  return em_from_rows(rows);
}

LabelInventory subword_inv(std::vector<std::string> symbols) {
  LabelInventory inv;
  inv.kind = LabelInventory::Kind::kSubword;
  inv.marker = "▁";
  inv.symbols = std::move(symbols);
  inv.blank_index = 0;
  return inv;
}

std::string m(const std::string& s) { return "▁" + s; }

// Best collapsed sequence over every raw path, decoder tie-breaks applied.
std::pair<std::vector<uint32_t>, double> open_oracle(const EmissionMatrix& em) {
  std::map<std::vector<uint32_t>, double> best;
  std::vector<uint32_t> path(em.frames, 0);
  while (true) {
    double score = 0.0;
    std::vector<uint32_t> seq;
    uint32_t last = 0;
    for (uint32_t t = 0; t < em.frames; ++t) {
      score += em.at(t, path[t]);
      if (path[t] != 0 && path[t] != last) seq.push_back(path[t]);
      last = path[t];
    }
    auto [it, fresh] = best.emplace(seq, score);
    if (!fresh && score > it->second) it->second = score;
    uint32_t t = 0;
    for (; t < em.frames; ++t) {
      if (++path[t] < em.labels) break;
      path[t] = 0;
    }
    if (t == em.frames) break;
  }
  std::pair<std::vector<uint32_t>, double> win{{}, -1e300};
  for (const auto& [seq, score] : best) {
    if (score > win.second) win = {seq, score};
  }
  return win;
}

struct LexRig {
  Lexicon lex;
  PrefixTree tree;
  LabelInventory inv;
};

LexRig make_rig(const std::vector<std::pair<std::string, std::string>>& prons) {
  LexRig rig;
  for (const auto& [word, pron] : prons) {
    rig.lex.add(word, split_ws(pron), Pronunciation::Source::kBaseDict);
  }
  rig.tree = compile_prefix_tree(rig.lex);
  rig.inv = inventory_for_tree(rig.tree);
  return rig;
}

NgramModel word_lm(const std::vector<std::string>& words, unsigned seed,
                   int order = 2) {
  auto sents = testsup::random_sentences(words, 40, seed, 1, 5);
  std::istringstream corpus(testsup::as_text(sents));
  Vocabulary vocab{std::vector<std::string>(words)};
  return train(count_ngrams(corpus, order, vocab));
}

// Exhaustive reference: enumerate every raw path, collapse, parse against the
// tree, and keep the best complete word sequence under the full objective.
struct LexOracle {
  std::vector<uint32_t> words;
  double score = 0.0;
  bool found = false;
};

LexOracle lex_oracle(const EmissionMatrix& em, const PrefixTree& tree,
                     const NgramModel* lm, const PriorVector* prior,
                     const DecoderConfig& cfg) {
  if (cfg.lm_scale == 0.0) lm = nullptr;
  std::vector<TokenId> tok;
  if (lm) {
    for (const std::string& w : tree.words) tok.push_back(lm->id_or_unk(w));
  }
  std::vector<double> ac(size_t(em.frames) * em.labels);
  for (uint32_t t = 0; t < em.frames; ++t) {
    for (uint32_t l = 0; l < em.labels; ++l) {
      ac[size_t(t) * em.labels + l] =
          double(em.at(t, l)) -
          (prior ? cfg.prior_scale * prior->log_prior[l] : 0.0);
    }
  }
  std::map<std::vector<uint32_t>, double> best;
  auto offer = [&](const std::vector<uint32_t>& words, double score) {
    auto [it, fresh] = best.emplace(words, score);
    if (!fresh && score > it->second) it->second = score;
  };
  std::vector<uint32_t> path(em.frames, 0);
  std::vector<uint32_t> labels, words;
  while (true) {
    double acoustic = 0.0;
    labels.clear();
    uint32_t last = 0;
    for (uint32_t t = 0; t < em.frames; ++t) {
      acoustic += ac[size_t(t) * em.labels + path[t]];
      if (path[t] != 0 && path[t] != last) labels.push_back(path[t] - 1);
      last = path[t];
    }
    std::function<void(size_t, uint32_t, double)> parse = [&](size_t i,
                                                              uint32_t node,
                                                              double extra) {
      if (i == labels.size()) {
        if (node != 0) return;  // unfinished word
        double total = acoustic + extra;
        if (lm) {
          double lp = 0.0;
          LmState st = lm->begin_state();
          for (uint32_t w : words) {
            ScoreResult sr = lm->score(st, tok[w]);
            lp += sr.log10_prob;
            st = sr.next;
          }
          lp += lm->score(st, *lm->eos()).log10_prob;
          total += cfg.lm_scale * std::numbers::ln10 * lp;
        }
        offer(words, total);
        return;
      }
      auto arc = tree.nodes[node].arcs.find(labels[i]);
      if (arc == tree.nodes[node].arcs.end()) return;
      if (!tree.is_final_label(labels[i])) {
        parse(i + 1, arc->second, extra);
        return;
      }
      for (const PrefixTree::WordEnd& we : tree.nodes[arc->second].word_ends) {
        words.push_back(we.word);
        parse(i + 1, 0, extra + we.weight + cfg.word_insertion_score);
        words.pop_back();
      }
    };
    parse(0, 0, 0.0);
    uint32_t t = 0;
    for (; t < em.frames; ++t) {
      if (++path[t] < em.labels) break;
      path[t] = 0;
    }
    if (t == em.frames) break;
  }
  LexOracle out;
  for (const auto& [w, s] : best) {
    if (!out.found || s > out.score) {
      out = {w, s, true};
    }
  }
  return out;
}

std::vector<uint32_t> to_ids(const PrefixTree& tree,
                             const std::vector<std::string>& words) {
  std::vector<uint32_t> ids;
  for (const std::string& w : words) {
    auto it = std::find(tree.words.begin(), tree.words.end(), w);
    REQUIRE(it != tree.words.end());
    ids.push_back(uint32_t(it - tree.words.begin()));
  }
  return ids;
}

}  // namespace

TEST_CASE("emission container round trips byte for byte") {
  std::mt19937 rng(11);
  EmissionMatrix em = random_em(rng, 7, 5);
  std::ostringstream first;
  em.write(first);
  std::istringstream back(first.str());
  EmissionMatrix again = EmissionMatrix::read(back, "mem");
  CHECK(again.frames == em.frames);
  CHECK(again.labels == em.labels);
  CHECK(again.values == em.values);
  std::ostringstream second;
  again.write(second);
  CHECK(first.str() == second.str());

  EmissionMatrix empty;
  std::ostringstream eout;
  empty.write(eout);
  std::istringstream ein(eout.str());
  CHECK(EmissionMatrix::read(ein, "mem").frames == 0);
}

TEST_CASE("emission container rejects malformed files") {
  std::mt19937 rng(12);
  EmissionMatrix em = random_em(rng, 3, 4);
  std::ostringstream out;
  em.write(out);
  const std::string good = out.str();

  auto read_str = [](std::string bytes) {
    std::istringstream in(bytes);
    return EmissionMatrix::read(in, "mem");
  };

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(read_str(bad_magic), DataError);
  CHECK_THROWS_AS(read_str(good.substr(0, 7)), IoError);
  CHECK_THROWS_AS(read_str(good.substr(0, good.size() - 2)), IoError);

  EmissionMatrix unnormalized = em;
  unnormalized.values[0] = std::log(0.5f);
  unnormalized.values[1] = std::log(0.5f);
  unnormalized.values[2] = std::log(0.5f);
  unnormalized.values[3] = std::log(0.5f);
  std::ostringstream bad;
  unnormalized.write(bad);
  CHECK_THROWS_WITH_AS(read_str(bad.str()),
                       doctest::Contains("refusing to renormalize"), DataError);

  EmissionMatrix positive = em;
  positive.values[2] = 0.25f;
  std::ostringstream pos;
  positive.write(pos);
  CHECK_THROWS_AS(read_str(pos.str()), DataError);

  EmissionMatrix floored = em;
  floored.values[1] = -2e5f;
  std::ostringstream flo;
  floored.write(flo);
  CHECK_THROWS_AS(read_str(flo.str()), DataError);

  EmissionMatrix nan = em;
  nan.values[0] = std::numeric_limits<float>::quiet_NaN();
  std::ostringstream nanout;
  nan.write(nanout);
  CHECK_THROWS_AS(read_str(nanout.str()), DataError);
}

TEST_CASE("label inventory parses markers and rejects malformed files") {
  std::istringstream sub("#marker ▁\n<blank>\n▁the\nre\n");
  LabelInventory inv = LabelInventory::read(sub, "labels");
  CHECK(inv.kind == LabelInventory::Kind::kSubword);
  CHECK(inv.marker == "▁");
  CHECK(inv.symbols == std::vector<std::string>{"<blank>", "▁the", "re"});
  CHECK(inv.blank_index == 0);

  std::istringstream pho("<blank>\nAA\nAA#\n");
  LabelInventory ph = LabelInventory::read(pho, "labels");
  CHECK(ph.kind == LabelInventory::Kind::kPhoneme);
  CHECK(ph.size() == 3);

  std::ostringstream round;
  inv.write(round);
  CHECK(round.str() == "#marker ▁\n<blank>\n▁the\nre\n");

  auto read_str = [](std::string text) {
    std::istringstream in(text);
    return LabelInventory::read(in, "labels");
  };
  CHECK_THROWS_AS(read_str("AA\n<blank>\n"), ParseError);
  CHECK_THROWS_AS(read_str("<blank>\nAA\nAA\n"), DataError);
  CHECK_THROWS_AS(read_str("<blank>\n#marker ▁\n"), ParseError);
  CHECK_THROWS_AS(read_str("<blank>\n\nAA\n"), ParseError);
  CHECK_THROWS_AS(read_str("#marker\n<blank>\n"), ParseError);
  CHECK_THROWS_AS(read_str(""), DataError);
}

TEST_CASE("prior estimation averages exponentiated posteriors") {
  EmissionMatrix a = em_from_rows({{0.8, 0.2}});
  EmissionMatrix b = em_from_rows({{0.4, 0.6}});
  std::vector<EmissionMatrix> ems{a, b};
  PriorVector prior = estimate_prior(ems);
  REQUIRE(prior.size() == 2);
  CHECK(std::exp(prior.log_prior[0]) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(std::exp(prior.log_prior[1]) == doctest::Approx(0.4).epsilon(1e-6));

  // All mass on one label pushes the other to the floor.
  EmissionMatrix hot = em_from_rows({{1.0 - 1e-30, 1e-30}});
  std::vector<EmissionMatrix> hots{hot};
  PriorVector floored = estimate_prior(hots);
  CHECK(floored.log_prior[1] == doctest::Approx(std::log(1e-10)));

  std::vector<EmissionMatrix> none;
  CHECK_THROWS_AS(estimate_prior(none), DataError);
  std::vector<EmissionMatrix> frameless{EmissionMatrix{}};
  CHECK_THROWS_AS(estimate_prior(frameless), DataError);

  std::ostringstream out;
  prior.write(out);
  std::istringstream in(out.str());
  PriorVector again = PriorVector::read(in, "prior");
  CHECK(again.log_prior == prior.log_prior);
  std::istringstream junk("-0.1\nle nan\n");
  CHECK_THROWS_AS(PriorVector::read(junk, "prior"), ParseError);
}

TEST_CASE("greedy decoding collapses repeats and splits words at markers") {
  LabelInventory inv =
      subword_inv({"<blank>", m("co"), "de", m("it"), "s", m("")});
  // co co _ de de it s -> "code its"
  EmissionMatrix em = em_from_rows({
      {0.1, 0.6, 0.1, 0.1, 0.05, 0.05},
      {0.1, 0.6, 0.1, 0.1, 0.05, 0.05},
      {0.6, 0.1, 0.1, 0.1, 0.05, 0.05},
      {0.1, 0.1, 0.6, 0.1, 0.05, 0.05},
      {0.1, 0.1, 0.6, 0.1, 0.05, 0.05},
      {0.1, 0.1, 0.1, 0.6, 0.05, 0.05},
      {0.1, 0.05, 0.1, 0.1, 0.6, 0.05},
  });
  CHECK(greedy_decode(em, inv) == std::vector<std::string>{"code", "its"});

  // A leading continuation token still opens a word; a bare marker
  // contributes nothing on its own.
  EmissionMatrix lead = em_from_rows({{0.1, 0.1, 0.6, 0.1, 0.05, 0.05}});
  CHECK(greedy_decode(lead, inv) == std::vector<std::string>{"de"});
  EmissionMatrix bare = em_from_rows({{0.1, 0.1, 0.05, 0.1, 0.05, 0.6}});
  CHECK(greedy_decode(bare, inv) == std::vector<std::string>{});
  EmissionMatrix none = em_from_rows({{0.95, 0.01, 0.01, 0.01, 0.01, 0.01}});
  CHECK(greedy_decode(none, inv) == std::vector<std::string>{});

  EmissionMatrix empty;
  empty.labels = 6;
  CHECK(greedy_decode(empty, inv) == std::vector<std::string>{});

  LabelInventory phon;
  phon.symbols = {"<blank>", "AA", "AA#"};
  CHECK_THROWS_AS(greedy_decode(em_from_rows({{0.5, 0.25, 0.25}}), phon),
                  ConfigError);
  EmissionMatrix narrow = em_from_rows({{0.5, 0.5}});
  CHECK_THROWS_AS(greedy_decode(narrow, inv), DataError);
}

TEST_CASE("a one-wide beam retraces the greedy path") {
  LabelInventory inv = subword_inv({"<blank>", m("a"), "b", m("c"), "d"});
  DecoderConfig cfg;
  cfg.beam_size = 1;
  std::mt19937 rng(21);
  for (int i = 0; i < 200; ++i) {
    const uint32_t frames = 1 + rng() % 8;
    EmissionMatrix em = random_em(rng, frames, uint32_t(inv.size()));
    CHECK(beam_search_open(em, inv, cfg) == greedy_decode(em, inv));
  }
  // Exact score ties: both resolve to the lowest label index.
  EmissionMatrix tie = em_from_rows({{0.2, 0.4, 0.4}, {0.2, 0.4, 0.4}});
  LabelInventory small = subword_inv({"<blank>", m("x"), m("y")});
  CHECK(greedy_decode(tie, small) == std::vector<std::string>{"x"});
  CHECK(beam_search_open(tie, small, cfg) == std::vector<std::string>{"x"});
}

TEST_CASE("a saturating beam is exact over all paths") {
  LabelInventory inv3 = subword_inv({"<blank>", m("x"), "y"});
  DecoderConfig cfg;
  cfg.beam_size = 100000;
  std::mt19937 rng(22);
  // The 3x3 case walks all 27 paths; wider randoms follow.
  for (int i = 0; i < 40; ++i) {
    EmissionMatrix em = random_em(rng, 3, 3);
    auto [seq, score] = open_oracle(em);
    double got = 0.0;
    std::vector<std::string> toks;
    for (uint32_t l : seq) toks.push_back(inv3.symbols[l]);
    std::vector<std::string> want;
    for (const std::string& t : toks) {
      if (t.rfind(inv3.marker, 0) == 0) {
        want.push_back(t.substr(inv3.marker.size()));
      } else if (!want.empty()) {
        want.back() += t;
      } else {
        want.push_back(t);
      }
    }
    CHECK(beam_search_open(em, inv3, cfg, &got) == want);
    CHECK(std::abs(got - score) <= 1e-9);
  }
  LabelInventory inv4 = subword_inv({"<blank>", m("x"), "y", m("z")});
  for (int i = 0; i < 40; ++i) {
    EmissionMatrix em = random_em(rng, 4, 4);
    auto [seq, score] = open_oracle(em);
    double got = 0.0;
    beam_search_open(em, inv4, cfg, &got);
    CHECK(std::abs(got - score) <= 1e-9);
  }
}

TEST_CASE("shrinking the beam never improves the best score") {
  LabelInventory inv = subword_inv({"<blank>", m("a"), "b", m("c"), "d"});
  std::mt19937 rng(23);
  for (int i = 0; i < 20; ++i) {
    EmissionMatrix em = random_em(rng, 6, uint32_t(inv.size()));
    double prev = -1e300;
    for (int beam : {1, 2, 4, 8, 32, 256}) {
      DecoderConfig cfg;
      cfg.beam_size = beam;
      double score = 0.0;
      beam_search_open(em, inv, cfg, &score);
      CHECK(score >= prev - 1e-12);
      prev = score;
    }
  }
}

TEST_CASE("lexical decoding scores a single-path lexicon by summed emissions") {
  LexRig rig = make_rig({{"AB", "A B"}});
  REQUIRE(rig.inv.symbols ==
          std::vector<std::string>{"<blank>", "A", "B", "A#", "B#"});
  // Frames point at internal A then word-final B.
  EmissionMatrix em = em_from_rows({
      {0.02, 0.92, 0.02, 0.02, 0.02},
      {0.02, 0.02, 0.02, 0.02, 0.92},
  });
  DecoderConfig cfg;
  LexicalResult res =
      beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, cfg);
  CHECK(res.words == std::vector<std::string>{"AB"});
  const double want = double(em.at(0, 1)) + double(em.at(1, 4));
  CHECK(std::abs(res.score - want) <= 1e-12);

  // One frame cannot finish the two-phoneme word; blank silence wins.
  EmissionMatrix one = em_from_rows({{0.02, 0.92, 0.02, 0.02, 0.02}});
  LexicalResult silent =
      beam_search_lexical(one, rig.tree, rig.inv, nullptr, nullptr, cfg);
  CHECK(silent.words.empty());
  CHECK(std::abs(silent.score - double(one.at(0, 0))) <= 1e-12);
}

TEST_CASE("lexical decoding matches exhaustive path enumeration") {
  std::mt19937 rng(31);
  const std::vector<std::string> phones{"A", "B", "C"};
  const std::vector<std::string> names{"KO", "LI", "MU", "NE", "PA", "RY"};
  int checked = 0;
  for (int round = 0; round < 40; ++round) {
    const int word_count = 2 + int(rng() % 4);
    std::vector<std::pair<std::string, std::string>> prons;
    std::vector<std::string> words(names.begin(), names.begin() + word_count);
    for (int w = 0; w < word_count; ++w) {
      const int len = 1 + int(rng() % 3);
      std::string pron;
      for (int i = 0; i < len; ++i) {
        if (i) pron += ' ';
        pron += phones[rng() % phones.size()];
      }
      prons.push_back({words[w], pron});
    }
    LexRig rig = make_rig(prons);
    NgramModel lm = word_lm(words, 100 + round);
    const uint32_t labels = uint32_t(rig.inv.size());

    for (int inst = 0; inst < 3; ++inst) {
      const uint32_t frames = 2 + rng() % 3;
      EmissionMatrix em = random_em(rng, frames, labels);
      std::vector<EmissionMatrix> ems{em};
      PriorVector prior = estimate_prior(ems);

      DecoderConfig cfg;
      cfg.beam_size = 1000000;
      cfg.lm_scale = (rng() % 2) ? 0.8 : 0.0;
      cfg.prior_scale = (rng() % 2) ? 0.5 : 0.0;
      cfg.word_insertion_score = (rng() % 2) ? -0.4 : 0.0;
      const PriorVector* pp = cfg.prior_scale > 0 ? &prior : nullptr;
      const NgramModel* pl = cfg.lm_scale > 0 ? &lm : nullptr;

      LexOracle want = lex_oracle(em, rig.tree, pl, pp, cfg);
      REQUIRE(want.found);
      LexicalResult got =
          beam_search_lexical(em, rig.tree, rig.inv, pl, pp, cfg);
      CHECK(to_ids(rig.tree, got.words) == want.words);
      CHECK(std::abs(got.score - want.score) <= 1e-9);

      // Recombination must not move the optimum.
      DecoderConfig raw = cfg;
      raw.recombine = false;
      LexicalResult loose =
          beam_search_lexical(em, rig.tree, rig.inv, pl, pp, raw);
      CHECK(loose.words == got.words);
      CHECK(std::abs(loose.score - got.score) <= 1e-9);

      for (const std::string& w : got.words) {
        CHECK(rig.lex.find(w) != nullptr);
      }
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("homophones split at a shared word end") {
  LexRig rig = make_rig({{"BE", "B I"}, {"BEE", "B I"}});
  EmissionMatrix em = em_from_rows({
      {0.02, 0.92, 0.02, 0.02, 0.02},
      {0.02, 0.02, 0.02, 0.02, 0.92},
  });
  DecoderConfig cfg;
  // Equal scores; the lexicographically smaller word sequence wins. With no
  // LM the two hypotheses share a recombination key, so the runner-up only
  // stays visible with recombination off.
  LexicalResult res =
      beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, cfg);
  CHECK(res.words == std::vector<std::string>{"BE"});
  DecoderConfig raw = cfg;
  raw.recombine = false;
  std::vector<LexicalResult> nbest;
  LexicalResult loose = beam_search_lexical(em, rig.tree, rig.inv, nullptr,
                                            nullptr, raw, &nbest, 5);
  CHECK(loose.words == res.words);
  REQUIRE(nbest.size() >= 2);
  CHECK(nbest[0].words == std::vector<std::string>{"BE"});
  CHECK(nbest[1].words == std::vector<std::string>{"BEE"});
  CHECK(std::abs(nbest[0].score - nbest[1].score) <= 1e-12);
}

TEST_CASE("zero lm scale reproduces lm-free decoding") {
  std::mt19937 rng(32);
  LexRig rig = make_rig({{"KO", "A"}, {"LI", "A B"}, {"MU", "B C A"}});
  NgramModel lm = word_lm({"KO", "LI", "MU"}, 7);
  for (int i = 0; i < 25; ++i) {
    EmissionMatrix em = random_em(rng, 3 + rng() % 3, uint32_t(rig.inv.size()));
    DecoderConfig cfg;
    cfg.beam_size = 64;
    cfg.lm_scale = 0.0;
    LexicalResult with =
        beam_search_lexical(em, rig.tree, rig.inv, &lm, nullptr, cfg);
    LexicalResult without =
        beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, cfg);
    CHECK(with.words == without.words);
    CHECK(with.score == without.score);
  }
}

TEST_CASE("zero prior scale reproduces prior-free decoding") {
  std::mt19937 rng(33);
  LexRig rig = make_rig({{"KO", "A"}, {"LI", "A B"}, {"MU", "B C A"}});
  for (int i = 0; i < 25; ++i) {
    EmissionMatrix em = random_em(rng, 3 + rng() % 3, uint32_t(rig.inv.size()));
    std::vector<EmissionMatrix> ems{em};
    PriorVector prior = estimate_prior(ems);
    DecoderConfig cfg;
    cfg.beam_size = 64;
    cfg.prior_scale = 0.0;
    LexicalResult with =
        beam_search_lexical(em, rig.tree, rig.inv, nullptr, &prior, cfg);
    LexicalResult without =
        beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, cfg);
    CHECK(with.words == without.words);
    CHECK(with.score == without.score);
  }
}

TEST_CASE("sentence end is scored once on the final frame") {
  LexRig rig = make_rig({{"AB", "A B"}});
  std::istringstream corpus("AB\nAB AB\nAB\n");
  Vocabulary vocab{std::vector<std::string>{"AB"}};
  NgramModel lm = train(count_ngrams(corpus, 2, vocab));
  EmissionMatrix em = em_from_rows({
      {0.02, 0.92, 0.02, 0.02, 0.02},
      {0.02, 0.02, 0.02, 0.02, 0.92},
  });
  DecoderConfig cfg;
  cfg.lm_scale = 1.3;
  LexicalResult res =
      beam_search_lexical(em, rig.tree, rig.inv, &lm, nullptr, cfg);
  REQUIRE(res.words == std::vector<std::string>{"AB"});
  const TokenId ab = *lm.token_id("AB");
  ScoreResult first = lm.score(lm.begin_state(), ab);
  ScoreResult end = lm.score(first.next, *lm.eos());
  const double want = double(em.at(0, 1)) + double(em.at(1, 4)) +
                      cfg.lm_scale * std::numbers::ln10 *
                          (first.log10_prob + end.log10_prob);
  CHECK(std::abs(res.score - want) <= 1e-12);
}

TEST_CASE("lexical decoding rejects broken inputs") {
  LexRig rig = make_rig({{"AB", "A B"}});
  EmissionMatrix em = em_from_rows({{0.2, 0.2, 0.2, 0.2, 0.2}});
  DecoderConfig cfg;

  EmissionMatrix none;
  none.labels = 5;
  CHECK_THROWS_AS(
      beam_search_lexical(none, rig.tree, rig.inv, nullptr, nullptr, cfg),
      DataError);

  LabelInventory shuffled = rig.inv;
  std::swap(shuffled.symbols[1], shuffled.symbols[2]);
  CHECK_THROWS_AS(
      beam_search_lexical(em, rig.tree, shuffled, nullptr, nullptr, cfg),
      DataError);

  PriorVector prior;
  prior.log_prior = {std::log(0.5), std::log(0.5)};
  DecoderConfig scaled = cfg;
  scaled.prior_scale = 1.0;
  CHECK_THROWS_AS(
      beam_search_lexical(em, rig.tree, rig.inv, nullptr, &prior, scaled),
      DataError);

  DecoderConfig bad = cfg;
  bad.beam_size = 0;
  CHECK_THROWS_AS(
      beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, bad),
      ConfigError);
  bad = cfg;
  bad.lm_scale = -0.1;
  CHECK_THROWS_AS(
      beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, bad),
      ConfigError);
  bad = cfg;
  bad.score_threshold = -1.0;
  CHECK_THROWS_AS(
      beam_search_lexical(em, rig.tree, rig.inv, nullptr, nullptr, bad),
      ConfigError);
}

TEST_CASE("lexical decoding is deterministic and threshold-stable") {
  std::mt19937 rng(34);
  LexRig rig = make_rig({{"KO", "A"}, {"LI", "A B"}, {"MU", "B C"}});
  NgramModel lm = word_lm({"KO", "LI", "MU"}, 9);
  EmissionMatrix em = random_em(rng, 5, uint32_t(rig.inv.size()));
  DecoderConfig cfg;
  cfg.beam_size = 32;
  cfg.lm_scale = 0.6;
  std::vector<LexicalResult> nb1, nb2;
  LexicalResult a =
      beam_search_lexical(em, rig.tree, rig.inv, &lm, nullptr, cfg, &nb1, 4);
  LexicalResult b =
      beam_search_lexical(em, rig.tree, rig.inv, &lm, nullptr, cfg, &nb2, 4);
  CHECK(a.words == b.words);
  CHECK(a.score == b.score);
  REQUIRE(!nb1.empty());
  CHECK(nb1[0].words == a.words);
  REQUIRE(nb1.size() == nb2.size());
  for (size_t i = 0; i < nb1.size(); ++i) {
    CHECK(nb1[i].words == nb2[i].words);
    CHECK(nb1[i].score == nb2[i].score);
    if (i) CHECK(nb1[i].score <= nb1[i - 1].score);
  }

  // A loose threshold changes nothing; a tight one can only lose score.
  DecoderConfig loose = cfg;
  loose.score_threshold = 1e9;
  LexicalResult l =
      beam_search_lexical(em, rig.tree, rig.inv, &lm, nullptr, loose);
  CHECK(l.words == a.words);
  CHECK(l.score == a.score);
  DecoderConfig tight = cfg;
  tight.score_threshold = 0.5;
  try {
    LexicalResult t =
        beam_search_lexical(em, rig.tree, rig.inv, &lm, nullptr, tight);
    CHECK(t.score <= a.score + 1e-12);
  } catch (const DataError&) {
    // Pruning everything away from the word boundary is a legal outcome.
  }
}
