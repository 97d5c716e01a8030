#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asrtk/corpus.hh"
#include "asrtk/decoder.hh"
#include "asrtk/emissions.hh"
#include "asrtk/eval.hh"
#include "asrtk/g2p.hh"
#include "asrtk/lexicon.hh"
#include "asrtk/manifest.hh"
#include "asrtk/ngram.hh"
#include "asrtk/util.hh"

namespace {

using namespace asrtk;

constexpr char kVersionLine[] =
    "asrtk 1.0.0 (formats: ARPA text, EMIT1, G2P1, TREE1)";

// "0.2:2.0:0.2" ranges and plain comma lists, mixed freely.
std::vector<double> parse_scales(const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : split_char(text, ',')) {
    const std::string item = trim(part);
    if (item.empty()) throw CLI::ValidationError("empty scale entry");
    const std::vector<std::string> range = split_char(item, ':');
    try {
      if (range.size() == 1) {
        out.push_back(std::stod(item));
      } else if (range.size() == 3) {
        const double lo = std::stod(range[0]);
        const double hi = std::stod(range[1]);
        const double step = std::stod(range[2]);
        if (step <= 0.0 || hi < lo) {
          throw CLI::ValidationError("bad scale range " + item);
        }
        for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(v);
      } else {
        throw CLI::ValidationError("bad scale entry " + item);
      }
    } catch (const std::invalid_argument&) {
      throw CLI::ValidationError("bad scale entry " + item);
    }
  }
  if (out.empty()) throw CLI::ValidationError("no scales given");
  return out;
}

std::vector<uint64_t> parse_thresholds(const std::string& text) {
  std::vector<uint64_t> out;
  if (trim(text).empty()) return out;
  for (const std::string& part : split_char(text, ',')) {
    try {
      out.push_back(std::stoull(trim(part)));
    } catch (const std::exception&) {
      throw CLI::ValidationError("bad prune threshold " + part);
    }
  }
  return out;
}

std::vector<std::string> read_word_list(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  std::vector<std::string> words;
  for_each_line(in, [&](const std::string& line) {
    for (const std::string& w : split_ws(line)) words.push_back(w);
  });
  return words;
}

G2pDictionary dictionary_from_lexicon(const Lexicon& lex) {
  G2pDictionary dict;
  for (const auto& [word, entry] : lex.entries()) {
    for (const Pronunciation& p : entry.prons) dict.push_back({word, p.phonemes});
  }
  return dict;
}

struct DecodeSetup {
  LabelInventory inv;
  std::optional<PrefixTree> tree;
  std::optional<NgramModel> lm;
  std::optional<PriorVector> prior;
};

DecodeSetup load_decode_setup(const std::string& labels_path,
                              const std::string& tree_path,
                              const std::string& lm_path,
                              const std::string& prior_path) {
  DecodeSetup s;
  s.inv = LabelInventory::load(labels_path);
  if (!tree_path.empty()) s.tree = PrefixTree::load(tree_path);
  if (!lm_path.empty()) s.lm = load_arpa(lm_path);
  if (!prior_path.empty()) s.prior = PriorVector::load(prior_path);
  return s;
}

// ---- vocab ----------------------------------------------------------------

struct VocabBuildArgs {
  std::vector<std::string> corpora;
  std::string base_dict;
  uint64_t min_count = 4;
  std::string out;
};

void run_vocab_build(const VocabBuildArgs& a) {
  TokenCountTable counts;
  for (const std::string& path : a.corpora) {
    std::ifstream in;
    open_or_throw(in, path);
    counts.merge(count_tokens(in));
  }
  std::set<std::string> base_words;
  if (!a.base_dict.empty()) {
    for (const auto& [word, prons] : load_base_dictionary(a.base_dict)) {
      base_words.insert(word);
    }
  }
  Vocabulary vocab = build_vocabulary(counts, base_words, a.min_count);
  vocab.save(a.out);
  std::cerr << "vocab: " << vocab.size() << " words from "
            << counts.total_tokens() << " running tokens\n";
}

struct VocabOovArgs {
  std::string vocab;
  std::string text;
};

void run_vocab_oov(const VocabOovArgs& a) {
  Vocabulary vocab = Vocabulary::load(a.vocab);
  std::vector<std::string> tokens = read_word_list(a.text);
  const double rate = oov_rate(tokens, vocab);
  std::printf("OOV=%.2f%% tokens=%zu\n", 100.0 * rate, tokens.size());
}

// ---- lm -------------------------------------------------------------------

struct LmTrainArgs {
  std::vector<std::string> corpora;
  std::string vocab;
  int order = 4;
  std::string prune;
  std::string out;
};

void run_lm_train(const LmTrainArgs& a) {
  Vocabulary vocab = Vocabulary::load(a.vocab);
  std::ostringstream joined;
  for (const std::string& path : a.corpora) {
    joined << read_file(path);
    if (!joined.str().empty() && joined.str().back() != '\n') joined << '\n';
  }
  std::istringstream corpus(joined.str());
  NgramCounts counts = count_ngrams(corpus, a.order, vocab);
  NgramModel model = train(counts, parse_thresholds(a.prune));
  save_arpa(model, a.out);
  std::cerr << "lm: order " << model.order();
  for (int k = 1; k <= model.order(); ++k) {
    std::cerr << (k == 1 ? ", " : "/") << model.ngram_count(k);
  }
  std::cerr << " n-grams\n";
}

struct LmPplArgs {
  std::string model;
  std::string text;
};

void run_lm_ppl(const LmPplArgs& a) {
  NgramModel model = load_arpa(a.model);
  std::ifstream in;
  open_or_throw(in, a.text);
  PplReport rep = perplexity(model, in);
  std::printf("PPL=%.4f OOV=%.2f%% tokens=%llu\n", rep.ppl, rep.oov_percent,
              static_cast<unsigned long long>(rep.tokens));
}

// ---- g2p ------------------------------------------------------------------

struct G2pTrainArgs {
  std::string lexicon;
  int order = 5;
  double holdout = 0.05;
  uint64_t seed = 1;
  std::string out;
};

void run_g2p_train(const G2pTrainArgs& a) {
  G2pDictionary dict = dictionary_from_lexicon(Lexicon::load(a.lexicon));
  G2pTrainLog log;
  GraphoneModel model = train_g2p(dict, a.order, a.holdout, a.seed, &log);
  model.save(a.out);
  std::cerr << "g2p: trained on " << dict.size() << " pairs, held out "
            << log.holdout_pairs << "\n";
}

struct G2pApplyArgs {
  std::string model;
  std::string words;
  int n_best = 1;
  std::string out;
};

void run_g2p_apply(const G2pApplyArgs& a) {
  GraphoneModel model = GraphoneModel::load(a.model);
  std::vector<std::string> words = read_word_list(a.words);
  std::ofstream out;
  open_out_or_throw(out, a.out);
  std::vector<std::string> failed;
  for (const std::string& word : words) {
    std::vector<PronunciationHypothesis> hyps;
    try {
      hyps = apply_g2p(model, word, a.n_best);
    } catch (const Error&) {
      hyps.clear();
    }
    if (hyps.empty()) {
      failed.push_back(word);
      continue;
    }
    for (const PronunciationHypothesis& h : hyps) {
      out << to_upper(word) << "\t";
      for (size_t i = 0; i < h.phonemes.size(); ++i) {
        if (i) out << ' ';
        out << h.phonemes[i];
      }
      out << "\t" << format_sig(h.posterior, 6) << "\n";
    }
  }
  if (!out) throw IoError("failed writing " + a.out);
  if (!failed.empty()) {
    std::string msg = "g2p: no pronunciation for " +
                      std::to_string(failed.size()) + " word(s):";
    for (size_t i = 0; i < failed.size() && i < 10; ++i) msg += " " + failed[i];
    throw DataError(msg);
  }
  std::cerr << "g2p: " << words.size() << " words transcribed\n";
}

// ---- lexicon --------------------------------------------------------------

struct LexiconBuildArgs {
  std::string vocab;
  std::string base_dict;
  std::string g2p;
  std::string variants = "single";
  std::string out;
};

void run_lexicon_build(const LexiconBuildArgs& a) {
  Vocabulary vocab = Vocabulary::load(a.vocab);
  BaseDictionary base;
  if (!a.base_dict.empty()) base = load_base_dictionary(a.base_dict);
  GraphoneModel model = GraphoneModel::load(a.g2p);
  VariantPolicy policy = VariantPolicy::parse(a.variants);
  Lexicon lex = build_lexicon(vocab, base, model, policy);
  lex.save(a.out);
  std::cerr << "lexicon: " << lex.word_count() << " words, "
            << lex.pronunciation_count() << " pronunciations\n";
}

struct LexiconCompileArgs {
  std::string lexicon;
  std::string out;
  std::string labels;
};

void run_lexicon_compile(const LexiconCompileArgs& a) {
  Lexicon lex = Lexicon::load(a.lexicon);
  PrefixTree tree = compile_prefix_tree(lex);
  tree.save(a.out);
  if (!a.labels.empty()) inventory_for_tree(tree).save(a.labels);
  std::cerr << "tree: " << tree.nodes.size() << " nodes over "
            << tree.words.size() << " words\n";
}

// ---- prior ----------------------------------------------------------------

struct PriorArgs {
  std::string manifest;
  std::string out;
};

void run_prior(const PriorArgs& a) {
  std::vector<ManifestEntry> entries = load_manifest(a.manifest);
  std::vector<EmissionMatrix> ems;
  std::set<std::string> seen;
  for (const ManifestEntry& e : entries) {
    if (seen.insert(e.emissions).second) {
      ems.push_back(EmissionMatrix::load(e.emissions));
    }
  }
  PriorVector prior = estimate_prior(ems);
  prior.save(a.out);
  std::cerr << "prior: averaged " << ems.size() << " matrices\n";
}

// ---- decode ---------------------------------------------------------------

struct DecodeArgs {
  std::string manifest;
  std::string labels;
  std::string tree;
  std::string lm;
  std::string prior;
  std::string mode;
  double lm_scale = 1.0;
  double prior_scale = 1.0;
  int beam = 512;
  std::optional<double> score_threshold;
  double word_insertion = 0.0;
  int workers = 0;
  std::string out;
};

void run_decode(const DecodeArgs& a) {
  std::vector<ManifestEntry> entries = load_manifest(a.manifest);
  DecodeSetup s = load_decode_setup(a.labels, a.tree, a.lm, a.prior);
  DecoderConfig cfg;
  cfg.beam_size = a.beam;
  cfg.score_threshold = a.score_threshold;
  cfg.lm_scale = s.lm ? a.lm_scale : 0.0;
  cfg.prior_scale = s.prior ? a.prior_scale : 0.0;
  cfg.word_insertion_score = a.word_insertion;
  cfg.validate();

  std::vector<HypEntry> hyps(entries.size());
  parallel_for(entries.size(), a.workers, [&](size_t i) {
    const ManifestEntry& e = entries[i];
    EmissionMatrix em = EmissionMatrix::load(e.emissions);
    std::vector<std::string> words;
    if (a.mode == "greedy") {
      words = greedy_decode(em, s.inv);
    } else if (a.mode == "open") {
      words = beam_search_open(em, s.inv, cfg);
    } else {
      words = beam_search_lexical(em, *s.tree, s.inv,
                                  s.lm ? &*s.lm : nullptr,
                                  s.prior ? &*s.prior : nullptr, cfg)
                  .words;
    }
    hyps[i] = {e.id, std::move(words)};
  });
  save_hyps(hyps, a.out);
  std::cerr << "decode: " << hyps.size() << " utterances (" << a.mode << ")\n";
}

// ---- score ----------------------------------------------------------------

struct ScoreArgs {
  std::string refs;
  std::string hyps;
  std::string out;
  std::string json;
};

void run_score(const ScoreArgs& a) {
  std::vector<ManifestEntry> refs = load_manifest(a.refs);
  std::vector<HypEntry> hyps = load_hyps(a.hyps);
  CorpusReport report = corpus_score(join_for_scoring(refs, hyps));
  save_report_tsv(report, a.out);
  if (!a.json.empty()) save_report_json(report, a.json);
  std::printf("WER=%.1f%% errors=%llu tokens=%llu\n", report.overall.wer(),
              static_cast<unsigned long long>(report.overall.errors()),
              static_cast<unsigned long long>(report.overall.tokens));
}

// ---- tune -----------------------------------------------------------------

struct TuneArgs {
  std::string manifest;
  std::string labels;
  std::string tree;
  std::string lm;
  std::string prior;
  std::string lm_scales = "1.0";
  std::string prior_scales = "0.0";
  double fraction = 0.25;
  unsigned seed = 42;
  int beam = 512;
  double word_insertion = 0.0;
  std::string subset;
};

void run_tune(const TuneArgs& a) {
  std::vector<ManifestEntry> entries = load_manifest(a.manifest);
  if (!a.subset.empty()) {
    std::erase_if(entries,
                  [&](const ManifestEntry& e) { return e.subset != a.subset; });
  }
  DecodeSetup s = load_decode_setup(a.labels, a.tree, a.lm, a.prior);
  TuneGrid grid{parse_scales(a.lm_scales), parse_scales(a.prior_scales)};

  std::map<std::string, EmissionMatrix> cache;
  DecodeFn decode = [&](const ManifestEntry& e, double lm_scale,
                        double prior_scale) {
    auto it = cache.find(e.emissions);
    if (it == cache.end()) {
      it = cache.emplace(e.emissions, EmissionMatrix::load(e.emissions)).first;
    }
    DecoderConfig cfg;
    cfg.beam_size = a.beam;
    cfg.lm_scale = s.lm ? lm_scale : 0.0;
    cfg.prior_scale = s.prior ? prior_scale : 0.0;
    cfg.word_insertion_score = a.word_insertion;
    return beam_search_lexical(it->second, *s.tree, s.inv,
                               s.lm ? &*s.lm : nullptr,
                               s.prior ? &*s.prior : nullptr, cfg)
        .words;
  };
  TuneResult best = tune_scales(entries, decode, grid, a.fraction, a.seed);
  std::printf("lm_scale=%s prior_scale=%s wer=%s\n",
              format_sig(best.lm_scale, 7).c_str(),
              format_sig(best.prior_scale, 7).c_str(),
              format_sig(best.wer, 7).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"language-resource toolkit: n-gram LMs, G2P, lexica and CTC "
               "decoding"};
  app.set_version_flag("--version", kVersionLine);
  app.require_subcommand(1);

  VocabBuildArgs vb;
  VocabOovArgs vo;
  LmTrainArgs lt;
  LmPplArgs lp;
  G2pTrainArgs gt;
  G2pApplyArgs ga;
  LexiconBuildArgs lb;
  LexiconCompileArgs lc;
  PriorArgs pr;
  DecodeArgs de;
  ScoreArgs sc;
  TuneArgs tu;

  CLI::App* vocab = app.add_subcommand("vocab", "vocabulary selection");
  vocab->require_subcommand(1);
  CLI::App* vocab_build =
      vocab->add_subcommand("build", "select a vocabulary from corpora");
  vocab_build->add_option("--corpus", vb.corpora, "training text, repeatable")
      ->required();
  vocab_build->add_option("--base-dict", vb.base_dict,
                          "pronunciation dictionary whose words are always kept");
  vocab_build->add_option("--min-count", vb.min_count,
                          "occurrence threshold for non-dictionary words");
  vocab_build->add_option("--out", vb.out, "vocabulary file")->required();
  vocab_build->callback([&] { run_vocab_build(vb); });

  CLI::App* vocab_oov =
      vocab->add_subcommand("oov", "out-of-vocabulary rate of a text");
  vocab_oov->add_option("--vocab", vo.vocab)->required();
  vocab_oov->add_option("--text", vo.text)->required();
  vocab_oov->callback([&] { run_vocab_oov(vo); });

  CLI::App* lm = app.add_subcommand("lm", "n-gram language models");
  lm->require_subcommand(1);
  CLI::App* lm_train = lm->add_subcommand("train", "estimate a smoothed model");
  lm_train->add_option("--corpus", lt.corpora, "training text, repeatable")
      ->required();
  lm_train->add_option("--vocab", lt.vocab)->required();
  lm_train->add_option("--order", lt.order);
  lm_train->add_option("--prune", lt.prune,
                       "per-order count thresholds, e.g. 0,0,1,1");
  lm_train->add_option("--out", lt.out, "ARPA file")->required();
  lm_train->callback([&] { run_lm_train(lt); });

  CLI::App* lm_ppl = lm->add_subcommand("ppl", "perplexity of a text");
  lm_ppl->add_option("--model", lp.model, "ARPA file")->required();
  lm_ppl->add_option("--text", lp.text)->required();
  lm_ppl->callback([&] { run_lm_ppl(lp); });

  CLI::App* g2p = app.add_subcommand("g2p", "grapheme-to-phoneme models");
  g2p->require_subcommand(1);
  CLI::App* g2p_train = g2p->add_subcommand("train", "train a graphone model");
  g2p_train->add_option("--lexicon", gt.lexicon, "word TAB phonemes lines")
      ->required();
  g2p_train->add_option("--order", gt.order);
  g2p_train->add_option("--holdout", gt.holdout, "held-out fraction");
  g2p_train->add_option("--seed", gt.seed);
  g2p_train->add_option("--out", gt.out)->required();
  g2p_train->callback([&] { run_g2p_train(gt); });

  CLI::App* g2p_apply = g2p->add_subcommand("apply", "transcribe words");
  g2p_apply->add_option("--model", ga.model)->required();
  g2p_apply->add_option("--words", ga.words, "one word per line")->required();
  g2p_apply->add_option("--nbest", ga.n_best);
  g2p_apply->add_option("--out", ga.out, "word TAB pron TAB posterior lines")
      ->required();
  g2p_apply->callback([&] { run_g2p_apply(ga); });

  CLI::App* lexicon = app.add_subcommand("lexicon", "pronunciation lexica");
  lexicon->require_subcommand(1);
  CLI::App* lexicon_build =
      lexicon->add_subcommand("build", "combine base dictionary and G2P");
  lexicon_build->add_option("--vocab", lb.vocab)->required();
  lexicon_build->add_option("--base-dict", lb.base_dict);
  lexicon_build->add_option("--g2p", lb.g2p, "graphone model")->required();
  lexicon_build->add_option("--variants", lb.variants,
                            "single or threshold-T, e.g. threshold-0.6");
  lexicon_build->add_option("--out", lb.out)->required();
  lexicon_build->callback([&] { run_lexicon_build(lb); });

  CLI::App* lexicon_compile =
      lexicon->add_subcommand("compile", "build the pronunciation prefix tree");
  lexicon_compile->add_option("--lexicon", lc.lexicon)->required();
  lexicon_compile->add_option("--out", lc.out, "tree file")->required();
  lexicon_compile->add_option("--labels", lc.labels,
                              "also write the matching label inventory");
  lexicon_compile->callback([&] { run_lexicon_compile(lc); });

  CLI::App* prior =
      app.add_subcommand("prior", "estimate a label prior from emissions");
  prior->add_option("--manifest", pr.manifest)->required();
  prior->add_option("--out", pr.out)->required();
  prior->callback([&] { run_prior(pr); });

  CLI::App* decode = app.add_subcommand("decode", "decode emission matrices");
  decode->add_option("--manifest", de.manifest)->required();
  decode->add_option("--labels", de.labels)->required();
  decode->add_option("--tree", de.tree, "needed for lexical mode");
  decode->add_option("--lm", de.lm, "ARPA model");
  decode->add_option("--prior", de.prior);
  decode->add_option("--mode", de.mode)
      ->required()
      ->check(CLI::IsMember({"greedy", "open", "lexical"}));
  decode->add_option("--lm-scale", de.lm_scale);
  decode->add_option("--prior-scale", de.prior_scale);
  decode->add_option("--beam", de.beam);
  decode->add_option("--score-threshold", de.score_threshold);
  decode->add_option("--word-insertion", de.word_insertion);
  decode->add_option("--workers", de.workers, "0 means one per core");
  decode->add_option("--out", de.out, "hypothesis file")->required();
  decode->callback([&] {
    if (de.mode == "lexical" && de.tree.empty()) {
      throw CLI::ValidationError("decode", "--tree is required in lexical mode");
    }
    run_decode(de);
  });

  CLI::App* score = app.add_subcommand("score", "word error rate report");
  score->add_option("--refs", sc.refs, "manifest with references")->required();
  score->add_option("--hyps", sc.hyps)->required();
  score->add_option("--out", sc.out, "TSV report")->required();
  score->add_option("--json", sc.json, "full-precision JSON report");
  score->callback([&] { run_score(sc); });

  CLI::App* tune =
      app.add_subcommand("tune", "grid-search LM and prior scales");
  tune->add_option("--manifest", tu.manifest, "dev manifest")->required();
  tune->add_option("--labels", tu.labels)->required();
  tune->add_option("--tree", tu.tree)->required();
  tune->add_option("--lm", tu.lm);
  tune->add_option("--prior", tu.prior);
  tune->add_option("--lm-scales", tu.lm_scales, "list or start:stop:step");
  tune->add_option("--prior-scales", tu.prior_scales);
  tune->add_option("--fraction", tu.fraction, "sampled dev fraction");
  tune->add_option("--seed", tu.seed);
  tune->add_option("--beam", tu.beam);
  tune->add_option("--word-insertion", tu.word_insertion);
  tune->add_option("--subset", tu.subset, "restrict to one subset");
  tune->callback([&] { run_tune(tu); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
