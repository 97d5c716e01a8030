#include "asrtk/eval.hh"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "asrtk/util.hh"
#include "json.hpp"

namespace asrtk {

AlignmentResult align(const std::vector<std::string>& ref,
                      const std::vector<std::string>& hyp) {
  const size_t r = ref.size(), h = hyp.size();
  std::vector<uint32_t> dp((r + 1) * (h + 1));
  auto d = [&](size_t i, size_t j) -> uint32_t& { return dp[i * (h + 1) + j]; };
  for (size_t j = 0; j <= h; ++j) d(0, j) = uint32_t(j);
  for (size_t i = 1; i <= r; ++i) {
    d(i, 0) = uint32_t(i);
    for (size_t j = 1; j <= h; ++j) {
      const uint32_t diag = d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d(i, j) = std::min({diag, d(i - 1, j) + 1, d(i, j - 1) + 1});
    }
  }
  AlignmentResult res;
  res.ref_len = r;
  size_t i = r, j = h;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        d(i, j) == d(i - 1, j - 1)) {
      res.ops.push_back(EditOp::kMatch);
      ++res.matches;
      --i, --j;
    } else if (i > 0 && j > 0 && d(i, j) == d(i - 1, j - 1) + 1) {
      res.ops.push_back(EditOp::kSubstitute);
      ++res.subs;
      --i, --j;
    } else if (i > 0 && d(i, j) == d(i - 1, j) + 1) {
      res.ops.push_back(EditOp::kDelete);
      ++res.dels;
      --i;
    } else {
      res.ops.push_back(EditOp::kInsert);
      ++res.ins;
      --j;
    }
  }
  std::reverse(res.ops.begin(), res.ops.end());
  return res;
}

std::vector<ScorePair> join_for_scoring(
    const std::vector<ManifestEntry>& refs, const std::vector<HypEntry>& hyps) {
  std::map<std::string, const HypEntry*> by_id;
  for (const HypEntry& h : hyps) {
    if (!by_id.emplace(h.id, &h).second) {
      throw DataError("duplicate hypothesis id " + h.id);
    }
  }
  std::set<std::string> ref_ids;
  std::vector<ScorePair> pairs;
  pairs.reserve(refs.size());
  for (const ManifestEntry& e : refs) {
    if (!ref_ids.insert(e.id).second) {
      throw DataError("duplicate reference id " + e.id);
    }
    auto it = by_id.find(e.id);
    if (it == by_id.end()) {
      throw DataError("no hypothesis for utterance " + e.id);
    }
    pairs.push_back({e.id, e.subset, e.ref_words, it->second->words});
  }
  if (by_id.size() != refs.size()) {
    for (const HypEntry& h : hyps) {
      if (!ref_ids.count(h.id)) {
        throw DataError("hypothesis id " + h.id + " has no reference");
      }
    }
  }
  return pairs;
}

CorpusReport corpus_score(const std::vector<ScorePair>& pairs) {
  CorpusReport report;
  std::set<std::string> seen;
  for (const ScorePair& p : pairs) {
    if (!seen.insert(p.id).second) {
      throw DataError("duplicate utterance id " + p.id);
    }
    std::vector<std::string> ref, hyp;
    ref.reserve(p.ref.size());
    hyp.reserve(p.hyp.size());
    for (const std::string& w : p.ref) ref.push_back(to_lower(trim(w)));
    for (const std::string& w : p.hyp) hyp.push_back(to_lower(trim(w)));
    const AlignmentResult a = align(ref, hyp);
    ErrorCounts& sub = report.subsets[p.subset];
    sub.subs += a.subs;
    sub.dels += a.dels;
    sub.ins += a.ins;
    sub.tokens += a.ref_len;
  }
  for (const auto& [name, counts] : report.subsets) {
    if (counts.tokens == 0) {
      throw DataError("subset " + name + " has no reference tokens");
    }
    report.overall.subs += counts.subs;
    report.overall.dels += counts.dels;
    report.overall.ins += counts.ins;
    report.overall.tokens += counts.tokens;
  }
  if (report.overall.tokens == 0) {
    throw DataError("nothing to score: no reference tokens");
  }
  return report;
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

void tsv_row(std::ostream& out, const std::string& name,
             const ErrorCounts& c) {
  out << name << "\t" << percent(c.wer()) << "\t" << percent(c.sub_percent())
      << "\t" << percent(c.del_percent()) << "\t" << percent(c.ins_percent())
      << "\t" << c.tokens << "\n";
}

nlohmann::json counts_json(const ErrorCounts& c) {
  return {{"wer", c.wer()},
          {"sub", c.sub_percent()},
          {"del", c.del_percent()},
          {"ins", c.ins_percent()},
          {"sub_count", c.subs},
          {"del_count", c.dels},
          {"ins_count", c.ins},
          {"errors", c.errors()},
          {"tokens", c.tokens}};
}

}  // namespace

void write_report_tsv(const CorpusReport& report, std::ostream& out) {
  out << "subset\twer\tsub\tdel\tins\ttokens\n";
  for (const auto& [name, counts] : report.subsets) {
    tsv_row(out, name, counts);
  }
  tsv_row(out, "overall", report.overall);
}

void save_report_tsv(const CorpusReport& report, const std::string& path) {
  std::ofstream out;
  open_out_or_throw(out, path);
  write_report_tsv(report, out);
  if (!out) throw IoError("failed writing " + path);
}

std::string report_to_json(const CorpusReport& report) {
  nlohmann::json j;
  j["overall"] = counts_json(report.overall);
  j["subsets"] = nlohmann::json::object();
  for (const auto& [name, counts] : report.subsets) {
    j["subsets"][name] = counts_json(counts);
  }
  return j.dump(2) + "\n";
}

void save_report_json(const CorpusReport& report, const std::string& path) {
  write_file(path, report_to_json(report));
}

TuneResult tune_scales(const std::vector<ManifestEntry>& dev,
                       const DecodeFn& decode, const TuneGrid& grid,
                       double subset_fraction, unsigned seed) {
  if (grid.lm_scales.empty() || grid.prior_scales.empty()) {
    throw ConfigError("tuning grid is empty");
  }
  if (!(subset_fraction > 0.0) || subset_fraction > 1.0) {
    throw ConfigError("subset fraction must be in (0, 1]");
  }
  const size_t keep = size_t(double(dev.size()) * subset_fraction);
  if (keep == 0) {
    throw ConfigError("sampled dev subset is empty");
  }
  // Seeded shuffle, first `keep` indices; manifest order within the sample
  // is retained so decode batching stays stable.
  std::vector<size_t> order(dev.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937 rng(seed);
  for (size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng() % (i + 1)]);
  }
  order.resize(keep);
  std::sort(order.begin(), order.end());

  TuneResult best;
  bool have = false;
  for (double lm : grid.lm_scales) {
    for (double prior : grid.prior_scales) {
      std::vector<ScorePair> pairs;
      pairs.reserve(keep);
      for (size_t idx : order) {
        const ManifestEntry& e = dev[idx];
        pairs.push_back({e.id, e.subset, e.ref_words, decode(e, lm, prior)});
      }
      const double wer = corpus_score(pairs).overall.wer();
      const bool wins =
          !have || wer < best.wer ||
          (wer == best.wer &&
           (lm < best.lm_scale ||
            (lm == best.lm_scale && prior < best.prior_scale)));
      if (wins) {
        best = {lm, prior, wer};
        have = true;
      }
    }
  }
  return best;
}

}  // namespace asrtk
