#ifndef ASRTK_EVAL_HH
#define ASRTK_EVAL_HH

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "asrtk/manifest.hh"

namespace asrtk {

enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };

struct AlignmentResult {
  std::vector<EditOp> ops;
  uint64_t matches = 0;
  uint64_t subs = 0;
  uint64_t dels = 0;
  uint64_t ins = 0;
  uint64_t ref_len = 0;

  uint64_t errors() const { return subs + dels + ins; }
};

// Unit-cost Levenshtein alignment. Either side may be empty. Backtrace ties
// prefer match, then substitute, then delete, then insert, so the detailed
// counts are reproducible. Tokens are compared verbatim; corpus_score folds
// case before calling.
AlignmentResult align(const std::vector<std::string>& ref,
                      const std::vector<std::string>& hyp);

struct ScorePair {
  std::string id;
  std::string subset;
  std::vector<std::string> ref;
  std::vector<std::string> hyp;
};

// Joins manifest references with decoder hypotheses; DataError on ids
// missing from either side (duplicates are rejected by the readers).
std::vector<ScorePair> join_for_scoring(
    const std::vector<ManifestEntry>& refs, const std::vector<HypEntry>& hyps);

struct ErrorCounts {
  uint64_t subs = 0;
  uint64_t dels = 0;
  uint64_t ins = 0;
  uint64_t tokens = 0;  // reference tokens

  uint64_t errors() const { return subs + dels + ins; }
  double wer() const { return 100.0 * double(errors()) / double(tokens); }
  double sub_percent() const { return 100.0 * double(subs) / double(tokens); }
  double del_percent() const { return 100.0 * double(dels) / double(tokens); }
  double ins_percent() const { return 100.0 * double(ins) / double(tokens); }
};

struct CorpusReport {
  std::map<std::string, ErrorCounts> subsets;
  ErrorCounts overall;
};

// Case-insensitive scoring with per-subset and token-weighted overall
// counts. DataError when no reference tokens exist.
CorpusReport corpus_score(const std::vector<ScorePair>& pairs);

// `subset<TAB>wer<TAB>sub<TAB>del<TAB>ins<TAB>tokens`, percentages at 0.1
// resolution, subsets sorted, overall last.
void write_report_tsv(const CorpusReport& report, std::ostream& out);
void save_report_tsv(const CorpusReport& report, const std::string& path);

// Full-precision JSON form of the same report.
std::string report_to_json(const CorpusReport& report);
void save_report_json(const CorpusReport& report, const std::string& path);

struct TuneGrid {
  std::vector<double> lm_scales;
  std::vector<double> prior_scales;
};

struct TuneResult {
  double lm_scale = 0.0;
  double prior_scale = 0.0;
  double wer = 0.0;
};

using DecodeFn = std::function<std::vector<std::string>(
    const ManifestEntry&, double lm_scale, double prior_scale)>;

// Samples floor(n * subset_fraction) dev utterances once with a seeded
// shuffle, scores every grid point on them and returns the WER argmin; ties
// go to the smaller lm_scale, then the smaller prior_scale. ConfigError on
// an empty grid, a fraction outside (0, 1], or an empty sample.
TuneResult tune_scales(const std::vector<ManifestEntry>& dev,
                       const DecodeFn& decode, const TuneGrid& grid,
                       double subset_fraction = 0.25, unsigned seed = 42);

}  // namespace asrtk

#endif
