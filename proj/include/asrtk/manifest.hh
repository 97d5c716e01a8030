#ifndef ASRTK_MANIFEST_HH
#define ASRTK_MANIFEST_HH

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace asrtk {

// One utterance to decode and score: emission file path, reference words and
// the test-set partition it belongs to. Stored as line-delimited JSON
// records {"id","emissions","ref","subset"}.
struct ManifestEntry {
  std::string id;
  std::string emissions;
  std::vector<std::string> ref_words;
  std::string subset;
};

std::vector<ManifestEntry> read_manifest(std::istream& in,
                                         const std::string& name);
std::vector<ManifestEntry> load_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries,
                    std::ostream& out);

// Decoder output: {"id","hyp"} per line, hyp a space-joined word sequence.
struct HypEntry {
  std::string id;
  std::vector<std::string> words;
};

std::vector<HypEntry> read_hyps(std::istream& in, const std::string& name);
std::vector<HypEntry> load_hyps(const std::string& path);
void write_hyps(const std::vector<HypEntry>& hyps, std::ostream& out);
void save_hyps(const std::vector<HypEntry>& hyps, const std::string& path);

}  // namespace asrtk

#endif
