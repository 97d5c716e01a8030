#include "asrtk/manifest.hh"

#include <fstream>
#include <set>
#include <sstream>

#include "asrtk/util.hh"
#include "json.hpp"

namespace asrtk {
namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::string& name,
                uint64_t line_no) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(name, line_no, std::string("bad JSON record: ") + e.what());
  }
  if (!rec.is_object()) {
    throw ParseError(name, line_no, "expected a JSON object");
  }
  return rec;
}

std::string string_field(const json& rec, const char* key,
                         const std::string& name, uint64_t line_no) {
  if (!rec.contains(key) || !rec[key].is_string()) {
    throw ParseError(name, line_no,
                     std::string("missing string field \"") + key + "\"");
  }
  return rec[key].get<std::string>();
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(std::istream& in,
                                         const std::string& name) {
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const json rec = parse_line(line, name, line_no);
    ManifestEntry e;
    e.id = string_field(rec, "id", name, line_no);
    e.emissions = string_field(rec, "emissions", name, line_no);
    e.ref_words = split_ws(string_field(rec, "ref", name, line_no));
    e.subset = string_field(rec, "subset", name, line_no);
    if (e.id.empty()) throw ParseError(name, line_no, "empty utterance id");
    if (e.subset.empty()) throw ParseError(name, line_no, "empty subset name");
    if (e.ref_words.empty()) {
      throw ParseError(name, line_no, "empty reference for " + e.id);
    }
    if (!seen.insert(e.id).second) {
      throw DataError(name + ": duplicate utterance id " + e.id);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read_manifest(in, path);
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    std::ostream& out) {
  for (const ManifestEntry& e : entries) {
    json rec;
    rec["id"] = e.id;
    rec["emissions"] = e.emissions;
    rec["ref"] = join_words(e.ref_words);
    rec["subset"] = e.subset;
    out << rec.dump() << "\n";
  }
}

std::vector<HypEntry> read_hyps(std::istream& in, const std::string& name) {
  std::vector<HypEntry> hyps;
  std::set<std::string> seen;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const json rec = parse_line(line, name, line_no);
    HypEntry h;
    h.id = string_field(rec, "id", name, line_no);
    h.words = split_ws(string_field(rec, "hyp", name, line_no));
    if (h.id.empty()) throw ParseError(name, line_no, "empty utterance id");
    if (!seen.insert(h.id).second) {
      throw DataError(name + ": duplicate utterance id " + h.id);
    }
    hyps.push_back(std::move(h));
  }
  return hyps;
}

std::vector<HypEntry> load_hyps(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read_hyps(in, path);
}

void write_hyps(const std::vector<HypEntry>& hyps, std::ostream& out) {
  for (const HypEntry& h : hyps) {
    json rec;
    rec["id"] = h.id;
    rec["hyp"] = join_words(h.words);
    out << rec.dump() << "\n";
  }
}

void save_hyps(const std::vector<HypEntry>& hyps, const std::string& path) {
  std::ofstream out;
  open_out_or_throw(out, path);
  write_hyps(hyps, out);
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace asrtk
