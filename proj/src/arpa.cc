#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "asrtk/ngram.hh"
#include "asrtk/util.hh"

namespace asrtk {

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  *out = v;
  return true;
}

bool parse_count(const std::string& s, uint64_t* out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(begin, &end, 10);
  if (end != begin + s.size()) return false;
  *out = v;
  return true;
}

// Cursor over the file's lines; remembers 1-based positions for diagnostics.
struct LineCursor {
  std::vector<std::string> lines;
  size_t pos = 0;  // index of the next unread line

  bool next(std::string* out, size_t* lineno) {
    while (pos < lines.size()) {
      ++pos;
      std::string t = trim(lines[pos - 1]);
      if (t.empty()) continue;
      *out = std::move(t);
      *lineno = pos;
      return true;
    }
    return false;
  }

  // Like next() but stops (without consuming) at blank lines and section
  // headers, so entry blocks end where the format says they do.
  bool next_entry(std::string* out, size_t* lineno) {
    if (pos >= lines.size()) return false;
    std::string t = trim(lines[pos]);
    if (t.empty() || t[0] == '\\') return false;
    ++pos;
    *out = std::move(t);
    *lineno = pos;
    return true;
  }
};

}  // namespace

void write_arpa(const NgramModel& model, std::ostream& out) {
  const int K = model.order();
  out << "\\data\\\n";
  for (int k = 1; k <= K; ++k)
    out << "ngram " << k << "=" << model.ngram_count(k) << "\n";

  for (int k = 1; k <= K; ++k) {
    out << "\n\\" << k << "-grams:\n";
    struct Row {
      std::vector<std::string> toks;
      const NgramEntry* entry;
    };
    std::vector<Row> rows;
    rows.reserve(model.ngram_count(k));
    for (const auto& [g, e] : model.entries(k)) {
      Row r;
      r.toks.reserve(static_cast<size_t>(k));
      for (TokenId id : g.tokens()) r.toks.push_back(model.symbols().name(id));
      r.entry = &e;
      rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.toks < b.toks; });
    for (const Row& r : rows) {
      out << format_sig(r.entry->log10_prob, 7) << '\t' << join(r.toks, ' ');
      if (r.entry->has_backoff)
        out << '\t' << format_sig(r.entry->log10_backoff, 7);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
  if (!out) throw IoError("failed writing ARPA data");
}

NgramModel read_arpa(std::istream& in, const std::string& name) {
  LineCursor cur;
  {
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      cur.lines.push_back(line);
    }
    if (in.bad()) throw IoError("read error on " + name);
  }

  std::string line;
  size_t ln = 0;
  if (!cur.next(&line, &ln))
    throw ParseError(name, cur.lines.size(), "empty file, expected \\data\\");
  if (line != "\\data\\")
    throw ParseError(name, ln, "expected \\data\\ header, got '" + line + "'");

  std::vector<uint64_t> declared;
  while (true) {
    size_t mark = cur.pos;
    if (!cur.next(&line, &ln))
      throw ParseError(name, cur.lines.size(),
                       "unexpected end of file after \\data\\");
    if (line[0] == '\\') {  // first section header
      cur.pos = mark;
      break;
    }
    auto fields = split_ws(line);
    uint64_t n = 0;
    bool ok = fields.size() == 2 && fields[0] == "ngram";
    if (ok) {
      auto eq = fields[1].find('=');
      uint64_t k = 0;
      ok = eq != std::string::npos && parse_count(fields[1].substr(0, eq), &k) &&
           parse_count(fields[1].substr(eq + 1), &n) &&
           k == declared.size() + 1;
    }
    if (!ok)
      throw ParseError(name, ln,
                       "expected 'ngram " + std::to_string(declared.size() + 1) +
                           "=<count>', got '" + line + "'");
    declared.push_back(n);
  }
  if (declared.empty())
    throw ParseError(name, ln, "no ngram count declarations in \\data\\");
  const int K = static_cast<int>(declared.size());
  if (K > kMaxNgramOrder)
    throw ParseError(name, ln,
                     "order " + std::to_string(K) + " exceeds supported maximum " +
                         std::to_string(kMaxNgramOrder));

  NgramModel model(K);
  for (int k = 1; k <= K; ++k) {
    if (!cur.next(&line, &ln))
      throw ParseError(name, cur.lines.size(),
                       "unexpected end of file, expected \\" +
                           std::to_string(k) + "-grams:");
    std::string want = "\\" + std::to_string(k) + "-grams:";
    if (line != want)
      throw ParseError(name, ln, "expected " + want + ", got '" + line + "'");

    uint64_t seen = 0;
    std::string entry;
    size_t eln = 0;
    while (cur.next_entry(&entry, &eln)) {
      auto fields = split_char(entry, '\t');
      if (fields.size() < 2 || fields.size() > 3)
        throw ParseError(name, eln,
                         "expected 'log10prob<TAB>tokens[<TAB>log10backoff]'");
      double prob = 0.0;
      if (!parse_number(fields[0], &prob))
        throw ParseError(name, eln,
                         "non-numeric log10 probability '" + fields[0] + "'");
      auto toks = split_ws(fields[1]);
      if (static_cast<int>(toks.size()) != k)
        throw ParseError(name, eln,
                         "expected " + std::to_string(k) + " tokens, got " +
                             std::to_string(toks.size()));
      Gram g;
      for (const std::string& t : toks) {
        if (k == 1) {
          g.push(model.symbols().intern(t));
        } else {
          auto id = model.symbols().find(t);
          if (!id)
            throw ParseError(name, eln,
                             "token '" + t + "' has no unigram entry");
          g.push(*id);
        }
      }
      if (model.find(g))
        throw ParseError(name, eln, "duplicate n-gram '" + fields[1] + "'");
      if (k >= 2 && !model.find(g.prefix()))
        throw ParseError(name, eln,
                         "n-gram '" + fields[1] +
                             "' lacks a stored prefix entry");
      model.add_entry(g, prob);
      if (fields.size() == 3) {
        if (k == K)
          throw ParseError(name, eln,
                           "backoff weight not allowed at maximum order");
        double bo = 0.0;
        if (!parse_number(fields[2], &bo))
          throw ParseError(name, eln,
                           "non-numeric backoff weight '" + fields[2] + "'");
        model.set_backoff(g, bo);
      }
      ++seen;
    }
    if (seen != declared[static_cast<size_t>(k - 1)])
      throw ParseError(name, cur.pos,
                       "\\" + std::to_string(k) + "-grams: declared " +
                           std::to_string(declared[static_cast<size_t>(k - 1)]) +
                           " entries, found " + std::to_string(seen));
  }

  if (!cur.next(&line, &ln))
    throw ParseError(name, cur.lines.size(),
                     "unexpected end of file, expected \\end\\");
  if (line != "\\end\\")
    throw ParseError(name, ln, "expected \\end\\, got '" + line + "'");

  model.refresh_specials();
  return model;
}

NgramModel load_arpa(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read_arpa(in, path);
}

void save_arpa(const NgramModel& model, const std::string& path) {
  std::ofstream out;
  open_out_or_throw(out, path);
  write_arpa(model, out);
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace asrtk
