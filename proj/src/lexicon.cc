#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "asrtk/lexicon.hh"
#include "asrtk/util.hh"

namespace asrtk {

std::vector<std::string> strip_stress(const std::vector<std::string>& pron) {
  std::vector<std::string> out;
  out.reserve(pron.size());
  for (const auto& p : pron) {
    if (p.size() >= 2 && p.back() >= '0' && p.back() <= '2')
      out.push_back(p.substr(0, p.size() - 1));
    else
      out.push_back(p);
  }
  return out;
}

void Lexicon::add(const std::string& word, std::vector<std::string> phonemes,
                  Pronunciation::Source source, double weight) {
  if (word.empty()) throw DataError("lexicon: empty word");
  auto& entry = entries_[to_upper(word)];
  for (const auto& p : entry.prons)
    if (p.phonemes == phonemes) return;
  Pronunciation pron{std::move(phonemes), source, weight};
  auto pos = std::upper_bound(
      entry.prons.begin(), entry.prons.end(), pron,
      [](const Pronunciation& a, const Pronunciation& b) {
        return a.phonemes < b.phonemes;
      });
  entry.prons.insert(pos, std::move(pron));
}

const LexiconEntry* Lexicon::find(const std::string& word) const {
  auto it = entries_.find(to_upper(word));
  return it == entries_.end() ? nullptr : &it->second;
}

size_t Lexicon::pronunciation_count() const {
  size_t n = 0;
  for (const auto& [w, e] : entries_) n += e.prons.size();
  return n;
}

std::vector<std::string> Lexicon::phoneme_alphabet() const {
  std::set<std::string> set;
  for (const auto& [w, e] : entries_)
    for (const auto& p : e.prons)
      for (const auto& ph : p.phonemes) set.insert(ph);
  return {set.begin(), set.end()};
}

void Lexicon::write(std::ostream& out) const {
  for (const auto& [word, entry] : entries_)
    for (const auto& p : entry.prons) {
      out << word << '\t';
      for (size_t i = 0; i < p.phonemes.size(); ++i) {
        if (i) out << ' ';
        out << p.phonemes[i];
      }
      out << '\n';
    }
  if (!out) throw IoError("failed writing lexicon");
}

Lexicon Lexicon::read(std::istream& in, const std::string& name) {
  Lexicon lex;
  std::string line;
  size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto parts = split_char(line, '\t');
    if (parts.size() != 2 || parts[0].empty())
      throw ParseError(name, ln, "expected 'WORD<TAB>PH1 PH2 ...'");
    auto phones = split_ws(parts[1]);
    if (phones.empty())
      throw ParseError(name, ln, "entry '" + parts[0] + "' has no phonemes");
    lex.add(parts[0], std::move(phones), Pronunciation::Source::kBaseDict);
  }
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read(in, path);
}

void Lexicon::save(const std::string& path) const {
  std::ofstream out;
  open_out_or_throw(out, path);
  write(out);
  if (!out) throw IoError("failed writing " + path);
}

BaseDictionary read_base_dictionary(std::istream& in, const std::string& name) {
  BaseDictionary dict;
  std::string line;
  size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind(";;;", 0) == 0) continue;
    auto fields = split_ws(line);
    if (fields.size() < 2)
      throw ParseError(name, ln, "expected 'WORD PH1 [PH2 ...]'");
    std::string word = fields[0];
    // CMUdict marks extra variants as WORD(1), WORD(2), ...
    auto open = word.rfind('(');
    if (open != std::string::npos && open > 0 && word.back() == ')') {
      bool digits = open + 1 < word.size() - 1;
      for (size_t i = open + 1; i + 1 < word.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(word[i]))) digits = false;
      if (digits) word = word.substr(0, open);
    }
    dict[to_upper(word)].push_back({fields.begin() + 1, fields.end()});
  }
  return dict;
}

BaseDictionary load_base_dictionary(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read_base_dictionary(in, path);
}

VariantPolicy VariantPolicy::with_threshold(double t) {
  if (!(t > 0.0 && t <= 1.0))
    throw ConfigError("variant threshold must be in (0,1]");
  return {Kind::kThreshold, t};
}

VariantPolicy VariantPolicy::parse(const std::string& text) {
  if (text == "single") return single();
  const std::string prefix = "threshold-";
  if (text.rfind(prefix, 0) == 0) {
    const std::string num = text.substr(prefix.size());
    char* end = nullptr;
    double t = std::strtod(num.c_str(), &end);
    if (!num.empty() && end == num.c_str() + num.size())
      return with_threshold(t);
  }
  throw ConfigError("unknown variant policy '" + text +
                    "' (expected 'single' or 'threshold-<t>')");
}

namespace {

void check_phonemes(const std::string& word,
                    const std::vector<std::string>& phones) {
  for (const auto& p : phones) {
    bool ok = !p.empty() && p.size() <= 8;
    for (char c : p)
      if (c < 'A' || c > 'Z') ok = false;
    if (!ok)
      throw DataError("lexicon: word '" + word + "': bad phoneme '" + p + "'");
  }
}

}  // namespace

Lexicon build_lexicon(const Vocabulary& vocab, const BaseDictionary& base,
                      const GraphoneModel& g2p, const VariantPolicy& policy) {
  Lexicon lex;
  std::vector<std::string> failed;
  for (const auto& raw : vocab.words()) {
    const std::string word = to_upper(raw);
    auto it = base.find(word);
    if (it != base.end()) {
      for (const auto& variant : it->second) {
        auto stripped = strip_stress(variant);
        check_phonemes(word, stripped);
        lex.add(word, std::move(stripped), Pronunciation::Source::kBaseDict);
      }
      continue;
    }
    std::vector<PronunciationHypothesis> hyps;
    try {
      hyps = apply_g2p(g2p, word);
    } catch (const Error&) {
      failed.push_back(word);
      continue;
    }
    check_phonemes(word, hyps[0].phonemes);
    lex.add(word, hyps[0].phonemes, Pronunciation::Source::kG2p);
    if (policy.kind == VariantPolicy::Kind::kThreshold && hyps.size() > 1 &&
        hyps[0].posterior < policy.threshold) {
      check_phonemes(word, hyps[1].phonemes);
      lex.add(word, hyps[1].phonemes, Pronunciation::Source::kG2p);
    }
  }
  if (!failed.empty()) {
    std::sort(failed.begin(), failed.end());
    std::string list;
    for (const auto& w : failed) {
      if (!list.empty()) list += ", ";
      list += w;
    }
    throw DataError("lexicon: pronunciation generation failed for " +
                    std::to_string(failed.size()) + " word(s): " + list);
  }
  return lex;
}

}  // namespace asrtk
