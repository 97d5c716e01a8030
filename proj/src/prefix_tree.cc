#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "asrtk/lexicon.hh"
#include "asrtk/util.hh"

namespace asrtk {

namespace {

constexpr char kTreeMagic[5] = {'T', 'R', 'E', 'E', '1'};

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& what) {
  uint32_t n = get_u32(in, what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (static_cast<uint32_t>(in.gcount()) != n)
    throw IoError("unexpected end of data reading " + what);
  return s;
}

}  // namespace

PrefixTree compile_prefix_tree(const Lexicon& lexicon) {
  if (lexicon.entries().empty())
    throw DataError("prefix tree: empty lexicon");

  PrefixTree tree;
  tree.phonemes = lexicon.phoneme_alphabet();
  std::map<std::string, uint32_t> phoneme_id;
  for (size_t i = 0; i < tree.phonemes.size(); ++i)
    phoneme_id[tree.phonemes[i]] = static_cast<uint32_t>(i);
  for (const auto& [word, entry] : lexicon.entries()) {
    (void)entry;
    tree.words.push_back(word);
  }

  tree.nodes.emplace_back();  // root
  uint32_t word_id = 0;
  for (const auto& [word, entry] : lexicon.entries()) {
    for (const auto& pron : entry.prons) {
      if (pron.phonemes.empty())
        throw DataError("prefix tree: word '" + word +
                        "' has an empty pronunciation");
      uint32_t node = 0;
      for (size_t i = 0; i < pron.phonemes.size(); ++i) {
        uint32_t label = phoneme_id.at(pron.phonemes[i]);
        if (i + 1 == pron.phonemes.size()) label = tree.final_label(label);
        auto [it, fresh] = tree.nodes[node].arcs.try_emplace(
            label, static_cast<uint32_t>(tree.nodes.size()));
        if (fresh) tree.nodes.emplace_back();
        node = it->second;
      }
      tree.nodes[node].word_ends.push_back({word_id, pron.weight});
    }
    ++word_id;
  }
  for (auto& node : tree.nodes)
    std::sort(node.word_ends.begin(), node.word_ends.end(),
              [](const PrefixTree::WordEnd& a, const PrefixTree::WordEnd& b) {
                return a.word < b.word;
              });
  return tree;
}

std::vector<TreePronunciation> decompile_prefix_tree(const PrefixTree& tree) {
  std::vector<TreePronunciation> out;
  std::vector<std::string> path;
  // The tree is acyclic by construction, so a plain depth-first walk with an
  // explicit path suffices.
  auto walk = [&](auto&& self, uint32_t node) -> void {
    for (const auto& end : tree.nodes[node].word_ends)
      out.push_back({tree.words[end.word], path, end.weight});
    for (const auto& [label, child] : tree.nodes[node].arcs) {
      path.push_back(tree.phonemes[tree.phoneme_of(label)]);
      self(self, child);
      path.pop_back();
    }
  };
  walk(walk, 0);
  std::sort(out.begin(), out.end(),
            [](const TreePronunciation& a, const TreePronunciation& b) {
              if (a.word != b.word) return a.word < b.word;
              return a.phonemes < b.phonemes;
            });
  return out;
}

void PrefixTree::write(std::ostream& out) const {
  out.write(kTreeMagic, sizeof(kTreeMagic));
  put_u32(out, static_cast<uint32_t>(words.size()));
  for (const auto& w : words) put_string(out, w);
  put_u32(out, static_cast<uint32_t>(phonemes.size()));
  for (const auto& p : phonemes) put_string(out, p);
  put_u32(out, static_cast<uint32_t>(nodes.size()));
  for (const auto& node : nodes) {
    put_u32(out, static_cast<uint32_t>(node.arcs.size()));
    for (const auto& [label, child] : node.arcs) {
      put_u32(out, label);
      put_u32(out, child);
    }
    put_u32(out, static_cast<uint32_t>(node.word_ends.size()));
    for (const auto& end : node.word_ends) {
      put_u32(out, end.word);
      put_f64(out, end.weight);
    }
  }
  if (!out) throw IoError("failed writing prefix tree");
}

PrefixTree PrefixTree::read(std::istream& in, const std::string& name) {
  char magic[sizeof(kTreeMagic)];
  in.read(magic, sizeof(magic));
  if (static_cast<size_t>(in.gcount()) != sizeof(magic) ||
      !std::equal(magic, magic + sizeof(magic), kTreeMagic))
    throw DataError(name + ": not a prefix tree file (bad magic)");

  PrefixTree tree;
  uint32_t n_words = get_u32(in, name);
  for (uint32_t i = 0; i < n_words; ++i)
    tree.words.push_back(get_string(in, name));
  uint32_t n_phonemes = get_u32(in, name);
  for (uint32_t i = 0; i < n_phonemes; ++i)
    tree.phonemes.push_back(get_string(in, name));
  uint32_t n_nodes = get_u32(in, name);
  if (n_nodes == 0) throw DataError(name + ": prefix tree has no root node");

  for (uint32_t i = 0; i < n_nodes; ++i) {
    PrefixTree::Node node;
    uint32_t n_arcs = get_u32(in, name);
    uint32_t prev_label = 0;
    for (uint32_t a = 0; a < n_arcs; ++a) {
      uint32_t label = get_u32(in, name);
      uint32_t child = get_u32(in, name);
      if (label >= tree.label_count())
        throw DataError(name + ": arc label out of range");
      if (child == 0 || child >= n_nodes)
        throw DataError(name + ": arc target out of range");
      if (a > 0 && label <= prev_label)
        throw DataError(name + ": arc labels out of order");
      prev_label = label;
      node.arcs.emplace(label, child);
    }
    uint32_t n_ends = get_u32(in, name);
    uint32_t prev_word = 0;
    for (uint32_t e = 0; e < n_ends; ++e) {
      PrefixTree::WordEnd end;
      end.word = get_u32(in, name);
      end.weight = get_f64(in, name);
      if (end.word >= tree.words.size())
        throw DataError(name + ": word id out of range");
      if (e > 0 && end.word <= prev_word)
        throw DataError(name + ": word ends out of order");
      if (!std::isfinite(end.weight))
        throw DataError(name + ": non-finite pronunciation weight");
      prev_word = end.word;
      node.word_ends.push_back(end);
    }
    tree.nodes.push_back(std::move(node));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(name + ": trailing bytes after prefix tree");
  return tree;
}

PrefixTree PrefixTree::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read(in, path);
}

void PrefixTree::save(const std::string& path) const {
  std::ofstream out;
  open_out_or_throw(out, path, /*binary=*/true);
  write(out);
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace asrtk
