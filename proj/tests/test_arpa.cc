#include <sstream>
#include <string>
#include <vector>

#include "asrtk/ngram.hh"
#include "asrtk/util.hh"
#include "doctest.h"
#include "test_support.hh"

using namespace asrtk;

namespace {

const char kTinyArpa[] =
    "\\data\\\n"
    "ngram 1=4\n"
    "ngram 2=3\n"
    "\n"
    "\\1-grams:\n"
    "-0.60206\t</s>\n"
    "-99\t<s>\t-0.30103\n"
    "-0.9\ta\t-0.2\n"
    "-0.9\tb\n"
    "\n"
    "\\2-grams:\n"
    "-0.30103\t<s> a\n"
    "-0.5\ta </s>\n"
    "-0.5\ta b\n"
    "\n"
    "\\end\\\n";

std::string rewrite(const std::string& text) {
  std::istringstream in(text);
  auto m = read_arpa(in, "mem");
  std::ostringstream out;
  write_arpa(m, out);
  return out.str();
}

void check_rejects(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  CHECK_THROWS_WITH_AS(read_arpa(in, "mem"), doctest::Contains(needle.c_str()),
                       ParseError);
}

}  // namespace

TEST_CASE("reading a well-formed file recovers every entry") {
  std::istringstream in(kTinyArpa);
  auto m = read_arpa(in, "mem");
  CHECK(m.order() == 2);
  CHECK(m.ngram_count(1) == 4);
  CHECK(m.ngram_count(2) == 3);
  auto a = *m.token_id("a");
  auto b = *m.token_id("b");
  const NgramEntry* e = m.find(Gram::single(a));
  REQUIRE(e != nullptr);
  CHECK(e->log10_prob == doctest::Approx(-0.9));
  CHECK(e->has_backoff);
  CHECK(e->log10_backoff == doctest::Approx(-0.2));
  const NgramEntry* eb = m.find(Gram::single(b));
  REQUIRE(eb != nullptr);
  CHECK(!eb->has_backoff);
  Gram ab;
  ab.push(a);
  ab.push(b);
  REQUIRE(m.find(ab) != nullptr);
  CHECK(m.find(ab)->log10_prob == doctest::Approx(-0.5));
  CHECK(m.bos().has_value());
  CHECK(m.eos().has_value());
  CHECK(!m.unk().has_value());
}

TEST_CASE("write-read-write is byte identical") {
  std::string first = rewrite(kTinyArpa);
  std::string second = rewrite(first);
  CHECK(first == second);

  // Same property for a trained model, which exercises backoff columns,
  // negative-zero normalization and 7-significant-digit rounding.
  std::vector<std::string> words = {"ab", "cd", "ef", "gh", "ij"};
  Vocabulary vocab(words);
  auto sents = testsup::random_sentences(words, 70, 5);
  std::istringstream corpus(testsup::as_text(sents));
  auto m = train(count_ngrams(corpus, 3, vocab));
  std::ostringstream w1;
  write_arpa(m, w1);
  std::string w2 = rewrite(w1.str());
  CHECK(w1.str() == w2);
  std::string w3 = rewrite(w2);
  CHECK(w2 == w3);
}

TEST_CASE("carriage returns and extra blank lines are tolerated") {
  std::string crlf;
  for (char ch : std::string(kTinyArpa))
    if (ch == '\n') crlf += "\r\n";
    else crlf += ch;
  crlf = "\n\n" + crlf;
  std::istringstream in(crlf);
  auto m = read_arpa(in, "mem");
  CHECK(m.ngram_count(2) == 3);
}

TEST_CASE("scoring a parsed model walks backoff weights") {
  std::istringstream in(kTinyArpa);
  auto m = read_arpa(in, "mem");
  auto a = *m.token_id("a");
  auto b = *m.token_id("b");
  // "b" after "a" is stored; "a" after "a" backs off through -0.2.
  std::vector<TokenId> hist = {a};
  CHECK(m.log10_prob(hist, b) == doctest::Approx(-0.5));
  CHECK(m.log10_prob(hist, a) == doctest::Approx(-0.2 + -0.9));
  // "a" after "b": no backoff weight stored for "b", no penalty.
  std::vector<TokenId> hist_b = {b};
  CHECK(m.log10_prob(hist_b, a) == doctest::Approx(-0.9));
}

TEST_CASE("malformed files are rejected with the offending line") {
  SUBCASE("empty file") {
    check_rejects("", "expected \\data\\");
  }
  SUBCASE("missing data header") {
    check_rejects("hello\n\\data\\\nngram 1=0\n", "mem:1: expected \\data\\");
  }
  SUBCASE("unparseable ngram declaration") {
    check_rejects("\\data\\\nngram one=2\n", "mem:2: expected 'ngram 1=<count>'");
  }
  SUBCASE("non-consecutive ngram orders") {
    check_rejects("\\data\\\nngram 1=1\nngram 3=1\n",
                  "mem:3: expected 'ngram 2=<count>'");
  }
  SUBCASE("no declarations at all") {
    check_rejects("\\data\\\n\\1-grams:\n", "no ngram count declarations");
  }
  SUBCASE("order beyond the supported maximum") {
    std::string t = "\\data\\\n";
    for (int k = 1; k <= 7; ++k)
      t += "ngram " + std::to_string(k) + "=0\n";
    t += "\n\\1-grams:\n";
    check_rejects(t, "exceeds supported maximum");
  }
  SUBCASE("wrong section header") {
    check_rejects("\\data\\\nngram 1=1\n\n\\2-grams:\n-0.5\ta\n",
                  "mem:4: expected \\1-grams:");
  }
  SUBCASE("non-numeric probability") {
    check_rejects("\\data\\\nngram 1=1\n\n\\1-grams:\nabc\ta\n\n\\end\\\n",
                  "mem:5: non-numeric log10 probability 'abc'");
  }
  SUBCASE("missing fields") {
    check_rejects("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\n\n\\end\\\n",
                  "mem:5: expected 'log10prob<TAB>tokens[<TAB>log10backoff]'");
  }
  SUBCASE("wrong token arity for the section") {
    check_rejects("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta b\n\n\\end\\\n",
                  "mem:5: expected 1 tokens, got 2");
  }
  SUBCASE("declared count disagrees with section body") {
    check_rejects("\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n\n\\end\\\n",
                  "declared 2 entries, found 1");
  }
  SUBCASE("bigram over a token with no unigram entry") {
    check_rejects(
        "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.5\ta\t-0.1\n\n"
        "\\2-grams:\n-0.5\ta q\n\n\\end\\\n",
        "mem:9: token 'q' has no unigram entry");
  }
  SUBCASE("duplicate n-gram") {
    check_rejects(
        "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n-0.7\ta\n\n\\end\\\n",
        "mem:6: duplicate n-gram 'a'");
  }
  SUBCASE("missing prefix entry") {
    check_rejects(
        "\\data\\\nngram 1=3\nngram 2=1\nngram 3=1\n\n"
        "\\1-grams:\n-0.5\ta\t-0.1\n-0.5\tb\t-0.1\n-0.5\tc\n\n"
        "\\2-grams:\n-0.4\ta b\t-0.1\n\n"
        "\\3-grams:\n-0.3\tb a c\n\n\\end\\\n",
        "mem:15: n-gram 'b a c' lacks a stored prefix entry");
  }
  SUBCASE("backoff weight at the maximum order") {
    check_rejects(
        "\\data\\\nngram 1=2\nngram 2=1\n\n\\1-grams:\n-0.5\ta\t-0.1\n"
        "-0.5\tb\n\n\\2-grams:\n-0.4\ta b\t-0.1\n\n\\end\\\n",
        "mem:10: backoff weight not allowed at maximum order");
  }
  SUBCASE("non-numeric backoff weight") {
    check_rejects(
        "\\data\\\nngram 1=2\nngram 2=1\n\n\\1-grams:\n-0.5\ta\tbad\n"
        "-0.5\tb\n\n\\2-grams:\n-0.4\ta b\n\n\\end\\\n",
        "mem:6: non-numeric backoff weight 'bad'");
  }
  SUBCASE("truncated before the terminator") {
    check_rejects("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n",
                  "expected \\end\\");
  }
  SUBCASE("trailing garbage instead of terminator") {
    check_rejects("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n\nwhat\n",
                  "mem:7: expected \\end\\");
  }
}

TEST_CASE("file round trip via save and load") {
  std::vector<std::string> words = {"k", "l", "m"};
  Vocabulary vocab(words);
  auto sents = testsup::random_sentences(words, 30, 77);
  std::istringstream corpus(testsup::as_text(sents));
  auto m = train(count_ngrams(corpus, 2, vocab));
  std::string path = "arpa_roundtrip.tmp";
  save_arpa(m, path);
  auto back = load_arpa(path);
  CHECK(back.order() == m.order());
  CHECK(back.ngram_count(1) == m.ngram_count(1));
  CHECK(back.ngram_count(2) == m.ngram_count(2));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_arpa("definitely_missing_file.arpa"), IoError);
}
