#include "doctest.h"

#include <set>
#include <sstream>

#include "mtfuse/cipher.hpp"
#include "mtfuse/io.hpp"
#include "test_util.hpp"

using namespace mtfuse;

namespace {

std::vector<std::string> words_of(const std::string& sentence) {
  std::vector<std::string> words;
  std::istringstream in(sentence);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  CipherSpec spec = make_cipher_spec({"aa", "bb", "cc"}, 50, 11);
  MultiParallelCorpus a = generate_cipher_corpus(spec, 100, 4, 9, 21);
  MultiParallelCorpus b = generate_cipher_corpus(spec, 100, 4, 9, 21);
  REQUIRE(a.num_rows() == b.num_rows());
  for (size_t i = 0; i < a.num_rows(); ++i) CHECK(a.rows[i] == b.rows[i]);
}

TEST_CASE("dropout zero leaves the noisy language untouched") {
  CipherSpec clean = make_cipher_spec({"aa", "bb"}, 40, 3);
  CipherSpec noisy = clean;
  noisy.noise = CipherNoise{"aa", 0.0, 77};
  MultiParallelCorpus a = generate_cipher_corpus(clean, 50, 3, 8, 5);
  MultiParallelCorpus b = generate_cipher_corpus(noisy, 50, 3, 8, 5);
  for (size_t i = 0; i < a.num_rows(); ++i) CHECK(a.rows[i] == b.rows[i]);
}

TEST_CASE("identity permutations: language B is the word-by-word image of A") {
  CipherSpec spec = make_cipher_spec({"aa", "bb"}, 50, 4,
                                     {WordOrder::identity, WordOrder::identity});
  MultiParallelCorpus corpus = generate_cipher_corpus(spec, 40, 3, 8, 9);
  // independent application of the bijection, word by word
  const auto& lang_a = spec.language("aa");
  const auto& lang_b = spec.language("bb");
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    auto a_words = words_of(corpus.cell(row, "aa"));
    auto b_words = words_of(corpus.cell(row, "bb"));
    REQUIRE(a_words.size() == b_words.size());
    for (size_t i = 0; i < a_words.size(); ++i) {
      int concept_id = -1;
      for (size_t c = 0; c < lang_a.words.size(); ++c) {
        if (lang_a.words[c] == a_words[i]) concept_id = static_cast<int>(c);
      }
      REQUIRE(concept_id >= 0);
      CHECK(b_words[i] == lang_b.words[static_cast<size_t>(concept_id)]);
    }
  }
}

TEST_CASE("closed-form translation oracle matches stored sentences") {
  // nontrivial word orders on both sides
  CipherSpec spec = make_cipher_spec({"aa", "bb", "cc"}, 30, 8,
                                     {WordOrder::identity, WordOrder::rotate_left,
                                      WordOrder::reverse});
  MultiParallelCorpus corpus = generate_cipher_corpus(spec, 60, 3, 9, 13);
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    CHECK(cipher_translate(spec, "aa", "bb", corpus.cell(row, "aa")) == corpus.cell(row, "bb"));
    CHECK(cipher_translate(spec, "bb", "cc", corpus.cell(row, "bb")) == corpus.cell(row, "cc"));
    CHECK(cipher_translate(spec, "cc", "aa", corpus.cell(row, "cc")) == corpus.cell(row, "aa"));
  }
}

TEST_CASE("word tables are disjoint bijections") {
  CipherSpec spec = make_cipher_spec({"aa", "bb", "cc"}, 50, 123);
  std::set<std::string> all;
  for (const auto& lang : spec.languages) {
    for (const auto& w : lang.words) CHECK(all.insert(w).second);
  }
  CHECK(all.size() == 150);
}

TEST_CASE("noise monotonicity: token overlap decreases as dropout grows") {
  std::vector<double> overlaps;
  for (double p : {0.1, 0.3, 0.6}) {
    CipherSpec clean = make_cipher_spec({"aa", "bb"}, 50, 5);
    CipherSpec noisy = clean;
    noisy.noise = CipherNoise{"aa", p, 99};
    MultiParallelCorpus a = generate_cipher_corpus(clean, 400, 4, 9, 17);
    MultiParallelCorpus b = generate_cipher_corpus(noisy, 400, 4, 9, 17);
    long long kept = 0, total = 0;
    for (size_t row = 0; row < a.num_rows(); ++row) {
      auto clean_words = words_of(a.cell(row, "aa"));
      auto noisy_words = words_of(b.cell(row, "aa"));
      total += static_cast<long long>(clean_words.size());
      kept += static_cast<long long>(noisy_words.size());
    }
    REQUIRE(total >= 1000);
    overlaps.push_back(static_cast<double>(kept) / static_cast<double>(total));
  }
  CHECK(overlaps[0] > overlaps[1]);
  CHECK(overlaps[1] > overlaps[2]);
}

TEST_CASE("degenerate specs are config errors") {
  CHECK_THROWS_AS(make_cipher_spec({}, 10, 1), Error);
  CHECK_THROWS_AS(make_cipher_spec({"aa"}, 0, 1), Error);
  CipherSpec bad = make_cipher_spec({"aa", "bb"}, 10, 1);
  bad.noise = CipherNoise{"aa", 1.0, 0};  // p must stay below 1
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.noise = CipherNoise{"zz", 0.2, 0};  // unknown language
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(generate_cipher_corpus(make_cipher_spec({"aa"}, 5, 1), 0, 3, 5, 1), Error);
}

TEST_CASE("corpus TSV round-trip") {
  CipherSpec spec = make_cipher_spec({"aa", "bb"}, 20, 2);
  MultiParallelCorpus corpus = generate_cipher_corpus(spec, 25, 3, 6, 3);
  std::string path = testutil::tmp_path("cipher.tsv");
  save_corpus(corpus, path);
  MultiParallelCorpus loaded = load_corpus(path);
  CHECK(loaded.languages == corpus.languages);
  CHECK(loaded.rows == corpus.rows);
}

TEST_CASE("escapes survive the TSV round-trip") {
  MultiParallelCorpus corpus;
  corpus.languages = {"en", "pt"};
  corpus.rows = {{"line\nbreak and\ttab", "back\\slash"},
                 {"plain", "ol\xC3\xA1"}};
  std::string path = testutil::tmp_path("escapes.tsv");
  save_corpus(corpus, path);
  MultiParallelCorpus loaded = load_corpus(path);
  CHECK(loaded.rows == corpus.rows);
}

TEST_CASE("hand-written three-row TSV parses") {
  std::string path = testutil::tmp_path("hand.tsv");
  write_text_file(path,
                  "en\tpt\tes\n"
                  "hello\tola\thola\n"
                  "goodbye\tadeus\tadios\n"
                  "thanks\tobrigado\tgracias\n");
  MultiParallelCorpus corpus = load_corpus(path);
  CHECK(corpus.languages == std::vector<std::string>{"en", "pt", "es"});
  CHECK(corpus.num_rows() == 3);
  CHECK(corpus.cell(1, "pt") == "adeus");
}

TEST_CASE("missing cell names the offending row") {
  std::string path = testutil::tmp_path("ragged.tsv");
  std::string content = "en\tpt\n";
  for (int i = 1; i <= 10; ++i) {
    content += i == 7 ? "only-one-cell\n" : "hello\tola\n";
  }
  write_text_file(path, content);
  try {
    load_corpus(path);
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }
}

TEST_CASE("bad header is a format error") {
  std::string path = testutil::tmp_path("badheader.tsv");
  write_text_file(path, "en\ten\nhello\tola\n");
  CHECK_THROWS_AS(load_corpus(path), Error);
  write_text_file(path, "not a header line\nhello\n");
  CHECK_THROWS_AS(load_corpus(path), Error);
}
