#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtfuse/corpus.hpp"

namespace mtfuse {

// Word-order template applied per sentence length, kept simple so the
// language-to-language mapping stays closed form.
enum class WordOrder { identity, rotate_left, reverse };

WordOrder word_order_from_string(const std::string& name);
std::string to_string(WordOrder order);

// position i of the rendered sentence takes concept perm[i]
std::vector<int> word_order_permutation(WordOrder order, int length);

struct CipherLanguage {
  std::string code;
  std::vector<std::string> words;  // bijection: concept id -> surface word
  WordOrder order = WordOrder::identity;
};

struct CipherNoise {
  std::string language;  // the designated low-quality source
  double dropout = 0.0;  // per-word drop probability, 0 <= p < 1
  uint64_t seed = 0;
};

// A family of synthetic languages over one shared concept vocabulary. Every
// language renders the same concept sequence through its own substitution
// map and word order, so gold translations are computable in closed form.
struct CipherSpec {
  int concept_vocab_size = 0;
  std::vector<CipherLanguage> languages;
  std::optional<CipherNoise> noise;

  void validate() const;
  const CipherLanguage& language(const std::string& code) const;
};

// Deterministic spec builder: distinct pronounceable words per language,
// disjoint across languages, word orders cycling identity/rotate/reverse
// unless given explicitly.
CipherSpec make_cipher_spec(const std::vector<std::string>& codes, int concept_vocab_size,
                            uint64_t seed, const std::vector<WordOrder>& orders = {});

MultiParallelCorpus generate_cipher_corpus(const CipherSpec& spec, int num_rows, int len_min,
                                           int len_max, uint64_t seed);

// Closed-form gold translation used as the oracle in tests and benchmarks:
// parse `sentence` in language `from`, recover the concept sequence, render
// it in language `to`. Only valid for noiseless sentences.
std::string cipher_translate(const CipherSpec& spec, const std::string& from,
                             const std::string& to, const std::string& sentence);

// Inverse rendering: surface words -> concept ids (ErrorKind::data on an
// unknown word).
std::vector<int> cipher_parse(const CipherLanguage& lang, const std::string& sentence);
std::string cipher_render(const CipherLanguage& lang, const std::vector<int>& concepts);

}  // namespace mtfuse
