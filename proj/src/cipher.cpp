#include "mtfuse/cipher.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mtfuse/rng.hpp"

namespace mtfuse {

WordOrder word_order_from_string(const std::string& name) {
  if (name == "identity") return WordOrder::identity;
  if (name == "rotate_left" || name == "rotate") return WordOrder::rotate_left;
  if (name == "reverse") return WordOrder::reverse;
  fail(ErrorKind::config, "unknown word order: " + name);
}

std::string to_string(WordOrder order) {
  switch (order) {
    case WordOrder::identity: return "identity";
    case WordOrder::rotate_left: return "rotate_left";
    case WordOrder::reverse: return "reverse";
  }
  fail(ErrorKind::internal, "bad word order value");
}

std::vector<int> word_order_permutation(WordOrder order, int length) {
  std::vector<int> perm(static_cast<size_t>(length));
  std::iota(perm.begin(), perm.end(), 0);
  switch (order) {
    case WordOrder::identity:
      break;
    case WordOrder::rotate_left:
      if (length > 1) std::rotate(perm.begin(), perm.begin() + 1, perm.end());
      break;
    case WordOrder::reverse:
      std::reverse(perm.begin(), perm.end());
      break;
  }
  return perm;
}

void CipherSpec::validate() const {
  if (concept_vocab_size < 1) fail(ErrorKind::config, "concept vocabulary is empty");
  if (languages.empty()) fail(ErrorKind::config, "cipher spec has no languages");
  std::set<std::string> codes;
  for (const auto& lang : languages) {
    if (lang.code.empty()) fail(ErrorKind::config, "empty language code in cipher spec");
    if (!codes.insert(lang.code).second) {
      fail(ErrorKind::config, "duplicate language code: " + lang.code);
    }
    if (static_cast<int>(lang.words.size()) != concept_vocab_size) {
      fail(ErrorKind::config, "language " + lang.code + " has " +
                                  std::to_string(lang.words.size()) + " words, expected " +
                                  std::to_string(concept_vocab_size));
    }
    std::set<std::string> distinct(lang.words.begin(), lang.words.end());
    if (static_cast<int>(distinct.size()) != concept_vocab_size) {
      fail(ErrorKind::config, "substitution map of " + lang.code + " is not a bijection");
    }
    for (const auto& w : lang.words) {
      if (w.empty() || w.find(' ') != std::string::npos) {
        fail(ErrorKind::config, "bad cipher word in " + lang.code);
      }
    }
  }
  if (noise) {
    if (noise->dropout < 0.0 || noise->dropout >= 1.0) {
      fail(ErrorKind::config, "word dropout must be in [0, 1)");
    }
    if (!codes.count(noise->language)) {
      fail(ErrorKind::config, "noise language not in spec: " + noise->language);
    }
  }
}

const CipherLanguage& CipherSpec::language(const std::string& code) const {
  for (const auto& lang : languages) {
    if (lang.code == code) return lang;
  }
  fail(ErrorKind::config, "language not in cipher spec: " + code);
}

CipherSpec make_cipher_spec(const std::vector<std::string>& codes, int concept_vocab_size,
                            uint64_t seed, const std::vector<WordOrder>& orders) {
  if (codes.empty()) fail(ErrorKind::config, "cipher spec has no languages");
  if (concept_vocab_size < 1) fail(ErrorKind::config, "concept vocabulary is empty");

  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::vector<std::string> universe;
  universe.reserve(consonants.size() * vowels.size() * consonants.size() * vowels.size());
  for (char c1 : consonants)
    for (char v1 : vowels)
      for (char c2 : consonants)
        for (char v2 : vowels) universe.push_back({c1, v1, c2, v2});

  size_t needed = codes.size() * static_cast<size_t>(concept_vocab_size);
  if (needed > universe.size()) {
    fail(ErrorKind::config, "concept vocabulary too large: need " + std::to_string(needed) +
                                " distinct words, universe has " +
                                std::to_string(universe.size()));
  }

  SplitMix64 rng(SplitMix64::derive(seed, 0x5Bu));
  for (size_t i = universe.size() - 1; i > 0; --i) {
    std::swap(universe[i], universe[rng.next_below(i + 1)]);
  }

  CipherSpec spec;
  spec.concept_vocab_size = concept_vocab_size;
  for (size_t li = 0; li < codes.size(); ++li) {
    CipherLanguage lang;
    lang.code = codes[li];
    lang.words.assign(universe.begin() + static_cast<long>(li) * concept_vocab_size,
                      universe.begin() + static_cast<long>(li + 1) * concept_vocab_size);
    if (!orders.empty()) {
      lang.order = orders[li < orders.size() ? li : orders.size() - 1];
    } else {
      constexpr WordOrder cycle[3] = {WordOrder::identity, WordOrder::rotate_left,
                                      WordOrder::reverse};
      lang.order = cycle[li % 3];
    }
    spec.languages.push_back(std::move(lang));
  }
  spec.validate();
  return spec;
}

std::string cipher_render(const CipherLanguage& lang, const std::vector<int>& concepts) {
  std::vector<int> perm = word_order_permutation(lang.order, static_cast<int>(concepts.size()));
  std::ostringstream out;
  for (size_t i = 0; i < concepts.size(); ++i) {
    if (i) out << ' ';
    out << lang.words[static_cast<size_t>(concepts[static_cast<size_t>(perm[i])])];
  }
  return out.str();
}

std::vector<int> cipher_parse(const CipherLanguage& lang, const std::string& sentence) {
  std::unordered_map<std::string, int> inverse;
  for (size_t i = 0; i < lang.words.size(); ++i) inverse[lang.words[i]] = static_cast<int>(i);

  std::vector<int> surface;
  std::istringstream in(sentence);
  std::string word;
  while (in >> word) {
    auto it = inverse.find(word);
    if (it == inverse.end()) fail(ErrorKind::data, "word not in cipher language " + lang.code + ": " + word);
    surface.push_back(it->second);
  }
  // undo the word order: surface[i] = concepts[perm[i]]
  std::vector<int> perm = word_order_permutation(lang.order, static_cast<int>(surface.size()));
  std::vector<int> concepts(surface.size());
  for (size_t i = 0; i < surface.size(); ++i) {
    concepts[static_cast<size_t>(perm[i])] = surface[i];
  }
  return concepts;
}

std::string cipher_translate(const CipherSpec& spec, const std::string& from,
                             const std::string& to, const std::string& sentence) {
  return cipher_render(spec.language(to), cipher_parse(spec.language(from), sentence));
}

MultiParallelCorpus generate_cipher_corpus(const CipherSpec& spec, int num_rows, int len_min,
                                           int len_max, uint64_t seed) {
  spec.validate();
  if (num_rows < 1) fail(ErrorKind::config, "num rows must be >= 1");
  if (len_min < 1 || len_max < len_min) fail(ErrorKind::config, "bad sentence length range");

  MultiParallelCorpus corpus;
  corpus.name = "cipher";
  for (const auto& lang : spec.languages) corpus.languages.push_back(lang.code);

  SplitMix64 concept_rng(SplitMix64::derive(seed, 0xC0u));
  SplitMix64 noise_rng(spec.noise ? SplitMix64::derive(spec.noise->seed, 0xD0u) : 0);

  for (int r = 0; r < num_rows; ++r) {
    int len = len_min + static_cast<int>(concept_rng.next_below(
                            static_cast<uint64_t>(len_max - len_min + 1)));
    std::vector<int> concepts(static_cast<size_t>(len));
    for (auto& c : concepts) {
      c = static_cast<int>(concept_rng.next_below(static_cast<uint64_t>(spec.concept_vocab_size)));
    }

    std::vector<std::string> row;
    for (const auto& lang : spec.languages) {
      std::string sentence = cipher_render(lang, concepts);
      if (spec.noise && spec.noise->language == lang.code && spec.noise->dropout > 0.0) {
        std::vector<std::string> words;
        std::istringstream in(sentence);
        std::string w;
        while (in >> w) words.push_back(w);
        std::vector<std::string> kept;
        for (const auto& word : words) {
          if (noise_rng.next_double() >= spec.noise->dropout) kept.push_back(word);
        }
        if (kept.empty()) kept.push_back(words.front());  // sentences must stay non-empty
        std::ostringstream out;
        for (size_t i = 0; i < kept.size(); ++i) {
          if (i) out << ' ';
          out << kept[i];
        }
        sentence = out.str();
      }
      row.push_back(std::move(sentence));
    }
    corpus.rows.push_back(std::move(row));
  }
  return corpus;
}

}  // namespace mtfuse
