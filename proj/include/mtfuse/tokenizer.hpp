#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtfuse/corpus.hpp"
#include "mtfuse/vocab.hpp"

namespace mtfuse {

struct BpeMerge {
  std::string left;   // raw bytes
  std::string right;  // raw bytes
  bool operator==(const BpeMerge&) const = default;
};

// Byte-level BPE shared across all languages. The base alphabet is the 256
// byte values, so encoding is total on arbitrary UTF-8 (or any bytes) and
// decode(encode(text)) == text holds exactly. Merges never cross word
// boundaries; a word carries its single preceding space, so segmentation is
// reversible by plain concatenation.
class BpeModel {
 public:
  BpeModel() = default;

  static BpeModel train(const MultiParallelCorpus& corpus, int vocab_size);

  // First id is the language tag; remaining ids cover the text bytes exactly.
  TokenSeq encode(const std::string& text, const std::string& language) const;

  // Inverse of encode on its image: strips specials and tags, concatenates
  // token bytes. ErrorKind::vocab on out-of-range ids.
  std::string decode(const TokenSeq& seq) const;

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

  const Vocab& vocab() const { return vocab_; }
  const std::vector<BpeMerge>& merges() const { return merges_; }

 private:
  void index_merges();
  std::vector<std::string> segment_chunk(const std::string& chunk) const;

  Vocab vocab_;
  std::vector<BpeMerge> merges_;
  std::unordered_map<std::string, int> merge_rank_;  // left + '\x01' + right -> rank
};

// Splits text into merge domains: each maximal run of non-space bytes takes
// one preceding space if present; leftover spaces stand alone. Concatenating
// the chunks reproduces the text byte-for-byte.
std::vector<std::string> bpe_chunks(const std::string& text);

}  // namespace mtfuse
