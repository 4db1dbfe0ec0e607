#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtfuse/errors.hpp"

namespace mtfuse {

using TokenId = int32_t;

// Sequence of vocabulary token ids. Encoded sequences start with a language
// tag; decoder prefixes start with BOS followed by the target tag.
using TokenSeq = std::vector<TokenId>;

// Shared multilingual subword vocabulary. Fixed layout:
//   [0..3]                PAD, BOS, EOS, UNK
//   [4 .. 4+L)            one tag token per language code
//   [4+L .. 4+L+256)      one token per byte value (byte fallback alphabet)
//   [4+L+256 ..)          merged subword tokens, in merge order
class Vocab {
 public:
  Vocab() = default;
  static Vocab build(const std::vector<std::string>& language_codes);

  int size() const { return static_cast<int>(display_.size()); }

  TokenId pad() const { return 0; }
  TokenId bos() const { return 1; }
  TokenId eos() const { return 2; }
  TokenId unk() const { return 3; }

  int num_languages() const { return static_cast<int>(languages_.size()); }
  const std::vector<std::string>& language_codes() const { return languages_; }
  bool has_language(const std::string& code) const;

  // Tag token for a language code; ErrorKind::vocab if the code is unknown.
  TokenId tag(const std::string& code) const;
  bool is_language_tag(TokenId id) const;
  bool is_special(TokenId id) const { return id >= 0 && id < first_byte(); }

  TokenId byte_token(uint8_t b) const { return first_byte() + b; }
  int first_byte() const { return 4 + num_languages(); }
  int first_merged() const { return first_byte() + 256; }

  // Registers a merged token; the raw byte string must be new and non-empty.
  TokenId add_merged(const std::string& raw_bytes);

  // Raw text bytes a token stands for ("" for specials and tags).
  const std::string& token_bytes(TokenId id) const;
  // Printable form used in vocabulary files.
  const std::string& token_display(TokenId id) const;
  // Lookup of a byte string among byte + merged tokens.
  std::optional<TokenId> find(const std::string& raw_bytes) const;

  void check_id(TokenId id) const;

  bool operator==(const Vocab& other) const {
    return languages_ == other.languages_ && display_ == other.display_;
  }

  // Escaping used by vocabulary/merge files: space becomes U+2581, '<' and
  // any byte that would make the line invalid UTF-8 or non-printable becomes
  // "<0xNN>". unescape() is its exact inverse.
  static std::string escape(const std::string& raw);
  static std::string unescape(const std::string& display);

 private:
  std::vector<std::string> languages_;
  std::vector<std::string> raw_;      // raw bytes per id ("" for specials/tags)
  std::vector<std::string> display_;  // printable form per id
  std::unordered_map<std::string, TokenId> raw_to_id_;  // bytes + merged only
  std::unordered_map<std::string, TokenId> tag_by_code_;
};

}  // namespace mtfuse
