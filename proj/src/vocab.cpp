#include "mtfuse/vocab.hpp"

#include <cstdio>
#include <set>

namespace mtfuse {

namespace {

bool valid_utf8(const std::string& s) {
  size_t i = 0;
  while (i < s.size()) {
    uint8_t b = static_cast<uint8_t>(s[i]);
    int extra;
    if (b < 0x80) {
      extra = 0;
    } else if ((b & 0xE0) == 0xC0 && b >= 0xC2) {
      extra = 1;
    } else if ((b & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((b & 0xF8) == 0xF0 && b <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      if ((static_cast<uint8_t>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string byte_escape(uint8_t b) {
  char tmp[8];
  std::snprintf(tmp, sizeof tmp, "<0x%02X>", b);
  return tmp;
}

constexpr const char* kSpaceMarker = "\xE2\x96\x81";  // U+2581

}  // namespace

Vocab Vocab::build(const std::vector<std::string>& language_codes) {
  Vocab v;
  std::set<std::string> seen;
  for (const auto& code : language_codes) {
    if (code.empty()) fail(ErrorKind::config, "empty language code");
    if (!seen.insert(code).second) fail(ErrorKind::config, "duplicate language code: " + code);
  }
  v.languages_ = language_codes;
  v.raw_ = {"", "", "", ""};
  v.display_ = {"<pad>", "<s>", "</s>", "<unk>"};
  for (const auto& code : language_codes) {
    v.tag_by_code_[code] = static_cast<TokenId>(v.display_.size());
    v.raw_.push_back("");
    v.display_.push_back("<lang_" + code + ">");
  }
  for (int b = 0; b < 256; ++b) {
    std::string raw(1, static_cast<char>(b));
    v.raw_to_id_[raw] = static_cast<TokenId>(v.display_.size());
    v.raw_.push_back(raw);
    v.display_.push_back(byte_escape(static_cast<uint8_t>(b)));
  }
  return v;
}

bool Vocab::has_language(const std::string& code) const {
  return tag_by_code_.count(code) != 0;
}

TokenId Vocab::tag(const std::string& code) const {
  auto it = tag_by_code_.find(code);
  if (it == tag_by_code_.end()) fail(ErrorKind::vocab, "unknown language code: " + code);
  return it->second;
}

bool Vocab::is_language_tag(TokenId id) const {
  return id >= 4 && id < first_byte();
}

TokenId Vocab::add_merged(const std::string& raw_bytes) {
  if (raw_bytes.size() < 2) fail(ErrorKind::internal, "merged token must span at least two bytes");
  if (raw_to_id_.count(raw_bytes)) fail(ErrorKind::internal, "duplicate token: " + escape(raw_bytes));
  TokenId id = static_cast<TokenId>(display_.size());
  raw_to_id_[raw_bytes] = id;
  raw_.push_back(raw_bytes);
  display_.push_back(escape(raw_bytes));
  return id;
}

const std::string& Vocab::token_bytes(TokenId id) const {
  check_id(id);
  return raw_[static_cast<size_t>(id)];
}

const std::string& Vocab::token_display(TokenId id) const {
  check_id(id);
  return display_[static_cast<size_t>(id)];
}

std::optional<TokenId> Vocab::find(const std::string& raw_bytes) const {
  auto it = raw_to_id_.find(raw_bytes);
  if (it == raw_to_id_.end()) return std::nullopt;
  return it->second;
}

void Vocab::check_id(TokenId id) const {
  if (id < 0 || id >= size()) {
    fail(ErrorKind::vocab, "token id " + std::to_string(id) + " outside vocabulary of size " +
                               std::to_string(size()));
  }
}

std::string Vocab::escape(const std::string& raw) {
  bool utf8 = valid_utf8(raw);
  std::string out;
  size_t i = 0;
  while (i < raw.size()) {
    uint8_t b = static_cast<uint8_t>(raw[i]);
    if (b == ' ') {
      out += kSpaceMarker;
      ++i;
    } else if (b == '<' || b < 0x20 || b == 0x7F || (!utf8 && b >= 0x80)) {
      out += byte_escape(b);
      ++i;
    } else if (raw.compare(i, 3, kSpaceMarker) == 0) {
      // literal U+2581 in the text must not collide with the space marker
      out += byte_escape(0xE2);
      out += byte_escape(0x96);
      out += byte_escape(0x81);
      i += 3;
    } else {
      out += static_cast<char>(b);
      ++i;
    }
  }
  return out;
}

std::string Vocab::unescape(const std::string& display) {
  std::string out;
  size_t i = 0;
  while (i < display.size()) {
    if (display[i] == '<' && i + 5 < display.size() && display.compare(i, 3, "<0x") == 0 &&
        display[i + 5] == '>') {
      unsigned value = 0;
      if (std::sscanf(display.c_str() + i + 3, "%02X", &value) != 1) {
        fail(ErrorKind::format, "bad byte escape in token: " + display);
      }
      out += static_cast<char>(value);
      i += 6;
    } else if (display.compare(i, 3, kSpaceMarker) == 0) {
      out += ' ';
      i += 3;
    } else {
      out += display[i];
      ++i;
    }
  }
  return out;
}

}  // namespace mtfuse
