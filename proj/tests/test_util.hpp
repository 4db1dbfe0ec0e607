#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtfuse/corpus.hpp"
#include "mtfuse/rng.hpp"

namespace testutil {

// fresh scratch directory per test binary run
inline std::string tmp_dir() {
  static std::string dir = [] {
    auto base = std::filesystem::temp_directory_path() /
                ("mtfuse-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(base);
    return base.string();
  }();
  return dir;
}

inline std::string tmp_path(const std::string& name) { return tmp_dir() + "/" + name; }

// random valid UTF-8 string mixing ASCII, Latin, Cyrillic, CJK and emoji
inline std::string random_utf8(mtfuse::SplitMix64& rng, int max_chars = 24) {
  auto encode = [](uint32_t cp, std::string& out) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  };
  std::string out;
  int n = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(max_chars)));
  for (int i = 0; i < n; ++i) {
    uint32_t cp;
    switch (rng.next_below(6)) {
      case 0: cp = 0x20 + static_cast<uint32_t>(rng.next_below(0x5F)); break;          // ASCII
      case 1: cp = 0xC0 + static_cast<uint32_t>(rng.next_below(0x100)); break;         // Latin
      case 2: cp = 0x400 + static_cast<uint32_t>(rng.next_below(0x100)); break;        // Cyrillic
      case 3: cp = 0x4E00 + static_cast<uint32_t>(rng.next_below(0x1000)); break;      // CJK
      case 4: cp = 0x1F600 + static_cast<uint32_t>(rng.next_below(0x30)); break;       // emoji
      default: cp = 0x20 + static_cast<uint32_t>(rng.next_below(0x5F)); break;
    }
    encode(cp, out);
  }
  return out;
}

// small multilingual corpus for tokenizer/infrastructure tests
inline mtfuse::MultiParallelCorpus tiny_corpus() {
  mtfuse::MultiParallelCorpus corpus;
  corpus.name = "tiny";
  corpus.languages = {"en", "pt"};
  corpus.rows = {
      {"the cat sat on the mat", "o gato sentou no tapete"},
      {"the dog barks at night", "o cao late a noite"},
      {"a bird sings in the morning", "um passaro canta de manha"},
      {"the cat and the dog", "o gato e o cao"},
  };
  return corpus;
}

}  // namespace testutil
