#include "mtfuse/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "mtfuse/io.hpp"

namespace mtfuse {

namespace {

constexpr char kRankSep = '\x01';

std::string pair_key(const std::string& a, const std::string& b) {
  std::string k;
  k.reserve(a.size() + b.size() + 1);
  k += a;
  k += kRankSep;
  k += b;
  return k;
}

// Merges every occurrence of (left, right) in-place, left to right.
void merge_pair(std::vector<std::string>& symbols, const std::string& left,
                const std::string& right) {
  size_t out = 0;
  for (size_t i = 0; i < symbols.size();) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      symbols[out++] = left + right;
      i += 2;
    } else {
      symbols[out++] = std::move(symbols[i]);
      i += 1;
    }
  }
  symbols.resize(out);
}

}  // namespace

std::vector<std::string> bpe_chunks(const std::string& text) {
  std::vector<std::string> chunks;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    if (text[i] == ' ' && i + 1 < n && text[i + 1] != ' ') {
      size_t j = i + 1;
      while (j < n && text[j] != ' ') ++j;
      chunks.push_back(text.substr(i, j - i));
      i = j;
    } else if (text[i] == ' ') {
      chunks.emplace_back(" ");
      ++i;
    } else {
      size_t j = i;
      while (j < n && text[j] != ' ') ++j;
      chunks.push_back(text.substr(i, j - i));
      i = j;
    }
  }
  return chunks;
}

BpeModel BpeModel::train(const MultiParallelCorpus& corpus, int vocab_size) {
  corpus.validate();
  const int num_specials = 4 + static_cast<int>(corpus.languages.size());
  if (vocab_size <= 256 + num_specials) {
    fail(ErrorKind::config, "vocab size " + std::to_string(vocab_size) +
                                " cannot hold 256 byte tokens plus " +
                                std::to_string(num_specials) + " specials");
  }

  BpeModel model;
  model.vocab_ = Vocab::build(corpus.languages);

  // chunk frequency table, insertion-ordered for deterministic iteration
  std::vector<std::pair<std::vector<std::string>, long long>> chunks;
  std::unordered_map<std::string, size_t> chunk_index;
  for (const auto& row : corpus.rows) {
    for (const auto& sentence : row) {
      for (const auto& chunk : bpe_chunks(sentence)) {
        auto it = chunk_index.find(chunk);
        if (it == chunk_index.end()) {
          chunk_index.emplace(chunk, chunks.size());
          std::vector<std::string> symbols;
          symbols.reserve(chunk.size());
          for (char c : chunk) symbols.emplace_back(1, c);
          chunks.emplace_back(std::move(symbols), 1);
        } else {
          chunks[it->second].second += 1;
        }
      }
    }
  }

  while (model.vocab_.size() < vocab_size) {
    // count adjacent pairs; std::map gives the lexicographic tie-break
    std::map<std::pair<std::string, std::string>, long long> pair_counts;
    for (const auto& [symbols, count] : chunks) {
      for (size_t i = 0; i + 1 < symbols.size(); ++i) {
        pair_counts[{symbols[i], symbols[i + 1]}] += count;
      }
    }
    const std::pair<std::string, std::string>* best = nullptr;
    long long best_count = 1;  // a pair must repeat to be worth a merge
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best) break;

    model.vocab_.add_merged(best->first + best->second);
    model.merges_.push_back({best->first, best->second});
    for (auto& [symbols, count] : chunks) merge_pair(symbols, best->first, best->second);
  }

  model.index_merges();
  return model;
}

void BpeModel::index_merges() {
  merge_rank_.clear();
  for (size_t r = 0; r < merges_.size(); ++r) {
    merge_rank_[pair_key(merges_[r].left, merges_[r].right)] = static_cast<int>(r);
  }
}

std::vector<std::string> BpeModel::segment_chunk(const std::string& chunk) const {
  std::vector<std::string> symbols;
  symbols.reserve(chunk.size());
  for (char c : chunk) symbols.emplace_back(1, c);
  while (symbols.size() > 1) {
    int best_rank = -1;
    size_t best_pos = 0;
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    const std::string left = symbols[best_pos];
    const std::string right = symbols[best_pos + 1];
    merge_pair(symbols, left, right);
  }
  return symbols;
}

TokenSeq BpeModel::encode(const std::string& text, const std::string& language) const {
  TokenSeq seq;
  seq.push_back(vocab_.tag(language));
  for (const auto& chunk : bpe_chunks(text)) {
    for (const auto& symbol : segment_chunk(chunk)) {
      if (auto id = vocab_.find(symbol)) {
        seq.push_back(*id);
      } else {
        // cannot happen while merges and vocab agree; bytes are always present
        for (char c : symbol) seq.push_back(vocab_.byte_token(static_cast<uint8_t>(c)));
      }
    }
  }
  return seq;
}

std::string BpeModel::decode(const TokenSeq& seq) const {
  std::string out;
  for (TokenId id : seq) {
    vocab_.check_id(id);
    if (vocab_.is_special(id)) continue;
    out += vocab_.token_bytes(id);
  }
  return out;
}

void BpeModel::save(const std::string& path) const {
  std::ostringstream out;
  out << "mtfuse-bpe 1\n";
  out << "languages";
  for (size_t i = 0; i < vocab_.language_codes().size(); ++i) {
    out << (i ? "," : "\t") << vocab_.language_codes()[i];
  }
  out << "\n";
  out << "vocab\t" << vocab_.size() << "\n";
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    out << vocab_.token_display(id) << "\n";
  }
  out << "merges\t" << merges_.size() << "\n";
  for (const auto& m : merges_) {
    out << Vocab::escape(m.left) << "\t" << Vocab::escape(m.right) << "\n";
  }
  write_text_file(path, out.str());
}

BpeModel BpeModel::load(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  size_t at = 0;
  auto next_line = [&]() -> const std::string& {
    if (at >= lines.size()) fail(ErrorKind::format, "truncated BPE file: " + path);
    return lines[at++];
  };

  if (next_line() != "mtfuse-bpe 1") fail(ErrorKind::format, "not a BPE model file: " + path);

  const std::string& lang_line = next_line();
  if (lang_line.rfind("languages\t", 0) != 0) fail(ErrorKind::format, "missing languages line");
  std::vector<std::string> codes;
  {
    std::string list = lang_line.substr(10);
    size_t start = 0;
    while (start <= list.size()) {
      size_t comma = list.find(',', start);
      if (comma == std::string::npos) {
        codes.push_back(list.substr(start));
        break;
      }
      codes.push_back(list.substr(start, comma - start));
      start = comma + 1;
    }
  }

  BpeModel model;
  model.vocab_ = Vocab::build(codes);

  const std::string& vocab_line = next_line();
  if (vocab_line.rfind("vocab\t", 0) != 0) fail(ErrorKind::format, "missing vocab line");
  int vocab_count = std::stoi(vocab_line.substr(6));
  if (vocab_count < model.vocab_.size()) fail(ErrorKind::format, "vocab count too small");
  std::vector<std::string> vocab_displays;
  for (int i = 0; i < vocab_count; ++i) vocab_displays.push_back(next_line());

  const std::string& merges_line = next_line();
  if (merges_line.rfind("merges\t", 0) != 0) fail(ErrorKind::format, "missing merges line");
  int merge_count = std::stoi(merges_line.substr(7));
  for (int i = 0; i < merge_count; ++i) {
    const std::string& line = next_line();
    size_t tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorKind::format, "bad merge line: " + line);
    BpeMerge m{Vocab::unescape(line.substr(0, tab)), Vocab::unescape(line.substr(tab + 1))};
    model.vocab_.add_merged(m.left + m.right);
    model.merges_.push_back(std::move(m));
  }

  if (model.vocab_.size() != vocab_count) {
    fail(ErrorKind::format, "vocab count does not match merges");
  }
  for (int i = 0; i < vocab_count; ++i) {
    if (model.vocab_.token_display(i) != vocab_displays[static_cast<size_t>(i)]) {
      fail(ErrorKind::format, "vocab entry " + std::to_string(i) + " does not match merges");
    }
  }

  model.index_merges();
  return model;
}

}  // namespace mtfuse
