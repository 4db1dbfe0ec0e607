#include "mtfuse/metrics.hpp"

#include <cmath>
#include <unordered_map>

namespace mtfuse {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// the punctuation class of the 13a scheme: space..& ( ) * + / :..@ [..` {..~
bool is_13a_punct(unsigned char c) {
  return (c >= 0x20 && c <= 0x26) || (c >= 0x28 && c <= 0x2B) || c == 0x2F ||
         (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
}

// whitespace for the final split, matching Unicode semantics: ASCII space
// characters, the C1 separators, and the Unicode space code points
bool is_split_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x1C: case 0x1D: case 0x1E: case 0x1F:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// decodes one UTF-8 code point; malformed bytes pass through as themselves
uint32_t next_codepoint(const std::string& s, size_t& i) {
  unsigned char b = static_cast<unsigned char>(s[i]);
  int extra = 0;
  uint32_t cp = b;
  if ((b & 0xE0) == 0xC0) {
    extra = 1;
    cp = b & 0x1F;
  } else if ((b & 0xF0) == 0xE0) {
    extra = 2;
    cp = b & 0x0F;
  } else if ((b & 0xF8) == 0xF0) {
    extra = 3;
    cp = b & 0x07;
  }
  if (extra > 0 && i + static_cast<size_t>(extra) < s.size()) {
    for (int k = 1; k <= extra; ++k) {
      unsigned char cont = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
      if ((cont & 0xC0) != 0x80) {
        ++i;
        return b;
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    i += static_cast<size_t>(extra) + 1;
    return cp;
  }
  ++i;
  return b;
}

}  // namespace

std::vector<std::string> tokenize_13a(const std::string& text) {
  std::string s = text;
  replace_all(s, "<skipped>", "");
  replace_all(s, "-\n", "");
  replace_all(s, "\n", " ");
  if (s.find('&') != std::string::npos) {
    replace_all(s, "&quot;", "\"");
    replace_all(s, "&amp;", "&");
    replace_all(s, "&lt;", "<");
    replace_all(s, "&gt;", ">");
  }
  s = " " + s + " ";

  // isolate punctuation
  std::string t;
  t.reserve(s.size() * 2);
  for (unsigned char c : s) {
    if (is_13a_punct(c)) {
      t += ' ';
      t += static_cast<char>(c);
      t += ' ';
    } else {
      t += static_cast<char>(c);
    }
  }

  // period/comma after a non-digit: "X." -> "X . "
  auto scan2 = [](const std::string& in, auto match, auto emit) {
    std::string out;
    out.reserve(in.size() * 2);
    size_t i = 0;
    while (i < in.size()) {
      if (i + 1 < in.size() && match(in[i], in[i + 1])) {
        emit(out, in[i], in[i + 1]);
        i += 2;
      } else {
        out += in[i];
        i += 1;
      }
    }
    return out;
  };
  t = scan2(
      t, [](char a, char b) { return !is_digit(a) && (b == '.' || b == ','); },
      [](std::string& out, char a, char b) {
        out += a;
        out += ' ';
        out += b;
        out += ' ';
      });
  // period/comma before a non-digit: ".X" -> " . X"
  t = scan2(
      t, [](char a, char b) { return (a == '.' || a == ',') && !is_digit(b); },
      [](std::string& out, char a, char b) {
        out += ' ';
        out += a;
        out += ' ';
        out += b;
      });
  // dash after a digit: "3-" -> "3 - "
  t = scan2(
      t, [](char a, char b) { return is_digit(a) && b == '-'; },
      [](std::string& out, char a, char b) {
        out += a;
        out += ' ';
        out += b;
        out += ' ';
      });

  // whitespace split
  std::vector<std::string> tokens;
  std::string current;
  size_t i = 0;
  while (i < t.size()) {
    size_t start = i;
    uint32_t cp = next_codepoint(t, i);
    if (is_split_space(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.append(t, start, i - start);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

SentenceStats& SentenceStats::operator+=(const SentenceStats& other) {
  for (int n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

namespace {

// n-grams keyed by '\x1f'-joined tokens (tokens never contain that byte:
// 0x1C..0x1F count as whitespace in the split)
std::unordered_map<std::string, long long> ngram_counts(const std::vector<std::string>& tokens,
                                                        int n) {
  std::unordered_map<std::string, long long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + static_cast<size_t>(k)];
    }
    counts[key] += 1;
  }
  return counts;
}

SentenceStats stats_for(const std::string& hyp, const std::string& ref) {
  std::vector<std::string> h = tokenize_13a(hyp);
  std::vector<std::string> r = tokenize_13a(ref);
  SentenceStats s;
  s.hyp_len = static_cast<long long>(h.size());
  s.ref_len = static_cast<long long>(r.size());
  for (int n = 1; n <= 4; ++n) {
    long long total = static_cast<long long>(h.size()) - n + 1;
    s.totals[n - 1] = total > 0 ? total : 0;
    if (s.totals[n - 1] == 0) continue;
    auto hc = ngram_counts(h, n);
    auto rc = ngram_counts(r, n);
    long long matched = 0;
    for (const auto& [gram, count] : hc) {
      auto it = rc.find(gram);
      if (it != rc.end()) matched += std::min(count, it->second);
    }
    s.matches[n - 1] = matched;
  }
  return s;
}

}  // namespace

std::vector<SentenceStats> sentence_stats(const std::vector<std::string>& hypotheses,
                                          const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size()) {
    fail(ErrorKind::validation, "hypothesis and reference counts differ: " +
                                    std::to_string(hypotheses.size()) + " vs " +
                                    std::to_string(references.size()));
  }
  if (hypotheses.empty()) fail(ErrorKind::validation, "nothing to score: empty sentence lists");
  std::vector<SentenceStats> out;
  out.reserve(hypotheses.size());
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    out.push_back(stats_for(hypotheses[i], references[i]));
  }
  return out;
}

BleuReport bleu_from_stats(const SentenceStats& total, bool effective_order) {
  BleuReport report;
  report.hypothesis_length = total.hyp_len;
  report.reference_length = total.ref_len;

  if (total.hyp_len >= total.ref_len) {
    report.brevity_penalty = 1.0;
  } else if (total.hyp_len > 0) {
    report.brevity_penalty =
        std::exp(1.0 - static_cast<double>(total.ref_len) / static_cast<double>(total.hyp_len));
  } else {
    report.brevity_penalty = 0.0;
  }

  double smooth = 1.0;
  int orders = 4;
  for (int n = 0; n < 4; ++n) {
    if (total.totals[n] == 0) {
      if (effective_order) orders = n;
      break;
    }
    if (total.matches[n] == 0) {
      smooth *= 2.0;
      report.precisions[n] = 1.0 / (smooth * static_cast<double>(total.totals[n]));
    } else {
      report.precisions[n] =
          static_cast<double>(total.matches[n]) / static_cast<double>(total.totals[n]);
    }
  }

  if (orders == 0) {
    report.score = 0.0;
    return report;
  }
  double log_sum = 0.0;
  for (int n = 0; n < orders; ++n) {
    if (report.precisions[n] == 0.0) {
      report.score = 0.0;
      return report;
    }
    log_sum += std::log(report.precisions[n]);
  }
  report.score = report.brevity_penalty * 100.0 * std::exp(log_sum / orders);
  return report;
}

BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references) {
  SentenceStats total;
  for (const auto& s : sentence_stats(hypotheses, references)) total += s;
  return bleu_from_stats(total);
}

double sentence_bleu(const SentenceStats& stats) {
  return bleu_from_stats(stats, /*effective_order=*/true).score;
}

double BleuScorer::corpus_score(const std::vector<std::string>& hypotheses,
                                const std::vector<std::string>& references) const {
  return corpus_bleu(hypotheses, references).score;
}

std::vector<double> BleuScorer::sentence_scores(const std::vector<std::string>& hypotheses,
                                                const std::vector<std::string>& references) const {
  std::vector<double> out;
  for (const auto& s : sentence_stats(hypotheses, references)) out.push_back(sentence_bleu(s));
  return out;
}

std::unique_ptr<ScorerInterface> make_scorer(const std::string& name) {
  if (name == "bleu") return std::make_unique<BleuScorer>();
  fail(ErrorKind::config, "unknown metric: " + name +
                              " (only 'bleu' is built in; neural metrics plug in behind "
                              "ScorerInterface)");
}

}  // namespace mtfuse
