#include "mtfuse/significance.hpp"

#include <cmath>
#include <sstream>

#include "mtfuse/rng.hpp"

namespace mtfuse {

std::vector<uint32_t> bootstrap_indices(size_t num_sentences, int num_resamples, uint64_t seed) {
  SplitMix64 rng(SplitMix64::derive(seed, 0xB007u));
  std::vector<uint32_t> indices;
  indices.reserve(static_cast<size_t>(num_resamples) * num_sentences);
  for (int r = 0; r < num_resamples; ++r) {
    for (size_t k = 0; k < num_sentences; ++k) {
      indices.push_back(static_cast<uint32_t>(rng.next_below(num_sentences)));
    }
  }
  return indices;
}

SignificanceResult paired_bootstrap(const std::vector<SentenceStats>& stats_a,
                                    const std::vector<SentenceStats>& stats_b, int num_resamples,
                                    uint64_t seed) {
  if (stats_a.size() != stats_b.size()) {
    fail(ErrorKind::validation, "paired bootstrap needs equally long statistic lists: " +
                                    std::to_string(stats_a.size()) + " vs " +
                                    std::to_string(stats_b.size()));
  }
  if (stats_a.size() < 2) fail(ErrorKind::validation, "paired bootstrap needs at least 2 sentences");
  if (num_resamples < 100) fail(ErrorKind::validation, "need at least 100 resamples");

  const size_t n = stats_a.size();

  SentenceStats full_a, full_b;
  for (const auto& s : stats_a) full_a += s;
  for (const auto& s : stats_b) full_b += s;

  SignificanceResult result;
  result.num_resamples = num_resamples;
  result.seed = seed;
  result.observed_delta = bleu_from_stats(full_a).score - bleu_from_stats(full_b).score;
  const bool a_is_winner = result.observed_delta >= 0.0;

  std::vector<uint32_t> indices = bootstrap_indices(n, num_resamples, seed);
  int winner_not_winning = 0;
  for (int r = 0; r < num_resamples; ++r) {
    SentenceStats sum_a, sum_b;
    const uint32_t* block = indices.data() + static_cast<size_t>(r) * n;
    for (size_t k = 0; k < n; ++k) {
      sum_a += stats_a[block[k]];
      sum_b += stats_b[block[k]];
    }
    double delta = bleu_from_stats(sum_a).score - bleu_from_stats(sum_b).score;
    if (delta > 0.0) result.wins_a += 1;
    if (a_is_winner ? (delta <= 0.0) : (delta >= 0.0)) winner_not_winning += 1;
  }
  result.p_value = (static_cast<double>(winner_not_winning) + 1.0) /
                   (static_cast<double>(num_resamples) + 1.0);
  return result;
}

SignificanceVerdict significance_report(const SignificanceResult& result, double threshold) {
  SignificanceVerdict verdict;
  verdict.threshold = threshold;
  verdict.result = result;
  verdict.significant = result.p_value < threshold;
  return verdict;
}

std::string SignificanceVerdict::to_string() const {
  std::ostringstream out;
  out.precision(4);
  out << (significant ? "significant" : "not significant") << " (p = " << result.p_value
      << (significant ? " < " : " >= ") << threshold << "), delta = " << result.observed_delta
      << ", wins A = " << result.wins_a << "/" << result.num_resamples
      << ", seed = " << result.seed;
  return out.str();
}

}  // namespace mtfuse
