#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtfuse/metrics.hpp"

namespace mtfuse {

struct SignificanceResult {
  double p_value = 1.0;
  int num_resamples = 0;
  double observed_delta = 0.0;  // corpus score of A minus corpus score of B
  int wins_a = 0;               // resamples where A strictly beats B
  uint64_t seed = 0;
};

struct SignificanceVerdict {
  bool significant = false;  // p_value < threshold, strict
  double threshold = 0.05;
  SignificanceResult result;
  std::string to_string() const;  // one-line human-readable verdict
};

// The resample index stream: num_resamples blocks of num_sentences indices
// drawn with replacement from one SplitMix64 stream. Exposed so tests can
// verify that both systems are driven by the same indices.
std::vector<uint32_t> bootstrap_indices(size_t num_sentences, int num_resamples, uint64_t seed);

// Paired bootstrap over per-sentence BLEU statistics. Each resample draws
// sentence indices with replacement, identically for both systems, and
// recomputes corpus BLEU from the resampled statistics. One-sided in the
// direction of the observed delta, with the add-one convention:
//   p = (#resamples where the observed winner does not strictly win + 1)
//       / (num_resamples + 1)
// so p is never 0 and self-comparison yields the maximum p = 1.
SignificanceResult paired_bootstrap(const std::vector<SentenceStats>& stats_a,
                                    const std::vector<SentenceStats>& stats_b, int num_resamples,
                                    uint64_t seed);

SignificanceVerdict significance_report(const SignificanceResult& result,
                                        double threshold = 0.05);

}  // namespace mtfuse
