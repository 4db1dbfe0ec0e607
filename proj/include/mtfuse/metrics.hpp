#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mtfuse/errors.hpp"

namespace mtfuse {

// Corpus BLEU report. Precisions are fractions in [0, 1]; when all are
// positive, score == brevity_penalty * exp(mean(log p_n)) * 100.
struct BleuReport {
  double score = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  long long hypothesis_length = 0;
  long long reference_length = 0;
};

// Per-sentence sufficient statistics: clipped n-gram matches, n-gram totals
// and lengths. Summing these over any multiset of sentences reproduces the
// corpus computation exactly, which is what bootstrap resampling relies on.
struct SentenceStats {
  std::array<long long, 4> matches{};
  std::array<long long, 4> totals{};
  long long hyp_len = 0;
  long long ref_len = 0;

  SentenceStats& operator+=(const SentenceStats& other);
};

// The 13a scheme: unwrap a few HTML entities, isolate punctuation (periods
// and commas stay attached to digits), then split on whitespace.
std::vector<std::string> tokenize_13a(const std::string& text);

std::vector<SentenceStats> sentence_stats(const std::vector<std::string>& hypotheses,
                                          const std::vector<std::string>& references);

// BLEU from summed statistics: clipped precisions up to 4-grams, geometric
// mean, multiplicative brevity penalty exp(1 - ref/hyp) when hyp < ref, and
// exponential smoothing of zero match counts (each smoothed order n gets
// precision 1 / (2^k * total_n) with k counting smoothed orders so far).
// With effective_order, orders with no n-grams at all are dropped from the
// geometric mean instead of zeroing the score (used for sentence scores).
BleuReport bleu_from_stats(const SentenceStats& total, bool effective_order = false);

BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references);

// Smoothed single-sentence score (effective order), handy for inspection.
double sentence_bleu(const SentenceStats& stats);

// Pluggable scorer slot: reference-based metrics beyond BLEU (neural
// scorers, chrF, ...) can be registered behind this interface.
class ScorerInterface {
 public:
  virtual ~ScorerInterface() = default;
  virtual std::string name() const = 0;
  virtual double corpus_score(const std::vector<std::string>& hypotheses,
                              const std::vector<std::string>& references) const = 0;
  virtual std::vector<double> sentence_scores(const std::vector<std::string>& hypotheses,
                                              const std::vector<std::string>& references) const = 0;
};

class BleuScorer : public ScorerInterface {
 public:
  std::string name() const override { return "bleu"; }
  double corpus_score(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references) const override;
  std::vector<double> sentence_scores(const std::vector<std::string>& hypotheses,
                                      const std::vector<std::string>& references) const override;
};

// Registry lookup; only "bleu" is built in. ErrorKind::config on unknown names.
std::unique_ptr<ScorerInterface> make_scorer(const std::string& name);

}  // namespace mtfuse
