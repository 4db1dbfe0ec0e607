#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtfuse/model.hpp"
#include "mtfuse/tokenizer.hpp"

namespace mtfuse {

// Fusion coefficients: lambda0 weighs the primary source, lambdas[i] weighs
// context i. All default to 1 (equal weights).
struct FusionWeights {
  float lambda0 = 1.0f;
  std::vector<float> lambdas;

  static FusionWeights equal(size_t num_contexts) {
    return {1.0f, std::vector<float>(num_contexts, 1.0f)};
  }
};

// One multi-source decode: primary source x, ordered context renderings
// z_1..z_n of the same content, fusion weights, and the target language that
// seeds the decoder prefix. Every sequence carries its own language tag.
struct FusionRequest {
  TokenSeq primary;
  std::vector<TokenSeq> contexts;
  FusionWeights weights;
  std::string target_language;
};

// Candidate target sequence with its fused score. tokens holds the generated
// ids only (no BOS, no target tag); a finished hypothesis ends with EOS.
// score always equals the sum of step_scores.
struct Hypothesis {
  TokenSeq tokens;
  double score = 0.0;
  std::vector<double> step_scores;
  bool finished = false;
};

struct BeamConfig {
  int beam_size = 4;
  int max_length = 48;   // generated tokens, EOS included
  double alpha = 0.0;    // length-normalization exponent, 0 disables
};

// Per-step fused scores over the vocabulary:
//   out[v] = lambda0 * logP(v | x, prefix) + sum_i lambda_i * logP(v | z_i, prefix)
// This is a score vector, not a normalized distribution, unless the weights
// collapse to (1, 0, ..., 0). Zero-weight terms are skipped entirely, so
// they can never perturb the result. Context terms are summed in value
// order, which makes the result invariant under context permutation.
std::vector<double> fused_step_logprobs(const TranslationModel& model,
                                        const FusionRequest& request, const TokenSeq& prefix);

// Multi-source beam search. Hypotheses are ranked by score / len^alpha;
// pruning ties break toward the lexicographically smaller token sequence,
// so decoding is fully deterministic. A hypothesis freezes once it emits
// EOS and keeps competing in the beam at its final normalized score.
std::vector<Hypothesis> beam_search_fused(const TranslationModel& model,
                                          const FusionRequest& request, const BeamConfig& beam);

// Single-source decoding: beam_search_fused with no contexts.
std::vector<Hypothesis> decode_baseline(const TranslationModel& model, const TokenSeq& source,
                                        const std::string& target_language,
                                        const BeamConfig& beam);

// Text-level convenience wrapper: encode, decode with optional contexts,
// detokenize the best hypothesis.
struct TranslationOutput {
  std::string text;
  Hypothesis best;
};
TranslationOutput translate_sentence(const TranslationModel& model, const BpeModel& bpe,
                                     const std::string& source_text,
                                     const std::string& source_language,
                                     const std::string& target_language,
                                     const std::vector<std::pair<std::string, std::string>>&
                                         contexts,  // (language, text)
                                     const FusionWeights& weights, const BeamConfig& beam);

}  // namespace mtfuse
