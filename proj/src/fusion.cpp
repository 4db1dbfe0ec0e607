#include "mtfuse/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace mtfuse {

namespace {

void check_request(const TranslationModel& model, const FusionRequest& request) {
  const Vocab& vocab = model.vocab();
  if (request.weights.lambdas.size() != request.contexts.size()) {
    fail(ErrorKind::config, "fusion weight count " + std::to_string(request.weights.lambdas.size()) +
                                " does not match context count " +
                                std::to_string(request.contexts.size()));
  }
  if (!std::isfinite(request.weights.lambda0)) fail(ErrorKind::config, "lambda0 is not finite");
  for (float l : request.weights.lambdas) {
    if (!std::isfinite(l)) fail(ErrorKind::config, "fusion weight is not finite");
  }
  vocab.tag(request.target_language);  // must exist
  if (request.primary.empty() || !vocab.is_language_tag(request.primary.front())) {
    fail(ErrorKind::validation, "primary source must begin with a language tag");
  }
  for (const auto& ctx : request.contexts) {
    if (ctx.empty() || !vocab.is_language_tag(ctx.front())) {
      fail(ErrorKind::validation, "context sequences must begin with their language tag");
    }
  }
}

}  // namespace

std::vector<double> fused_step_logprobs(const TranslationModel& model,
                                        const FusionRequest& request, const TokenSeq& prefix) {
  check_request(model, request);
  const size_t v = static_cast<size_t>(model.vocab().size());

  std::vector<double> fused(v, 0.0);
  if (request.weights.lambda0 != 0.0f) {
    std::vector<float> lp = model.next_token_logprobs(request.primary, prefix);
    for (size_t i = 0; i < v; ++i) {
      fused[i] = static_cast<double>(request.weights.lambda0) * static_cast<double>(lp[i]);
    }
  }

  // weighted context terms, summed smallest-first per vocabulary entry so
  // the result cannot depend on context order
  std::vector<std::vector<double>> terms;
  for (size_t c = 0; c < request.contexts.size(); ++c) {
    float lambda = request.weights.lambdas[c];
    if (lambda == 0.0f) continue;
    std::vector<float> lp = model.next_token_logprobs(request.contexts[c], prefix);
    auto& term = terms.emplace_back(v);
    for (size_t i = 0; i < v; ++i) {
      term[i] = static_cast<double>(lambda) * static_cast<double>(lp[i]);
    }
  }
  if (!terms.empty()) {
    std::vector<double> scratch(terms.size());
    for (size_t i = 0; i < v; ++i) {
      for (size_t t = 0; t < terms.size(); ++t) scratch[t] = terms[t][i];
      std::sort(scratch.begin(), scratch.end());
      double sum = 0.0;
      for (double x : scratch) sum += x;
      fused[i] += sum;
    }
  }
  return fused;
}

namespace {

// normalized score used for ranking: score / len^alpha (len = generated tokens)
double norm_score(double score, size_t length, double alpha) {
  if (alpha == 0.0 || length == 0) return score;
  return score / std::pow(static_cast<double>(length), alpha);
}

bool better(double score_a, const TokenSeq& tokens_a, double score_b, const TokenSeq& tokens_b) {
  if (score_a != score_b) return score_a > score_b;
  return tokens_a < tokens_b;  // deterministic tie-break
}

}  // namespace

std::vector<Hypothesis> beam_search_fused(const TranslationModel& model,
                                          const FusionRequest& request, const BeamConfig& beam) {
  check_request(model, request);
  if (beam.beam_size < 1) fail(ErrorKind::config, "beam size must be >= 1");
  if (beam.max_length < 1) fail(ErrorKind::config, "max output length must be >= 1");
  if (beam.alpha < 0.0) fail(ErrorKind::config, "length-normalization exponent must be >= 0");
  const Vocab& vocab = model.vocab();
  const int v = vocab.size();
  if (v <= 0) fail(ErrorKind::internal, "empty vocabulary");

  const TokenSeq prefix_head = {vocab.bos(), vocab.tag(request.target_language)};

  struct Candidate {
    Hypothesis hyp;
    double normalized;
  };

  std::vector<Hypothesis> beam_hyps = {Hypothesis{}};
  for (int step = 0; step < beam.max_length; ++step) {
    bool any_live = false;
    std::vector<Candidate> candidates;
    for (const Hypothesis& hyp : beam_hyps) {
      if (hyp.finished) {
        candidates.push_back({hyp, norm_score(hyp.score, hyp.tokens.size(), beam.alpha)});
        continue;
      }
      any_live = true;
      TokenSeq prefix = prefix_head;
      prefix.insert(prefix.end(), hyp.tokens.begin(), hyp.tokens.end());
      std::vector<double> fused = fused_step_logprobs(model, request, prefix);
      for (TokenId tok = 0; tok < v; ++tok) {
        Candidate cand;
        cand.hyp.tokens = hyp.tokens;
        cand.hyp.tokens.push_back(tok);
        cand.hyp.step_scores = hyp.step_scores;
        cand.hyp.step_scores.push_back(fused[static_cast<size_t>(tok)]);
        cand.hyp.score = hyp.score + fused[static_cast<size_t>(tok)];
        cand.hyp.finished = (tok == vocab.eos());
        cand.normalized = norm_score(cand.hyp.score, cand.hyp.tokens.size(), beam.alpha);
        candidates.push_back(std::move(cand));
      }
    }
    if (!any_live) break;

    size_t keep = std::min<size_t>(static_cast<size_t>(beam.beam_size), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        return better(a.normalized, a.hyp.tokens, b.normalized, b.hyp.tokens);
                      });
    beam_hyps.clear();
    for (size_t i = 0; i < keep; ++i) beam_hyps.push_back(std::move(candidates[i].hyp));

    bool all_finished = true;
    for (const auto& hyp : beam_hyps) all_finished &= hyp.finished;
    if (all_finished) break;
  }

  std::sort(beam_hyps.begin(), beam_hyps.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return better(norm_score(a.score, a.tokens.size(), beam.alpha), a.tokens,
                  norm_score(b.score, b.tokens.size(), beam.alpha), b.tokens);
  });
  return beam_hyps;
}

std::vector<Hypothesis> decode_baseline(const TranslationModel& model, const TokenSeq& source,
                                        const std::string& target_language,
                                        const BeamConfig& beam) {
  FusionRequest request;
  request.primary = source;
  request.target_language = target_language;
  return beam_search_fused(model, request, beam);
}

TranslationOutput translate_sentence(
    const TranslationModel& model, const BpeModel& bpe, const std::string& source_text,
    const std::string& source_language, const std::string& target_language,
    const std::vector<std::pair<std::string, std::string>>& contexts, const FusionWeights& weights,
    const BeamConfig& beam) {
  FusionRequest request;
  request.primary = bpe.encode(source_text, source_language);
  for (const auto& [language, text] : contexts) {
    request.contexts.push_back(bpe.encode(text, language));
  }
  request.weights = weights;
  if (request.weights.lambdas.empty() && !request.contexts.empty()) {
    request.weights = FusionWeights::equal(request.contexts.size());
  }
  request.target_language = target_language;

  std::vector<Hypothesis> ranked = beam_search_fused(model, request, beam);
  TranslationOutput out;
  out.best = ranked.front();
  out.text = bpe.decode(out.best.tokens);
  return out;
}

}  // namespace mtfuse
