#include "doctest.h"

#include <cmath>

#include "mtfuse/cipher.hpp"
#include "mtfuse/fusion.hpp"
#include "mtfuse/transformer.hpp"
#include "test_util.hpp"

using namespace mtfuse;

namespace {

// vocab with language tags and a few named content tokens
struct MockWorld {
  Vocab vocab;
  TokenId tok_a, tok_b, tok_c;
  TokenSeq src, ctx1, ctx2;
  TokenSeq prefix0;  // BOS + target tag

  MockWorld() : vocab(Vocab::build({"aa", "bb", "cc", "dd"})) {
    tok_a = vocab.add_merged("ka");
    tok_b = vocab.add_merged("zo");
    tok_c = vocab.add_merged("mu");
    src = {vocab.tag("aa"), tok_a};
    ctx1 = {vocab.tag("bb"), tok_b};
    ctx2 = {vocab.tag("cc"), tok_c};
    prefix0 = {vocab.bos(), vocab.tag("dd")};
  }

  // valid log-distribution with chosen values pinned at chosen tokens; the
  // remaining mass is spread uniformly
  std::vector<float> dist(std::vector<std::pair<TokenId, double>> pinned) const {
    double used = 0.0;
    for (auto& [token, lp] : pinned) used += std::exp(lp);
    REQUIRE(used < 1.0);
    int v = vocab.size();
    double rest = std::log((1.0 - used) / (v - static_cast<int>(pinned.size())));
    std::vector<float> out(static_cast<size_t>(v), static_cast<float>(rest));
    for (auto& [token, lp] : pinned) out[static_cast<size_t>(token)] = static_cast<float>(lp);
    return out;
  }
};

FusionRequest request_of(const MockWorld& world, std::vector<TokenSeq> contexts,
                         FusionWeights weights) {
  FusionRequest request;
  request.primary = world.src;
  request.contexts = std::move(contexts);
  request.weights = std::move(weights);
  request.target_language = "dd";
  return request;
}

}  // namespace

TEST_CASE("no contexts with unit weight collapses to the model distribution") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_a, -0.7}}));

  auto direct = mock.next_token_logprobs(world.src, world.prefix0);
  auto fused = fused_step_logprobs(mock, request_of(world, {}, {1.0f, {}}), world.prefix0);
  REQUIRE(fused.size() == direct.size());
  for (size_t i = 0; i < fused.size(); ++i) {
    CHECK(fused[i] == static_cast<double>(direct[i]));
  }
}

TEST_CASE("two knowns sum: -1 plus -2 is exactly -3") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_a, -1.0}}));
  mock.set_logprobs(world.ctx1, world.prefix0, world.dist({{world.tok_a, -2.0}}));

  auto fused = fused_step_logprobs(
      mock, request_of(world, {world.ctx1}, {1.0f, {1.0f}}), world.prefix0);
  CHECK(fused[static_cast<size_t>(world.tok_a)] == -3.0);
}

TEST_CASE("three sources: equal weights give -4.5, primary-only gives -0.5") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_a, -0.5}}));
  mock.set_logprobs(world.ctx1, world.prefix0, world.dist({{world.tok_a, -1.5}}));
  mock.set_logprobs(world.ctx2, world.prefix0, world.dist({{world.tok_a, -2.5}}));

  auto equal = fused_step_logprobs(
      mock, request_of(world, {world.ctx1, world.ctx2}, {1.0f, {1.0f, 1.0f}}), world.prefix0);
  CHECK(equal[static_cast<size_t>(world.tok_a)] == -4.5);

  auto primary_only = fused_step_logprobs(
      mock, request_of(world, {world.ctx1, world.ctx2}, {1.0f, {0.0f, 0.0f}}), world.prefix0);
  CHECK(primary_only[static_cast<size_t>(world.tok_a)] == -0.5);
}

TEST_CASE("weight count mismatch is a config error") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  try {
    fused_step_logprobs(mock, request_of(world, {world.ctx1}, {1.0f, {1.0f, 1.0f}}),
                        world.prefix0);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("weight linearity: doubling every lambda doubles the scores") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_a, -0.9}}));
  mock.set_logprobs(world.ctx1, world.prefix0, world.dist({{world.tok_b, -1.1}}));
  mock.set_logprobs(world.ctx2, world.prefix0, world.dist({{world.tok_c, -0.4}}));

  auto once = fused_step_logprobs(
      mock, request_of(world, {world.ctx1, world.ctx2}, {0.5f, {1.5f, 0.25f}}), world.prefix0);
  auto twice = fused_step_logprobs(
      mock, request_of(world, {world.ctx1, world.ctx2}, {1.0f, {3.0f, 0.5f}}), world.prefix0);
  for (size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == 2.0 * once[i]);
}

TEST_CASE("context permutation invariance under equal weights") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_a, -0.9}}));
  mock.set_logprobs(world.ctx1, world.prefix0, world.dist({{world.tok_b, -1.1}}));
  mock.set_logprobs(world.ctx2, world.prefix0, world.dist({{world.tok_c, -0.4}}));

  auto forward = fused_step_logprobs(
      mock, request_of(world, {world.ctx1, world.ctx2}, {1.0f, {1.0f, 1.0f}}), world.prefix0);
  auto swapped = fused_step_logprobs(
      mock, request_of(world, {world.ctx2, world.ctx1}, {1.0f, {1.0f, 1.0f}}), world.prefix0);
  for (size_t i = 0; i < forward.size(); ++i) CHECK(forward[i] == swapped[i]);

  BeamConfig beam{2, 6, 0.0};
  auto ranked_fwd =
      beam_search_fused(mock, request_of(world, {world.ctx1, world.ctx2}, {1.0f, {1.0f, 1.0f}}),
                        beam);
  auto ranked_swp =
      beam_search_fused(mock, request_of(world, {world.ctx2, world.ctx1}, {1.0f, {1.0f, 1.0f}}),
                        beam);
  REQUIRE(ranked_fwd.size() == ranked_swp.size());
  for (size_t i = 0; i < ranked_fwd.size(); ++i) {
    CHECK(ranked_fwd[i].tokens == ranked_swp[i].tokens);
    CHECK(ranked_fwd[i].score == ranked_swp[i].score);
  }
}

TEST_CASE("beam of one equals greedy argmax decoding") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_b, -0.2}}));
  TokenSeq after_b = world.prefix0;
  after_b.push_back(world.tok_b);
  mock.set_logprobs(world.src, after_b, world.dist({{world.vocab.eos(), -0.1}}));

  // greedy by hand
  TokenSeq greedy;
  TokenSeq prefix = world.prefix0;
  for (int step = 0; step < 6; ++step) {
    auto lp = mock.next_token_logprobs(world.src, prefix);
    size_t argmax = 0;
    for (size_t v = 1; v < lp.size(); ++v) {
      if (lp[v] > lp[argmax]) argmax = v;
    }
    greedy.push_back(static_cast<TokenId>(argmax));
    prefix.push_back(static_cast<TokenId>(argmax));
    if (static_cast<TokenId>(argmax) == world.vocab.eos()) break;
  }

  auto ranked = decode_baseline(mock, world.src, "dd", {1, 6, 0.0});
  REQUIRE(!ranked.empty());
  CHECK(ranked[0].tokens == greedy);
  CHECK(ranked[0].finished);
  CHECK(ranked[0].tokens == TokenSeq{world.tok_b, world.vocab.eos()});
}

TEST_CASE("zero context weights reproduce the baseline exactly") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.tok_a, -0.4}}));
  mock.set_logprobs(world.ctx1, world.prefix0, world.dist({{world.tok_b, -0.1}}));
  TokenSeq after_a = world.prefix0;
  after_a.push_back(world.tok_a);
  mock.set_logprobs(world.src, after_a, world.dist({{world.vocab.eos(), -0.05}}));

  BeamConfig beam{3, 5, 0.0};
  auto baseline = decode_baseline(mock, world.src, "dd", beam);
  auto fused =
      beam_search_fused(mock, request_of(world, {world.ctx1}, {1.0f, {0.0f}}), beam);
  REQUIRE(baseline.size() == fused.size());
  for (size_t i = 0; i < baseline.size(); ++i) {
    CHECK(baseline[i].tokens == fused[i].tokens);
    CHECK(std::abs(baseline[i].score - fused[i].score) < 1e-6);
  }
}

TEST_CASE("context disambiguates a designed tie") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  REQUIRE(world.tok_a < world.tok_b);  // lexicographic tie-break favours tok_a

  // primary alone ties tok_a and tok_b; the context prefers tok_b
  mock.set_logprobs(world.src, world.prefix0,
                    world.dist({{world.tok_a, -0.7}, {world.tok_b, -0.7}}));
  mock.set_logprobs(world.ctx1, world.prefix0,
                    world.dist({{world.tok_a, -3.0}, {world.tok_b, -0.2}}));
  for (TokenId t : {world.tok_a, world.tok_b}) {
    TokenSeq after = world.prefix0;
    after.push_back(t);
    mock.set_logprobs(world.src, after, world.dist({{world.vocab.eos(), -0.1}}));
    mock.set_logprobs(world.ctx1, after, world.dist({{world.vocab.eos(), -0.1}}));
  }

  BeamConfig beam{2, 4, 0.0};
  auto baseline = decode_baseline(mock, world.src, "dd", beam);
  auto fused = beam_search_fused(mock, request_of(world, {world.ctx1}, {1.0f, {1.0f}}), beam);

  // hand computation: baseline tie resolves to tok_a; fusion adds
  // (-3.0 vs -0.2) and flips the argmax to tok_b
  CHECK(baseline[0].tokens == TokenSeq{world.tok_a, world.vocab.eos()});
  CHECK(fused[0].tokens == TokenSeq{world.tok_b, world.vocab.eos()});
  CHECK(baseline[0].tokens[0] != fused[0].tokens[0]);
  CHECK(baseline[0].tokens.size() == fused[0].tokens.size());
}

TEST_CASE("hypothesis scores equal the sum of step scores") {
  MockWorld world;
  MockTableModel mock(world.vocab);  // uniform fallback everywhere
  BeamConfig beam{3, 5, 0.0};
  auto ranked =
      beam_search_fused(mock, request_of(world, {world.ctx1}, {1.0f, {1.0f}}), beam);
  for (const auto& hyp : ranked) {
    double sum = 0.0;
    for (double s : hyp.step_scores) sum += s;
    CHECK(std::abs(hyp.score - sum) < 1e-9);
    CHECK(hyp.step_scores.size() == hyp.tokens.size());
    if (hyp.finished) CHECK(hyp.tokens.back() == world.vocab.eos());
  }
}

TEST_CASE("with alpha 0 and non-negative weights, cumulative scores decrease") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  BeamConfig beam{2, 6, 0.0};
  auto ranked =
      beam_search_fused(mock, request_of(world, {world.ctx1, world.ctx2}, {1.0f, {1.0f, 0.5f}}),
                        beam);
  for (const auto& hyp : ranked) {
    double running = 0.0;
    for (double s : hyp.step_scores) {
      CHECK(s <= 0.0);
      double next = running + s;
      CHECK(next <= running);
      running = next;
    }
  }
}

TEST_CASE("immediate EOS yields a one-token finished hypothesis") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  mock.set_logprobs(world.src, world.prefix0, world.dist({{world.vocab.eos(), -0.01}}));
  auto ranked = decode_baseline(mock, world.src, "dd", {2, 8, 0.0});
  CHECK(ranked[0].tokens == TokenSeq{world.vocab.eos()});
  CHECK(ranked[0].finished);
}

TEST_CASE("decoding is deterministic across repeated calls") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  BeamConfig beam{4, 6, 0.0};
  auto a = beam_search_fused(mock, request_of(world, {world.ctx1}, {1.0f, {1.0f}}), beam);
  auto b = beam_search_fused(mock, request_of(world, {world.ctx1}, {1.0f, {1.0f}}), beam);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tokens == b[i].tokens);
    CHECK(a[i].score == b[i].score);
  }
}

TEST_CASE("baseline equals fused decoding with no contexts across a corpus sweep") {
  // a random-parameter transformer over 100 synthetic sentences
  CipherSpec spec = make_cipher_spec({"aa", "bb"}, 25, 14);
  MultiParallelCorpus corpus = generate_cipher_corpus(spec, 100, 3, 6, 15);
  BpeModel bpe = BpeModel::train(corpus, 360);
  ModelConfig config;
  config.embed_dim = 16;
  config.num_heads = 2;
  config.ff_dim = 24;
  config.encoder_layers = 1;
  config.decoder_layers = 1;
  config.max_seq_len = 32;
  config.seed = 21;
  TransformerModel model(config, bpe.vocab());

  BeamConfig beam{2, 6, 0.0};
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    TokenSeq source = bpe.encode(corpus.cell(row, "aa"), "aa");
    auto baseline = decode_baseline(model, source, "bb", beam);

    FusionRequest request;
    request.primary = source;
    request.target_language = "bb";
    auto fused = beam_search_fused(model, request, beam);

    REQUIRE(!baseline.empty());
    CHECK(baseline[0].tokens == fused[0].tokens);
    CHECK(baseline[0].score == fused[0].score);
  }
}

TEST_CASE("length normalization reorders by normalized score") {
  MockWorld world;
  MockTableModel mock(world.vocab);
  // short finished hypothesis with worse raw score vs long one with better
  mock.set_logprobs(world.src, world.prefix0,
                    world.dist({{world.vocab.eos(), -2.2}, {world.tok_a, -0.3}}));
  TokenSeq after_a = world.prefix0;
  after_a.push_back(world.tok_a);
  mock.set_logprobs(world.src, after_a, world.dist({{world.vocab.eos(), -0.4}}));

  auto raw = decode_baseline(mock, world.src, "dd", {2, 4, 0.0});
  // raw: [a, EOS] scores -0.7, [EOS] scores -2.2
  CHECK(raw[0].tokens == TokenSeq{world.tok_a, world.vocab.eos()});

  auto normalized = decode_baseline(mock, world.src, "dd", {2, 4, 3.0});
  // heavy normalization: -2.2 / 1 vs -0.7 / 8 keeps the long one on top too;
  // but alpha rewards length here, so ranking must follow score / len^alpha
  for (size_t i = 0; i + 1 < normalized.size(); ++i) {
    double ni = normalized[i].score /
                std::pow(static_cast<double>(normalized[i].tokens.size()), 3.0);
    double nj = normalized[i + 1].score /
                std::pow(static_cast<double>(normalized[i + 1].tokens.size()), 3.0);
    CHECK(ni >= nj);
  }
}
