#include "doctest.h"

#include <filesystem>

#include "mtfuse/cipher.hpp"
#include "mtfuse/experiments.hpp"
#include "mtfuse/io.hpp"
#include "mtfuse/llm_pipeline.hpp"
#include "mtfuse/transformer.hpp"
#include "test_util.hpp"

using namespace mtfuse;
using nlohmann::json;

namespace {

struct NmtFixture {
  std::string corpus_path, model_path, bpe_path;

  NmtFixture() {
    static int counter = 0;
    std::string stem = "exp-nmt-" + std::to_string(counter++);
    CipherSpec spec = make_cipher_spec({"aa", "bb", "cc"}, 15, 5);
    MultiParallelCorpus corpus = generate_cipher_corpus(spec, 8, 3, 5, 7);
    corpus_path = testutil::tmp_path(stem + ".tsv");
    save_corpus(corpus, corpus_path);

    BpeModel bpe = BpeModel::train(corpus, 360);
    bpe_path = testutil::tmp_path(stem + ".bpe");
    bpe.save(bpe_path);

    ModelConfig config;
    config.embed_dim = 16;
    config.num_heads = 2;
    config.ff_dim = 24;
    config.encoder_layers = 1;
    config.decoder_layers = 1;
    config.max_seq_len = 32;
    config.seed = 9;
    TransformerModel model(config, bpe.vocab());
    model_path = testutil::tmp_path(stem + ".ckpt");
    save_model(model, model_path);
  }

  ExperimentSpec spec(const std::string& name) const {
    ExperimentSpec spec;
    spec.name = name;
    spec.track = "nmt";
    spec.corpus_path = corpus_path;
    spec.source_language = "aa";
    spec.target_language = "cc";
    spec.context_sets = {{}, {"bb"}};
    spec.model_path = model_path;
    spec.bpe_path = bpe_path;
    spec.beam = {2, 8, 0.0};
    spec.significance_pairs = {{"ctx-bb", "baseline"}};
    spec.num_resamples = 100;
    spec.seed = 4;
    spec.output_dir = testutil::tmp_path("runs-" + name);
    return spec;
  }
};

RunResult fake_result(const std::string& name, const std::vector<std::string>& run_names,
                      const std::vector<double>& bleus) {
  RunResult result;
  result.spec_name = name;
  for (size_t i = 0; i < run_names.size(); ++i) {
    RunOutput run;
    run.name = run_names[i];
    run.metric_scores["bleu"] = bleus[i];
    run.bleu.score = bleus[i];
    result.runs.push_back(std::move(run));
  }
  return result;
}

}  // namespace

TEST_CASE("run names") {
  CHECK(ExperimentSpec::run_name({}) == "baseline");
  CHECK(ExperimentSpec::run_name({"bb"}) == "ctx-bb");
  CHECK(ExperimentSpec::run_name({"bb", "cc"}) == "ctx-bb+cc");
}

TEST_CASE("spec JSON round-trip") {
  NmtFixture fixture;
  ExperimentSpec spec = fixture.spec("roundtrip");
  std::string path = testutil::tmp_path("spec-roundtrip.json");
  write_text_file(path, spec.to_json().dump(2));
  ExperimentSpec loaded = ExperimentSpec::from_json_file(path);
  CHECK(loaded.name == spec.name);
  CHECK(loaded.track == spec.track);
  CHECK(loaded.context_sets == spec.context_sets);
  CHECK(loaded.significance_pairs == spec.significance_pairs);
  CHECK(loaded.beam.beam_size == spec.beam.beam_size);
  CHECK(loaded.output_dir == spec.output_dir);
}

TEST_CASE("fail-fast: invalid specs are rejected before any output appears") {
  NmtFixture fixture;

  ExperimentSpec bad = fixture.spec("missing-corpus");
  bad.corpus_path = testutil::tmp_path("does-not-exist.tsv");
  CHECK_THROWS_AS(run_experiment(bad), Error);
  CHECK_FALSE(file_exists(bad.output_dir + "/experiment.json"));

  bad = fixture.spec("missing-context-language");
  bad.context_sets = {{}, {"zz"}};
  try {
    run_experiment(bad);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  CHECK_FALSE(file_exists(bad.output_dir + "/experiment.json"));

  bad = fixture.spec("bad-pair");
  bad.significance_pairs = {{"ctx-zz", "baseline"}};
  CHECK_THROWS_AS(run_experiment(bad), Error);

  bad = fixture.spec("bad-metric");
  bad.metrics = {"bleu", "comet"};
  CHECK_THROWS_AS(run_experiment(bad), Error);

  bad = fixture.spec("bad-weights");
  bad.weights = {{1.0, {0.5, 0.5}}};  // does not match either context set
  CHECK_THROWS_AS(run_experiment(bad), Error);
}

TEST_CASE("nmt experiment produces outputs, reports and significance") {
  NmtFixture fixture;
  ExperimentSpec spec = fixture.spec("basic");
  RunResult result = run_experiment(spec);

  REQUIRE(result.runs.size() == 2);
  CHECK(result.runs[0].name == "baseline");
  CHECK(result.runs[1].name == "ctx-bb");
  MultiParallelCorpus corpus = load_corpus(fixture.corpus_path);
  for (const auto& run : result.runs) {
    CHECK(run.outputs.size() == corpus.num_rows());
    CHECK(run.metric_scores.count("bleu") == 1);
    CHECK(run.stats.size() == corpus.num_rows());
  }
  REQUIRE(result.significance.size() == 1);
  CHECK(result.significance[0].run_a == "ctx-bb");
  CHECK(result.significance[0].verdict.result.num_resamples == 100);

  CHECK(file_exists(spec.output_dir + "/experiment.json"));
  CHECK(file_exists(spec.output_dir + "/baseline/outputs.jsonl"));
  CHECK(file_exists(spec.output_dir + "/baseline/report.json"));
  CHECK(file_exists(spec.output_dir + "/ctx-bb/outputs.jsonl"));
  CHECK(file_exists(spec.output_dir + "/journal.jsonl"));

  // persisted result loads back with the same scores
  RunResult loaded = load_run_result(spec.output_dir + "/experiment.json");
  CHECK(loaded.spec_name == result.spec_name);
  REQUIRE(loaded.runs.size() == 2);
  CHECK(loaded.runs[0].metric_scores.at("bleu") == result.runs[0].metric_scores.at("bleu"));
  CHECK(loaded.significance.size() == 1);
  CHECK(loaded.significance[0].verdict.result.p_value ==
        result.significance[0].verdict.result.p_value);
}

TEST_CASE("rerunning an identical spec reuses the journal and changes nothing") {
  NmtFixture fixture;
  ExperimentSpec spec = fixture.spec("rerun");
  RunResult first = run_experiment(spec);
  auto journal_size = read_lines(spec.output_dir + "/journal.jsonl").size();
  std::string outputs_before = read_text_file(spec.output_dir + "/baseline/outputs.jsonl");

  RunResult second = run_experiment(spec);
  CHECK(read_lines(spec.output_dir + "/journal.jsonl").size() == journal_size);
  CHECK(read_text_file(spec.output_dir + "/baseline/outputs.jsonl") == outputs_before);
  REQUIRE(first.runs.size() == second.runs.size());
  for (size_t i = 0; i < first.runs.size(); ++i) {
    CHECK(first.runs[i].outputs == second.runs[i].outputs);
    CHECK(first.runs[i].metric_scores.at("bleu") == second.runs[i].metric_scores.at("bleu"));
  }
  CHECK(first.significance[0].verdict.result.p_value ==
        second.significance[0].verdict.result.p_value);
}

TEST_CASE("a journal from a different spec is discarded") {
  NmtFixture fixture;
  ExperimentSpec spec = fixture.spec("fresh");
  make_directories(spec.output_dir);
  write_text_file(spec.output_dir + "/journal.jsonl",
                  "{\"config_digest\":\"something-else\"}\n"
                  "{\"run\":\"baseline\",\"row\":0,\"output\":\"stale\"}\n");
  RunResult result = run_experiment(spec);
  for (const auto& output : result.runs[0].outputs) CHECK(output != "stale");
}

TEST_CASE("llm direct mode returns the mock's canned responses row-for-row") {
  CipherSpec cipher = make_cipher_spec({"aa", "cc"}, 12, 3);
  MultiParallelCorpus corpus = generate_cipher_corpus(cipher, 5, 3, 4, 11);
  std::string corpus_path = testutil::tmp_path("llm-corpus.tsv");
  save_corpus(corpus, corpus_path);

  // canned response per row, keyed by the exact rendered prompt
  std::string canned_path = testutil::tmp_path("canned.jsonl");
  std::string canned;
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    json rec = {{"prompt", render_prompt("aa", "cc", corpus.cell(row, "aa"), {})},
                {"response", "canned-" + std::to_string(row)}};
    canned += rec.dump();
    canned += '\n';
  }
  write_text_file(canned_path, canned);

  ExperimentSpec spec;
  spec.name = "llm-direct";
  spec.track = "llm";
  spec.mode = "direct";
  spec.backend = "mock";
  spec.mock_responses_path = canned_path;
  spec.corpus_path = corpus_path;
  spec.source_language = "aa";
  spec.target_language = "cc";
  spec.context_sets = {{}};
  spec.output_dir = testutil::tmp_path("runs-llm-direct");
  spec.parallelism = 3;

  RunResult result = run_experiment(spec);
  REQUIRE(result.runs.size() == 1);
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    CHECK(result.runs[0].outputs[row] == "canned-" + std::to_string(row));
  }
}

TEST_CASE("llm sequential mode records intermediates per row") {
  CipherSpec cipher = make_cipher_spec({"aa", "cc"}, 12, 3);
  MultiParallelCorpus corpus = generate_cipher_corpus(cipher, 4, 3, 4, 19);
  std::string corpus_path = testutil::tmp_path("llm-seq-corpus.tsv");
  save_corpus(corpus, corpus_path);

  ExperimentSpec spec;
  spec.name = "llm-seq";
  spec.track = "llm";
  spec.mode = "sequential";
  spec.backend = "mock";
  spec.corpus_path = corpus_path;
  spec.source_language = "aa";
  spec.target_language = "cc";
  spec.context_sets = {{"es"}};  // generated, need not exist in the corpus
  spec.cache_path = testutil::tmp_path("llm-seq-cache.jsonl");
  spec.output_dir = testutil::tmp_path("runs-llm-seq");

  RunResult result = run_experiment(spec);
  REQUIRE(result.runs.size() == 1);
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    REQUIRE(result.runs[0].intermediates[row].size() == 1);
    CHECK(result.runs[0].intermediates[row][0].first == "Spanish");
    // echo mock: the intermediate is the source sentence itself
    CHECK(result.runs[0].intermediates[row][0].second == corpus.cell(row, "aa"));
  }
  // outputs.jsonl carries the intermediates for audit
  auto lines = read_lines(spec.output_dir + "/ctx-es/outputs.jsonl");
  REQUIRE(lines.size() == corpus.num_rows());
  CHECK(lines[0].find("intermediates") != std::string::npos);
}

TEST_CASE("direct mode rejects non-empty context sets") {
  NmtFixture fixture;
  ExperimentSpec spec = fixture.spec("bad-direct");
  spec.track = "llm";
  spec.mode = "direct";
  spec.backend = "mock";
  spec.context_sets = {{"bb"}};
  CHECK_THROWS_AS(run_experiment(spec), Error);
}

TEST_CASE("aggregate: group of one equals the member") {
  auto result = fake_result("solo", {"baseline"}, {42.5});
  ResultTable table = aggregate({result}, {{"G", {"solo"}}});
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].experiment == "G");
  CHECK(table.rows[0].metrics.at("bleu") == 42.5);
}

TEST_CASE("aggregate: 10/20/30 averages to 20 and ungrouped rows pass through") {
  std::vector<RunResult> results = {
      fake_result("a", {"baseline"}, {10.0}),
      fake_result("b", {"baseline"}, {20.0}),
      fake_result("c", {"baseline"}, {30.0}),
      fake_result("solo", {"baseline"}, {7.0}),
  };
  ResultTable table = aggregate(results, {{"AVG", {"a", "b", "c"}}});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].experiment == "AVG");
  CHECK(table.rows[0].metrics.at("bleu") == doctest::Approx(20.0));
  CHECK(table.rows[1].experiment == "solo");
}

TEST_CASE("published proprietary-average reproduces: mean of 58.25, 49.31, 54.00 prints 53.85") {
  std::vector<RunResult> results = {
      fake_result("prop-a", {"baseline"}, {58.25}),
      fake_result("prop-b", {"baseline"}, {49.31}),
      fake_result("prop-c", {"baseline"}, {54.00}),
  };
  ResultTable table = aggregate(results, {{"PROPRIETARY", {"prop-a", "prop-b", "prop-c"}}});
  std::string markdown = render_table(table, "markdown");
  CHECK(markdown.find("53.85") != std::string::npos);
  std::string tsv = render_table(table, "tsv");
  CHECK(tsv.find("53.85") != std::string::npos);
}

TEST_CASE("inconsistent metric sets are a validation error") {
  auto a = fake_result("a", {"baseline"}, {10.0});
  auto b = fake_result("b", {"baseline"}, {20.0});
  b.runs[0].metric_scores["chrf"] = 1.0;
  CHECK_THROWS_AS(aggregate({a, b}, {}), Error);
}

TEST_CASE("render formats agree on values") {
  std::vector<RunResult> results = {fake_result("exp", {"baseline", "ctx-bb"}, {12.345, 67.891})};
  ResultTable table = aggregate(results, {});
  std::string markdown = render_table(table, "markdown");
  std::string tsv = render_table(table, "tsv");
  for (const std::string value : {"12.35", "67.89"}) {  // 2 decimals, rounded
    CHECK(markdown.find(value) != std::string::npos);
    CHECK(tsv.find(value) != std::string::npos);
  }
  CHECK_THROWS_AS(render_table(table, "csv"), Error);
  CHECK_THROWS_AS(render_table(ResultTable{}, "tsv"), Error);
}

TEST_CASE("one-cell table renders header plus one row") {
  ResultTable table = aggregate({fake_result("one", {"baseline"}, {5.0})}, {});
  std::string tsv = render_table(table, "tsv");
  auto split_lines = [](const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start < s.size()) {
      size_t nl = s.find('\n', start);
      if (nl == std::string::npos) nl = s.size();
      out.push_back(s.substr(start, nl - start));
      start = nl + 1;
    }
    return out;
  };
  auto lines = split_lines(tsv);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "experiment\tcontext\tbleu");
  CHECK(lines[1] == "one\tbaseline\t5.00");
}
