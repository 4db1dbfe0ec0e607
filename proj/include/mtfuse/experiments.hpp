#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mtfuse/fusion.hpp"
#include "mtfuse/metrics.hpp"
#include "mtfuse/significance.hpp"

namespace mtfuse {

struct WeightsSpec {
  double lambda0 = 1.0;
  std::vector<double> lambdas;
};

// One experiment: a corpus, a translation direction, and a list of context
// sets, each of which becomes one run ("baseline" for the empty set). JSON
// on disk; see README for the schema.
struct ExperimentSpec {
  std::string name;
  std::string track;  // "nmt" | "llm"
  std::string corpus_path;
  std::string source_language;
  std::string target_language;
  std::vector<std::vector<std::string>> context_sets;

  // nmt track
  std::string model_path;
  std::string bpe_path;
  std::vector<WeightsSpec> weights;  // empty = equal weights; 1 = broadcast
  BeamConfig beam;

  // llm track
  std::string mode = "direct";
  std::string backend = "mock";
  std::string mock_responses_path;  // optional JSONL of {"prompt", "response"}
  std::string cache_path;
  int parallelism = 1;
  int max_attempts = 3;

  // scoring
  std::vector<std::string> metrics = {"bleu"};
  std::vector<std::pair<std::string, std::string>> significance_pairs;
  int num_resamples = 1000;
  double significance_threshold = 0.05;
  uint64_t seed = 1;

  std::string output_dir;

  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec from_json_file(const std::string& path);
  nlohmann::json to_json() const;

  static std::string run_name(const std::vector<std::string>& context_set);
};

struct RunOutput {
  std::string name;
  std::vector<std::string> context_set;
  std::vector<std::string> outputs;
  // sequential mode: per row, the (language, text) intermediates in order
  std::vector<std::vector<std::pair<std::string, std::string>>> intermediates;
  std::map<std::string, double> metric_scores;
  BleuReport bleu;
  std::vector<SentenceStats> stats;
};

struct SignificancePairResult {
  std::string run_a;
  std::string run_b;
  SignificanceVerdict verdict;
};

struct RunResult {
  std::string spec_name;
  std::vector<RunOutput> runs;
  std::vector<SignificancePairResult> significance;
  double wall_seconds = 0.0;
  std::string toolkit_version;
  nlohmann::json resolved_config;

  nlohmann::json to_json() const;
};

// Validates the spec end to end (resources, languages, weights, metrics,
// declared pairs) before any translation starts, then runs every context
// set, scores it, runs the declared significance tests and persists
// everything under spec.output_dir. A journal of completed rows makes an
// aborted run resumable without repeating finished translations.
RunResult run_experiment(const ExperimentSpec& spec);

// Reads a persisted experiment.json back; enough to re-render tables
// without re-translation.
RunResult load_run_result(const std::string& experiment_json_path);

struct ResultGroup {
  std::string name;
  std::vector<std::string> members;  // spec names
};

struct ResultRow {
  std::string experiment;
  std::string context;
  std::map<std::string, double> metrics;
};

struct ResultTable {
  std::vector<std::string> metric_columns;
  std::vector<ResultRow> rows;
};

// Group members are averaged per (context, metric); ungrouped results pass
// through. Results must share metric sets (ErrorKind::validation otherwise).
ResultTable aggregate(const std::vector<RunResult>& results,
                      const std::vector<ResultGroup>& groups = {});

// format: "markdown" or "tsv"; scores rendered to 2 decimals, rows in spec
// order.
std::string render_table(const ResultTable& table, const std::string& format);

}  // namespace mtfuse
