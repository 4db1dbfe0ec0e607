#include "mtfuse/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "mtfuse/cipher.hpp"
#include "mtfuse/io.hpp"
#include "mtfuse/llm_pipeline.hpp"
#include "mtfuse/transformer.hpp"
#include "mtfuse/version.hpp"

namespace mtfuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// spec parsing

std::string ExperimentSpec::run_name(const std::vector<std::string>& context_set) {
  if (context_set.empty()) return "baseline";
  std::string name = "ctx-";
  for (size_t i = 0; i < context_set.size(); ++i) {
    if (i) name += '+';
    name += context_set[i];
  }
  return name;
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "experiment spec must be a JSON object");
  ExperimentSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.track = j.at("track").get<std::string>();
    spec.corpus_path = j.at("corpus").get<std::string>();
    spec.source_language = j.at("source_language").get<std::string>();
    spec.target_language = j.at("target_language").get<std::string>();
    spec.context_sets = j.at("context_sets").get<std::vector<std::vector<std::string>>>();

    spec.model_path = j.value("model", "");
    spec.bpe_path = j.value("bpe", "");
    if (j.contains("weights")) {
      const json& w = j["weights"];
      auto parse_one = [](const json& jw) {
        WeightsSpec ws;
        ws.lambda0 = jw.value("lambda0", 1.0);
        if (jw.contains("lambdas")) ws.lambdas = jw["lambdas"].get<std::vector<double>>();
        return ws;
      };
      if (w.is_array()) {
        for (const auto& jw : w) spec.weights.push_back(parse_one(jw));
      } else {
        spec.weights.push_back(parse_one(w));
      }
    }
    if (j.contains("beam")) {
      spec.beam.beam_size = j["beam"].value("size", spec.beam.beam_size);
      spec.beam.max_length = j["beam"].value("max_length", spec.beam.max_length);
      spec.beam.alpha = j["beam"].value("alpha", spec.beam.alpha);
    }

    spec.mode = j.value("mode", spec.mode);
    spec.backend = j.value("backend", spec.backend);
    spec.mock_responses_path = j.value("mock_responses", "");
    spec.cache_path = j.value("cache", "");
    spec.parallelism = j.value("parallelism", spec.parallelism);
    spec.max_attempts = j.value("max_attempts", spec.max_attempts);

    if (j.contains("metrics")) spec.metrics = j["metrics"].get<std::vector<std::string>>();
    if (j.contains("significance_pairs")) {
      for (const auto& p : j["significance_pairs"]) {
        spec.significance_pairs.emplace_back(p.at(0).get<std::string>(),
                                             p.at(1).get<std::string>());
      }
    }
    spec.num_resamples = j.value("resamples", spec.num_resamples);
    spec.significance_threshold = j.value("significance_threshold", spec.significance_threshold);
    spec.seed = j.value("seed", spec.seed);
    spec.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("bad experiment spec: ") + e.what());
  }
  return spec;
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(ErrorKind::config, "experiment spec is not valid JSON: " + path);
  return from_json(j);
}

json ExperimentSpec::to_json() const {
  json j;
  j["name"] = name;
  j["track"] = track;
  j["corpus"] = corpus_path;
  j["source_language"] = source_language;
  j["target_language"] = target_language;
  j["context_sets"] = context_sets;
  if (!model_path.empty()) j["model"] = model_path;
  if (!bpe_path.empty()) j["bpe"] = bpe_path;
  if (!weights.empty()) {
    json w = json::array();
    for (const auto& ws : weights) w.push_back({{"lambda0", ws.lambda0}, {"lambdas", ws.lambdas}});
    j["weights"] = w;
  }
  j["beam"] = {{"size", beam.beam_size}, {"max_length", beam.max_length}, {"alpha", beam.alpha}};
  if (track == "llm") {
    j["mode"] = mode;
    j["backend"] = backend;
    if (!mock_responses_path.empty()) j["mock_responses"] = mock_responses_path;
    if (!cache_path.empty()) j["cache"] = cache_path;
    j["parallelism"] = parallelism;
    j["max_attempts"] = max_attempts;
  }
  j["metrics"] = metrics;
  json pairs = json::array();
  for (const auto& [a, b] : significance_pairs) pairs.push_back({a, b});
  j["significance_pairs"] = pairs;
  j["resamples"] = num_resamples;
  j["significance_threshold"] = significance_threshold;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  return j;
}

// ---------------------------------------------------------------------------
// run_experiment

namespace {

std::string two_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void parallel_rows(size_t n, int threads, const std::function<void(size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int count = std::min<int>(threads, static_cast<int>(n));
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

json intermediates_to_json(const std::vector<std::pair<std::string, std::string>>& xs) {
  json out = json::array();
  for (const auto& [language, text] : xs) out.push_back({language, text});
  return out;
}

struct Journal {
  std::string path;
  // (run, row) -> journal record
  std::map<std::pair<std::string, size_t>, json> done;
  std::mutex mutex;

  void open(const std::string& journal_path, const std::string& config_digest) {
    path = journal_path;
    bool reusable = false;
    if (file_exists(path)) {
      auto lines = read_lines(path);
      if (!lines.empty()) {
        json head = json::parse(lines[0], nullptr, false);
        if (!head.is_discarded() && head.value("config_digest", "") == config_digest) {
          reusable = true;
          for (size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            json rec = json::parse(lines[i], nullptr, false);
            if (rec.is_discarded()) continue;  // torn final write of an aborted run
            done[{rec.value("run", ""), rec.value("row", size_t{0})}] = rec;
          }
        }
      }
    }
    if (!reusable) {
      write_text_file(path, json{{"config_digest", config_digest}}.dump() + "\n");
    }
  }

  const json* lookup(const std::string& run, size_t row) {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = done.find({run, row});
    return it == done.end() ? nullptr : &it->second;
  }

  void record(const std::string& run, size_t row, json rec) {
    rec["run"] = run;
    rec["row"] = row;
    std::lock_guard<std::mutex> lock(mutex);
    append_line(path, rec.dump());
    done[{run, row}] = std::move(rec);
  }
};

}  // namespace

RunResult run_experiment(const ExperimentSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();

  // ---- fail-fast validation: everything is resolved before translating ----
  if (spec.name.empty()) fail(ErrorKind::config, "experiment has no name");
  if (spec.track != "nmt" && spec.track != "llm") {
    fail(ErrorKind::config, "unknown track: " + spec.track + " (expected nmt or llm)");
  }
  if (spec.context_sets.empty()) fail(ErrorKind::config, "no context sets declared");
  if (spec.output_dir.empty()) fail(ErrorKind::config, "output_dir is required");

  MultiParallelCorpus corpus = load_corpus(spec.corpus_path);
  if (corpus.language_index(spec.source_language) < 0) {
    fail(ErrorKind::config, "source language not in corpus: " + spec.source_language);
  }
  if (corpus.language_index(spec.target_language) < 0) {
    fail(ErrorKind::config, "target language not in corpus: " + spec.target_language);
  }
  const bool contexts_from_corpus = spec.track == "nmt" || spec.mode == "contextual";
  for (const auto& set : spec.context_sets) {
    for (const auto& code : set) {
      if (contexts_from_corpus && corpus.language_index(code) < 0) {
        fail(ErrorKind::config, "context language not in corpus: " + code);
      }
    }
  }

  std::vector<std::string> run_names;
  for (const auto& set : spec.context_sets) {
    std::string name = ExperimentSpec::run_name(set);
    for (const auto& existing : run_names) {
      if (existing == name) fail(ErrorKind::config, "duplicate context set: " + name);
    }
    run_names.push_back(name);
  }
  for (const auto& [a, b] : spec.significance_pairs) {
    auto known = [&](const std::string& r) {
      for (const auto& name : run_names) {
        if (name == r) return true;
      }
      return false;
    };
    if (!known(a) || !known(b)) {
      fail(ErrorKind::config, "significance pair references unknown run: " + a + " vs " + b);
    }
  }
  for (const auto& metric : spec.metrics) make_scorer(metric);  // must all resolve

  // track-specific resources
  std::unique_ptr<TranslationModel> model;
  BpeModel bpe;
  std::vector<WeightsSpec> weights_per_set;
  std::shared_ptr<TranslationPipeline> pipeline;
  JobMode mode = JobMode::direct;

  if (spec.track == "nmt") {
    if (spec.model_path.empty() || spec.bpe_path.empty()) {
      fail(ErrorKind::config, "nmt track needs model and bpe paths");
    }
    model = load_model(spec.model_path);
    bpe = BpeModel::load(spec.bpe_path);
    for (const auto& code : {spec.source_language, spec.target_language}) {
      bpe.vocab().tag(code);  // throws ErrorKind::vocab when missing
    }
    if (spec.weights.empty()) {
      for (const auto& set : spec.context_sets) {
        WeightsSpec ws;
        ws.lambdas.assign(set.size(), 1.0);
        weights_per_set.push_back(ws);
      }
    } else if (spec.weights.size() == 1) {
      for (const auto& set : spec.context_sets) {
        WeightsSpec ws = spec.weights[0];
        if (ws.lambdas.empty()) ws.lambdas.assign(set.size(), 1.0);
        if (ws.lambdas.size() != set.size()) {
          fail(ErrorKind::config, "weights do not match context set size");
        }
        weights_per_set.push_back(ws);
      }
    } else if (spec.weights.size() == spec.context_sets.size()) {
      for (size_t i = 0; i < spec.weights.size(); ++i) {
        WeightsSpec ws = spec.weights[i];
        if (ws.lambdas.empty()) ws.lambdas.assign(spec.context_sets[i].size(), 1.0);
        if (ws.lambdas.size() != spec.context_sets[i].size()) {
          fail(ErrorKind::config, "weights do not match context set size");
        }
        weights_per_set.push_back(ws);
      }
    } else {
      fail(ErrorKind::config, "weights must be one entry or one per context set");
    }
  } else {
    mode = job_mode_from_string(spec.mode);
    if (mode == JobMode::direct) {
      for (const auto& set : spec.context_sets) {
        if (!set.empty()) fail(ErrorKind::config, "direct mode only admits the empty context set");
      }
    }
    std::shared_ptr<ChatBackend> backend;
    if (spec.backend == "mock") {
      auto mock = std::make_shared<MockChatBackend>();
      if (!spec.mock_responses_path.empty()) {
        for (const auto& line : read_lines(spec.mock_responses_path)) {
          if (line.empty()) continue;
          json rec = json::parse(line, nullptr, false);
          if (rec.is_discarded() || !rec.contains("prompt") || !rec.contains("response")) {
            fail(ErrorKind::config, "bad mock responses line: " + line);
          }
          mock->add_response(rec["prompt"].get<std::string>(),
                             rec["response"].get<std::string>());
        }
      }
      backend = mock;
    } else if (spec.backend == "http") {
      backend = std::make_shared<HttpChatBackend>(HttpChatBackend::from_environment());
    } else {
      fail(ErrorKind::config, "unknown backend: " + spec.backend + " (expected mock or http)");
    }
    TranslationPipeline::Options options;
    options.retry.max_attempts = spec.max_attempts;
    options.max_in_flight = std::max(1, spec.parallelism);
    auto cache = std::make_shared<ResponseCache>(spec.cache_path);
    pipeline = std::make_shared<TranslationPipeline>(backend, cache, options);
  }

  if (spec.num_resamples < 100 && !spec.significance_pairs.empty()) {
    fail(ErrorKind::config, "resamples must be >= 100");
  }
  if (spec.parallelism < 1) fail(ErrorKind::config, "parallelism must be >= 1");

  // ---- persistence scaffolding ----
  make_directories(spec.output_dir);
  RunResult result;
  result.spec_name = spec.name;
  result.toolkit_version = MTFUSE_VERSION;
  result.resolved_config = spec.to_json();

  Journal journal;
  journal.open(spec.output_dir + "/journal.jsonl",
               ResponseCache::digest("spec", result.resolved_config.dump(), {}));

  const std::vector<std::string> references = corpus.column(spec.target_language);
  const std::vector<std::string> sources = corpus.column(spec.source_language);
  const size_t rows = corpus.num_rows();

  // ---- translate every context set ----
  for (size_t set_index = 0; set_index < spec.context_sets.size(); ++set_index) {
    const auto& context_set = spec.context_sets[set_index];
    RunOutput run;
    run.name = run_names[set_index];
    run.context_set = context_set;
    run.outputs.assign(rows, "");
    run.intermediates.assign(rows, {});

    auto translate_row = [&](size_t row) {
      if (const json* rec = journal.lookup(run.name, row)) {
        run.outputs[row] = rec->value("output", "");
        if (rec->contains("intermediates")) {
          for (const auto& pair : (*rec)["intermediates"]) {
            run.intermediates[row].emplace_back(pair.at(0).get<std::string>(),
                                                pair.at(1).get<std::string>());
          }
        }
        return;
      }
      json rec;
      if (spec.track == "nmt") {
        std::vector<std::pair<std::string, std::string>> contexts;
        for (const auto& code : context_set) contexts.emplace_back(code, corpus.cell(row, code));
        FusionWeights fw;
        fw.lambda0 = static_cast<float>(weights_per_set[set_index].lambda0);
        for (double l : weights_per_set[set_index].lambdas) {
          fw.lambdas.push_back(static_cast<float>(l));
        }
        TranslationOutput out =
            translate_sentence(*model, bpe, sources[row], spec.source_language,
                               spec.target_language, contexts, fw, spec.beam);
        run.outputs[row] = out.text;
        rec["output"] = out.text;
        rec["score"] = out.best.score;
      } else {
        TranslationJob job;
        job.mode = mode;
        job.source_language = language_display_name(spec.source_language);
        job.target_language = language_display_name(spec.target_language);
        job.source_sentence = sources[row];
        if (mode == JobMode::direct) {
          run.outputs[row] = pipeline->translate_direct(job);
        } else if (mode == JobMode::contextual) {
          for (const auto& code : context_set) {
            job.contexts.emplace_back(language_display_name(code), corpus.cell(row, code));
          }
          run.outputs[row] = pipeline->translate_contextual(job);
        } else {
          for (const auto& code : context_set) {
            job.context_languages.push_back(language_display_name(code));
          }
          auto seq = pipeline->translate_sequential(job);
          run.outputs[row] = seq.final_translation;
          run.intermediates[row] = seq.intermediates;
          rec["intermediates"] = intermediates_to_json(seq.intermediates);
        }
        rec["output"] = run.outputs[row];
      }
      journal.record(run.name, row, std::move(rec));
    };

    parallel_rows(rows, spec.parallelism, translate_row);

    // scoring
    run.stats = sentence_stats(run.outputs, references);
    SentenceStats total;
    for (const auto& s : run.stats) total += s;
    run.bleu = bleu_from_stats(total);
    for (const auto& metric : spec.metrics) {
      if (metric == "bleu") {
        run.metric_scores["bleu"] = run.bleu.score;
      } else {
        run.metric_scores[metric] = make_scorer(metric)->corpus_score(run.outputs, references);
      }
    }
    result.runs.push_back(std::move(run));
  }

  // ---- significance ----
  for (const auto& [name_a, name_b] : spec.significance_pairs) {
    const RunOutput* a = nullptr;
    const RunOutput* b = nullptr;
    for (const auto& run : result.runs) {
      if (run.name == name_a) a = &run;
      if (run.name == name_b) b = &run;
    }
    SignificancePairResult pair;
    pair.run_a = name_a;
    pair.run_b = name_b;
    pair.verdict = significance_report(
        paired_bootstrap(a->stats, b->stats, spec.num_resamples, spec.seed),
        spec.significance_threshold);
    result.significance.push_back(std::move(pair));
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // ---- persist ----
  for (const auto& run : result.runs) {
    std::string run_dir = spec.output_dir + "/" + run.name;
    make_directories(run_dir);
    std::string outputs_path = run_dir + "/outputs.jsonl";
    std::string buffer;
    for (size_t row = 0; row < run.outputs.size(); ++row) {
      json rec = {{"row", row},
                  {"source", sources[row]},
                  {"reference", references[row]},
                  {"output", run.outputs[row]}};
      if (!run.context_set.empty()) rec["contexts"] = run.context_set;
      if (!run.intermediates[row].empty()) {
        rec["intermediates"] = intermediates_to_json(run.intermediates[row]);
      }
      buffer += rec.dump();
      buffer += '\n';
    }
    write_text_file(outputs_path, buffer);

    json report;
    report["run"] = run.name;
    report["metrics"] = run.metric_scores;
    report["bleu_report"] = {{"score", run.bleu.score},
                             {"precisions", run.bleu.precisions},
                             {"brevity_penalty", run.bleu.brevity_penalty},
                             {"hypothesis_length", run.bleu.hypothesis_length},
                             {"reference_length", run.bleu.reference_length}};
    write_text_file(run_dir + "/report.json", report.dump(2) + "\n");
  }
  write_text_file(spec.output_dir + "/experiment.json", result.to_json().dump(2) + "\n");
  return result;
}

json RunResult::to_json() const {
  json j;
  j["toolkit_version"] = toolkit_version;
  j["spec_name"] = spec_name;
  j["wall_seconds"] = wall_seconds;
  j["resolved_config"] = resolved_config;
  j["runs"] = json::array();
  for (const auto& run : runs) {
    j["runs"].push_back({{"name", run.name},
                         {"context_set", run.context_set},
                         {"metrics", run.metric_scores},
                         {"num_outputs", run.outputs.size()},
                         {"bleu_report",
                          {{"score", run.bleu.score},
                           {"precisions", run.bleu.precisions},
                           {"brevity_penalty", run.bleu.brevity_penalty},
                           {"hypothesis_length", run.bleu.hypothesis_length},
                           {"reference_length", run.bleu.reference_length}}}});
  }
  j["significance"] = json::array();
  for (const auto& pair : significance) {
    j["significance"].push_back({{"run_a", pair.run_a},
                                 {"run_b", pair.run_b},
                                 {"p_value", pair.verdict.result.p_value},
                                 {"observed_delta", pair.verdict.result.observed_delta},
                                 {"wins_a", pair.verdict.result.wins_a},
                                 {"num_resamples", pair.verdict.result.num_resamples},
                                 {"seed", pair.verdict.result.seed},
                                 {"threshold", pair.verdict.threshold},
                                 {"significant", pair.verdict.significant},
                                 {"verdict", pair.verdict.to_string()}});
  }
  return j;
}

RunResult load_run_result(const std::string& experiment_json_path) {
  json j = json::parse(read_text_file(experiment_json_path), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::format, "not a run result: " + experiment_json_path);
  RunResult result;
  try {
    result.spec_name = j.at("spec_name").get<std::string>();
    result.toolkit_version = j.value("toolkit_version", "");
    result.wall_seconds = j.value("wall_seconds", 0.0);
    result.resolved_config = j.value("resolved_config", json::object());
    for (const auto& jr : j.at("runs")) {
      RunOutput run;
      run.name = jr.at("name").get<std::string>();
      run.context_set = jr.value("context_set", std::vector<std::string>{});
      run.metric_scores = jr.at("metrics").get<std::map<std::string, double>>();
      if (jr.contains("bleu_report")) {
        const auto& jb = jr["bleu_report"];
        run.bleu.score = jb.value("score", 0.0);
        run.bleu.brevity_penalty = jb.value("brevity_penalty", 1.0);
        run.bleu.hypothesis_length = jb.value("hypothesis_length", 0LL);
        run.bleu.reference_length = jb.value("reference_length", 0LL);
        if (jb.contains("precisions")) {
          auto p = jb["precisions"].get<std::vector<double>>();
          for (size_t n = 0; n < p.size() && n < 4; ++n) run.bleu.precisions[n] = p[n];
        }
      }
      result.runs.push_back(std::move(run));
    }
    if (j.contains("significance")) {
      for (const auto& jp : j["significance"]) {
        SignificancePairResult pair;
        pair.run_a = jp.at("run_a").get<std::string>();
        pair.run_b = jp.at("run_b").get<std::string>();
        pair.verdict.result.p_value = jp.value("p_value", 1.0);
        pair.verdict.result.observed_delta = jp.value("observed_delta", 0.0);
        pair.verdict.result.wins_a = jp.value("wins_a", 0);
        pair.verdict.result.num_resamples = jp.value("num_resamples", 0);
        pair.verdict.result.seed = jp.value("seed", 0ULL);
        pair.verdict.threshold = jp.value("threshold", 0.05);
        pair.verdict.significant = jp.value("significant", false);
        result.significance.push_back(std::move(pair));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("bad run result file: ") + e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------
// aggregation and rendering

ResultTable aggregate(const std::vector<RunResult>& results,
                      const std::vector<ResultGroup>& groups) {
  if (results.empty()) fail(ErrorKind::validation, "nothing to aggregate");

  // metric sets must agree
  std::vector<std::string> metric_columns;
  for (const auto& [metric, value] : results[0].runs.at(0).metric_scores) {
    metric_columns.push_back(metric);
  }
  for (const auto& result : results) {
    for (const auto& run : result.runs) {
      if (run.metric_scores.size() != metric_columns.size()) {
        fail(ErrorKind::validation, "inconsistent metric sets across results");
      }
      for (const auto& metric : metric_columns) {
        if (!run.metric_scores.count(metric)) {
          fail(ErrorKind::validation, "inconsistent metric sets across results");
        }
      }
    }
  }

  auto group_of = [&](const std::string& spec_name) -> const ResultGroup* {
    for (const auto& group : groups) {
      for (const auto& member : group.members) {
        if (member == spec_name) return &group;
      }
    }
    return nullptr;
  };
  auto find_result = [&](const std::string& spec_name) -> const RunResult* {
    for (const auto& result : results) {
      if (result.spec_name == spec_name) return &result;
    }
    return nullptr;
  };

  ResultTable table;
  table.metric_columns = metric_columns;
  std::vector<std::string> emitted_groups;

  for (const auto& result : results) {
    const ResultGroup* group = group_of(result.spec_name);
    if (!group) {
      for (const auto& run : result.runs) {
        table.rows.push_back({result.spec_name, run.name, run.metric_scores});
      }
      continue;
    }
    bool already = false;
    for (const auto& name : emitted_groups) already |= (name == group->name);
    if (already) continue;
    emitted_groups.push_back(group->name);

    std::vector<const RunResult*> members;
    for (const auto& member : group->members) {
      const RunResult* r = find_result(member);
      if (!r) fail(ErrorKind::validation, "group member not among results: " + member);
      members.push_back(r);
    }
    const RunResult* first = members[0];
    for (const auto& run : first->runs) {
      ResultRow row;
      row.experiment = group->name;
      row.context = run.name;
      for (const auto& metric : metric_columns) {
        double sum = 0.0;
        for (const RunResult* member : members) {
          const RunOutput* match = nullptr;
          for (const auto& mrun : member->runs) {
            if (mrun.name == run.name) match = &mrun;
          }
          if (!match) {
            fail(ErrorKind::validation,
                 "group member " + member->spec_name + " lacks run " + run.name);
          }
          sum += match->metric_scores.at(metric);
        }
        row.metrics[metric] = sum / static_cast<double>(members.size());
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string render_table(const ResultTable& table, const std::string& format) {
  if (table.rows.empty()) fail(ErrorKind::validation, "empty table");
  std::string out;
  if (format == "tsv") {
    out += "experiment\tcontext";
    for (const auto& metric : table.metric_columns) out += "\t" + metric;
    out += "\n";
    for (const auto& row : table.rows) {
      out += row.experiment + "\t" + row.context;
      for (const auto& metric : table.metric_columns) {
        out += "\t" + two_decimals(row.metrics.at(metric));
      }
      out += "\n";
    }
    return out;
  }
  if (format == "markdown") {
    out += "| experiment | context |";
    for (const auto& metric : table.metric_columns) out += " " + metric + " |";
    out += "\n|---|---|";
    for (size_t i = 0; i < table.metric_columns.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& row : table.rows) {
      out += "| " + row.experiment + " | " + row.context + " |";
      for (const auto& metric : table.metric_columns) {
        out += " " + two_decimals(row.metrics.at(metric)) + " |";
      }
      out += "\n";
    }
    return out;
  }
  fail(ErrorKind::config, "unknown table format: " + format + " (expected markdown or tsv)");
}

}  // namespace mtfuse
