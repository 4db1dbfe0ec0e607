#include "mtfuse.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtfuse/cipher.hpp"
#include "mtfuse/experiments.hpp"
#include "mtfuse/io.hpp"
#include "mtfuse/llm_pipeline.hpp"
#include "mtfuse/metrics.hpp"
#include "mtfuse/significance.hpp"
#include "mtfuse/transformer.hpp"
#include "mtfuse/version.hpp"

using namespace mtfuse;

struct mtfuse_corpus {
  MultiParallelCorpus value;
};
struct mtfuse_bpe {
  BpeModel value;
};
struct mtfuse_model {
  std::unique_ptr<TranslationModel> value;
};

namespace {

thread_local std::string g_last_error;

mtfuse_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return MTFUSE_ERR_VALIDATION;
    case ErrorKind::config: return MTFUSE_ERR_CONFIG;
    case ErrorKind::data: return MTFUSE_ERR_DATA;
    case ErrorKind::format: return MTFUSE_ERR_FORMAT;
    case ErrorKind::length: return MTFUSE_ERR_LENGTH;
    case ErrorKind::vocab: return MTFUSE_ERR_VOCAB;
    case ErrorKind::io: return MTFUSE_ERR_IO;
    case ErrorKind::transport: return MTFUSE_ERR_TRANSPORT;
    case ErrorKind::internal: return MTFUSE_ERR_INTERNAL;
  }
  return MTFUSE_ERR_INTERNAL;
}

template <typename Fn>
mtfuse_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MTFUSE_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MTFUSE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MTFUSE_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(::operator new(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= csv.size()) {
    size_t comma = csv.find(',', start);
    if (comma == std::string::npos) {
      if (start < csv.size()) out.push_back(csv.substr(start));
      break;
    }
    out.push_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

void require(bool ok, const char* message) {
  if (!ok) fail(ErrorKind::validation, message);
}

}  // namespace

extern "C" {

const char* mtfuse_version(void) { return MTFUSE_VERSION; }

const char* mtfuse_last_error(void) { return g_last_error.c_str(); }

void mtfuse_string_free(char* s) { ::operator delete(s); }

/* ---- corpora ---------------------------------------------------------- */

mtfuse_status mtfuse_corpus_load(const char* path, mtfuse_corpus** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    auto handle = std::make_unique<mtfuse_corpus>();
    handle->value = load_corpus(path);
    *out = handle.release();
  });
}

mtfuse_status mtfuse_corpus_save(const mtfuse_corpus* corpus, const char* path) {
  return guarded([&] {
    require(corpus && path, "corpus and path are required");
    save_corpus(corpus->value, path);
  });
}

mtfuse_status mtfuse_cipher_generate(const char* languages_csv, const char* orders_csv,
                                     int concept_vocab, int rows, int len_min, int len_max,
                                     const char* noise_language, double noise_dropout,
                                     unsigned long long noise_seed, unsigned long long seed,
                                     mtfuse_corpus** out) {
  return guarded([&] {
    require(languages_csv && out, "languages and out are required");
    std::vector<WordOrder> orders;
    if (orders_csv && *orders_csv) {
      for (const auto& name : split_csv(orders_csv)) orders.push_back(word_order_from_string(name));
    }
    CipherSpec spec = make_cipher_spec(split_csv(languages_csv), concept_vocab, seed, orders);
    if (noise_language && *noise_language) {
      spec.noise = CipherNoise{noise_language, noise_dropout, noise_seed};
      spec.validate();
    }
    auto handle = std::make_unique<mtfuse_corpus>();
    handle->value = generate_cipher_corpus(spec, rows, len_min, len_max, seed);
    *out = handle.release();
  });
}

long long mtfuse_corpus_rows(const mtfuse_corpus* corpus) {
  return corpus ? static_cast<long long>(corpus->value.num_rows()) : 0;
}

mtfuse_status mtfuse_corpus_languages(const mtfuse_corpus* corpus, char** csv_out) {
  return guarded([&] {
    require(corpus && csv_out, "corpus and out are required");
    std::string csv;
    for (size_t i = 0; i < corpus->value.languages.size(); ++i) {
      if (i) csv += ',';
      csv += corpus->value.languages[i];
    }
    *csv_out = dup_string(csv);
  });
}

mtfuse_status mtfuse_corpus_cell(const mtfuse_corpus* corpus, long long row, const char* language,
                                 char** out) {
  return guarded([&] {
    require(corpus && language && out, "corpus, language and out are required");
    require(row >= 0, "row must be >= 0");
    *out = dup_string(corpus->value.cell(static_cast<size_t>(row), language));
  });
}

void mtfuse_corpus_free(mtfuse_corpus* corpus) { delete corpus; }

/* ---- tokenizer --------------------------------------------------------- */

mtfuse_status mtfuse_bpe_train(const mtfuse_corpus* corpus, int vocab_size, mtfuse_bpe** out) {
  return guarded([&] {
    require(corpus && out, "corpus and out are required");
    auto handle = std::make_unique<mtfuse_bpe>();
    handle->value = BpeModel::train(corpus->value, vocab_size);
    *out = handle.release();
  });
}

mtfuse_status mtfuse_bpe_save(const mtfuse_bpe* bpe, const char* path) {
  return guarded([&] {
    require(bpe && path, "bpe and path are required");
    bpe->value.save(path);
  });
}

mtfuse_status mtfuse_bpe_load(const char* path, mtfuse_bpe** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    auto handle = std::make_unique<mtfuse_bpe>();
    handle->value = BpeModel::load(path);
    *out = handle.release();
  });
}

void mtfuse_bpe_free(mtfuse_bpe* bpe) { delete bpe; }

/* ---- models ------------------------------------------------------------ */

mtfuse_status mtfuse_model_train(const mtfuse_model_config* config, const mtfuse_bpe* bpe,
                                 const mtfuse_corpus* corpus, const char* pairs_csv, int epochs,
                                 double learning_rate, double* heldout_accuracy_out,
                                 mtfuse_model** out) {
  return guarded([&] {
    require(bpe && corpus && pairs_csv && out, "bpe, corpus, pairs and out are required");
    ModelConfig cfg;
    if (config) {
      if (config->embed_dim > 0) cfg.embed_dim = config->embed_dim;
      if (config->num_heads > 0) cfg.num_heads = config->num_heads;
      if (config->ff_dim > 0) cfg.ff_dim = config->ff_dim;
      if (config->encoder_layers > 0) cfg.encoder_layers = config->encoder_layers;
      if (config->decoder_layers > 0) cfg.decoder_layers = config->decoder_layers;
      if (config->max_seq_len > 0) cfg.max_seq_len = config->max_seq_len;
      cfg.seed = config->seed;
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& token : split_csv(pairs_csv)) {
      size_t colon = token.find(':');
      if (colon == std::string::npos) {
        fail(ErrorKind::config, "bad pair (expected source:target): " + token);
      }
      pairs.emplace_back(token.substr(0, colon), token.substr(colon + 1));
    }
    TrainResult trained = train_model(cfg, bpe->value, corpus->value, pairs, epochs, learning_rate);
    if (heldout_accuracy_out) *heldout_accuracy_out = trained.heldout_accuracy;
    auto handle = std::make_unique<mtfuse_model>();
    handle->value = std::move(trained.model);
    *out = handle.release();
  });
}

mtfuse_status mtfuse_model_save(const mtfuse_model* model, const char* path) {
  return guarded([&] {
    require(model && model->value && path, "model and path are required");
    save_model(*model->value, path);
  });
}

mtfuse_status mtfuse_model_load(const char* path, mtfuse_model** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    auto handle = std::make_unique<mtfuse_model>();
    handle->value = load_model(path);
    *out = handle.release();
  });
}

void mtfuse_model_free(mtfuse_model* model) { delete model; }

/* ---- decoding ----------------------------------------------------------- */

mtfuse_status mtfuse_translate(const mtfuse_model* model, const mtfuse_bpe* bpe,
                               const char* source_text, const char* source_language,
                               const char* target_language, const char* const* context_texts,
                               const char* const* context_languages, int num_contexts,
                               double lambda0, const double* lambdas,
                               const mtfuse_beam_config* beam, char** text_out,
                               double* score_out) {
  return guarded([&] {
    require(model && model->value && bpe && source_text && source_language && target_language &&
                text_out,
            "model, bpe, source, languages and out are required");
    require(num_contexts >= 0, "num_contexts must be >= 0");
    require(num_contexts == 0 || (context_texts && context_languages),
            "context arrays are required when num_contexts > 0");

    std::vector<std::pair<std::string, std::string>> contexts;
    for (int i = 0; i < num_contexts; ++i) {
      require(context_texts[i] && context_languages[i], "context entries must be non-null");
      contexts.emplace_back(context_languages[i], context_texts[i]);
    }
    FusionWeights weights;
    weights.lambda0 = static_cast<float>(lambda0);
    for (int i = 0; i < num_contexts; ++i) {
      weights.lambdas.push_back(lambdas ? static_cast<float>(lambdas[i]) : 1.0f);
    }
    BeamConfig bc;
    if (beam) {
      if (beam->beam_size > 0) bc.beam_size = beam->beam_size;
      if (beam->max_length > 0) bc.max_length = beam->max_length;
      if (beam->alpha > 0) bc.alpha = beam->alpha;
    }
    TranslationOutput out = translate_sentence(*model->value, bpe->value, source_text,
                                               source_language, target_language, contexts,
                                               weights, bc);
    *text_out = dup_string(out.text);
    if (score_out) *score_out = out.best.score;
  });
}

/* ---- LLM pipeline ------------------------------------------------------- */

mtfuse_status mtfuse_llm_translate(const char* backend, const char* cache_path, const char* mode,
                                   const char* source_language, const char* target_language,
                                   const char* source_text, const char* const* context_languages,
                                   const char* const* context_texts, int num_contexts,
                                   int max_attempts, char** json_out) {
  return guarded([&] {
    require(backend && mode && source_language && target_language && source_text && json_out,
            "backend, mode, languages, source and out are required");
    require(num_contexts >= 0, "num_contexts must be >= 0");

    std::shared_ptr<ChatBackend> chat;
    std::string backend_name = backend;
    if (backend_name == "mock") {
      chat = std::make_shared<MockChatBackend>();
    } else if (backend_name == "http") {
      chat = std::make_shared<HttpChatBackend>(HttpChatBackend::from_environment());
    } else {
      fail(ErrorKind::config, "unknown backend: " + backend_name);
    }
    TranslationPipeline::Options options;
    if (max_attempts > 0) options.retry.max_attempts = max_attempts;
    auto cache = std::make_shared<ResponseCache>(cache_path ? cache_path : "");
    TranslationPipeline pipeline(chat, cache, options);

    TranslationJob job;
    job.mode = job_mode_from_string(mode);
    job.source_language = source_language;
    job.target_language = target_language;
    job.source_sentence = source_text;

    nlohmann::json record;
    record["mode"] = mode;
    record["intermediates"] = nlohmann::json::array();
    if (job.mode == JobMode::direct) {
      record["final"] = pipeline.translate_direct(job);
    } else if (job.mode == JobMode::contextual) {
      require(context_languages && context_texts, "contextual mode needs context arrays");
      for (int i = 0; i < num_contexts; ++i) {
        require(context_languages[i] && context_texts[i], "context entries must be non-null");
        job.contexts.emplace_back(context_languages[i], context_texts[i]);
      }
      record["final"] = pipeline.translate_contextual(job);
    } else {
      require(context_languages, "sequential mode needs context languages");
      for (int i = 0; i < num_contexts; ++i) {
        require(context_languages[i], "context entries must be non-null");
        job.context_languages.emplace_back(context_languages[i]);
      }
      auto seq = pipeline.translate_sequential(job);
      record["final"] = seq.final_translation;
      for (const auto& [language, text] : seq.intermediates) {
        record["intermediates"].push_back({language, text});
      }
    }
    *json_out = dup_string(record.dump());
  });
}

/* ---- evaluation --------------------------------------------------------- */

mtfuse_status mtfuse_evaluate_files(const char* hypothesis_path, const char* reference_path,
                                    mtfuse_bleu_report* out) {
  return guarded([&] {
    require(hypothesis_path && reference_path && out, "paths and out are required");
    BleuReport report =
        corpus_bleu(read_lines(hypothesis_path), read_lines(reference_path));
    out->score = report.score;
    for (int n = 0; n < 4; ++n) out->precisions[n] = report.precisions[n];
    out->brevity_penalty = report.brevity_penalty;
    out->hypothesis_length = report.hypothesis_length;
    out->reference_length = report.reference_length;
  });
}

mtfuse_status mtfuse_significance_files(const char* hypothesis_a_path,
                                        const char* hypothesis_b_path,
                                        const char* reference_path, long long num_resamples,
                                        unsigned long long seed, double threshold,
                                        mtfuse_significance_report* out) {
  return guarded([&] {
    require(hypothesis_a_path && hypothesis_b_path && reference_path && out,
            "paths and out are required");
    auto refs = read_lines(reference_path);
    auto stats_a = sentence_stats(read_lines(hypothesis_a_path), refs);
    auto stats_b = sentence_stats(read_lines(hypothesis_b_path), refs);
    SignificanceResult result =
        paired_bootstrap(stats_a, stats_b, static_cast<int>(num_resamples), seed);
    SignificanceVerdict verdict = significance_report(result, threshold);
    out->p_value = result.p_value;
    out->observed_delta = result.observed_delta;
    out->wins_a = result.wins_a;
    out->num_resamples = result.num_resamples;
    out->seed = result.seed;
    out->threshold = verdict.threshold;
    out->significant = verdict.significant ? 1 : 0;
  });
}

/* ---- experiments -------------------------------------------------------- */

mtfuse_status mtfuse_run_experiment(const char* spec_path, char** experiment_json_path_out) {
  return guarded([&] {
    require(spec_path, "spec path is required");
    ExperimentSpec spec = ExperimentSpec::from_json_file(spec_path);
    run_experiment(spec);
    if (experiment_json_path_out) {
      *experiment_json_path_out = dup_string(spec.output_dir + "/experiment.json");
    }
  });
}

mtfuse_status mtfuse_render_report(const char* const* experiment_jsons, int count,
                                   const char* format, const char* groups_spec, char** out) {
  return guarded([&] {
    require(experiment_jsons && count > 0 && format && out,
            "experiment files, format and out are required");
    std::vector<RunResult> results;
    for (int i = 0; i < count; ++i) {
      require(experiment_jsons[i], "experiment file entries must be non-null");
      results.push_back(load_run_result(experiment_jsons[i]));
    }
    std::vector<ResultGroup> groups;
    if (groups_spec && *groups_spec) {
      std::string spec_str = groups_spec;
      size_t start = 0;
      while (start < spec_str.size()) {
        size_t semi = spec_str.find(';', start);
        std::string part = spec_str.substr(
            start, semi == std::string::npos ? std::string::npos : semi - start);
        size_t eq = part.find('=');
        if (eq == std::string::npos) fail(ErrorKind::config, "bad group spec: " + part);
        groups.push_back({part.substr(0, eq), split_csv(part.substr(eq + 1))});
        if (semi == std::string::npos) break;
        start = semi + 1;
      }
    }
    *out = dup_string(render_table(aggregate(results, groups), format));
  });
}

} /* extern "C" */
