/*
 * mtfuse C API: multi-source translation toolkit behind opaque handles and
 * status codes. Every function returns MTFUSE_OK or an error status; the
 * matching human-readable message is available per thread through
 * mtfuse_last_error(). Strings returned through char** out-parameters are
 * heap-allocated and must be released with mtfuse_string_free().
 */
#ifndef MTFUSE_H
#define MTFUSE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtfuse_status {
  MTFUSE_OK = 0,
  MTFUSE_ERR_VALIDATION = 1,
  MTFUSE_ERR_CONFIG = 2,
  MTFUSE_ERR_DATA = 3,
  MTFUSE_ERR_FORMAT = 4,
  MTFUSE_ERR_LENGTH = 5,
  MTFUSE_ERR_VOCAB = 6,
  MTFUSE_ERR_IO = 7,
  MTFUSE_ERR_TRANSPORT = 8,
  MTFUSE_ERR_INTERNAL = 9,
} mtfuse_status;

const char* mtfuse_version(void);
/* message of the last failing call on this thread; empty string if none */
const char* mtfuse_last_error(void);
void mtfuse_string_free(char* s);

/* ---- corpora ---------------------------------------------------------- */

typedef struct mtfuse_corpus mtfuse_corpus;

mtfuse_status mtfuse_corpus_load(const char* path, mtfuse_corpus** out);
mtfuse_status mtfuse_corpus_save(const mtfuse_corpus* corpus, const char* path);
/* languages_csv: e.g. "aa,bb,cc"; orders_csv (optional, may be NULL):
 * per-language word order out of identity|rotate_left|reverse;
 * noise_language may be NULL for a clean corpus */
mtfuse_status mtfuse_cipher_generate(const char* languages_csv, const char* orders_csv,
                                     int concept_vocab, int rows, int len_min, int len_max,
                                     const char* noise_language, double noise_dropout,
                                     unsigned long long noise_seed, unsigned long long seed,
                                     mtfuse_corpus** out);
long long mtfuse_corpus_rows(const mtfuse_corpus* corpus);
mtfuse_status mtfuse_corpus_languages(const mtfuse_corpus* corpus, char** csv_out);
mtfuse_status mtfuse_corpus_cell(const mtfuse_corpus* corpus, long long row, const char* language,
                                 char** out);
void mtfuse_corpus_free(mtfuse_corpus* corpus);

/* ---- tokenizer --------------------------------------------------------- */

typedef struct mtfuse_bpe mtfuse_bpe;

mtfuse_status mtfuse_bpe_train(const mtfuse_corpus* corpus, int vocab_size, mtfuse_bpe** out);
mtfuse_status mtfuse_bpe_save(const mtfuse_bpe* bpe, const char* path);
mtfuse_status mtfuse_bpe_load(const char* path, mtfuse_bpe** out);
void mtfuse_bpe_free(mtfuse_bpe* bpe);

/* ---- models ------------------------------------------------------------ */

typedef struct mtfuse_model mtfuse_model;

typedef struct mtfuse_model_config {
  int embed_dim;      /* default 64 when <= 0 */
  int num_heads;      /* default 2 */
  int ff_dim;         /* default 256 */
  int encoder_layers; /* default 2 */
  int decoder_layers; /* default 2 */
  int max_seq_len;    /* default 64 */
  unsigned long long seed;
} mtfuse_model_config;

/* pairs_csv: comma-separated source:target directions, e.g. "aa:cc,bb:cc" */
mtfuse_status mtfuse_model_train(const mtfuse_model_config* config, const mtfuse_bpe* bpe,
                                 const mtfuse_corpus* corpus, const char* pairs_csv, int epochs,
                                 double learning_rate, double* heldout_accuracy_out,
                                 mtfuse_model** out);
mtfuse_status mtfuse_model_save(const mtfuse_model* model, const char* path);
mtfuse_status mtfuse_model_load(const char* path, mtfuse_model** out);
void mtfuse_model_free(mtfuse_model* model);

/* ---- decoding ----------------------------------------------------------- */

typedef struct mtfuse_beam_config {
  int beam_size;   /* default 4 when <= 0 */
  int max_length;  /* default 48 */
  double alpha;    /* length-normalization exponent, default 0 */
} mtfuse_beam_config;

/* Multi-source shallow-fusion translation of one sentence. num_contexts may
 * be 0 for baseline decoding; lambdas may be NULL for equal weights. */
mtfuse_status mtfuse_translate(const mtfuse_model* model, const mtfuse_bpe* bpe,
                               const char* source_text, const char* source_language,
                               const char* target_language, const char* const* context_texts,
                               const char* const* context_languages, int num_contexts,
                               double lambda0, const double* lambdas,
                               const mtfuse_beam_config* beam, char** text_out,
                               double* score_out);

/* ---- LLM pipeline ------------------------------------------------------- */

/* backend: "mock" or "http" (configured via MTFUSE_LLM_ENDPOINT,
 * MTFUSE_LLM_TOKEN, MTFUSE_LLM_MODEL). mode: direct|contextual|sequential.
 * contextual mode reads context_texts; sequential mode ignores them and
 * generates intermediates for context_languages. The result is a JSON
 * object: {"final": ..., "intermediates": [[language, text], ...]}. */
mtfuse_status mtfuse_llm_translate(const char* backend, const char* cache_path, const char* mode,
                                   const char* source_language, const char* target_language,
                                   const char* source_text, const char* const* context_languages,
                                   const char* const* context_texts, int num_contexts,
                                   int max_attempts, char** json_out);

/* ---- evaluation --------------------------------------------------------- */

typedef struct mtfuse_bleu_report {
  double score;
  double precisions[4];
  double brevity_penalty;
  long long hypothesis_length;
  long long reference_length;
} mtfuse_bleu_report;

/* one sentence per line, UTF-8, equal line counts */
mtfuse_status mtfuse_evaluate_files(const char* hypothesis_path, const char* reference_path,
                                    mtfuse_bleu_report* out);

typedef struct mtfuse_significance_report {
  double p_value;
  double observed_delta;
  long long wins_a;
  long long num_resamples;
  unsigned long long seed;
  double threshold;
  int significant; /* p_value < threshold, strict */
} mtfuse_significance_report;

mtfuse_status mtfuse_significance_files(const char* hypothesis_a_path,
                                        const char* hypothesis_b_path,
                                        const char* reference_path, long long num_resamples,
                                        unsigned long long seed, double threshold,
                                        mtfuse_significance_report* out);

/* ---- experiments -------------------------------------------------------- */

/* Runs the experiment described by the JSON spec file; on success
 * *experiment_json_path_out names the persisted experiment.json. */
mtfuse_status mtfuse_run_experiment(const char* spec_path, char** experiment_json_path_out);

/* experiment_jsons: persisted experiment.json paths. groups_spec (optional,
 * may be NULL): "GROUP=specA,specB;OTHER=specC" averages member experiments.
 * format: "markdown" or "tsv". */
mtfuse_status mtfuse_render_report(const char* const* experiment_jsons, int count,
                                   const char* format, const char* groups_spec, char** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MTFUSE_H */
