#include "doctest.h"

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtfuse.h"

namespace {

struct Str {
  char* value = nullptr;
  ~Str() { mtfuse_string_free(value); }
  std::string get() const { return value ? value : ""; }
};

std::string capi_tmp(const std::string& name) {
  static std::string dir = [] {
    auto base = std::filesystem::temp_directory_path() /
                ("mtfuse-capi-" + std::to_string(::getpid()));
    std::filesystem::create_directories(base);
    return base.string();
  }();
  return dir + "/" + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

}  // namespace

TEST_CASE("version and error strings") {
  CHECK(std::string(mtfuse_version()) == "0.1.0");
  CHECK(mtfuse_last_error() != nullptr);
}

TEST_CASE("corpus lifecycle through the C API") {
  mtfuse_corpus* corpus = nullptr;
  REQUIRE(mtfuse_cipher_generate("aa,bb,cc", nullptr, 20, 15, 3, 6, nullptr, 0.0, 0, 42,
                                 &corpus) == MTFUSE_OK);
  CHECK(mtfuse_corpus_rows(corpus) == 15);

  Str langs;
  REQUIRE(mtfuse_corpus_languages(corpus, &langs.value) == MTFUSE_OK);
  CHECK(langs.get() == "aa,bb,cc");

  Str cell;
  REQUIRE(mtfuse_corpus_cell(corpus, 0, "aa", &cell.value) == MTFUSE_OK);
  CHECK(!cell.get().empty());
  CHECK(mtfuse_corpus_cell(corpus, 0, "zz", &cell.value) != MTFUSE_OK);
  CHECK(std::string(mtfuse_last_error()).find("zz") != std::string::npos);

  std::string path = capi_tmp("corpus.tsv");
  REQUIRE(mtfuse_corpus_save(corpus, path.c_str()) == MTFUSE_OK);
  mtfuse_corpus_free(corpus);

  mtfuse_corpus* loaded = nullptr;
  REQUIRE(mtfuse_corpus_load(path.c_str(), &loaded) == MTFUSE_OK);
  CHECK(mtfuse_corpus_rows(loaded) == 15);
  mtfuse_corpus_free(loaded);

  mtfuse_corpus* missing = nullptr;
  CHECK(mtfuse_corpus_load(capi_tmp("nope.tsv").c_str(), &missing) == MTFUSE_ERR_IO);
}

TEST_CASE("bpe, model training, translation, evaluation, significance end to end") {
  mtfuse_corpus* corpus = nullptr;
  REQUIRE(mtfuse_cipher_generate("aa,bb,cc", "identity,rotate_left,reverse", 15, 20, 3, 5,
                                 nullptr, 0.0, 0, 7, &corpus) == MTFUSE_OK);

  mtfuse_bpe* bpe = nullptr;
  REQUIRE(mtfuse_bpe_train(corpus, 400, &bpe) == MTFUSE_OK);
  std::string bpe_path = capi_tmp("model.bpe");
  REQUIRE(mtfuse_bpe_save(bpe, bpe_path.c_str()) == MTFUSE_OK);

  mtfuse_model_config config{16, 2, 24, 1, 1, 32, 5};
  double accuracy = -1.0;
  mtfuse_model* model = nullptr;
  REQUIRE(mtfuse_model_train(&config, bpe, corpus, "aa:cc,bb:cc", 1, 0.05, &accuracy, &model) ==
          MTFUSE_OK);
  CHECK(accuracy >= 0.0);

  std::string ckpt = capi_tmp("model.ckpt");
  REQUIRE(mtfuse_model_save(model, ckpt.c_str()) == MTFUSE_OK);
  mtfuse_model_free(model);

  mtfuse_model* loaded = nullptr;
  REQUIRE(mtfuse_model_load(ckpt.c_str(), &loaded) == MTFUSE_OK);

  Str source;
  REQUIRE(mtfuse_corpus_cell(corpus, 0, "aa", &source.value) == MTFUSE_OK);
  Str context;
  REQUIRE(mtfuse_corpus_cell(corpus, 0, "bb", &context.value) == MTFUSE_OK);

  mtfuse_beam_config beam{2, 8, 0.0};
  Str baseline_out;
  double baseline_score = 0.0;
  REQUIRE(mtfuse_translate(loaded, bpe, source.value, "aa", "cc", nullptr, nullptr, 0, 1.0,
                           nullptr, &beam, &baseline_out.value, &baseline_score) == MTFUSE_OK);

  const char* ctx_texts[1] = {context.value};
  const char* ctx_langs[1] = {"bb"};
  Str fused_out;
  double fused_score = 0.0;
  REQUIRE(mtfuse_translate(loaded, bpe, source.value, "aa", "cc", ctx_texts, ctx_langs, 1, 1.0,
                           nullptr, &beam, &fused_out.value, &fused_score) == MTFUSE_OK);

  // zero-weight context reproduces the baseline
  double zero = 0.0;
  Str degenerate_out;
  double degenerate_score = 0.0;
  REQUIRE(mtfuse_translate(loaded, bpe, source.value, "aa", "cc", ctx_texts, ctx_langs, 1, 1.0,
                           &zero, &beam, &degenerate_out.value, &degenerate_score) == MTFUSE_OK);
  CHECK(degenerate_out.get() == baseline_out.get());
  CHECK(degenerate_score == doctest::Approx(baseline_score).epsilon(1e-9));

  mtfuse_model_free(loaded);
  mtfuse_bpe_free(bpe);
  mtfuse_corpus_free(corpus);

  // evaluation + significance over little files
  std::string hyp_a = capi_tmp("hyp-a.txt"), hyp_b = capi_tmp("hyp-b.txt"),
              refs = capi_tmp("refs.txt");
  std::string ref_text, a_text, b_text;
  for (int i = 0; i < 8; ++i) {
    std::string tail = std::to_string(i) + "\n";
    ref_text += "alpha beta gamma delta " + tail;
    a_text += "alpha beta gamma delta " + tail;   // perfect
    b_text += "zeta eta theta iota " + tail;      // wrong
  }
  write_file(refs, ref_text);
  write_file(hyp_a, a_text);
  write_file(hyp_b, b_text);

  mtfuse_bleu_report bleu{};
  REQUIRE(mtfuse_evaluate_files(hyp_a.c_str(), refs.c_str(), &bleu) == MTFUSE_OK);
  CHECK(bleu.score == 100.0);
  CHECK(bleu.brevity_penalty == 1.0);

  mtfuse_significance_report sig{};
  REQUIRE(mtfuse_significance_files(hyp_a.c_str(), hyp_b.c_str(), refs.c_str(), 100, 3, 0.05,
                                    &sig) == MTFUSE_OK);
  CHECK(sig.significant == 1);
  CHECK(sig.p_value == doctest::Approx(1.0 / 101.0));
  CHECK(sig.observed_delta > 0.0);
}

TEST_CASE("llm translation through the C API with the mock backend") {
  Str out;
  REQUIRE(mtfuse_llm_translate("mock", nullptr, "direct", "English", "Portuguese", "Hello.",
                               nullptr, nullptr, 0, 3, &out.value) == MTFUSE_OK);
  CHECK(out.get().find("\"final\":\"Hello.\"") != std::string::npos);

  const char* langs[2] = {"Spanish", "French"};
  Str seq_out;
  REQUIRE(mtfuse_llm_translate("mock", capi_tmp("llm-cache.jsonl").c_str(), "sequential",
                               "English", "Portuguese", "Hello.", langs, nullptr, 2, 3,
                               &seq_out.value) == MTFUSE_OK);
  CHECK(seq_out.get().find("\"intermediates\"") != std::string::npos);
  CHECK(seq_out.get().find("Spanish") != std::string::npos);

  CHECK(mtfuse_llm_translate("carrier-pigeon", nullptr, "direct", "en", "pt", "x", nullptr,
                             nullptr, 0, 3, &out.value) == MTFUSE_ERR_CONFIG);
}

TEST_CASE("experiments and reports through the C API") {
  // corpus + canned mock responses
  mtfuse_corpus* corpus = nullptr;
  REQUIRE(mtfuse_cipher_generate("aa,cc", nullptr, 10, 4, 3, 4, nullptr, 0.0, 0, 13, &corpus) ==
          MTFUSE_OK);
  std::string corpus_path = capi_tmp("exp-corpus.tsv");
  REQUIRE(mtfuse_corpus_save(corpus, corpus_path.c_str()) == MTFUSE_OK);
  mtfuse_corpus_free(corpus);

  std::string out_dir = capi_tmp("exp-out");
  std::string spec = std::string("{") + "\"name\": \"capi-exp\"," + "\"track\": \"llm\"," +
                     "\"mode\": \"direct\"," + "\"backend\": \"mock\"," + "\"corpus\": \"" +
                     corpus_path + "\"," + "\"source_language\": \"aa\"," +
                     "\"target_language\": \"cc\"," + "\"context_sets\": [[]]," +
                     "\"output_dir\": \"" + out_dir + "\"}";
  std::string spec_path = capi_tmp("spec.json");
  write_file(spec_path, spec);

  Str experiment_json;
  REQUIRE(mtfuse_run_experiment(spec_path.c_str(), &experiment_json.value) == MTFUSE_OK);
  CHECK(experiment_json.get() == out_dir + "/experiment.json");

  const char* files[1] = {experiment_json.value};
  Str table;
  REQUIRE(mtfuse_render_report(files, 1, "tsv", nullptr, &table.value) == MTFUSE_OK);
  CHECK(table.get().find("capi-exp\tbaseline\t") != std::string::npos);

  Str grouped;
  REQUIRE(mtfuse_render_report(files, 1, "markdown", "G=capi-exp", &grouped.value) == MTFUSE_OK);
  CHECK(grouped.get().find("| G | baseline |") != std::string::npos);

  CHECK(mtfuse_render_report(files, 1, "csv", nullptr, &table.value) == MTFUSE_ERR_CONFIG);
}

TEST_CASE("null arguments are validation errors, not crashes") {
  CHECK(mtfuse_corpus_load(nullptr, nullptr) == MTFUSE_ERR_VALIDATION);
  CHECK(mtfuse_bpe_load(nullptr, nullptr) == MTFUSE_ERR_VALIDATION);
  CHECK(mtfuse_model_load(nullptr, nullptr) == MTFUSE_ERR_VALIDATION);
  mtfuse_bleu_report report{};
  CHECK(mtfuse_evaluate_files(nullptr, nullptr, &report) == MTFUSE_ERR_VALIDATION);
  CHECK(std::strlen(mtfuse_last_error()) > 0);
}
