// mtfuse command-line tool. Talks to the toolkit exclusively through the C
// API in mtfuse.h. Exit codes: 0 success, 1 validation/configuration error,
// 2 runtime failure.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtfuse.h"

namespace {

int exit_code_of(mtfuse_status status) {
  switch (status) {
    case MTFUSE_OK:
      return 0;
    case MTFUSE_ERR_VALIDATION:
    case MTFUSE_ERR_CONFIG:
    case MTFUSE_ERR_DATA:
    case MTFUSE_ERR_FORMAT:
    case MTFUSE_ERR_LENGTH:
    case MTFUSE_ERR_VOCAB:
      return 1;
    default:
      return 2;
  }
}

int bail(mtfuse_status status) {
  std::fprintf(stderr, "error: %s\n", mtfuse_last_error());
  return exit_code_of(status);
}

struct OwnedString {
  char* value = nullptr;
  ~OwnedString() { mtfuse_string_free(value); }
};

// "lang=text" pairs collected from repeated --context flags
bool split_context(const std::string& arg, std::string& language, std::string& text) {
  size_t eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  language = arg.substr(0, eq);
  text = arg.substr(eq + 1);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-source machine translation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mtfuse_version());

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-parallel corpus");
  std::string gen_languages = "aa,bb,cc", gen_orders, gen_noise_language, gen_output;
  int gen_vocab = 50, gen_rows = 500, gen_len_min = 4, gen_len_max = 9;
  double gen_noise_p = 0.0;
  unsigned long long gen_seed = 1, gen_noise_seed = 1;
  gen->add_option("--languages", gen_languages, "comma-separated language codes");
  gen->add_option("--orders", gen_orders, "per-language word order: identity|rotate_left|reverse");
  gen->add_option("--vocab-size", gen_vocab, "concept vocabulary size");
  gen->add_option("--rows", gen_rows, "number of aligned rows");
  gen->add_option("--len-min", gen_len_min, "minimum sentence length in words");
  gen->add_option("--len-max", gen_len_max, "maximum sentence length in words");
  gen->add_option("--noise-language", gen_noise_language, "language to corrupt with word dropout");
  gen->add_option("--noise-p", gen_noise_p, "word dropout probability");
  gen->add_option("--noise-seed", gen_noise_seed, "dropout stream seed");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("-o,--output", gen_output, "output corpus TSV")->required();

  // ---- train ----
  auto* train = app.add_subcommand("train", "train the toy multilingual model");
  std::string train_corpus, train_pairs, train_output;
  int train_bpe_size = 1000, train_epochs = 20;
  int cfg_embed = 0, cfg_heads = 0, cfg_ff = 0, cfg_enc = 0, cfg_dec = 0, cfg_maxlen = 0;
  double train_lr = 0.05;
  unsigned long long train_seed = 1;
  train->add_option("--corpus", train_corpus, "training corpus TSV")->required();
  train->add_option("--pairs", train_pairs, "directions, e.g. aa:cc,bb:cc")->required();
  train->add_option("--bpe-size", train_bpe_size, "subword vocabulary size");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--lr", train_lr, "SGD learning rate");
  train->add_option("--embed-dim", cfg_embed, "embedding width");
  train->add_option("--heads", cfg_heads, "attention heads");
  train->add_option("--ff-dim", cfg_ff, "feed-forward width");
  train->add_option("--encoder-layers", cfg_enc, "encoder layers");
  train->add_option("--decoder-layers", cfg_dec, "decoder layers");
  train->add_option("--max-seq-len", cfg_maxlen, "maximum sequence length");
  train->add_option("--seed", train_seed, "init/shuffle seed");
  train->add_option("-o,--output", train_output,
                    "output prefix; writes <prefix>.ckpt and <prefix>.bpe")
      ->required();

  // ---- translate ----
  auto* translate = app.add_subcommand("translate", "translate one sentence");
  std::string tr_track = "nmt", tr_model, tr_bpe, tr_source_lang, tr_target_lang, tr_text;
  std::vector<std::string> tr_contexts;
  std::string tr_context_langs, tr_backend = "mock", tr_mode = "direct", tr_cache;
  std::vector<double> tr_lambdas;
  double tr_lambda0 = 1.0, tr_alpha = 0.0;
  int tr_beam = 4, tr_max_len = 48, tr_retries = 3;
  translate->add_option("--track", tr_track, "nmt or llm");
  translate->add_option("--model", tr_model, "model checkpoint (nmt)");
  translate->add_option("--bpe", tr_bpe, "BPE model file (nmt)");
  translate->add_option("--source-lang", tr_source_lang, "source language")->required();
  translate->add_option("--target-lang", tr_target_lang, "target language")->required();
  translate->add_option("--text", tr_text, "source sentence")->required();
  translate->add_option("--context", tr_contexts, "context as lang=text (repeatable)");
  translate->add_option("--context-langs", tr_context_langs,
                        "context languages to generate (llm sequential)");
  translate->add_option("--lambda0", tr_lambda0, "primary source fusion weight");
  translate->add_option("--lambda", tr_lambdas, "per-context fusion weight (repeatable)");
  translate->add_option("--beam", tr_beam, "beam size");
  translate->add_option("--max-len", tr_max_len, "maximum output length");
  translate->add_option("--alpha", tr_alpha, "length-normalization exponent");
  translate->add_option("--backend", tr_backend, "llm backend: mock or http");
  translate->add_option("--mode", tr_mode, "llm mode: direct|contextual|sequential");
  translate->add_option("--cache", tr_cache, "llm response cache file");
  translate->add_option("--retries", tr_retries, "llm retry budget");

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "corpus BLEU between two files");
  std::string ev_hyp, ev_ref;
  bool ev_json = false;
  evaluate->add_option("--hypotheses", ev_hyp, "hypothesis file, one sentence per line")
      ->required();
  evaluate->add_option("--references", ev_ref, "reference file, one sentence per line")
      ->required();
  evaluate->add_flag("--json", ev_json, "print the full report as JSON");

  // ---- significance ----
  auto* sig = app.add_subcommand("significance", "paired bootstrap between two hypothesis files");
  std::string sg_a, sg_b, sg_ref;
  long long sg_resamples = 1000;
  unsigned long long sg_seed = 1;
  double sg_threshold = 0.05;
  bool sg_json = false;
  sig->add_option("--hypotheses-a", sg_a, "system A hypotheses")->required();
  sig->add_option("--hypotheses-b", sg_b, "system B hypotheses")->required();
  sig->add_option("--references", sg_ref, "shared references")->required();
  sig->add_option("--resamples", sg_resamples, "bootstrap resamples");
  sig->add_option("--seed", sg_seed, "resampling seed");
  sig->add_option("--threshold", sg_threshold, "significance threshold");
  sig->add_flag("--json", sg_json, "print the full report as JSON");

  // ---- run ----
  auto* run = app.add_subcommand("run", "run an experiment spec");
  std::string run_spec;
  run->add_option("spec", run_spec, "experiment spec JSON file")->required();

  // ---- report ----
  auto* report = app.add_subcommand("report", "render tables from persisted runs");
  std::vector<std::string> rp_files;
  std::string rp_format = "markdown", rp_groups;
  report->add_option("experiments", rp_files, "experiment.json files")->required();
  report->add_option("--format", rp_format, "markdown or tsv");
  report->add_option("--groups", rp_groups, "averaged groups: NAME=specA,specB;...");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    mtfuse_corpus* corpus = nullptr;
    mtfuse_status status = mtfuse_cipher_generate(
        gen_languages.c_str(), gen_orders.empty() ? nullptr : gen_orders.c_str(), gen_vocab,
        gen_rows, gen_len_min, gen_len_max,
        gen_noise_language.empty() ? nullptr : gen_noise_language.c_str(), gen_noise_p,
        gen_noise_seed, gen_seed, &corpus);
    if (status != MTFUSE_OK) return bail(status);
    status = mtfuse_corpus_save(corpus, gen_output.c_str());
    long long rows = mtfuse_corpus_rows(corpus);
    mtfuse_corpus_free(corpus);
    if (status != MTFUSE_OK) return bail(status);
    std::printf("wrote %lld rows to %s\n", rows, gen_output.c_str());
    return 0;
  }

  if (train->parsed()) {
    mtfuse_corpus* corpus = nullptr;
    mtfuse_status status = mtfuse_corpus_load(train_corpus.c_str(), &corpus);
    if (status != MTFUSE_OK) return bail(status);

    mtfuse_bpe* bpe = nullptr;
    status = mtfuse_bpe_train(corpus, train_bpe_size, &bpe);
    if (status != MTFUSE_OK) {
      mtfuse_corpus_free(corpus);
      return bail(status);
    }

    mtfuse_model_config config{cfg_embed, cfg_heads, cfg_ff, cfg_enc, cfg_dec, cfg_maxlen,
                               train_seed};
    double accuracy = 0.0;
    mtfuse_model* model = nullptr;
    status = mtfuse_model_train(&config, bpe, corpus, train_pairs.c_str(), train_epochs, train_lr,
                                &accuracy, &model);
    mtfuse_corpus_free(corpus);
    if (status != MTFUSE_OK) {
      mtfuse_bpe_free(bpe);
      return bail(status);
    }

    std::string ckpt = train_output + ".ckpt", bpe_path = train_output + ".bpe";
    status = mtfuse_model_save(model, ckpt.c_str());
    if (status == MTFUSE_OK) status = mtfuse_bpe_save(bpe, bpe_path.c_str());
    mtfuse_model_free(model);
    mtfuse_bpe_free(bpe);
    if (status != MTFUSE_OK) return bail(status);
    std::printf("held-out token accuracy: %.4f\nwrote %s and %s\n", accuracy, ckpt.c_str(),
                bpe_path.c_str());
    return 0;
  }

  if (translate->parsed()) {
    std::vector<std::string> context_languages, context_texts;
    for (const auto& arg : tr_contexts) {
      std::string language, text;
      if (!split_context(arg, language, text)) {
        std::fprintf(stderr, "error: bad --context (expected lang=text): %s\n", arg.c_str());
        return 1;
      }
      context_languages.push_back(language);
      context_texts.push_back(text);
    }

    if (tr_track == "nmt") {
      if (tr_model.empty() || tr_bpe.empty()) {
        std::fprintf(stderr, "error: nmt track needs --model and --bpe\n");
        return 1;
      }
      mtfuse_model* model = nullptr;
      mtfuse_status status = mtfuse_model_load(tr_model.c_str(), &model);
      if (status != MTFUSE_OK) return bail(status);
      mtfuse_bpe* bpe = nullptr;
      status = mtfuse_bpe_load(tr_bpe.c_str(), &bpe);
      if (status != MTFUSE_OK) {
        mtfuse_model_free(model);
        return bail(status);
      }

      std::vector<const char*> langs, texts;
      for (size_t i = 0; i < context_languages.size(); ++i) {
        langs.push_back(context_languages[i].c_str());
        texts.push_back(context_texts[i].c_str());
      }
      std::vector<double> lambdas = tr_lambdas;
      if (!lambdas.empty() && lambdas.size() != langs.size()) {
        std::fprintf(stderr, "error: --lambda count must match --context count\n");
        mtfuse_model_free(model);
        mtfuse_bpe_free(bpe);
        return 1;
      }
      mtfuse_beam_config beam{tr_beam, tr_max_len, tr_alpha};
      OwnedString text;
      double score = 0.0;
      status = mtfuse_translate(model, bpe, tr_text.c_str(), tr_source_lang.c_str(),
                                tr_target_lang.c_str(), texts.empty() ? nullptr : texts.data(),
                                langs.empty() ? nullptr : langs.data(),
                                static_cast<int>(langs.size()), tr_lambda0,
                                lambdas.empty() ? nullptr : lambdas.data(), &beam, &text.value,
                                &score);
      mtfuse_model_free(model);
      mtfuse_bpe_free(bpe);
      if (status != MTFUSE_OK) return bail(status);
      std::printf("%s\n", text.value);
      std::fprintf(stderr, "score: %.4f\n", score);
      return 0;
    }

    if (tr_track == "llm") {
      std::vector<const char*> langs, texts;
      if (tr_mode == "sequential") {
        // --context-langs wins for sequential mode
        size_t start = 0;
        while (start <= tr_context_langs.size() && !tr_context_langs.empty()) {
          size_t comma = tr_context_langs.find(',', start);
          std::string code = tr_context_langs.substr(
              start, comma == std::string::npos ? std::string::npos : comma - start);
          context_languages.push_back(code);
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
        for (const auto& language : context_languages) langs.push_back(language.c_str());
      } else {
        for (size_t i = 0; i < context_languages.size(); ++i) {
          langs.push_back(context_languages[i].c_str());
          texts.push_back(context_texts[i].c_str());
        }
      }
      OwnedString out;
      mtfuse_status status = mtfuse_llm_translate(
          tr_backend.c_str(), tr_cache.empty() ? nullptr : tr_cache.c_str(), tr_mode.c_str(),
          tr_source_lang.c_str(), tr_target_lang.c_str(), tr_text.c_str(),
          langs.empty() ? nullptr : langs.data(), texts.empty() ? nullptr : texts.data(),
          static_cast<int>(langs.size()), tr_retries, &out.value);
      if (status != MTFUSE_OK) return bail(status);
      std::printf("%s\n", out.value);
      return 0;
    }

    std::fprintf(stderr, "error: unknown track %s (expected nmt or llm)\n", tr_track.c_str());
    return 1;
  }

  if (evaluate->parsed()) {
    mtfuse_bleu_report report{};
    mtfuse_status status = mtfuse_evaluate_files(ev_hyp.c_str(), ev_ref.c_str(), &report);
    if (status != MTFUSE_OK) return bail(status);
    if (ev_json) {
      std::printf(
          "{\"score\": %.6f, \"precisions\": [%.6f, %.6f, %.6f, %.6f], "
          "\"brevity_penalty\": %.6f, \"hypothesis_length\": %lld, \"reference_length\": %lld}\n",
          report.score, report.precisions[0], report.precisions[1], report.precisions[2],
          report.precisions[3], report.brevity_penalty, report.hypothesis_length,
          report.reference_length);
    } else {
      std::printf("BLEU = %.2f (BP %.3f, hyp %lld, ref %lld)\n", report.score,
                  report.brevity_penalty, report.hypothesis_length, report.reference_length);
    }
    return 0;
  }

  if (sig->parsed()) {
    mtfuse_significance_report report{};
    mtfuse_status status = mtfuse_significance_files(sg_a.c_str(), sg_b.c_str(), sg_ref.c_str(),
                                                     sg_resamples, sg_seed, sg_threshold, &report);
    if (status != MTFUSE_OK) return bail(status);
    if (sg_json) {
      std::printf(
          "{\"p_value\": %.6f, \"observed_delta\": %.6f, \"wins_a\": %lld, "
          "\"num_resamples\": %lld, \"seed\": %llu, \"threshold\": %.4f, \"significant\": %s}\n",
          report.p_value, report.observed_delta, report.wins_a, report.num_resamples, report.seed,
          report.threshold, report.significant ? "true" : "false");
    }
    std::printf("%s (p = %.4f, delta = %+.2f, wins A %lld/%lld)\n",
                report.significant ? "significant" : "not significant", report.p_value,
                report.observed_delta, report.wins_a, report.num_resamples);
    return 0;
  }

  if (run->parsed()) {
    OwnedString out;
    mtfuse_status status = mtfuse_run_experiment(run_spec.c_str(), &out.value);
    if (status != MTFUSE_OK) return bail(status);
    std::printf("experiment complete: %s\n", out.value);
    return 0;
  }

  if (report->parsed()) {
    std::vector<const char*> files;
    for (const auto& f : rp_files) files.push_back(f.c_str());
    OwnedString out;
    mtfuse_status status =
        mtfuse_render_report(files.data(), static_cast<int>(files.size()), rp_format.c_str(),
                             rp_groups.empty() ? nullptr : rp_groups.c_str(), &out.value);
    if (status != MTFUSE_OK) return bail(status);
    std::fputs(out.value, stdout);
    return 0;
  }

  return 0;
}
