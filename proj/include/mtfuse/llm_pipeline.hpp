#pragma once

#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "mtfuse/errors.hpp"

namespace mtfuse {

struct GenerationParams {
  double temperature = 0.0;  // most-deterministic setting by default
};

// Chat-completion backend contract. complete() either returns the raw
// completion text or throws (ErrorKind::transport for remote failures).
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::string& prompt, const GenerationParams& params) = 0;
  // stable identity string used in cache keys
  virtual std::string identity() const = 0;
};

// Deterministic offline backend. Looks up canned responses by exact prompt;
// unmatched prompts echo the sentence on the SOURCE line.
class MockChatBackend : public ChatBackend {
 public:
  void add_response(const std::string& prompt, const std::string& response);
  size_t num_canned() const { return canned_.size(); }

  std::string complete(const std::string& prompt, const GenerationParams& params) override;
  std::string identity() const override { return "mock"; }

  static std::string extract_source_sentence(const std::string& prompt);

 private:
  std::map<std::string, std::string> canned_;
};

// Minimal chat-completion HTTP adapter. Request body:
//   {"model": ..., "messages": [{"role": "user", "content": prompt}],
//    "temperature": ...}
// and the completion is read from choices[0].message.content. Configured
// from the environment: MTFUSE_LLM_ENDPOINT, MTFUSE_LLM_TOKEN,
// MTFUSE_LLM_MODEL.
class HttpChatBackend : public ChatBackend {
 public:
  struct Config {
    std::string endpoint;  // full URL of the completion route
    std::string token;     // optional bearer credential
    std::string model;
  };
  static Config from_environment();

  explicit HttpChatBackend(Config config);
  std::string complete(const std::string& prompt, const GenerationParams& params) override;
  std::string identity() const override { return "http:" + config_.endpoint + ":" + config_.model; }

 private:
  Config config_;
};

enum class JobMode { direct, contextual, sequential };

JobMode job_mode_from_string(const std::string& name);
std::string to_string(JobMode mode);

struct TranslationJob {
  std::string source_language;
  std::string target_language;
  std::string source_sentence;
  // contextual mode: externally provided (language, sentence) pairs
  std::vector<std::pair<std::string, std::string>> contexts;
  // sequential mode: context languages the pipeline must generate itself
  std::vector<std::string> context_languages;
  JobMode mode = JobMode::direct;
};

// Prompt construction. n = 0 renders the direct form, n = 1 the
// single-context form, n >= 2 numbers the CONTEXT blocks and joins the
// context languages as "A and B" / "A, B and C" in the instruction line.
std::string render_prompt(const std::string& source_language, const std::string& target_language,
                          const std::string& source_sentence,
                          const std::vector<std::pair<std::string, std::string>>& contexts);

// Display names for the language codes used in the experiments; unknown
// codes pass through unchanged.
std::string language_display_name(const std::string& code);

// Append-only response cache, one JSON record per line. Values are keyed by
// a SHA-256 digest of (backend identity, prompt, generation parameters);
// lookups never mutate the file.
class ResponseCache {
 public:
  // empty path keeps the cache in memory only
  explicit ResponseCache(std::string path);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& backend_identity,
             const std::string& prompt, const GenerationParams& params, const std::string& value);
  size_t size() const;

  static std::string digest(const std::string& backend_identity, const std::string& prompt,
                            const GenerationParams& params);

 private:
  std::string path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> entries_;
};

struct RetryPolicy {
  int max_attempts = 3;
  int base_delay_ms = 100;  // doubles per attempt
};

struct PipelineCounters {
  long long backend_calls = 0;     // distinct completions that reached the backend
  long long backend_attempts = 0;  // attempts including retries
  long long cache_hits = 0;
};

// Executes translation jobs against a backend with caching, retries with
// exponential backoff, and a bounded number of concurrent in-flight backend
// requests. A given (backend, prompt, params) triple reaches the backend at
// most once, concurrent callers included.
class TranslationPipeline {
 public:
  struct Options {
    RetryPolicy retry;
    int max_in_flight = 4;
    GenerationParams params;
  };

  TranslationPipeline(std::shared_ptr<ChatBackend> backend, std::shared_ptr<ResponseCache> cache);
  TranslationPipeline(std::shared_ptr<ChatBackend> backend, std::shared_ptr<ResponseCache> cache,
                      Options options);

  std::string translate_direct(const TranslationJob& job);
  std::string translate_contextual(const TranslationJob& job);

  struct SequentialResult {
    std::string final_translation;
    std::vector<std::pair<std::string, std::string>> intermediates;  // (language, text)
  };
  // Two stages: source -> context language for every requested code, then a
  // contextual translation whose contexts are exactly those intermediate
  // outputs, unmodified. Failures name the stage that broke.
  SequentialResult translate_sequential(const TranslationJob& job);

  PipelineCounters counters() const;

 private:
  std::string complete_cached(const std::string& prompt);
  std::string complete_with_retries(const std::string& prompt);

  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  Options options_;

  std::mutex inflight_mutex_;
  std::map<std::string, std::shared_future<std::string>> inflight_;
  std::unique_ptr<std::counting_semaphore<>> slots_;

  mutable std::mutex counter_mutex_;
  PipelineCounters counters_;
};

// Completion cleanup: surrounding whitespace plus at most one pair of
// wrapping quotes. Nothing stronger; prompts already demand bare sentences.
std::string postprocess_completion(const std::string& raw);

}  // namespace mtfuse
