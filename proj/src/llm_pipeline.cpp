#include "mtfuse/llm_pipeline.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mtfuse/io.hpp"

namespace mtfuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// prompts

std::string render_prompt(const std::string& source_language, const std::string& target_language,
                          const std::string& source_sentence,
                          const std::vector<std::pair<std::string, std::string>>& contexts) {
  if (source_sentence.empty()) fail(ErrorKind::validation, "source sentence is empty");
  if (source_language.empty() || target_language.empty()) {
    fail(ErrorKind::validation, "source and target languages are required");
  }
  for (const auto& [language, sentence] : contexts) {
    if (language.empty()) fail(ErrorKind::validation, "context language is empty");
    if (sentence.empty()) fail(ErrorKind::validation, "context sentence is empty");
  }

  std::ostringstream out;
  out << "Translate from " << source_language << " to " << target_language;
  if (contexts.size() == 1) {
    out << ", given the translation in " << contexts[0].first;
  } else if (contexts.size() >= 2) {
    out << ", given the translations in ";
    for (size_t i = 0; i < contexts.size(); ++i) {
      if (i == 0) {
        out << contexts[i].first;
      } else if (i + 1 == contexts.size()) {
        out << " and " << contexts[i].first;
      } else {
        out << ", " << contexts[i].first;
      }
    }
  }
  out << ".\n";
  out << "Output only the translated sentence.\n";
  out << source_language << " SOURCE: " << source_sentence << "\n";
  if (contexts.size() == 1) {
    out << contexts[0].first << " CONTEXT: " << contexts[0].second << "\n";
  } else {
    for (size_t i = 0; i < contexts.size(); ++i) {
      out << contexts[i].first << " CONTEXT " << (i + 1) << ": " << contexts[i].second << "\n";
    }
  }
  out << target_language << " TRANSLATION:";
  return out.str();
}

std::string language_display_name(const std::string& code) {
  static const std::map<std::string, std::string> names = {
      {"en", "English"}, {"zh", "Chinese"}, {"pt", "Portuguese"}, {"es", "Spanish"},
      {"fr", "French"},  {"it", "Italian"}, {"de", "German"},     {"ru", "Russian"},
  };
  auto it = names.find(code);
  return it == names.end() ? code : it->second;
}

JobMode job_mode_from_string(const std::string& name) {
  if (name == "direct") return JobMode::direct;
  if (name == "contextual") return JobMode::contextual;
  if (name == "sequential") return JobMode::sequential;
  fail(ErrorKind::config, "unknown translation mode: " + name);
}

std::string to_string(JobMode mode) {
  switch (mode) {
    case JobMode::direct: return "direct";
    case JobMode::contextual: return "contextual";
    case JobMode::sequential: return "sequential";
  }
  fail(ErrorKind::internal, "bad job mode value");
}

// ---------------------------------------------------------------------------
// backends

void MockChatBackend::add_response(const std::string& prompt, const std::string& response) {
  canned_[prompt] = response;
}

std::string MockChatBackend::extract_source_sentence(const std::string& prompt) {
  const std::string marker = " SOURCE: ";
  size_t pos = prompt.find(marker);
  if (pos == std::string::npos) return "";
  size_t start = pos + marker.size();
  size_t end = prompt.find('\n', start);
  if (end == std::string::npos) end = prompt.size();
  return prompt.substr(start, end - start);
}

std::string MockChatBackend::complete(const std::string& prompt, const GenerationParams&) {
  auto it = canned_.find(prompt);
  if (it != canned_.end()) return it->second;
  return extract_source_sentence(prompt);
}

HttpChatBackend::Config HttpChatBackend::from_environment() {
  Config cfg;
  if (const char* v = std::getenv("MTFUSE_LLM_ENDPOINT")) cfg.endpoint = v;
  if (const char* v = std::getenv("MTFUSE_LLM_TOKEN")) cfg.token = v;
  if (const char* v = std::getenv("MTFUSE_LLM_MODEL")) cfg.model = v;
  if (cfg.endpoint.empty()) {
    fail(ErrorKind::config, "MTFUSE_LLM_ENDPOINT is not set");
  }
  return cfg;
}

HttpChatBackend::HttpChatBackend(Config config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) fail(ErrorKind::config, "backend endpoint is empty");
}

std::string HttpChatBackend::complete(const std::string& prompt, const GenerationParams& params) {
  // split the endpoint into host part and route
  std::string url = config_.endpoint;
  size_t scheme = url.find("://");
  size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string route = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(base);
  client.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

  json body = {
      {"model", config_.model},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
  };
  auto res = client.Post(route, headers, body.dump(), "application/json");
  if (!res) {
    fail(ErrorKind::transport, "no response from " + config_.endpoint);
  }
  if (res->status != 200) {
    fail(ErrorKind::transport,
         "backend returned status " + std::to_string(res->status) + ": " + res->body);
  }
  json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
      !reply["choices"][0].contains("message")) {
    fail(ErrorKind::transport, "malformed completion response");
  }
  return reply["choices"][0]["message"].value("content", "");
}

// ---------------------------------------------------------------------------
// cache

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !file_exists(path_)) return;
  for (const auto& line : read_lines(path_)) {
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.contains("key") || !record.contains("value")) {
      fail(ErrorKind::format, "corrupt cache line in " + path_);
    }
    entries_[record["key"].get<std::string>()] = record["value"].get<std::string>();
  }
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const std::string& key, const std::string& backend_identity,
                          const std::string& prompt, const GenerationParams& params,
                          const std::string& value) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = entries_.emplace(key, value);
  if (!inserted) return;  // identical by construction; keep the first record
  if (!path_.empty()) {
    json record = {
        {"key", key},
        {"backend", backend_identity},
        {"params", {{"temperature", params.temperature}}},
        {"prompt", prompt},
        {"value", value},
        {"ts", static_cast<long long>(std::time(nullptr))},
    };
    append_line(path_, record.dump());
  }
}

size_t ResponseCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

std::string ResponseCache::digest(const std::string& backend_identity, const std::string& prompt,
                                  const GenerationParams& params) {
  char param_buf[64];
  std::snprintf(param_buf, sizeof param_buf, "t=%.17g", params.temperature);
  std::string material = backend_identity;
  material += '\x1f';
  material += prompt;
  material += '\x1f';
  material += param_buf;

  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (EVP_Digest(material.data(), material.size(), md, &md_len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::internal, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(md_len * 2);
  for (unsigned int i = 0; i < md_len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

TranslationPipeline::TranslationPipeline(std::shared_ptr<ChatBackend> backend,
                                         std::shared_ptr<ResponseCache> cache)
    : TranslationPipeline(std::move(backend), std::move(cache), Options{}) {}

TranslationPipeline::TranslationPipeline(std::shared_ptr<ChatBackend> backend,
                                         std::shared_ptr<ResponseCache> cache, Options options)
    : backend_(std::move(backend)), cache_(std::move(cache)), options_(options) {
  if (!backend_) fail(ErrorKind::config, "pipeline needs a backend");
  if (!cache_) cache_ = std::make_shared<ResponseCache>("");
  if (options_.max_in_flight < 1) fail(ErrorKind::config, "max_in_flight must be >= 1");
  if (options_.retry.max_attempts < 1) fail(ErrorKind::config, "retry budget must be >= 1");
  slots_ = std::make_unique<std::counting_semaphore<>>(options_.max_in_flight);
}

std::string TranslationPipeline::complete_with_retries(const std::string& prompt) {
  std::string last_error;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    {
      std::lock_guard<std::mutex> lock(counter_mutex_);
      counters_.backend_attempts += 1;
    }
    try {
      return backend_->complete(prompt, options_.params);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    if (attempt < options_.retry.max_attempts && options_.retry.base_delay_ms > 0) {
      int delay = options_.retry.base_delay_ms << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
  }
  fail(ErrorKind::transport, "backend failed after " + std::to_string(options_.retry.max_attempts) +
                                 " attempts: " + last_error);
}

std::string TranslationPipeline::complete_cached(const std::string& prompt) {
  const std::string key = ResponseCache::digest(backend_->identity(), prompt, options_.params);

  std::shared_future<std::string> future;
  std::promise<std::string> promise;
  bool owner = false;
  {
    std::lock_guard<std::mutex> lock(inflight_mutex_);
    if (auto hit = cache_->lookup(key)) {
      std::lock_guard<std::mutex> clock(counter_mutex_);
      counters_.cache_hits += 1;
      return *hit;
    }
    auto it = inflight_.find(key);
    if (it != inflight_.end()) {
      future = it->second;
    } else {
      future = promise.get_future().share();
      inflight_.emplace(key, future);
      owner = true;
    }
  }

  if (!owner) return future.get();

  try {
    slots_->acquire();
    std::string value;
    try {
      value = complete_with_retries(prompt);
    } catch (...) {
      slots_->release();
      throw;
    }
    slots_->release();
    {
      std::lock_guard<std::mutex> lock(counter_mutex_);
      counters_.backend_calls += 1;
    }
    cache_->store(key, backend_->identity(), prompt, options_.params, value);
    {
      std::lock_guard<std::mutex> lock(inflight_mutex_);
      inflight_.erase(key);
    }
    promise.set_value(value);
    return value;
  } catch (...) {
    {
      std::lock_guard<std::mutex> lock(inflight_mutex_);
      inflight_.erase(key);
    }
    promise.set_exception(std::current_exception());
    throw;
  }
}

std::string postprocess_completion(const std::string& raw) {
  size_t begin = 0, end = raw.size();
  auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (begin < end && is_space(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string s = raw.substr(begin, end - begin);

  auto strip_pair = [&s](const std::string& open, const std::string& close) {
    if (s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
        s.compare(s.size() - close.size(), close.size(), close) == 0) {
      s = s.substr(open.size(), s.size() - open.size() - close.size());
      return true;
    }
    return false;
  };
  strip_pair("\"", "\"") || strip_pair("'", "'") ||
      strip_pair("\xE2\x80\x9C", "\xE2\x80\x9D");  // typographic double quotes
  return s;
}

std::string TranslationPipeline::translate_direct(const TranslationJob& job) {
  if (job.mode != JobMode::direct) fail(ErrorKind::validation, "job mode is not direct");
  if (!job.contexts.empty()) fail(ErrorKind::validation, "direct jobs take no contexts");
  std::string prompt =
      render_prompt(job.source_language, job.target_language, job.source_sentence, {});
  return postprocess_completion(complete_cached(prompt));
}

std::string TranslationPipeline::translate_contextual(const TranslationJob& job) {
  if (job.mode != JobMode::contextual) fail(ErrorKind::validation, "job mode is not contextual");
  if (job.contexts.empty()) {
    fail(ErrorKind::validation, "contextual jobs need at least one context");
  }
  std::string prompt =
      render_prompt(job.source_language, job.target_language, job.source_sentence, job.contexts);
  return postprocess_completion(complete_cached(prompt));
}

TranslationPipeline::SequentialResult TranslationPipeline::translate_sequential(
    const TranslationJob& job) {
  if (job.mode != JobMode::sequential) fail(ErrorKind::validation, "job mode is not sequential");
  if (job.context_languages.empty()) {
    fail(ErrorKind::validation, "sequential jobs need at least one context language");
  }

  SequentialResult result;
  for (size_t i = 0; i < job.context_languages.size(); ++i) {
    const std::string& context_language = job.context_languages[i];
    try {
      std::string prompt =
          render_prompt(job.source_language, context_language, job.source_sentence, {});
      result.intermediates.emplace_back(context_language,
                                        postprocess_completion(complete_cached(prompt)));
    } catch (const Error& e) {
      fail(e.kind(), "sequential step " + std::to_string(i + 1) + " (into " + context_language +
                         ") failed: " + e.what());
    }
  }

  try {
    std::string prompt = render_prompt(job.source_language, job.target_language,
                                       job.source_sentence, result.intermediates);
    result.final_translation = postprocess_completion(complete_cached(prompt));
  } catch (const Error& e) {
    fail(e.kind(), std::string("sequential final step failed: ") + e.what());
  }
  return result;
}

PipelineCounters TranslationPipeline::counters() const {
  std::lock_guard<std::mutex> lock(counter_mutex_);
  return counters_;
}

}  // namespace mtfuse
