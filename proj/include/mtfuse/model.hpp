#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mtfuse/io.hpp"
#include "mtfuse/vocab.hpp"

namespace mtfuse {

struct ModelConfig {
  int embed_dim = 64;
  int num_heads = 2;
  int ff_dim = 256;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_seq_len = 64;
  uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Conditional translation model: next-token log probabilities given a tagged
// source sequence and a BOS-led target prefix. Implementations are immutable
// after construction/loading; concurrent queries must be safe.
class TranslationModel {
 public:
  virtual ~TranslationModel() = default;

  // Returns a vector of length |vocab| whose exp sums to 1 (within 1e-5).
  // pre: source non-empty and starts with a language tag; prefix starts with
  // BOS; sequences within the model's length limit.
  virtual std::vector<float> next_token_logprobs(const TokenSeq& source,
                                                 const TokenSeq& prefix) const = 0;

  virtual const Vocab& vocab() const = 0;

  // checkpoint support
  virtual std::string model_type() const = 0;
  virtual void serialize(BinaryWriter& out) const = 0;

 protected:
  // Shared precondition checks; max_seq_len <= 0 disables the length check.
  void check_query(const Vocab& vocab, const TokenSeq& source, const TokenSeq& prefix,
                   int max_seq_len) const;
};

// Deterministic table-driven model used as the test oracle for fusion
// arithmetic: stores explicit log-probability vectors per (source, prefix)
// pair and falls back to the uniform distribution.
class MockTableModel : public TranslationModel {
 public:
  explicit MockTableModel(Vocab vocab) : vocab_(std::move(vocab)) {}

  // The vector must be a valid log-distribution: length |vocab| and
  // log-sum-exp 0 within 1e-6. ErrorKind::validation otherwise.
  void set_logprobs(const TokenSeq& source, const TokenSeq& prefix, std::vector<float> logprobs);

  std::vector<float> next_token_logprobs(const TokenSeq& source,
                                         const TokenSeq& prefix) const override;
  const Vocab& vocab() const override { return vocab_; }

  std::string model_type() const override { return "mock-table"; }
  void serialize(BinaryWriter& out) const override;
  static std::unique_ptr<MockTableModel> deserialize(Vocab vocab, BinaryReader& in);

  using Table = std::map<std::pair<TokenSeq, TokenSeq>, std::vector<float>>;
  const Table& table() const { return table_; }

 private:
  Vocab vocab_;
  Table table_;
};

// Checkpoint file: self-describing binary with a format-version field; see
// README for the layout. load(save(m)) answers every query identically.
void save_model(const TranslationModel& model, const std::string& path);
std::unique_ptr<TranslationModel> load_model(const std::string& path);

void serialize_vocab(const Vocab& vocab, BinaryWriter& out);
Vocab deserialize_vocab(BinaryReader& in);

}  // namespace mtfuse
