#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mtfuse/corpus.hpp"
#include "mtfuse/model.hpp"
#include "mtfuse/tokenizer.hpp"

namespace mtfuse {

// Desk-scale multilingual encoder-decoder transformer. Pre-LN residual
// blocks, sinusoidal positions, shared input embedding, all math in float32.
// One instance serves every language direction: the source carries its own
// language tag and the decoder prefix is BOS followed by the target tag.
class TransformerModel : public TranslationModel {
 public:
  using Mat = Eigen::MatrixXf;

  TransformerModel(ModelConfig config, Vocab vocab);  // seeded deterministic init

  std::vector<float> next_token_logprobs(const TokenSeq& source,
                                         const TokenSeq& prefix) const override;

  // Row t is the log-probability vector conditioned on prefix[0..t]; used by
  // training, the causality tests and teacher-forced accuracy.
  std::vector<std::vector<float>> next_token_logprobs_all(const TokenSeq& source,
                                                          const TokenSeq& prefix) const;

  const Vocab& vocab() const override { return vocab_; }
  const ModelConfig& config() const { return config_; }

  // Teacher-forced cross-entropy of one (source, target) pair; target is a
  // tag-led encoded sequence, BOS and EOS are added internally. The loss at
  // position 0 (predicting the target tag from BOS) is excluded.
  double example_loss(const TokenSeq& source, const TokenSeq& target) const;

  // One plain-SGD update on a single example; returns the pre-update loss.
  double sgd_step(const TokenSeq& source, const TokenSeq& target, float learning_rate);

  // Named views over every parameter matrix, in serialization order.
  std::vector<std::pair<std::string, Mat*>> parameter_blocks();

  std::string model_type() const override { return "transformer"; }
  void serialize(BinaryWriter& out) const override;
  static std::unique_ptr<TransformerModel> deserialize(Vocab vocab, BinaryReader& in);

 private:
  struct Workspace;
  void forward_logits(const TokenSeq& source, const TokenSeq& prefix, Workspace& ws) const;
  void check_lengths(const TokenSeq& source, const TokenSeq& prefix) const;

  ModelConfig config_;
  Vocab vocab_;

  struct LayerNorm {
    Mat gain, bias;  // [1 x d]
  };
  struct Attention {
    Mat wq, wk, wv, wo;  // [d x d]
  };
  struct Ffn {
    Mat w1, b1, w2, b2;  // [d x f], [1 x f], [f x d], [1 x d]
  };
  struct EncoderLayer {
    LayerNorm ln1, ln2;
    Attention attn;
    Ffn ffn;
  };
  struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    Attention self_attn, cross_attn;
    Ffn ffn;
  };

  Mat embed_;  // [V x d]
  std::vector<EncoderLayer> enc_;
  std::vector<DecoderLayer> dec_;
  LayerNorm enc_final_, dec_final_;
  Mat out_w_;  // [d x V]
  Mat out_b_;  // [1 x V]
  Mat positions_;  // [max_seq_len x d], fixed sinusoidal table
};

struct TrainResult {
  std::unique_ptr<TransformerModel> model;
  double heldout_accuracy = 0.0;   // teacher-forced next-token accuracy
  long long heldout_tokens = 0;    // positions the accuracy was measured on
  bool heldout_is_training_data = false;  // true when the corpus was too small to split
  double final_epoch_loss = 0.0;
  long long train_examples = 0;
};

// Token-level cross-entropy with teacher forcing, plain SGD with a fixed
// learning rate, deterministic given config.seed. Rows 9, 19, 29, ... are
// held out for accuracy measurement; the rest are the training set.
TrainResult train_model(const ModelConfig& config, const BpeModel& bpe,
                        const MultiParallelCorpus& corpus,
                        const std::vector<std::pair<std::string, std::string>>& pairs,
                        int epochs, double learning_rate);

}  // namespace mtfuse
