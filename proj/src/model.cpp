#include "mtfuse/model.hpp"

#include <cmath>

#include "mtfuse/transformer.hpp"

namespace mtfuse {

namespace {
constexpr char kMagic[] = "MTFZMODL";
constexpr uint32_t kFormatVersion = 1;
}  // namespace

void ModelConfig::validate() const {
  if (embed_dim < 1 || num_heads < 1 || ff_dim < 1) {
    fail(ErrorKind::config, "model dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) {
    fail(ErrorKind::config, "embed_dim must be divisible by num_heads");
  }
  if (encoder_layers < 1 || decoder_layers < 1) {
    fail(ErrorKind::config, "encoder_layers and decoder_layers must be >= 1");
  }
  if (max_seq_len < 2) fail(ErrorKind::config, "max_seq_len too small");
}

void TranslationModel::check_query(const Vocab& vocab, const TokenSeq& source,
                                   const TokenSeq& prefix, int max_seq_len) const {
  if (source.empty()) fail(ErrorKind::validation, "source sequence is empty");
  for (TokenId id : source) vocab.check_id(id);
  for (TokenId id : prefix) vocab.check_id(id);
  if (!vocab.is_language_tag(source.front())) {
    fail(ErrorKind::vocab, "source must begin with a language-tag token");
  }
  if (prefix.empty() || prefix.front() != vocab.bos()) {
    fail(ErrorKind::validation, "prefix must begin with BOS");
  }
  if (max_seq_len > 0) {
    if (static_cast<int>(source.size()) > max_seq_len ||
        static_cast<int>(prefix.size()) > max_seq_len) {
      fail(ErrorKind::length, "sequence exceeds max_seq_len " + std::to_string(max_seq_len));
    }
  }
}

void MockTableModel::set_logprobs(const TokenSeq& source, const TokenSeq& prefix,
                                  std::vector<float> logprobs) {
  if (static_cast<int>(logprobs.size()) != vocab_.size()) {
    fail(ErrorKind::validation, "log-probability vector length must equal vocabulary size");
  }
  double max = -1e300;
  for (float v : logprobs) max = std::max(max, static_cast<double>(v));
  double sum = 0.0;
  for (float v : logprobs) sum += std::exp(static_cast<double>(v) - max);
  double lse = max + std::log(sum);
  if (std::abs(lse) > 1e-6) {
    fail(ErrorKind::validation,
         "stored vector is not a log-distribution (log-sum-exp = " + std::to_string(lse) + ")");
  }
  table_[{source, prefix}] = std::move(logprobs);
}

std::vector<float> MockTableModel::next_token_logprobs(const TokenSeq& source,
                                                       const TokenSeq& prefix) const {
  check_query(vocab_, source, prefix, /*max_seq_len=*/0);
  auto it = table_.find({source, prefix});
  if (it != table_.end()) return it->second;
  float uniform = -std::log(static_cast<float>(vocab_.size()));
  return std::vector<float>(static_cast<size_t>(vocab_.size()), uniform);
}

void MockTableModel::serialize(BinaryWriter& out) const {
  out.u32(static_cast<uint32_t>(table_.size()));
  for (const auto& [key, value] : table_) {
    const auto& [source, prefix] = key;
    out.u32(static_cast<uint32_t>(source.size()));
    for (TokenId id : source) out.i32(id);
    out.u32(static_cast<uint32_t>(prefix.size()));
    for (TokenId id : prefix) out.i32(id);
    for (float v : value) out.f32(v);
  }
}

std::unique_ptr<MockTableModel> MockTableModel::deserialize(Vocab vocab, BinaryReader& in) {
  auto model = std::make_unique<MockTableModel>(std::move(vocab));
  uint32_t entries = in.u32();
  for (uint32_t e = 0; e < entries; ++e) {
    TokenSeq source(in.u32());
    for (auto& id : source) id = in.i32();
    TokenSeq prefix(in.u32());
    for (auto& id : prefix) id = in.i32();
    std::vector<float> value(static_cast<size_t>(model->vocab_.size()));
    for (auto& v : value) v = in.f32();
    model->table_[{std::move(source), std::move(prefix)}] = std::move(value);
  }
  return model;
}

void serialize_vocab(const Vocab& vocab, BinaryWriter& out) {
  out.u32(static_cast<uint32_t>(vocab.language_codes().size()));
  for (const auto& code : vocab.language_codes()) out.str(code);
  out.u32(static_cast<uint32_t>(vocab.size() - vocab.first_merged()));
  for (TokenId id = vocab.first_merged(); id < vocab.size(); ++id) {
    out.str(vocab.token_bytes(id));
  }
}

Vocab deserialize_vocab(BinaryReader& in) {
  uint32_t num_languages = in.u32();
  std::vector<std::string> codes;
  for (uint32_t i = 0; i < num_languages; ++i) codes.push_back(in.str());
  Vocab vocab = Vocab::build(codes);
  uint32_t merged = in.u32();
  for (uint32_t i = 0; i < merged; ++i) vocab.add_merged(in.str());
  return vocab;
}

void save_model(const TranslationModel& model, const std::string& path) {
  BinaryWriter out;
  out.raw(kMagic, 8);
  out.u32(kFormatVersion);
  out.str(model.model_type());
  serialize_vocab(model.vocab(), out);
  model.serialize(out);
  out.to_file(path);
}

std::unique_ptr<TranslationModel> load_model(const std::string& path) {
  BinaryReader in = BinaryReader::from_file(path);
  std::string magic(8, '\0');
  for (auto& c : magic) c = static_cast<char>(in.u8());
  if (magic != kMagic) fail(ErrorKind::format, "not a model checkpoint: " + path);
  uint32_t version = in.u32();
  if (version != kFormatVersion) {
    fail(ErrorKind::format, "unsupported checkpoint version " + std::to_string(version));
  }
  std::string type = in.str();
  Vocab vocab = deserialize_vocab(in);
  std::unique_ptr<TranslationModel> model;
  if (type == "mock-table") {
    model = MockTableModel::deserialize(std::move(vocab), in);
  } else if (type == "transformer") {
    model = TransformerModel::deserialize(std::move(vocab), in);
  } else {
    fail(ErrorKind::format, "unknown model type in checkpoint: " + type);
  }
  if (!in.at_end()) fail(ErrorKind::format, "trailing bytes in checkpoint: " + path);
  return model;
}

}  // namespace mtfuse
