#include "mtfuse/transformer.hpp"

#include <cmath>
#include <numeric>

#include "mtfuse/rng.hpp"

namespace mtfuse {

namespace {
constexpr float kLnEpsilon = 1e-5f;
constexpr float kMaskValue = -1e30f;
}  // namespace

// ---------------------------------------------------------------------------
// construction

TransformerModel::TransformerModel(ModelConfig config, Vocab vocab)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  const int d = config_.embed_dim;
  const int f = config_.ff_dim;
  const int v = vocab_.size();

  auto ln = [&] { return LayerNorm{Mat(1, d), Mat(1, d)}; };
  auto attn = [&] { return Attention{Mat(d, d), Mat(d, d), Mat(d, d), Mat(d, d)}; };
  auto ffn = [&] { return Ffn{Mat(d, f), Mat(1, f), Mat(f, d), Mat(1, d)}; };

  embed_ = Mat(v, d);
  for (int l = 0; l < config_.encoder_layers; ++l) enc_.push_back({ln(), ln(), attn(), ffn()});
  for (int l = 0; l < config_.decoder_layers; ++l) {
    dec_.push_back({ln(), ln(), ln(), attn(), attn(), ffn()});
  }
  enc_final_ = ln();
  dec_final_ = ln();
  out_w_ = Mat(d, v);
  out_b_ = Mat(1, v);

  // deterministic init: Xavier-uniform weights, unit gains, zero biases,
  // filled in parameter_blocks order from one SplitMix64 stream
  SplitMix64 rng(SplitMix64::derive(config_.seed, 0x7F17u));
  for (auto& [name, mat] : parameter_blocks()) {
    bool is_gain = name.size() >= 4 && name.compare(name.size() - 4, 4, "gain") == 0;
    bool is_bias = mat->rows() == 1 && !is_gain;
    if (is_gain) {
      mat->setOnes();
    } else if (is_bias) {
      mat->setZero();
    } else {
      float limit = std::sqrt(6.0f / static_cast<float>(mat->rows() + mat->cols()));
      float* data = mat->data();
      for (long i = 0; i < mat->size(); ++i) {
        data[i] = static_cast<float>(rng.next_uniform(-limit, limit));
      }
    }
  }

  positions_ = Mat(config_.max_seq_len, d);
  for (int p = 0; p < config_.max_seq_len; ++p) {
    for (int i = 0; 2 * i < d; ++i) {
      double omega = std::pow(10000.0, -2.0 * i / d);
      positions_(p, 2 * i) = static_cast<float>(std::sin(p * omega));
      if (2 * i + 1 < d) positions_(p, 2 * i + 1) = static_cast<float>(std::cos(p * omega));
    }
  }
}

std::vector<std::pair<std::string, TransformerModel::Mat*>> TransformerModel::parameter_blocks() {
  std::vector<std::pair<std::string, Mat*>> blocks;
  auto add_ln = [&](const std::string& base, LayerNorm& ln) {
    blocks.emplace_back(base + ".gain", &ln.gain);
    blocks.emplace_back(base + ".bias", &ln.bias);
  };
  auto add_attn = [&](const std::string& base, Attention& a) {
    blocks.emplace_back(base + ".wq", &a.wq);
    blocks.emplace_back(base + ".wk", &a.wk);
    blocks.emplace_back(base + ".wv", &a.wv);
    blocks.emplace_back(base + ".wo", &a.wo);
  };
  auto add_ffn = [&](const std::string& base, Ffn& f) {
    blocks.emplace_back(base + ".w1", &f.w1);
    blocks.emplace_back(base + ".b1", &f.b1);
    blocks.emplace_back(base + ".w2", &f.w2);
    blocks.emplace_back(base + ".b2", &f.b2);
  };

  blocks.emplace_back("embed", &embed_);
  for (size_t l = 0; l < enc_.size(); ++l) {
    std::string base = "enc" + std::to_string(l);
    add_ln(base + ".ln1", enc_[l].ln1);
    add_attn(base + ".attn", enc_[l].attn);
    add_ln(base + ".ln2", enc_[l].ln2);
    add_ffn(base + ".ffn", enc_[l].ffn);
  }
  add_ln("enc_final", enc_final_);
  for (size_t l = 0; l < dec_.size(); ++l) {
    std::string base = "dec" + std::to_string(l);
    add_ln(base + ".ln1", dec_[l].ln1);
    add_attn(base + ".self", dec_[l].self_attn);
    add_ln(base + ".ln2", dec_[l].ln2);
    add_attn(base + ".cross", dec_[l].cross_attn);
    add_ln(base + ".ln3", dec_[l].ln3);
    add_ffn(base + ".ffn", dec_[l].ffn);
  }
  add_ln("dec_final", dec_final_);
  blocks.emplace_back("out_w", &out_w_);
  blocks.emplace_back("out_b", &out_b_);
  return blocks;
}

// ---------------------------------------------------------------------------
// forward

namespace {

struct LnCache {
  Eigen::MatrixXf xhat;
  Eigen::VectorXf inv_std;
  Eigen::MatrixXf out;
};

struct AttnCache {
  Eigen::MatrixXf q, k, v, o;       // o is the pre-projection concat
  std::vector<Eigen::MatrixXf> a;   // one [n x m] per head
  Eigen::MatrixXf out;
};

struct FfnCache {
  Eigen::MatrixXf h;  // post-ReLU
  Eigen::MatrixXf out;
};

struct EncLayerCache {
  Eigen::MatrixXf x_in, x_mid;
  LnCache ln1, ln2;
  AttnCache attn;
  FfnCache ffn;
};

struct DecLayerCache {
  Eigen::MatrixXf y_in, y_mid1, y_mid2;
  LnCache ln1, ln2, ln3;
  AttnCache self_a, cross_a;
  FfnCache ffn;
};

}  // namespace

struct TransformerModel::Workspace {
  Mat enc_x, dec_x;
  std::vector<EncLayerCache> enc;
  LnCache enc_final;
  Mat memory;
  std::vector<DecLayerCache> dec;
  LnCache dec_final;
  Mat logits;
};

namespace {

void ln_forward(const Eigen::MatrixXf& x, const Eigen::MatrixXf& gain,
                const Eigen::MatrixXf& bias, LnCache& c) {
  const long n = x.rows(), d = x.cols();
  c.xhat.resize(n, d);
  c.inv_std.resize(n);
  for (long i = 0; i < n; ++i) {
    float mu = x.row(i).mean();
    float var = (x.row(i).array() - mu).square().mean();
    float istd = 1.0f / std::sqrt(var + kLnEpsilon);
    c.inv_std(i) = istd;
    c.xhat.row(i) = (x.row(i).array() - mu) * istd;
  }
  c.out = (c.xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

// dgain/dbias accumulate; returns dx
Eigen::MatrixXf ln_backward(const Eigen::MatrixXf& dy, const LnCache& c,
                            const Eigen::MatrixXf& gain, Eigen::MatrixXf& dgain,
                            Eigen::MatrixXf& dbias) {
  using RowArray = Eigen::Array<float, 1, Eigen::Dynamic>;
  const long n = dy.rows(), d = dy.cols();
  dgain.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Eigen::MatrixXf dx(n, d);
  for (long i = 0; i < n; ++i) {
    RowArray dxhat = dy.row(i).array() * gain.row(0).array();
    RowArray xh = c.xhat.row(i).array();
    float m1 = dxhat.mean();
    float m2 = (dxhat * xh).mean();
    dx.row(i) = ((dxhat - m1 - xh * m2) * c.inv_std(i)).matrix();
  }
  return dx;
}

void softmax_rows(Eigen::MatrixXf& s) {
  for (long i = 0; i < s.rows(); ++i) {
    float mx = s.row(i).maxCoeff();
    Eigen::ArrayXf e = (s.row(i).array() - mx).exp();
    s.row(i) = (e / e.sum()).matrix();
  }
}

}  // namespace

void TransformerModel::check_lengths(const TokenSeq& source, const TokenSeq& prefix) const {
  check_query(vocab_, source, prefix, config_.max_seq_len);
}

void TransformerModel::forward_logits(const TokenSeq& source, const TokenSeq& prefix,
                                      Workspace& ws) const {
  const int d = config_.embed_dim;
  const int heads = config_.num_heads;
  const int dk = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dk));
  const float embed_scale = std::sqrt(static_cast<float>(d));

  auto embed_seq = [&](const TokenSeq& toks, Mat& x) {
    x.resize(static_cast<long>(toks.size()), d);
    for (size_t i = 0; i < toks.size(); ++i) {
      x.row(static_cast<long>(i)) =
          embed_.row(toks[i]) * embed_scale + positions_.row(static_cast<long>(i));
    }
  };

  auto attn_forward = [&](const Mat& q_in, const Mat& kv_in, const Attention& p, bool causal,
                          AttnCache& c) {
    const long n = q_in.rows(), m = kv_in.rows();
    c.q = q_in * p.wq;
    c.k = kv_in * p.wk;
    c.v = kv_in * p.wv;
    c.o.resize(n, d);
    c.a.assign(static_cast<size_t>(heads), Mat());
    for (int h = 0; h < heads; ++h) {
      Mat s = (c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose()) * scale;
      if (causal) {
        for (long i = 0; i < n; ++i) {
          for (long j = i + 1; j < m; ++j) s(i, j) = kMaskValue;
        }
      }
      softmax_rows(s);
      c.o.middleCols(h * dk, dk) = s * c.v.middleCols(h * dk, dk);
      c.a[static_cast<size_t>(h)] = std::move(s);
    }
    c.out = c.o * p.wo;
  };

  auto ffn_forward = [&](const Mat& x, const Ffn& p, FfnCache& c) {
    c.h = ((x * p.w1).rowwise() + p.b1.row(0)).cwiseMax(0.0f);
    c.out = (c.h * p.w2).rowwise() + p.b2.row(0);
  };

  // encoder
  embed_seq(source, ws.enc_x);
  ws.enc.assign(enc_.size(), {});
  Mat x = ws.enc_x;
  for (size_t l = 0; l < enc_.size(); ++l) {
    auto& cache = ws.enc[l];
    const auto& p = enc_[l];
    cache.x_in = x;
    ln_forward(x, p.ln1.gain, p.ln1.bias, cache.ln1);
    attn_forward(cache.ln1.out, cache.ln1.out, p.attn, /*causal=*/false, cache.attn);
    cache.x_mid = x + cache.attn.out;
    ln_forward(cache.x_mid, p.ln2.gain, p.ln2.bias, cache.ln2);
    ffn_forward(cache.ln2.out, p.ffn, cache.ffn);
    x = cache.x_mid + cache.ffn.out;
  }
  ln_forward(x, enc_final_.gain, enc_final_.bias, ws.enc_final);
  ws.memory = ws.enc_final.out;

  // decoder
  embed_seq(prefix, ws.dec_x);
  ws.dec.assign(dec_.size(), {});
  Mat y = ws.dec_x;
  for (size_t l = 0; l < dec_.size(); ++l) {
    auto& cache = ws.dec[l];
    const auto& p = dec_[l];
    cache.y_in = y;
    ln_forward(y, p.ln1.gain, p.ln1.bias, cache.ln1);
    attn_forward(cache.ln1.out, cache.ln1.out, p.self_attn, /*causal=*/true, cache.self_a);
    cache.y_mid1 = y + cache.self_a.out;
    ln_forward(cache.y_mid1, p.ln2.gain, p.ln2.bias, cache.ln2);
    attn_forward(cache.ln2.out, ws.memory, p.cross_attn, /*causal=*/false, cache.cross_a);
    cache.y_mid2 = cache.y_mid1 + cache.cross_a.out;
    ln_forward(cache.y_mid2, p.ln3.gain, p.ln3.bias, cache.ln3);
    ffn_forward(cache.ln3.out, p.ffn, cache.ffn);
    y = cache.y_mid2 + cache.ffn.out;
  }
  ln_forward(y, dec_final_.gain, dec_final_.bias, ws.dec_final);
  ws.logits = (ws.dec_final.out * out_w_).rowwise() + out_b_.row(0);
}

namespace {

std::vector<float> log_softmax_row(const Eigen::MatrixXf& logits, long row) {
  const long v = logits.cols();
  float mx = logits.row(row).maxCoeff();
  double sum = 0.0;
  for (long j = 0; j < v; ++j) sum += std::exp(static_cast<double>(logits(row, j)) - mx);
  double lse = static_cast<double>(mx) + std::log(sum);
  std::vector<float> out(static_cast<size_t>(v));
  for (long j = 0; j < v; ++j) {
    out[static_cast<size_t>(j)] = static_cast<float>(static_cast<double>(logits(row, j)) - lse);
  }
  return out;
}

}  // namespace

std::vector<float> TransformerModel::next_token_logprobs(const TokenSeq& source,
                                                         const TokenSeq& prefix) const {
  check_lengths(source, prefix);
  Workspace ws;
  forward_logits(source, prefix, ws);
  return log_softmax_row(ws.logits, ws.logits.rows() - 1);
}

std::vector<std::vector<float>> TransformerModel::next_token_logprobs_all(
    const TokenSeq& source, const TokenSeq& prefix) const {
  check_lengths(source, prefix);
  Workspace ws;
  forward_logits(source, prefix, ws);
  std::vector<std::vector<float>> out;
  out.reserve(static_cast<size_t>(ws.logits.rows()));
  for (long i = 0; i < ws.logits.rows(); ++i) out.push_back(log_softmax_row(ws.logits, i));
  return out;
}

// ---------------------------------------------------------------------------
// training

namespace {

void build_teacher(const TokenSeq& target, const Vocab& vocab, TokenSeq& dec_in,
                   TokenSeq& targets) {
  if (target.empty()) fail(ErrorKind::validation, "target sequence is empty");
  if (!vocab.is_language_tag(target.front())) {
    fail(ErrorKind::validation, "target must begin with its language tag");
  }
  dec_in.clear();
  dec_in.push_back(vocab.bos());
  dec_in.insert(dec_in.end(), target.begin(), target.end());
  targets = target;
  targets.push_back(vocab.eos());
}

}  // namespace

double TransformerModel::example_loss(const TokenSeq& source, const TokenSeq& target) const {
  TokenSeq dec_in, targets;
  build_teacher(target, vocab_, dec_in, targets);
  check_lengths(source, dec_in);
  Workspace ws;
  forward_logits(source, dec_in, ws);

  // mean CE over positions 1..end (position 0 predicts the forced tag)
  double loss = 0.0;
  long count = 0;
  for (size_t t = 1; t < targets.size(); ++t) {
    long row = static_cast<long>(t);
    float mx = ws.logits.row(row).maxCoeff();
    double sum = 0.0;
    for (long j = 0; j < ws.logits.cols(); ++j) {
      sum += std::exp(static_cast<double>(ws.logits(row, j)) - mx);
    }
    double lse = static_cast<double>(mx) + std::log(sum);
    loss += lse - static_cast<double>(ws.logits(row, targets[t]));
    ++count;
  }
  return loss / static_cast<double>(count);
}

double TransformerModel::sgd_step(const TokenSeq& source, const TokenSeq& target,
                                  float learning_rate) {
  TokenSeq dec_in, targets;
  build_teacher(target, vocab_, dec_in, targets);
  check_lengths(source, dec_in);
  Workspace ws;
  forward_logits(source, dec_in, ws);

  const int d = config_.embed_dim;
  const int heads = config_.num_heads;
  const int dk = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dk));
  const float embed_scale = std::sqrt(static_cast<float>(d));
  const long n_dec = ws.logits.rows();
  const long v = ws.logits.cols();

  // loss and dlogits
  const long count = static_cast<long>(targets.size()) - 1;
  double loss = 0.0;
  Mat dlogits = Mat::Zero(n_dec, v);
  for (size_t t = 1; t < targets.size(); ++t) {
    long row = static_cast<long>(t);
    float mx = ws.logits.row(row).maxCoeff();
    Eigen::ArrayXf e = (ws.logits.row(row).array() - mx).exp();
    float z = e.sum();
    loss += static_cast<double>(mx) + std::log(static_cast<double>(z)) -
            static_cast<double>(ws.logits(row, targets[t]));
    dlogits.row(row) = (e / z).matrix() / static_cast<float>(count);
    dlogits(row, targets[t]) -= 1.0f / static_cast<float>(count);
  }
  loss /= static_cast<double>(count);

  // gradient buffers mirror the parameter structure
  auto zeros_like = [](const Mat& m) { return Mat::Zero(m.rows(), m.cols()).eval(); };
  struct GradSet {
    Mat embed;
    std::vector<EncoderLayer> enc;
    std::vector<DecoderLayer> dec;
    LayerNorm enc_final, dec_final;
    Mat out_w, out_b;
  } g;
  g.embed = zeros_like(embed_);
  auto zln = [&](const LayerNorm& p) { return LayerNorm{zeros_like(p.gain), zeros_like(p.bias)}; };
  auto zattn = [&](const Attention& p) {
    return Attention{zeros_like(p.wq), zeros_like(p.wk), zeros_like(p.wv), zeros_like(p.wo)};
  };
  auto zffn = [&](const Ffn& p) {
    return Ffn{zeros_like(p.w1), zeros_like(p.b1), zeros_like(p.w2), zeros_like(p.b2)};
  };
  for (const auto& p : enc_) g.enc.push_back({zln(p.ln1), zln(p.ln2), zattn(p.attn), zffn(p.ffn)});
  for (const auto& p : dec_) {
    g.dec.push_back({zln(p.ln1), zln(p.ln2), zln(p.ln3), zattn(p.self_attn), zattn(p.cross_attn),
                     zffn(p.ffn)});
  }
  g.enc_final = zln(enc_final_);
  g.dec_final = zln(dec_final_);
  g.out_w = zeros_like(out_w_);
  g.out_b = zeros_like(out_b_);

  auto attn_backward = [&](const Mat& dout, const AttnCache& c, const Mat& q_in, const Mat& kv_in,
                           const Attention& p, Attention& gp, Mat& dq_in, Mat& dkv_in) {
    const long n = q_in.rows(), m = kv_in.rows();
    gp.wo += c.o.transpose() * dout;
    Mat dO = dout * p.wo.transpose();
    Mat dQ = Mat::Zero(n, d), dK = Mat::Zero(m, d), dV = Mat::Zero(m, d);
    for (int h = 0; h < heads; ++h) {
      const Mat& A = c.a[static_cast<size_t>(h)];
      auto dOh = dO.middleCols(h * dk, dk);
      auto Vh = c.v.middleCols(h * dk, dk);
      Mat dA = dOh * Vh.transpose();
      dV.middleCols(h * dk, dk) = A.transpose() * dOh;
      // softmax backward per row
      Mat dS(n, m);
      for (long i = 0; i < n; ++i) {
        float rowdot = (dA.row(i).array() * A.row(i).array()).sum();
        dS.row(i) = (A.row(i).array() * (dA.row(i).array() - rowdot)).matrix();
      }
      dS *= scale;
      dQ.middleCols(h * dk, dk) = dS * c.k.middleCols(h * dk, dk);
      dK.middleCols(h * dk, dk) = dS.transpose() * c.q.middleCols(h * dk, dk);
    }
    gp.wq += q_in.transpose() * dQ;
    gp.wk += kv_in.transpose() * dK;
    gp.wv += kv_in.transpose() * dV;
    dq_in = dQ * p.wq.transpose();
    dkv_in = dK * p.wk.transpose() + dV * p.wv.transpose();
  };

  auto ffn_backward = [&](const Mat& dout, const FfnCache& c, const Mat& x_in, const Ffn& p,
                          Ffn& gp) {
    Mat dh = dout * p.w2.transpose();
    gp.w2 += c.h.transpose() * dout;
    gp.b2.row(0) += dout.colwise().sum();
    Mat dpre = (dh.array() * (c.h.array() > 0.0f).cast<float>()).matrix();
    gp.w1 += x_in.transpose() * dpre;
    gp.b1.row(0) += dpre.colwise().sum();
    return (dpre * p.w1.transpose()).eval();
  };

  // output layer
  Mat dyf = dlogits * out_w_.transpose();
  g.out_w += ws.dec_final.out.transpose() * dlogits;
  g.out_b.row(0) += dlogits.colwise().sum();

  // decoder stack
  Mat dmemory = Mat::Zero(ws.memory.rows(), d);
  Mat dy = ln_backward(dyf, ws.dec_final, dec_final_.gain, g.dec_final.gain, g.dec_final.bias);
  for (long l = static_cast<long>(dec_.size()) - 1; l >= 0; --l) {
    const auto& cache = ws.dec[static_cast<size_t>(l)];
    const auto& p = dec_[static_cast<size_t>(l)];
    auto& gp = g.dec[static_cast<size_t>(l)];

    // y_out = y_mid2 + ffn(ln3(y_mid2))
    Mat dln3_out = ffn_backward(dy, cache.ffn, cache.ln3.out, p.ffn, gp.ffn);
    Mat dmid2 = dy + ln_backward(dln3_out, cache.ln3, p.ln3.gain, gp.ln3.gain, gp.ln3.bias);

    // y_mid2 = y_mid1 + cross(ln2(y_mid1), memory)
    Mat dln2_out, dmem_part;
    attn_backward(dmid2, cache.cross_a, cache.ln2.out, ws.memory, p.cross_attn, gp.cross_attn,
                  dln2_out, dmem_part);
    dmemory += dmem_part;
    Mat dmid1 = dmid2 + ln_backward(dln2_out, cache.ln2, p.ln2.gain, gp.ln2.gain, gp.ln2.bias);

    // y_mid1 = y_in + self(ln1(y_in))
    Mat dq_part, dkv_part;
    attn_backward(dmid1, cache.self_a, cache.ln1.out, cache.ln1.out, p.self_attn, gp.self_attn,
                  dq_part, dkv_part);
    Mat dln1_out = dq_part + dkv_part;
    dy = dmid1 + ln_backward(dln1_out, cache.ln1, p.ln1.gain, gp.ln1.gain, gp.ln1.bias);
  }
  for (size_t i = 0; i < dec_in.size(); ++i) {
    g.embed.row(dec_in[i]) += dy.row(static_cast<long>(i)) * embed_scale;
  }

  // encoder stack
  Mat dx = ln_backward(dmemory, ws.enc_final, enc_final_.gain, g.enc_final.gain, g.enc_final.bias);
  for (long l = static_cast<long>(enc_.size()) - 1; l >= 0; --l) {
    const auto& cache = ws.enc[static_cast<size_t>(l)];
    const auto& p = enc_[static_cast<size_t>(l)];
    auto& gp = g.enc[static_cast<size_t>(l)];

    Mat dln2_out = ffn_backward(dx, cache.ffn, cache.ln2.out, p.ffn, gp.ffn);
    Mat dmid = dx + ln_backward(dln2_out, cache.ln2, p.ln2.gain, gp.ln2.gain, gp.ln2.bias);

    Mat dq_part, dkv_part;
    attn_backward(dmid, cache.attn, cache.ln1.out, cache.ln1.out, p.attn, gp.attn, dq_part,
                  dkv_part);
    Mat dln1_out = dq_part + dkv_part;
    dx = dmid + ln_backward(dln1_out, cache.ln1, p.ln1.gain, gp.ln1.gain, gp.ln1.bias);
  }
  for (size_t i = 0; i < source.size(); ++i) {
    g.embed.row(source[i]) += dx.row(static_cast<long>(i)) * embed_scale;
  }

  // SGD update
  const float lr = learning_rate;
  auto upd_ln = [&](LayerNorm& p, const LayerNorm& gp) {
    p.gain -= lr * gp.gain;
    p.bias -= lr * gp.bias;
  };
  auto upd_attn = [&](Attention& p, const Attention& gp) {
    p.wq -= lr * gp.wq;
    p.wk -= lr * gp.wk;
    p.wv -= lr * gp.wv;
    p.wo -= lr * gp.wo;
  };
  auto upd_ffn = [&](Ffn& p, const Ffn& gp) {
    p.w1 -= lr * gp.w1;
    p.b1 -= lr * gp.b1;
    p.w2 -= lr * gp.w2;
    p.b2 -= lr * gp.b2;
  };
  embed_ -= lr * g.embed;
  for (size_t l = 0; l < enc_.size(); ++l) {
    upd_ln(enc_[l].ln1, g.enc[l].ln1);
    upd_ln(enc_[l].ln2, g.enc[l].ln2);
    upd_attn(enc_[l].attn, g.enc[l].attn);
    upd_ffn(enc_[l].ffn, g.enc[l].ffn);
  }
  upd_ln(enc_final_, g.enc_final);
  for (size_t l = 0; l < dec_.size(); ++l) {
    upd_ln(dec_[l].ln1, g.dec[l].ln1);
    upd_ln(dec_[l].ln2, g.dec[l].ln2);
    upd_ln(dec_[l].ln3, g.dec[l].ln3);
    upd_attn(dec_[l].self_attn, g.dec[l].self_attn);
    upd_attn(dec_[l].cross_attn, g.dec[l].cross_attn);
    upd_ffn(dec_[l].ffn, g.dec[l].ffn);
  }
  upd_ln(dec_final_, g.dec_final);
  out_w_ -= lr * g.out_w;
  out_b_ -= lr * g.out_b;

  return loss;
}

// ---------------------------------------------------------------------------
// checkpointing

void TransformerModel::serialize(BinaryWriter& out) const {
  out.i32(config_.embed_dim);
  out.i32(config_.num_heads);
  out.i32(config_.ff_dim);
  out.i32(config_.encoder_layers);
  out.i32(config_.decoder_layers);
  out.i32(config_.max_seq_len);
  out.u64(config_.seed);
  auto blocks = const_cast<TransformerModel*>(this)->parameter_blocks();
  out.u32(static_cast<uint32_t>(blocks.size()));
  for (const auto& [name, mat] : blocks) {
    out.str(name);
    out.u32(static_cast<uint32_t>(mat->rows()));
    out.u32(static_cast<uint32_t>(mat->cols()));
    for (long i = 0; i < mat->size(); ++i) out.f32(mat->data()[i]);
  }
}

std::unique_ptr<TransformerModel> TransformerModel::deserialize(Vocab vocab, BinaryReader& in) {
  ModelConfig config;
  config.embed_dim = in.i32();
  config.num_heads = in.i32();
  config.ff_dim = in.i32();
  config.encoder_layers = in.i32();
  config.decoder_layers = in.i32();
  config.max_seq_len = in.i32();
  config.seed = in.u64();
  auto model = std::make_unique<TransformerModel>(config, std::move(vocab));
  auto blocks = model->parameter_blocks();
  uint32_t block_count = in.u32();
  if (block_count != blocks.size()) fail(ErrorKind::format, "checkpoint block count mismatch");
  for (auto& [name, mat] : blocks) {
    std::string file_name = in.str();
    uint32_t rows = in.u32(), cols = in.u32();
    if (file_name != name || rows != static_cast<uint32_t>(mat->rows()) ||
        cols != static_cast<uint32_t>(mat->cols())) {
      fail(ErrorKind::format, "checkpoint block mismatch at " + name);
    }
    for (long i = 0; i < mat->size(); ++i) mat->data()[i] = in.f32();
  }
  return model;
}

// ---------------------------------------------------------------------------
// training driver

TrainResult train_model(const ModelConfig& config, const BpeModel& bpe,
                        const MultiParallelCorpus& corpus,
                        const std::vector<std::pair<std::string, std::string>>& pairs,
                        int epochs, double learning_rate) {
  config.validate();
  corpus.validate();
  if (epochs < 0) fail(ErrorKind::config, "epochs must be >= 0");
  if (!(learning_rate > 0.0)) fail(ErrorKind::config, "learning rate must be positive");
  if (pairs.empty()) fail(ErrorKind::data, "no language pairs to train on");
  for (const auto& [src, tgt] : pairs) {
    if (corpus.language_index(src) < 0) fail(ErrorKind::data, "language absent from corpus: " + src);
    if (corpus.language_index(tgt) < 0) fail(ErrorKind::data, "language absent from corpus: " + tgt);
  }

  using Example = std::pair<TokenSeq, TokenSeq>;
  std::vector<Example> train, heldout;
  for (size_t row = 0; row < corpus.num_rows(); ++row) {
    bool hold = (row % 10 == 9);
    for (const auto& [src, tgt] : pairs) {
      TokenSeq s = bpe.encode(corpus.cell(row, src), src);
      TokenSeq t = bpe.encode(corpus.cell(row, tgt), tgt);
      if (static_cast<int>(s.size()) > config.max_seq_len ||
          static_cast<int>(t.size()) + 2 > config.max_seq_len) {
        continue;  // longer than the toy model admits
      }
      (hold ? heldout : train).emplace_back(std::move(s), std::move(t));
    }
  }
  if (train.empty()) fail(ErrorKind::data, "no usable training examples");

  TrainResult result;
  result.model = std::make_unique<TransformerModel>(config, bpe.vocab());
  result.train_examples = static_cast<long long>(train.size());

  SplitMix64 shuffle_rng(SplitMix64::derive(config.seed, 0x5D17u));
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const float lr = static_cast<float>(learning_rate);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.next_below(i + 1)]);
    }
    double epoch_loss = 0.0;
    for (size_t idx : order) {
      epoch_loss += result.model->sgd_step(train[idx].first, train[idx].second, lr);
    }
    result.final_epoch_loss = epoch_loss / static_cast<double>(order.size());
  }

  // teacher-forced next-token accuracy on the held-out rows
  const std::vector<Example>& eval_set = heldout.empty() ? train : heldout;
  result.heldout_is_training_data = heldout.empty();
  long long correct = 0, total = 0;
  const Vocab& vocab = bpe.vocab();
  for (const auto& [src, tgt] : eval_set) {
    TokenSeq dec_in;
    dec_in.push_back(vocab.bos());
    dec_in.insert(dec_in.end(), tgt.begin(), tgt.end());
    TokenSeq targets = tgt;
    targets.push_back(vocab.eos());
    auto rows = result.model->next_token_logprobs_all(src, dec_in);
    for (size_t t = 1; t < targets.size(); ++t) {
      const auto& lp = rows[t];
      size_t argmax = 0;
      for (size_t j = 1; j < lp.size(); ++j) {
        if (lp[j] > lp[argmax]) argmax = j;
      }
      correct += (static_cast<TokenId>(argmax) == targets[t]);
      ++total;
    }
  }
  result.heldout_tokens = total;
  result.heldout_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return result;
}

}  // namespace mtfuse
