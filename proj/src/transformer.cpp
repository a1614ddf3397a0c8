#include "headprobe/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "headprobe/errors.hpp"
#include "headprobe/rng.hpp"

namespace headprobe {

namespace {

constexpr double kInitRange = 0.02;
constexpr double kLayerNormEps = 1e-5;

// Planted circuit gains. With pre-norm, a trigger token's trigger channel and every
// token's constant channel normalize to roughly 5-8, so these produce near one-hot
// attention on triggers and a head output of a few units along the value channel.
constexpr double kQueryGain = 1.0;
constexpr double kKeyGain = 1.0;
constexpr double kValueGain = 0.5;
constexpr double kOutputGain = 1.0;
constexpr double kRefusalGain = 4.0;
constexpr double kChannelValue = 1.0;

// Head-space coordinates used by planted heads.
constexpr Eigen::Index kMatchChannel = 0;
constexpr Eigen::Index kValueChannel = 1;

// Residual channels reserved for the planted circuit.
struct ReservedChannels {
  Eigen::Index constant = 0;
  std::map<int, Eigen::Index> trigger;  // token -> channel
  std::map<int, Eigen::Index> refusal;

  explicit ReservedChannels(const ModelConfig& c) {
    Eigen::Index next = 1;
    for (int t : c.trigger_tokens()) trigger[t] = next++;
    for (int r : c.refusal_tokens()) refusal[r] = next++;
    count = next;
  }
  Eigen::Index count = 1;
};

template <typename Scalar>
void fill_uniform(MatrixX<Scalar>& m, SeededRng& rng) {
  // Row-major draw order; values are float-representable so the float32 container
  // round-trips them exactly.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = static_cast<Scalar>(static_cast<float>(rng.uniform(-kInitRange, kInitRange)));
    }
  }
}

template <typename Scalar>
MatrixX<Scalar> layer_norm_rows(const MatrixX<Scalar>& x, const VectorX<Scalar>& gain,
                                const VectorX<Scalar>& bias) {
  MatrixX<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    out.row(r) = (((x.row(r).array() - mean) * inv) * gain.transpose().array() +
                  bias.transpose().array())
                     .matrix();
  }
  return out;
}

template <typename Scalar>
void softmax_causal_rows(MatrixX<Scalar>& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const auto live = scores.row(i).head(i + 1);
    const Scalar m = live.maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      scores(i, j) = std::exp(scores(i, j) - m);
      sum += scores(i, j);
    }
    for (Eigen::Index j = 0; j <= i; ++j) scores(i, j) /= sum;
    for (Eigen::Index j = i + 1; j < scores.cols(); ++j) scores(i, j) = Scalar(0);
  }
}

template <typename Scalar>
void check(const MatrixX<Scalar>& m, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument("tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

}  // namespace

template <typename Scalar>
int ForwardTrace<Scalar>::greedy_token() const {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return static_cast<int>(best);
}

template <typename Scalar>
void ToyTransformer<Scalar>::check_shapes() const {
  config.validate();
  const Eigen::Index d = config.d_model;
  check<Scalar>(token_embedding, config.vocab_size, d, "token_embedding");
  check<Scalar>(position_embedding, config.max_seq_len, d, "position_embedding");
  if (blocks.size() != config.heads_per_layer.size()) {
    throw InvalidArgument("block count disagrees with config");
  }
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const Eigen::Index width = Eigen::Index(config.heads_per_layer[l]) * config.d_head;
    const std::string p = "blocks." + std::to_string(l) + ".";
    if (b.ln_gain.size() != d || b.ln_bias.size() != d) {
      throw InvalidArgument(p + "layer norm size mismatch");
    }
    check<Scalar>(b.wq, width, d, p + "wq");
    check<Scalar>(b.wk, width, d, p + "wk");
    check<Scalar>(b.wv, width, d, p + "wv");
    check<Scalar>(b.wo, d, width, p + "wo");
  }
  if (final_ln_gain.size() != d || final_ln_bias.size() != d) {
    throw InvalidArgument("final layer norm size mismatch");
  }
  check<Scalar>(unembedding, config.vocab_size, d, "unembedding");
}

template <typename Scalar>
void ToyTransformer<Scalar>::for_each_tensor(
    const std::function<void(const std::string&, MatrixX<Scalar>&)>& fn) {
  // Vectors are visited through a column-matrix view and copied back.
  const auto visit_vector = [&](const std::string& name, VectorX<Scalar>& v) {
    MatrixX<Scalar> m = v;
    fn(name, m);
    v = m;
  };
  fn("token_embedding", token_embedding);
  fn("position_embedding", position_embedding);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    auto& b = blocks[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    visit_vector(p + "ln_gain", b.ln_gain);
    visit_vector(p + "ln_bias", b.ln_bias);
    fn(p + "wq", b.wq);
    fn(p + "wk", b.wk);
    fn(p + "wv", b.wv);
    fn(p + "wo", b.wo);
  }
  visit_vector("final_ln_gain", final_ln_gain);
  visit_vector("final_ln_bias", final_ln_bias);
  fn("unembedding", unembedding);
}

template <typename Scalar>
void ToyTransformer<Scalar>::for_each_tensor(
    const std::function<void(const std::string&, const MatrixX<Scalar>&)>& fn) const {
  auto& self = const_cast<ToyTransformer&>(*this);
  self.for_each_tensor([&](const std::string& name, MatrixX<Scalar>& m) { fn(name, m); });
}

template <typename Scalar>
ToyTransformer<Scalar> build_planted_model(const ModelConfig& config) {
  config.validate();
  const Eigen::Index d = config.d_model;
  const Eigen::Index dh = config.d_head;
  SeededRng rng(config.seed);
  const ReservedChannels channels(config);

  ToyTransformer<Scalar> m;
  m.config = config;
  m.token_embedding.resize(config.vocab_size, d);
  fill_uniform(m.token_embedding, rng);
  m.position_embedding.resize(config.max_seq_len, d);
  fill_uniform(m.position_embedding, rng);
  for (int heads : config.heads_per_layer) {
    AttentionBlock<Scalar> b;
    const Eigen::Index width = Eigen::Index(heads) * dh;
    b.ln_gain = VectorX<Scalar>::Ones(d);
    b.ln_bias = VectorX<Scalar>::Zero(d);
    b.wq.resize(width, d);
    b.wk.resize(width, d);
    b.wv.resize(width, d);
    b.wo.resize(d, width);
    fill_uniform(b.wq, rng);
    fill_uniform(b.wk, rng);
    fill_uniform(b.wv, rng);
    fill_uniform(b.wo, rng);
    // Ordinary heads never write into the reserved channels.
    b.wo.topRows(channels.count).setZero();
    m.blocks.push_back(std::move(b));
  }
  m.final_ln_gain = VectorX<Scalar>::Ones(d);
  m.final_ln_bias = VectorX<Scalar>::Zero(d);
  m.unembedding.resize(config.vocab_size, d);
  fill_uniform(m.unembedding, rng);

  // Reserved channels: constant on every token, a trigger channel on its trigger token,
  // nothing from positions.
  m.token_embedding.leftCols(channels.count).setZero();
  m.position_embedding.leftCols(channels.count).setZero();
  m.token_embedding.col(channels.constant).setConstant(Scalar(kChannelValue));
  for (const auto& [token, ch] : channels.trigger) {
    m.token_embedding(token, ch) = Scalar(kChannelValue);
  }
  m.unembedding.leftCols(channels.count).setZero();
  for (const auto& [token, ch] : channels.refusal) {
    m.unembedding(token, ch) = Scalar(kRefusalGain);
  }

  for (const auto& dead : config.dead) {
    auto& b = m.blocks[static_cast<std::size_t>(dead.layer)];
    const Eigen::Index r0 = Eigen::Index(dead.head) * dh;
    b.wq.middleRows(r0, dh).setZero();
    b.wk.middleRows(r0, dh).setZero();
    b.wv.middleRows(r0, dh).setZero();
    b.wo.middleCols(r0, dh).setZero();
  }

  for (const auto& p : config.planted) {
    auto& b = m.blocks[static_cast<std::size_t>(p.head.layer)];
    const Eigen::Index r0 = Eigen::Index(p.head.head) * dh;
    const Eigen::Index trig = channels.trigger.at(p.trigger_token);
    const Eigen::Index ref = channels.refusal.at(p.refusal_token);
    b.wq.middleRows(r0, dh).setZero();
    b.wk.middleRows(r0, dh).setZero();
    b.wv.middleRows(r0, dh).setZero();
    b.wo.middleCols(r0, dh).setZero();
    b.wq(r0 + kMatchChannel, channels.constant) = Scalar(kQueryGain);
    b.wk(r0 + kMatchChannel, trig) = Scalar(kKeyGain);
    b.wv(r0 + kValueChannel, trig) = Scalar(kValueGain);
    b.wo(ref, r0 + kValueChannel) = Scalar(kOutputGain);
  }
  m.check_shapes();
  return m;
}

template <typename Scalar>
ForwardTrace<Scalar> forward(const ToyTransformer<Scalar>& model, std::span<const int> tokens,
                             std::span<const std::type_identity_t<Intervention<Scalar>>> interventions,
                             const ForwardOptions& options) {
  const auto& cfg = model.config;
  const HeadLayout layout = cfg.layout();
  const Eigen::Index T = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index dh = cfg.d_head;
  if (T == 0) throw InvalidArgument("forward: empty token sequence");
  if (T > cfg.max_seq_len) throw InvalidArgument("forward: sequence longer than max_seq_len");
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw InvalidArgument("forward: token " + std::to_string(t) + " outside vocabulary");
    }
  }

  std::vector<const Intervention<Scalar>*> hook(static_cast<std::size_t>(layout.total_heads()),
                                                nullptr);
  for (const auto& iv : interventions) {
    const auto idx = static_cast<std::size_t>(layout.index(iv.target));
    if (hook[idx] != nullptr) {
      throw InvalidArgument("conflicting interventions on head " + to_string(iv.target));
    }
    if (iv.kind == Intervention<Scalar>::Kind::ablate && iv.delta.size() != 0) {
      throw InvalidArgument("ablation must not carry a delta");
    }
    if (iv.kind == Intervention<Scalar>::Kind::inject && iv.delta.size() != dh) {
      throw InvalidArgument("injection delta must have dimension d_head");
    }
    hook[idx] = &iv;
  }

  ForwardTrace<Scalar> trace;
  trace.head_outputs.resize(layout.total_heads(), dh);
  trace.interventions.assign(interventions.begin(), interventions.end());
  if (options.record_attention) trace.attention.reserve(hook.size());

  MatrixX<Scalar> x(T, cfg.d_model);
  for (Eigen::Index t = 0; t < T; ++t) {
    x.row(t) = model.token_embedding.row(tokens[static_cast<std::size_t>(t)]) +
               model.position_embedding.row(t);
  }

  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  int global = 0;
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    const auto& b = model.blocks[l];
    const MatrixX<Scalar> xn = layer_norm_rows(x, b.ln_gain, b.ln_bias);
    const MatrixX<Scalar> q = xn * b.wq.transpose();
    const MatrixX<Scalar> k = xn * b.wk.transpose();
    const MatrixX<Scalar> v = xn * b.wv.transpose();
    MatrixX<Scalar> concat(T, b.wq.rows());

    const int heads = cfg.heads_per_layer[l];
    for (int h = 0; h < heads; ++h, ++global) {
      const Eigen::Index c0 = Eigen::Index(h) * dh;
      MatrixX<Scalar> scores = (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale;
      softmax_causal_rows(scores);
      MatrixX<Scalar> out = scores * v.middleCols(c0, dh);

      if (const auto* iv = hook[static_cast<std::size_t>(global)]) {
        const bool all = iv->scope == TokenScope::all;
        if (iv->kind == Intervention<Scalar>::Kind::ablate) {
          if (all) {
            out.setZero();
          } else {
            out.row(T - 1).setZero();
          }
        } else if (all) {
          out.rowwise() += iv->delta.transpose();
        } else {
          out.row(T - 1) += iv->delta.transpose();
        }
      }
      trace.head_outputs.row(global) = out.row(T - 1);
      concat.middleCols(c0, dh) = out;
      if (options.record_attention) trace.attention.push_back(std::move(scores));
    }
    x += concat * b.wo.transpose();
  }

  trace.final_hidden = x.row(T - 1).transpose();
  const MatrixX<Scalar> last = x.row(T - 1);
  const MatrixX<Scalar> normed = layer_norm_rows(last, model.final_ln_gain, model.final_ln_bias);
  trace.logits = model.unembedding * normed.transpose();
  return trace;
}

template struct ToyTransformer<double>;
template struct ToyTransformer<float>;
template struct ForwardTrace<double>;
template struct ForwardTrace<float>;
template ToyTransformer<double> build_planted_model<double>(const ModelConfig&);
template ToyTransformer<float> build_planted_model<float>(const ModelConfig&);
template ForwardTrace<double> forward<double>(const ToyTransformer<double>&, std::span<const int>,
                                              std::span<const Intervention<double>>,
                                              const ForwardOptions&);
template ForwardTrace<float> forward<float>(const ToyTransformer<float>&, std::span<const int>,
                                            std::span<const Intervention<float>>,
                                            const ForwardOptions&);

}  // namespace headprobe
