#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "headprobe/model_config.hpp"

namespace headprobe {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pre-norm attention-only block. Head h of the layer owns rows
/// [h * d_head, (h + 1) * d_head) of wq/wk/wv and the same columns of wo.
template <typename Scalar>
struct AttentionBlock {
  VectorX<Scalar> ln_gain;
  VectorX<Scalar> ln_bias;
  MatrixX<Scalar> wq;  // (heads * d_head) x d_model
  MatrixX<Scalar> wk;
  MatrixX<Scalar> wv;
  MatrixX<Scalar> wo;  // d_model x (heads * d_head)
};

/// Decoder-only transformer with causal multi-head attention and no MLP sublayers:
///
///   x_0 = E[token] + P[position]
///   x_{l+1} = x_l + W_o,l concat_h softmax(q k^T / sqrt(d_head)) v     (on LN_l(x_l))
///   logits  = U LN_f(x_L)
///
/// Weights are plain members; treat a built model as immutable.
template <typename Scalar>
struct ToyTransformer {
  ModelConfig config;
  MatrixX<Scalar> token_embedding;     // vocab x d_model
  MatrixX<Scalar> position_embedding;  // max_seq_len x d_model
  std::vector<AttentionBlock<Scalar>> blocks;
  VectorX<Scalar> final_ln_gain;
  VectorX<Scalar> final_ln_bias;
  MatrixX<Scalar> unembedding;  // vocab x d_model

  HeadLayout layout() const { return config.layout(); }

  // Throws InvalidArgument when any tensor shape disagrees with `config`.
  void check_shapes() const;

  // Visits every tensor under a stable name, in a fixed order (the file layout order).
  void for_each_tensor(const std::function<void(const std::string&, MatrixX<Scalar>&)>& fn);
  void for_each_tensor(
      const std::function<void(const std::string&, const MatrixX<Scalar>&)>& fn) const;
};

enum class TokenScope { final, all };

/// Head-level hook: zero the head's output, or add `delta` to it, before concatenation.
template <typename Scalar>
struct Intervention {
  enum class Kind { ablate, inject };

  Kind kind = Kind::ablate;
  HeadId target;
  VectorX<Scalar> delta;  // empty for ablate
  TokenScope scope = TokenScope::all;

  static Intervention ablate(HeadId target, TokenScope scope = TokenScope::all) {
    return {Kind::ablate, target, {}, scope};
  }
  static Intervention inject(HeadId target, VectorX<Scalar> delta,
                             TokenScope scope = TokenScope::final) {
    return {Kind::inject, target, std::move(delta), scope};
  }
};

struct ForwardOptions {
  bool record_attention = false;
};

template <typename Scalar>
struct ForwardTrace {
  // Row i is the (post-intervention) output of global head i at the final position.
  RowMatrixX<Scalar> head_outputs;
  VectorX<Scalar> final_hidden;  // residual stream at the final position, before LN_f
  VectorX<Scalar> logits;
  std::vector<Intervention<Scalar>> interventions;
  // Per global head, the T x T causal attention pattern; filled when requested.
  std::vector<MatrixX<Scalar>> attention;

  int greedy_token() const;
};

/// Deterministic planted model: ordinary weights ~ U[-0.02, 0.02] from SeededRng(config.seed),
/// planted heads wired to their trigger and refusal channels, dead heads zeroed.
template <typename Scalar>
ToyTransformer<Scalar> build_planted_model(const ModelConfig& config);

template <typename Scalar>
ForwardTrace<Scalar> forward(const ToyTransformer<Scalar>& model, std::span<const int> tokens,
                             std::span<const std::type_identity_t<Intervention<Scalar>>>
                                 interventions = {},
                             const ForwardOptions& options = {});

/// Concatenated final-position head outputs in (layer asc, head asc) order.
template <typename Scalar>
VectorX<Scalar> extract_features(const ForwardTrace<Scalar>& trace) {
  return Eigen::Map<const VectorX<Scalar>>(trace.head_outputs.data(), trace.head_outputs.size());
}

extern template struct ToyTransformer<double>;
extern template struct ToyTransformer<float>;
extern template ToyTransformer<double> build_planted_model<double>(const ModelConfig&);
extern template ToyTransformer<float> build_planted_model<float>(const ModelConfig&);
extern template ForwardTrace<double> forward<double>(const ToyTransformer<double>&,
                                                     std::span<const int>,
                                                     std::span<const Intervention<double>>,
                                                     const ForwardOptions&);
extern template ForwardTrace<float> forward<float>(const ToyTransformer<float>&,
                                                   std::span<const int>,
                                                   std::span<const Intervention<float>>,
                                                   const ForwardOptions&);

using Model = ToyTransformer<double>;
using Trace = ForwardTrace<double>;
using HeadIntervention = Intervention<double>;

}  // namespace headprobe
