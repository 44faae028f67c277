#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cura/model_config.hpp"

namespace cura {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// One encoder block: multi-head self-attention then a GELU feed-forward, each
/// wrapped in a residual connection followed by LayerNorm (post-LN, as in BERT).
template <typename Scalar>
struct EncoderLayer {
  MatrixX<Scalar> wq, wk, wv, wo;
  RowVectorX<Scalar> bq, bk, bv, bo;
  RowVectorX<Scalar> ln1_gamma, ln1_beta;
  MatrixX<Scalar> w1, w2;
  RowVectorX<Scalar> b1, b2;
  RowVectorX<Scalar> ln2_gamma, ln2_beta;
};

/// All trainable tensors. The same type holds gradients and optimizer moments.
template <typename Scalar>
struct EncoderParams {
  MatrixX<Scalar> token_embedding;     // vocab x hidden
  MatrixX<Scalar> position_embedding;  // max_len x hidden
  RowVectorX<Scalar> emb_ln_gamma, emb_ln_beta;
  std::vector<EncoderLayer<Scalar>> layers;
  MatrixX<Scalar> pooler_w;  // hidden x head_width (empty when head_width == 0)
  RowVectorX<Scalar> pooler_b;
  MatrixX<Scalar> projector_w;  // (head_width or hidden) x 1
  RowVectorX<Scalar> projector_b;  // 1 x 1

  static EncoderParams zeros(const ModelConfig& config, int vocab_size);
  static EncoderParams random(const ModelConfig& config, int vocab_size, std::uint64_t seed);

  /// Visits every tensor in a fixed order. The callback receives a stable name.
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const;

  std::size_t parameter_count() const;
  void set_zero();
  template <typename Other>
  EncoderParams<Other> cast() const;
};

/// Forward pass scratch kept for the backward pass.
template <typename Scalar>
struct ForwardCache {
  /// Rows that flow through the query/FFN path: every token, except in the
  /// last layer where only the user token reaches the projector (r = 1).
  struct Layer {
    MatrixX<Scalar> input;  // n x d
    bool single_row = false;
    MatrixX<Scalar> q, k, v;            // q: r x d; k, v: n x d
    std::vector<MatrixX<Scalar>> attn;  // per head, r x n softmax
    MatrixX<Scalar> context;            // r x d
    MatrixX<Scalar> ln1_xhat;
    RowVectorX<Scalar> ln1_inv_std_col;  // n entries stored as a row
    MatrixX<Scalar> h1;                  // post-LN1, n x d
    MatrixX<Scalar> ffn_pre;             // n x ffn
    MatrixX<Scalar> ffn_act;
    MatrixX<Scalar> ln2_xhat;
    RowVectorX<Scalar> ln2_inv_std_col;
  };
  std::vector<int> ids;
  int user_position = 0;
  MatrixX<Scalar> emb_xhat;
  RowVectorX<Scalar> emb_inv_std_col;
  std::vector<Layer> layers;
  RowVectorX<Scalar> final_hidden;  // encoding of the user token
  RowVectorX<Scalar> pooled;     // tanh output when a pooler is configured
  Scalar logit = 0;
};

/// Transformer encoder with a linear projector reading the encoding of one token.
template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;
  Encoder(ModelConfig config, EncoderParams<Scalar> params) : config_(std::move(config)), params_(std::move(params)) {}

  const ModelConfig& config() const { return config_; }
  const EncoderParams<Scalar>& params() const { return params_; }
  EncoderParams<Scalar>& params() { return params_; }

  /// Logit of the upvote probability for the token at `user_position`.
  Scalar logit(std::span<const int> ids, int user_position) const;
  Scalar logit(std::span<const int> ids, int user_position, ForwardCache<Scalar>& cache) const;

  /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logit).
  void backward(const ForwardCache<Scalar>& cache, Scalar dlogit, EncoderParams<Scalar>& grads) const;

 private:
  ModelConfig config_;
  EncoderParams<Scalar> params_;
};

/// Weighted binary cross-entropy on a logit, computed stably.
template <typename Scalar>
Scalar weighted_bce(Scalar logit, Scalar label, Scalar weight) {
  // -w [y log s(z) + (1-y) log(1-s(z))] = w [softplus(z) - y z]
  const Scalar softplus = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return weight * (softplus - label * logit);
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  return z >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-z)) : std::exp(z) / (Scalar(1) + std::exp(z));
}

// ---------------------------------------------------------------------------

template <typename Scalar>
template <typename F>
void EncoderParams<Scalar>::for_each(F&& f) {
  f("token_embedding", token_embedding);
  f("position_embedding", position_embedding);
  f("emb_ln_gamma", emb_ln_gamma);
  f("emb_ln_beta", emb_ln_beta);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    f(p + "wq", l.wq);
    f(p + "bq", l.bq);
    f(p + "wk", l.wk);
    f(p + "bk", l.bk);
    f(p + "wv", l.wv);
    f(p + "bv", l.bv);
    f(p + "wo", l.wo);
    f(p + "bo", l.bo);
    f(p + "ln1_gamma", l.ln1_gamma);
    f(p + "ln1_beta", l.ln1_beta);
    f(p + "w1", l.w1);
    f(p + "b1", l.b1);
    f(p + "w2", l.w2);
    f(p + "b2", l.b2);
    f(p + "ln2_gamma", l.ln2_gamma);
    f(p + "ln2_beta", l.ln2_beta);
  }
  f("pooler_w", pooler_w);
  f("pooler_b", pooler_b);
  f("projector_w", projector_w);
  f("projector_b", projector_b);
}

template <typename Scalar>
template <typename F>
void EncoderParams<Scalar>::for_each(F&& f) const {
  const_cast<EncoderParams*>(this)->for_each([&](const std::string& name, auto& m) { f(name, std::as_const(m)); });
}

template <typename Scalar>
template <typename Other>
EncoderParams<Other> EncoderParams<Scalar>::cast() const {
  EncoderParams<Other> out;
  out.layers.resize(layers.size());
  // Both structs visit tensors in the same order.
  std::vector<const MatrixX<Scalar>*> mats;
  std::vector<const RowVectorX<Scalar>*> rows;
  for_each([&](const std::string&, const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MatrixX<Scalar>>) mats.push_back(&m);
    else rows.push_back(&m);
  });
  std::size_t mi = 0, ri = 0;
  out.for_each([&](const std::string&, auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MatrixX<Other>>) m = mats[mi++]->template cast<Other>();
    else m = rows[ri++]->template cast<Other>();
  });
  return out;
}

extern template struct EncoderParams<float>;
extern template struct EncoderParams<double>;
extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace cura
