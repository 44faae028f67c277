#include "cura/transformer.hpp"

#include <stdexcept>

namespace cura {

namespace {

constexpr double kLayerNormEps = 1e-12;

template <typename Scalar>
struct LayerNormOut {
  MatrixX<Scalar> y;
  MatrixX<Scalar> xhat;
  RowVectorX<Scalar> inv_std;
};

template <typename Scalar>
void layer_norm(const MatrixX<Scalar>& x, const RowVectorX<Scalar>& gamma, const RowVectorX<Scalar>& beta,
                MatrixX<Scalar>& y, MatrixX<Scalar>& xhat, RowVectorX<Scalar>& inv_std) {
  const auto n = x.rows();
  const auto d = static_cast<Scalar>(x.cols());
  xhat.resize(n, x.cols());
  inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = x.row(i).sum() / d;
    const Scalar var = (x.row(i).array() - mean).square().sum() / d;
    inv_std(i) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
    xhat.row(i) = (x.row(i).array() - mean) * inv_std(i);
  }
  y = (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
}

/// Returns dx; accumulates dgamma/dbeta.
template <typename Scalar>
MatrixX<Scalar> layer_norm_backward(const MatrixX<Scalar>& dy, const MatrixX<Scalar>& xhat,
                                    const RowVectorX<Scalar>& inv_std, const RowVectorX<Scalar>& gamma,
                                    RowVectorX<Scalar>& dgamma, RowVectorX<Scalar>& dbeta) {
  dgamma += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  const MatrixX<Scalar> dxhat = dy.array().rowwise() * gamma.array();
  const auto d = static_cast<Scalar>(dy.cols());
  MatrixX<Scalar> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Scalar mean_dxhat = dxhat.row(i).sum() / d;
    const Scalar mean_dxhat_xhat = dxhat.row(i).dot(xhat.row(i)) / d;
    dx.row(i) = inv_std(i) * (dxhat.row(i).array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat);
  }
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * Scalar(M_PI));
  return cdf + x * pdf;
}

template <typename Scalar>
void softmax_rows(MatrixX<Scalar>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Scalar m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

template <typename Scalar, typename Rng>
void fill_normal(MatrixX<Scalar>& m, Rng& rng, double std) {
  std::normal_distribution<double> dist(0.0, std);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(dist(rng));
}

}  // namespace

template <typename Scalar>
EncoderParams<Scalar> EncoderParams<Scalar>::zeros(const ModelConfig& c, int vocab_size) {
  c.validate();
  const int d = c.hidden;
  EncoderParams p;
  p.token_embedding = MatrixX<Scalar>::Zero(vocab_size, d);
  p.position_embedding = MatrixX<Scalar>::Zero(c.max_len, d);
  p.emb_ln_gamma = RowVectorX<Scalar>::Zero(d);
  p.emb_ln_beta = RowVectorX<Scalar>::Zero(d);
  p.layers.resize(static_cast<std::size_t>(c.layers));
  for (auto& l : p.layers) {
    for (auto* w : {&l.wq, &l.wk, &l.wv, &l.wo}) *w = MatrixX<Scalar>::Zero(d, d);
    for (auto* b : {&l.bq, &l.bk, &l.bv, &l.bo, &l.ln1_gamma, &l.ln1_beta, &l.b2, &l.ln2_gamma, &l.ln2_beta})
      *b = RowVectorX<Scalar>::Zero(d);
    l.w1 = MatrixX<Scalar>::Zero(d, c.ffn);
    l.b1 = RowVectorX<Scalar>::Zero(c.ffn);
    l.w2 = MatrixX<Scalar>::Zero(c.ffn, d);
  }
  p.pooler_w = MatrixX<Scalar>::Zero(c.head_width > 0 ? d : 0, c.head_width);
  p.pooler_b = RowVectorX<Scalar>::Zero(c.head_width);
  p.projector_w = MatrixX<Scalar>::Zero(c.head_width > 0 ? c.head_width : d, 1);
  p.projector_b = RowVectorX<Scalar>::Zero(1);
  return p;
}

template <typename Scalar>
EncoderParams<Scalar> EncoderParams<Scalar>::random(const ModelConfig& c, int vocab_size, std::uint64_t seed) {
  EncoderParams p = zeros(c, vocab_size);
  std::mt19937_64 rng(seed);
  p.for_each([&](const std::string& name, auto& m) {
    if (name.ends_with("gamma")) m.setOnes();
    else if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MatrixX<Scalar>>) fill_normal(m, rng, c.init_std);
  });
  return p;
}

template <typename Scalar>
std::size_t EncoderParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const auto& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
void EncoderParams<Scalar>::set_zero() {
  for_each([](const std::string&, auto& m) { m.setZero(); });
}

template <typename Scalar>
Scalar Encoder<Scalar>::logit(std::span<const int> ids, int user_position) const {
  ForwardCache<Scalar> cache;
  return logit(ids, user_position, cache);
}

template <typename Scalar>
Scalar Encoder<Scalar>::logit(std::span<const int> ids, int user_position, ForwardCache<Scalar>& cache) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0 || n > config_.max_len) throw std::invalid_argument("sequence length outside [1, max_len]");
  if (user_position < 0 || user_position >= n) throw std::invalid_argument("user position outside the sequence");
  const int d = config_.hidden;
  const int heads = config_.heads;
  const int dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const auto& p = params_;

  cache.ids.assign(ids.begin(), ids.end());
  cache.user_position = user_position;
  MatrixX<Scalar> x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= p.token_embedding.rows()) throw std::out_of_range("token id outside the vocabulary");
    x.row(i) = p.token_embedding.row(id) + p.position_embedding.row(i);
  }
  MatrixX<Scalar> h;
  layer_norm(x, p.emb_ln_gamma, p.emb_ln_beta, h, cache.emb_xhat, cache.emb_inv_std_col);

  cache.layers.resize(p.layers.size());
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& l = p.layers[li];
    auto& c = cache.layers[li];
    c.input = std::move(h);
    c.single_row = li + 1 == p.layers.size();
    const MatrixX<Scalar> rows = c.single_row ? MatrixX<Scalar>(c.input.row(user_position)) : c.input;
    c.q.noalias() = rows * l.wq;
    c.q.rowwise() += l.bq;
    c.k.noalias() = c.input * l.wk;
    c.k.rowwise() += l.bk;
    c.v.noalias() = c.input * l.wv;
    c.v.rowwise() += l.bv;
    c.attn.resize(static_cast<std::size_t>(heads));
    c.context.resize(rows.rows(), d);
    for (int hd = 0; hd < heads; ++hd) {
      auto& a = c.attn[static_cast<std::size_t>(hd)];
      a.noalias() = c.q.middleCols(hd * dh, dh) * c.k.middleCols(hd * dh, dh).transpose();
      a *= scale;
      softmax_rows(a);
      c.context.middleCols(hd * dh, dh).noalias() = a * c.v.middleCols(hd * dh, dh);
    }
    MatrixX<Scalar> r1 = rows;
    r1.noalias() += c.context * l.wo;
    r1.rowwise() += l.bo;
    layer_norm(r1, l.ln1_gamma, l.ln1_beta, c.h1, c.ln1_xhat, c.ln1_inv_std_col);

    c.ffn_pre.noalias() = c.h1 * l.w1;
    c.ffn_pre.rowwise() += l.b1;
    c.ffn_act = c.ffn_pre.unaryExpr([](Scalar v) { return gelu(v); });
    MatrixX<Scalar> r2 = c.h1;
    r2.noalias() += c.ffn_act * l.w2;
    r2.rowwise() += l.b2;
    layer_norm(r2, l.ln2_gamma, l.ln2_beta, h, c.ln2_xhat, c.ln2_inv_std_col);
  }
  // The last layer produced a single row: the user token.
  cache.final_hidden = h.row(0);

  RowVectorX<Scalar> head_in = cache.final_hidden;
  if (config_.head_width > 0) {
    cache.pooled = ((head_in * p.pooler_w) + p.pooler_b).array().tanh().matrix();
    head_in = cache.pooled;
  }
  cache.logit = (head_in * p.projector_w)(0, 0) + p.projector_b(0);
  return cache.logit;
}

template <typename Scalar>
void Encoder<Scalar>::backward(const ForwardCache<Scalar>& cache, Scalar dlogit, EncoderParams<Scalar>& g) const {
  const auto& p = params_;
  const auto n = static_cast<Eigen::Index>(cache.ids.size());
  const int d = config_.hidden;
  const int heads = config_.heads;
  const int dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  // Head.
  RowVectorX<Scalar> dhead;
  if (config_.head_width > 0) {
    g.projector_w += cache.pooled.transpose() * dlogit;
    g.projector_b(0) += dlogit;
    const RowVectorX<Scalar> dpooled = dlogit * p.projector_w.transpose();
    const RowVectorX<Scalar> dpre = (dpooled.array() * (Scalar(1) - cache.pooled.array().square())).matrix();
    g.pooler_w += cache.final_hidden.transpose() * dpre;
    g.pooler_b += dpre;
    dhead = dpre * p.pooler_w.transpose();
  } else {
    g.projector_w += cache.final_hidden.transpose() * dlogit;
    g.projector_b(0) += dlogit;
    dhead = dlogit * p.projector_w.transpose();
  }
  // Gradient w.r.t. the rows each layer emitted (1 row for the last layer).
  MatrixX<Scalar> dhidden = dhead;

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& l = p.layers[li];
    auto& gl = g.layers[li];
    const auto& c = cache.layers[li];

    // Feed-forward block.
    MatrixX<Scalar> dr2 = layer_norm_backward(dhidden, c.ln2_xhat, c.ln2_inv_std_col, l.ln2_gamma, gl.ln2_gamma, gl.ln2_beta);
    gl.w2.noalias() += c.ffn_act.transpose() * dr2;
    gl.b2 += dr2.colwise().sum();
    MatrixX<Scalar> dpre = dr2 * l.w2.transpose();
    dpre.array() *= c.ffn_pre.unaryExpr([](Scalar v) { return gelu_grad(v); }).array();
    gl.w1.noalias() += c.h1.transpose() * dpre;
    gl.b1 += dpre.colwise().sum();
    MatrixX<Scalar> dh1 = dr2;
    dh1.noalias() += dpre * l.w1.transpose();

    // Attention block.
    MatrixX<Scalar> dr1 = layer_norm_backward(dh1, c.ln1_xhat, c.ln1_inv_std_col, l.ln1_gamma, gl.ln1_gamma, gl.ln1_beta);
    gl.wo.noalias() += c.context.transpose() * dr1;
    gl.bo += dr1.colwise().sum();
    const MatrixX<Scalar> dcontext = dr1 * l.wo.transpose();
    const auto r = dr1.rows();
    MatrixX<Scalar> dq(r, d), dk(n, d), dv(n, d);
    for (int hd = 0; hd < heads; ++hd) {
      const auto& a = c.attn[static_cast<std::size_t>(hd)];
      const auto dctx = dcontext.middleCols(hd * dh, dh);
      MatrixX<Scalar> da = dctx * c.v.middleCols(hd * dh, dh).transpose();
      dv.middleCols(hd * dh, dh).noalias() = a.transpose() * dctx;
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = (da.array() * a.array()).rowwise().sum();
      MatrixX<Scalar> ds = (a.array() * (da.array().colwise() - row_dot.array())).matrix() * scale;
      dq.middleCols(hd * dh, dh).noalias() = ds * c.k.middleCols(hd * dh, dh);
      dk.middleCols(hd * dh, dh).noalias() = ds.transpose() * c.q.middleCols(hd * dh, dh);
    }
    const MatrixX<Scalar> rows = c.single_row ? MatrixX<Scalar>(c.input.row(cache.user_position)) : c.input;
    gl.wq.noalias() += rows.transpose() * dq;
    gl.bq += dq.colwise().sum();
    gl.wk.noalias() += c.input.transpose() * dk;
    gl.bk += dk.colwise().sum();
    gl.wv.noalias() += c.input.transpose() * dv;
    gl.bv += dv.colwise().sum();
    MatrixX<Scalar> drows = dr1;
    drows.noalias() += dq * l.wq.transpose();
    dhidden.noalias() = dk * l.wk.transpose();
    dhidden.noalias() += dv * l.wv.transpose();
    if (c.single_row) dhidden.row(cache.user_position) += drows;
    else dhidden += drows;
  }

  const MatrixX<Scalar> dx =
      layer_norm_backward(dhidden, cache.emb_xhat, cache.emb_inv_std_col, p.emb_ln_gamma, g.emb_ln_gamma, g.emb_ln_beta);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.token_embedding.row(cache.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    g.position_embedding.row(i) += dx.row(i);
  }
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template class Encoder<float>;
template class Encoder<double>;

}  // namespace cura
