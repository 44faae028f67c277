#pragma once

#include <cmath>

#include "cura/transformer.hpp"

namespace cura {

/// Adam with bias correction and no weight decay.
template <typename Scalar>
class Adam {
 public:
  Adam(const ModelConfig& config, int vocab_size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(EncoderParams<Scalar>::zeros(config, vocab_size)),
        v_(EncoderParams<Scalar>::zeros(config, vocab_size)),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  void step(EncoderParams<Scalar>& params, const EncoderParams<Scalar>& grads, double lr) {
    ++t_;
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    const auto alpha = static_cast<Scalar>(lr);
    const auto eps = static_cast<Scalar>(eps_);
    zip(params, grads, [&](auto& p, const auto& g, auto& m, auto& v) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
      p.array() -= alpha * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    });
  }

  long steps() const { return t_; }

 private:
  template <typename F>
  void zip(EncoderParams<Scalar>& params, const EncoderParams<Scalar>& grads, F&& f) {
    using Mat = MatrixX<Scalar>;
    using Row = RowVectorX<Scalar>;
    std::vector<Mat*> pm, mm, vm;
    std::vector<const Mat*> gm;
    std::vector<Row*> pr, mr, vr;
    std::vector<const Row*> gr;
    auto collect = [](auto& mats, auto& rows) {
      return [&mats, &rows](const std::string&, auto& t) {
        if constexpr (std::is_same_v<std::remove_cvref_t<decltype(t)>, Mat>) mats.push_back(&t);
        else rows.push_back(&t);
      };
    };
    params.for_each(collect(pm, pr));
    grads.for_each(collect(gm, gr));
    m_.for_each(collect(mm, mr));
    v_.for_each(collect(vm, vr));
    for (std::size_t i = 0; i < pm.size(); ++i) f(*pm[i], *gm[i], *mm[i], *vm[i]);
    for (std::size_t i = 0; i < pr.size(); ++i) f(*pr[i], *gr[i], *mr[i], *vr[i]);
  }

  EncoderParams<Scalar> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace cura
