#pragma once

#include <cmath>
#include <vector>

#include "mint/neuro/layers.hpp"

namespace mint::neuro {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled; skipped for decay-exempt parameters
};

// Adam with decoupled weight decay:
//   m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
//   p <- p - lr (mhat / (sqrt(vhat) + eps) + wd p)
// Bias correction uses the shared step counter, so all parameters must join
// from the first step.
template <class S>
class AdamT {
 public:
  explicit AdamT(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  int64_t steps() const { return t_; }

  void step(const ParamList<S>& params) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(static_cast<size_t>(params[i]->tensor.size()), S(0));
        v_[i].assign(static_cast<size_t>(params[i]->tensor.size()), S(0));
      }
    }
    if (m_.size() != params.size())
      throw ValidationError("adam: parameter list changed between steps");
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S lr = static_cast<S>(cfg_.lr);
    const S eps = static_cast<S>(cfg_.eps);
    const S bc1 = S(1) - static_cast<S>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S bc2 = S(1) - static_cast<S>(std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (size_t i = 0; i < params.size(); ++i) {
      ParamT<S>& p = *params[i];
      S* val = p.tensor.data();
      const std::vector<S>& grad = p.tensor.grad();
      S wd = p.decay_exempt ? S(0) : static_cast<S>(cfg_.weight_decay);
      std::vector<S>& m = m_[i];
      std::vector<S>& v = v_[i];
      for (size_t j = 0; j < grad.size(); ++j) {
        S g = grad[j];
        m[j] = b1 * m[j] + (S(1) - b1) * g;
        v[j] = b2 * v[j] + (S(1) - b2) * g * g;
        S mhat = m[j] / bc1;
        S vhat = v[j] / bc2;
        val[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * val[j]);
      }
    }
  }

  static void zero_grad(const ParamList<S>& params) {
    for (ParamT<S>* p : params) p->tensor.zero_grad();
  }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<S>> m_, v_;
};

}  // namespace mint::neuro
