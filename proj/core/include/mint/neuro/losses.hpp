#pragma once

#include "mint/neuro/ops.hpp"
#include "mint/neuro/tensor.hpp"

namespace mint::neuro {

// Probabilities entering a log are clamped to [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-7;

// Mean squared error against a constant target, averaged over all entries.
template <class S>
TensorT<S> mse_loss(const TensorT<S>& pred, const TensorT<S>& target) {
  return mean_all(square_t(sub(pred, target)));
}

// Binary cross entropy on probabilities, averaged over all entries.
template <class S>
TensorT<S> bce_loss(const TensorT<S>& prob, const TensorT<S>& target) {
  const S lo = static_cast<S>(kProbFloor);
  const S hi = S(1) - lo;
  TensorT<S> p = clamp_t(prob, lo, hi);
  TensorT<S> one_minus_p = add_scalar(neg(p), S(1));
  TensorT<S> one_minus_t = add_scalar(neg(target), S(1));
  TensorT<S> ll = add(mul(target, log_t(p)), mul(one_minus_t, log_t(one_minus_p)));
  return neg(mean_all(ll));
}

// KL(target || pred) per row, summed over categories and averaged over rows.
// Rows of `target` must lie on the simplex; zero target entries contribute
// nothing.
template <class S>
TensorT<S> kl_rows_loss(const TensorT<S>& pred, const TensorT<S>& target) {
  const S lo = static_cast<S>(kProbFloor);
  // Constant part: mean over rows of sum_c t log t.
  double entropy_term = 0.0;
  const S* t = target.data();
  for (int64_t i = 0; i < target.size(); ++i) {
    double ti = static_cast<double>(t[i]);
    if (ti > 0.0) entropy_term += ti * std::log(ti);
  }
  entropy_term /= static_cast<double>(target.rows());
  TensorT<S> logp = log_t(clamp_t(pred, lo, S(1)));
  TensorT<S> cross = scale(sum_all(mul(target, logp)), S(1) / static_cast<S>(target.rows()));
  return add_scalar(neg(cross), static_cast<S>(entropy_term));
}

// Scalar form of the norm-based robust penalty used by the pose objective.
template <class S>
S huber_norm(S radius, S delta) {
  if (!(delta > S(0))) throw ValidationError("huber: delta must be positive");
  radius = std::abs(radius);
  return radius <= delta ? radius * radius / (S(2) * delta) : radius - delta / S(2);
}

}  // namespace mint::neuro
