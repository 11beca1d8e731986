#pragma once

#include "mint/neuro/tensor.hpp"

namespace mint::neuro {

// ============================================================================
// Structured ops: attention, positional add, normalization, fused losses
// ============================================================================

// Adds learnable per-position rows to a (batch * window, dim) activation.
// Row b * window + w receives table row w.
template <class S>
TensorT<S> add_positional(const TensorT<S>& x, const TensorT<S>& table, int64_t batch,
                          int64_t window) {
  if (x.rows() != batch * window) throw ValidationError("add_positional: row count mismatch");
  if (table.cols() != x.cols()) throw ValidationError("add_positional: dim mismatch");
  if (window > table.rows())
    throw ValidationError("add_positional: window exceeds positional table length");
  auto xn = x.node();
  auto tn = table.node();
  TensorT<S> out = detail::make_op<S>(
      x.rows(), x.cols(), "add_positional", {x, table},
      [xn, tn, batch, window](NodeT<S>& n) {
        if (xn->rg) {
          xn->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) xn->grad[i] += n.grad[i];
        }
        if (tn->rg) {
          tn->ensure_grad();
          for (int64_t b = 0; b < batch; ++b)
            for (int64_t w = 0; w < window; ++w)
              for (int64_t c = 0; c < n.cols; ++c)
                tn->grad[w * n.cols + c] += n.grad[(b * window + w) * n.cols + c];
        }
      });
  const S* px = x.data();
  const S* pt = table.data();
  S* po = out.data();
  int64_t cols = x.cols();
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t w = 0; w < window; ++w)
      for (int64_t c = 0; c < cols; ++c)
        po[(b * window + w) * cols + c] = px[(b * window + w) * cols + c] + pt[w * cols + c];
  detail::finite_check(*out.node());
  return out;
}

// Scaled dot-product self attention over `heads` splits of the feature axis.
// q, k, v are (batch * window, dim) activations; attention never crosses
// window boundaries. No causal mask: every position sees the whole window.
template <class S>
TensorT<S> attention(const TensorT<S>& q, const TensorT<S>& k, const TensorT<S>& v,
                     int64_t batch, int64_t window, int64_t heads) {
  const int64_t dim = q.cols();
  if (dim % heads != 0) throw ValidationError("attention: dim must divide by heads");
  if (q.rows() != batch * window || k.rows() != q.rows() || v.rows() != q.rows() ||
      k.cols() != dim || v.cols() != dim)
    throw ValidationError("attention: shape mismatch");
  const int64_t dh = dim / heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));

  // Soft attention weights kept for the backward sweep.
  auto weights = std::make_shared<std::vector<S>>(
      static_cast<size_t>(batch * heads * window * window));

  auto qn = q.node();
  auto kn = k.node();
  auto vn = v.node();

  TensorT<S> out = detail::make_op<S>(
      q.rows(), dim, "attention", {q, k, v},
      [qn, kn, vn, weights, batch, window, heads, dh, inv_sqrt](NodeT<S>& n) {
        qn->ensure_grad();
        kn->ensure_grad();
        vn->ensure_grad();
        const int64_t dim = heads * dh;
        EMat<S> dA(window, window), dS(window, window), A(window, window);
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t h = 0; h < heads; ++h) {
            auto blk = [&](std::vector<S>& buf) {
              return Eigen::Map<EMat<S>, 0, Eigen::OuterStride<>>(
                  buf.data() + b * window * dim + h * dh, window, dh,
                  Eigen::OuterStride<>(dim));
            };
            auto Q = blk(qn->val), K = blk(kn->val), V = blk(vn->val);
            auto dQ = blk(qn->grad), dK = blk(kn->grad), dV = blk(vn->grad);
            Eigen::Map<EMat<S>, 0, Eigen::OuterStride<>> dO(
                n.grad.data() + b * window * dim + h * dh, window, dh,
                Eigen::OuterStride<>(dim));
            A = Eigen::Map<EMat<S>>(
                weights->data() + (b * heads + h) * window * window, window, window);
            dA.noalias() = dO * V.transpose();
            dV.noalias() += A.transpose() * dO;
            for (int64_t r = 0; r < window; ++r) {
              S dot = A.row(r).dot(dA.row(r));
              dS.row(r) = A.row(r).cwiseProduct((dA.row(r).array() - dot).matrix());
            }
            dQ.noalias() += inv_sqrt * (dS * K);
            dK.noalias() += inv_sqrt * (dS.transpose() * Q);
          }
        }
      });

  EMat<S> scores(window, window);
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t h = 0; h < heads; ++h) {
      Eigen::Map<const EMat<S>, 0, Eigen::OuterStride<>> Q(
          q.data() + b * window * dim + h * dh, window, dh, Eigen::OuterStride<>(dim));
      Eigen::Map<const EMat<S>, 0, Eigen::OuterStride<>> K(
          k.data() + b * window * dim + h * dh, window, dh, Eigen::OuterStride<>(dim));
      Eigen::Map<const EMat<S>, 0, Eigen::OuterStride<>> V(
          v.data() + b * window * dim + h * dh, window, dh, Eigen::OuterStride<>(dim));
      scores.noalias() = inv_sqrt * (Q * K.transpose());
      Eigen::Map<EMat<S>> A(weights->data() + (b * heads + h) * window * window, window,
                            window);
      for (int64_t r = 0; r < window; ++r) {
        S mx = scores.row(r).maxCoeff();
        A.row(r) = (scores.row(r).array() - mx).exp();
        A.row(r) /= A.row(r).sum();
      }
      Eigen::Map<EMat<S>, 0, Eigen::OuterStride<>> O(
          out.data() + b * window * dim + h * dh, window, dh, Eigen::OuterStride<>(dim));
      O.noalias() = A * V;
    }
  }
  detail::finite_check(*out.node());
  return out;
}

// Per-row layer normalization with learnable scale and shift.
template <class S>
TensorT<S> layernorm_rows(const TensorT<S>& x, const TensorT<S>& gamma,
                          const TensorT<S>& beta, S eps = S(1e-5)) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols())
    throw ValidationError("layernorm: parameter shape mismatch");
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  auto xhat = std::make_shared<std::vector<S>>(static_cast<size_t>(x.size()));
  auto invstd = std::make_shared<std::vector<S>>(static_cast<size_t>(x.rows()));

  TensorT<S> out = detail::make_op<S>(
      x.rows(), x.cols(), "layernorm", {x, gamma, beta},
      [xn, gn, bn, xhat, invstd](NodeT<S>& n) {
        const int64_t C = n.cols;
        if (gn->rg) gn->ensure_grad();
        if (bn->rg) bn->ensure_grad();
        if (xn->rg) xn->ensure_grad();
        for (int64_t r = 0; r < n.rows; ++r) {
          const S* g = n.grad.data() + r * C;
          const S* xh = xhat->data() + r * C;
          if (gn->rg)
            for (int64_t c = 0; c < C; ++c) gn->grad[c] += g[c] * xh[c];
          if (bn->rg)
            for (int64_t c = 0; c < C; ++c) bn->grad[c] += g[c];
          if (xn->rg) {
            S mean_dxhat = S(0), mean_dxhat_xhat = S(0);
            for (int64_t c = 0; c < C; ++c) {
              S dxh = g[c] * gn->val[c];
              mean_dxhat += dxh;
              mean_dxhat_xhat += dxh * xh[c];
            }
            mean_dxhat /= static_cast<S>(C);
            mean_dxhat_xhat /= static_cast<S>(C);
            S* gx = xn->grad.data() + r * C;
            for (int64_t c = 0; c < C; ++c) {
              S dxh = g[c] * gn->val[c];
              gx[c] += (*invstd)[r] * (dxh - mean_dxhat - xh[c] * mean_dxhat_xhat);
            }
          }
        }
      });

  const int64_t C = x.cols();
  const S* px = x.data();
  const S* pg = gamma.data();
  const S* pb = beta.data();
  S* po = out.data();
  for (int64_t r = 0; r < x.rows(); ++r) {
    const S* row = px + r * C;
    S mean = S(0);
    for (int64_t c = 0; c < C; ++c) mean += row[c];
    mean /= static_cast<S>(C);
    S var = S(0);
    for (int64_t c = 0; c < C; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<S>(C);
    S is = S(1) / std::sqrt(var + eps);
    (*invstd)[r] = is;
    for (int64_t c = 0; c < C; ++c) {
      S xh = (row[c] - mean) * is;
      (*xhat)[r * C + c] = xh;
      po[r * C + c] = pg[c] * xh + pb[c];
    }
  }
  detail::finite_check(*out.node());
  return out;
}

// Batch normalization over the row axis (training mode). Requires at least two
// rows; per-column batch statistics are returned so the layer can update its
// running estimates. Uses the biased variance.
template <class S>
struct BatchNormResult {
  TensorT<S> y;
  std::vector<S> batch_mean;
  std::vector<S> batch_var;
};

template <class S>
BatchNormResult<S> batchnorm_train(const TensorT<S>& x, const TensorT<S>& gamma,
                                   const TensorT<S>& beta, S eps = S(1e-5)) {
  if (x.rows() < 2)
    throw ValidationError("batchnorm: training mode needs a batch of at least 2 rows");
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols())
    throw ValidationError("batchnorm: parameter shape mismatch");
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  const int64_t R = x.rows(), C = x.cols();
  auto xhat = std::make_shared<std::vector<S>>(static_cast<size_t>(x.size()));
  auto invstd = std::make_shared<std::vector<S>>(static_cast<size_t>(C));

  TensorT<S> out = detail::make_op<S>(
      R, C, "batchnorm", {x, gamma, beta}, [xn, gn, bn, xhat, invstd](NodeT<S>& n) {
        const int64_t R = n.rows, C = n.cols;
        if (gn->rg) gn->ensure_grad();
        if (bn->rg) bn->ensure_grad();
        if (xn->rg) xn->ensure_grad();
        for (int64_t c = 0; c < C; ++c) {
          S sum_g = S(0), sum_gx = S(0);
          for (int64_t r = 0; r < R; ++r) {
            S g = n.grad[r * C + c];
            sum_g += g;
            sum_gx += g * (*xhat)[r * C + c];
          }
          if (gn->rg) gn->grad[c] += sum_gx;
          if (bn->rg) bn->grad[c] += sum_g;
          if (xn->rg) {
            S mean_g = sum_g / static_cast<S>(R);
            S mean_gx = sum_gx / static_cast<S>(R);
            S k = gn->val[c] * (*invstd)[c];
            for (int64_t r = 0; r < R; ++r) {
              S g = n.grad[r * C + c];
              xn->grad[r * C + c] += k * (g - mean_g - (*xhat)[r * C + c] * mean_gx);
            }
          }
        }
      });

  BatchNormResult<S> res;
  res.batch_mean.resize(static_cast<size_t>(C));
  res.batch_var.resize(static_cast<size_t>(C));
  const S* px = x.data();
  const S* pg = gamma.data();
  const S* pb = beta.data();
  S* po = out.data();
  for (int64_t c = 0; c < C; ++c) {
    S mean = S(0);
    for (int64_t r = 0; r < R; ++r) mean += px[r * C + c];
    mean /= static_cast<S>(R);
    S var = S(0);
    for (int64_t r = 0; r < R; ++r) {
      S d = px[r * C + c] - mean;
      var += d * d;
    }
    var /= static_cast<S>(R);
    res.batch_mean[c] = mean;
    res.batch_var[c] = var;
    S is = S(1) / std::sqrt(var + eps);
    (*invstd)[c] = is;
    for (int64_t r = 0; r < R; ++r) {
      S xh = (px[r * C + c] - mean) * is;
      (*xhat)[r * C + c] = xh;
      po[r * C + c] = pg[c] * xh + pb[c];
    }
  }
  res.y = out;
  detail::finite_check(*out.node());
  return res;
}

// Mean cross entropy over rows of logits, numerically stable, with optional
// per-class weights (weighted mean).
template <class S>
TensorT<S> ce_with_logits(const TensorT<S>& logits, const std::vector<int>& labels,
                          const std::vector<S>& class_weights = {}) {
  const int64_t R = logits.rows(), C = logits.cols();
  if (static_cast<int64_t>(labels.size()) != R)
    throw ValidationError("cross_entropy: one label per row required");
  for (int y : labels)
    if (y < 0 || y >= C) throw ValidationError("cross_entropy: label out of range");
  if (!class_weights.empty() && static_cast<int64_t>(class_weights.size()) != C)
    throw ValidationError("cross_entropy: one weight per class required");

  auto ln = logits.node();
  auto probs = std::make_shared<std::vector<S>>(static_cast<size_t>(R * C));
  auto lab = std::make_shared<std::vector<int>>(labels);
  auto wts = std::make_shared<std::vector<S>>(class_weights);

  S weight_sum = S(0);
  for (int64_t r = 0; r < R; ++r)
    weight_sum += wts->empty() ? S(1) : (*wts)[labels[r]];

  TensorT<S> out = detail::make_op<S>(
      1, 1, "cross_entropy", {logits}, [ln, probs, lab, wts, weight_sum](NodeT<S>& n) {
        ln->ensure_grad();
        const int64_t R = ln->rows, C = ln->cols;
        S g = n.grad[0] / weight_sum;
        for (int64_t r = 0; r < R; ++r) {
          S w = wts->empty() ? S(1) : (*wts)[(*lab)[r]];
          for (int64_t c = 0; c < C; ++c) {
            S delta = (c == (*lab)[r]) ? S(1) : S(0);
            ln->grad[r * C + c] += g * w * ((*probs)[r * C + c] - delta);
          }
        }
      });

  const S* pl = logits.data();
  S loss = S(0);
  for (int64_t r = 0; r < R; ++r) {
    const S* row = pl + r * C;
    S mx = row[0];
    for (int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    S sum = S(0);
    for (int64_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
    S lse = mx + std::log(sum);
    for (int64_t c = 0; c < C; ++c) (*probs)[r * C + c] = std::exp(row[c] - lse);
    S w = wts->empty() ? S(1) : (*wts)[labels[r]];
    loss += w * (lse - row[labels[r]]);
  }
  out.data()[0] = loss / weight_sum;
  detail::finite_check(*out.node());
  return out;
}

// Treats consecutive column pairs of `diff` as 2-vectors and applies the
// norm-based robust penalty to each: r^2 / (2 delta) when the pair norm r is
// at most delta, else r - delta / 2. Output is (rows, pairs).
template <class S>
TensorT<S> huber_pairs(const TensorT<S>& diff, S delta) {
  if (diff.cols() % 2 != 0) throw ValidationError("huber_pairs: even column count required");
  if (!(delta > S(0))) throw ValidationError("huber_pairs: delta must be positive");
  const int64_t R = diff.rows(), M = diff.cols() / 2;
  auto dn = diff.node();
  TensorT<S> out =
      detail::make_op<S>(R, M, "huber_pairs", {diff}, [dn, delta](NodeT<S>& n) {
        dn->ensure_grad();
        const int64_t M = n.cols;
        for (int64_t r = 0; r < n.rows; ++r) {
          for (int64_t m = 0; m < M; ++m) {
            S dx = dn->val[r * 2 * M + 2 * m];
            S dy = dn->val[r * 2 * M + 2 * m + 1];
            S rad = std::sqrt(dx * dx + dy * dy);
            S factor = (rad <= delta) ? (S(1) / delta) : (S(1) / rad);
            S g = n.grad[r * M + m];
            dn->grad[r * 2 * M + 2 * m] += g * dx * factor;
            dn->grad[r * 2 * M + 2 * m + 1] += g * dy * factor;
          }
        }
      });
  const S* pd = diff.data();
  S* po = out.data();
  for (int64_t r = 0; r < R; ++r) {
    for (int64_t m = 0; m < M; ++m) {
      S dx = pd[r * 2 * M + 2 * m];
      S dy = pd[r * 2 * M + 2 * m + 1];
      S rad = std::sqrt(dx * dx + dy * dy);
      po[r * M + m] = (rad <= delta) ? (rad * rad / (S(2) * delta)) : (rad - delta / S(2));
    }
  }
  detail::finite_check(*out.node());
  return out;
}

}  // namespace mint::neuro
