#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "mint/types.hpp"

namespace mint::neuro {

// ============================================================================
// Reverse-mode autodiff over row-major float matrices
// ============================================================================
//
// Tensors are 2-D (scalars are 1x1). Each operation records a backward
// closure; Tensor::backward() walks the recorded graph in reverse creation
// order and accumulates gradients into every reachable leaf that requires
// them. Dense products go through Eigen; everything else is plain loops.

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using EMap = Eigen::Map<EMat<S>>;
template <class S>
using ECMap = Eigen::Map<const EMat<S>>;

// When enabled, every op scans its output and raises NumericalError on the
// first non-finite value, naming the op. Off by default; training loops check
// their loss scalars instead.
inline std::atomic<bool> g_finite_checks{false};
inline void set_finite_checks(bool on) { g_finite_checks.store(on); }

// Graph recording toggle for inference paths.
inline thread_local int g_no_grad_depth = 0;
inline bool grad_enabled() { return g_no_grad_depth == 0; }

struct NoGradGuard {
  NoGradGuard() { ++g_no_grad_depth; }
  ~NoGradGuard() { --g_no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline std::atomic<uint64_t> g_node_counter{0};

template <class S>
struct NodeT {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<S> val;
  std::vector<S> grad;
  bool rg = false;  // participates in backward
  uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<NodeT<S>>> parents;
  std::function<void(NodeT<S>&)> back;

  int64_t size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), S(0));
  }
};

template <class S>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(std::shared_ptr<NodeT<S>> n) : n_(std::move(n)) {}

  static TensorT zeros(int64_t rows, int64_t cols, bool requires_grad = false) {
    auto n = std::make_shared<NodeT<S>>();
    n->rows = rows;
    n->cols = cols;
    n->val.assign(static_cast<size_t>(rows * cols), S(0));
    n->rg = requires_grad;
    n->id = ++g_node_counter;
    return TensorT(std::move(n));
  }

  static TensorT from(int64_t rows, int64_t cols, std::vector<S> values,
                      bool requires_grad = false) {
    if (static_cast<int64_t>(values.size()) != rows * cols)
      throw ValidationError("tensor value count does not match shape");
    auto n = std::make_shared<NodeT<S>>();
    n->rows = rows;
    n->cols = cols;
    n->val = std::move(values);
    n->rg = requires_grad;
    n->id = ++g_node_counter;
    return TensorT(std::move(n));
  }

  static TensorT scalar(S v) { return from(1, 1, {v}); }

  bool defined() const { return n_ != nullptr; }
  int64_t rows() const { return n_->rows; }
  int64_t cols() const { return n_->cols; }
  int64_t size() const { return n_->size(); }
  bool requires_grad() const { return n_->rg; }
  const char* op() const { return n_->op; }

  std::vector<S>& values() { return n_->val; }
  const std::vector<S>& values() const { return n_->val; }
  S* data() { return n_->val.data(); }
  const S* data() const { return n_->val.data(); }

  std::vector<S>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }

  S item() const {
    if (n_->size() != 1) throw ValidationError("item() requires a 1x1 tensor");
    return n_->val[0];
  }

  EMap<S> map() { return EMap<S>(n_->val.data(), n_->rows, n_->cols); }
  ECMap<S> cmap() const { return ECMap<S>(n_->val.data(), n_->rows, n_->cols); }

  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
  }

  // Value copy severed from the graph.
  TensorT detach() const { return from(rows(), cols(), n_->val, false); }

  std::shared_ptr<NodeT<S>> node() const { return n_; }

  // Reverse sweep seeded with d(loss)/d(loss) = 1. Only valid on scalars.
  void backward() const {
    if (n_->size() != 1) throw ValidationError("backward() requires a scalar loss");
    if (!n_->rg) return;
    std::vector<NodeT<S>*> order;
    std::unordered_set<NodeT<S>*> seen;
    std::vector<NodeT<S>*> stack{n_.get()};
    seen.insert(n_.get());
    while (!stack.empty()) {
      NodeT<S>* cur = stack.back();
      stack.pop_back();
      order.push_back(cur);
      for (auto& p : cur->parents) {
        if (p->rg && seen.insert(p.get()).second) stack.push_back(p.get());
      }
    }
    std::sort(order.begin(), order.end(),
              [](const NodeT<S>* a, const NodeT<S>* b) { return a->id > b->id; });
    n_->ensure_grad();
    n_->grad[0] += S(1);
    for (NodeT<S>* node : order) {
      if (node->back) node->back(*node);
    }
  }

 private:
  std::shared_ptr<NodeT<S>> n_;
};

namespace detail {

template <class S>
inline void finite_check(const NodeT<S>& n) {
  if (!g_finite_checks.load(std::memory_order_relaxed)) return;
  for (S x : n.val) {
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericalError(std::string("non-finite value produced by op '") + n.op + "'");
  }
}

template <class S>
inline TensorT<S> make_op(int64_t rows, int64_t cols, const char* op,
                          std::vector<TensorT<S>> parents,
                          std::function<void(NodeT<S>&)> back) {
  auto n = std::make_shared<NodeT<S>>();
  n->rows = rows;
  n->cols = cols;
  n->val.assign(static_cast<size_t>(rows * cols), S(0));
  n->op = op;
  n->id = ++g_node_counter;
  if (grad_enabled()) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    if (rg) {
      n->rg = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node());
      n->back = std::move(back);
    }
  }
  return TensorT<S>(std::move(n));
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Dense products
// ----------------------------------------------------------------------------

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimensions disagree");
  auto an = a.node();
  auto bn = b.node();
  TensorT<S> out = detail::make_op<S>(
      a.rows(), b.cols(), "matmul", {a, b}, [an, bn](NodeT<S>& n) {
        ECMap<S> g(n.grad.data(), n.rows, n.cols);
        ECMap<S> av(an->val.data(), an->rows, an->cols);
        ECMap<S> bv(bn->val.data(), bn->rows, bn->cols);
        if (an->rg) {
          an->ensure_grad();
          EMap<S>(an->grad.data(), an->rows, an->cols).noalias() += g * bv.transpose();
        }
        if (bn->rg) {
          bn->ensure_grad();
          EMap<S>(bn->grad.data(), bn->rows, bn->cols).noalias() += av.transpose() * g;
        }
      });
  out.map().noalias() = a.cmap() * b.cmap();
  detail::finite_check(*out.node());
  return out;
}

// ----------------------------------------------------------------------------
// Elementwise arithmetic
// ----------------------------------------------------------------------------

namespace detail {
template <class S>
inline void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch");
}
}  // namespace detail

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "add");
  auto an = a.node();
  auto bn = b.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "add", {a, b}, [an, bn](NodeT<S>& n) {
        if (an->rg) {
          an->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->rg) {
          bn->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) bn->grad[i] += n.grad[i];
        }
      });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "sub");
  auto an = a.node();
  auto bn = b.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "sub", {a, b}, [an, bn](NodeT<S>& n) {
        if (an->rg) {
          an->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->rg) {
          bn->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) bn->grad[i] -= n.grad[i];
        }
      });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "mul", {a, b}, [an, bn](NodeT<S>& n) {
        if (an->rg) {
          an->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) an->grad[i] += n.grad[i] * bn->val[i];
        }
        if (bn->rg) {
          bn->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) bn->grad[i] += n.grad[i] * an->val[i];
        }
      });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
  auto an = a.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "scale", {a}, [an, c](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t i = 0; i < n.size(); ++i) an->grad[i] += c * n.grad[i];
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = c * pa[i];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> neg(const TensorT<S>& a) {
  return scale(a, S(-1));
}

template <class S>
TensorT<S> add_scalar(const TensorT<S>& a, S c) {
  auto an = a.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "add_scalar", {a}, [an](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t i = 0; i < n.size(); ++i) an->grad[i] += n.grad[i];
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] + c;
  detail::finite_check(*out.node());
  return out;
}

// Row-broadcast bias add: a is (r, c), v is (1, c).
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& a, const TensorT<S>& v) {
  if (v.rows() != 1 || v.cols() != a.cols())
    throw ValidationError("add_rowvec: vector must be (1, cols)");
  auto an = a.node();
  auto vn = v.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "add_rowvec", {a, v}, [an, vn](NodeT<S>& n) {
        if (an->rg) {
          an->ensure_grad();
          for (int64_t i = 0; i < n.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (vn->rg) {
          vn->ensure_grad();
          for (int64_t r = 0; r < n.rows; ++r)
            for (int64_t c = 0; c < n.cols; ++c) vn->grad[c] += n.grad[r * n.cols + c];
        }
      });
  const S* pa = a.data();
  const S* pv = v.data();
  S* po = out.data();
  for (int64_t r = 0; r < out.rows(); ++r)
    for (int64_t c = 0; c < out.cols(); ++c) po[r * out.cols() + c] = pa[r * out.cols() + c] + pv[c];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> mul_rowvec(const TensorT<S>& a, const TensorT<S>& v) {
  if (v.rows() != 1 || v.cols() != a.cols())
    throw ValidationError("mul_rowvec: vector must be (1, cols)");
  auto an = a.node();
  auto vn = v.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "mul_rowvec", {a, v}, [an, vn](NodeT<S>& n) {
        if (an->rg) {
          an->ensure_grad();
          for (int64_t r = 0; r < n.rows; ++r)
            for (int64_t c = 0; c < n.cols; ++c)
              an->grad[r * n.cols + c] += n.grad[r * n.cols + c] * vn->val[c];
        }
        if (vn->rg) {
          vn->ensure_grad();
          for (int64_t r = 0; r < n.rows; ++r)
            for (int64_t c = 0; c < n.cols; ++c)
              vn->grad[c] += n.grad[r * n.cols + c] * an->val[r * n.cols + c];
        }
      });
  const S* pa = a.data();
  const S* pv = v.data();
  S* po = out.data();
  for (int64_t r = 0; r < out.rows(); ++r)
    for (int64_t c = 0; c < out.cols(); ++c)
      po[r * out.cols() + c] = pa[r * out.cols() + c] * pv[c];
  detail::finite_check(*out.node());
  return out;
}

// ----------------------------------------------------------------------------
// Shape surgery
// ----------------------------------------------------------------------------

template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  int64_t rows = parts[0].rows();
  int64_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += p.cols();
  }
  std::vector<std::shared_ptr<NodeT<S>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  TensorT<S> out =
      detail::make_op<S>(rows, cols, "concat_cols", parts, [nodes](NodeT<S>& n) {
        int64_t off = 0;
        for (auto& p : nodes) {
          if (p->rg) {
            p->ensure_grad();
            for (int64_t r = 0; r < p->rows; ++r)
              for (int64_t c = 0; c < p->cols; ++c)
                p->grad[r * p->cols + c] += n.grad[r * n.cols + off + c];
          }
          off += p->cols;
        }
      });
  S* po = out.data();
  int64_t off = 0;
  for (const auto& p : parts) {
    const S* pp = p.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < p.cols(); ++c) po[r * cols + off + c] = pp[r * p.cols() + c];
    off += p.cols();
  }
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no inputs");
  int64_t cols = parts[0].cols();
  int64_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ValidationError("concat_rows: column mismatch");
    rows += p.rows();
  }
  std::vector<std::shared_ptr<NodeT<S>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  TensorT<S> out =
      detail::make_op<S>(rows, cols, "concat_rows", parts, [nodes](NodeT<S>& n) {
        int64_t off = 0;
        for (auto& p : nodes) {
          if (p->rg) {
            p->ensure_grad();
            for (int64_t i = 0; i < p->size(); ++i) p->grad[i] += n.grad[off + i];
          }
          off += p->size();
        }
      });
  S* po = out.data();
  int64_t off = 0;
  for (const auto& p : parts) {
    const S* pp = p.data();
    std::copy(pp, pp + p.size(), po + off);
    off += p.size();
  }
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> slice_cols(const TensorT<S>& a, int64_t c0, int64_t c1) {
  if (c0 < 0 || c1 > a.cols() || c0 >= c1) throw ValidationError("slice_cols: bad range");
  auto an = a.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), c1 - c0, "slice_cols", {a}, [an, c0](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t r = 0; r < n.rows; ++r)
          for (int64_t c = 0; c < n.cols; ++c)
            an->grad[r * an->cols + c0 + c] += n.grad[r * n.cols + c];
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t r = 0; r < out.rows(); ++r)
    for (int64_t c = 0; c < out.cols(); ++c) po[r * out.cols() + c] = pa[r * a.cols() + c0 + c];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> gather_cols(const TensorT<S>& a, std::vector<int> idx) {
  for (int c : idx)
    if (c < 0 || c >= a.cols()) throw ValidationError("gather_cols: index out of range");
  auto an = a.node();
  auto shared_idx = std::make_shared<std::vector<int>>(std::move(idx));
  TensorT<S> out = detail::make_op<S>(
      a.rows(), static_cast<int64_t>(shared_idx->size()), "gather_cols", {a},
      [an, shared_idx](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t r = 0; r < n.rows; ++r)
          for (int64_t c = 0; c < n.cols; ++c)
            an->grad[r * an->cols + (*shared_idx)[c]] += n.grad[r * n.cols + c];
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t r = 0; r < out.rows(); ++r)
    for (int64_t c = 0; c < out.cols(); ++c)
      po[r * out.cols() + c] = pa[r * a.cols() + (*shared_idx)[c]];
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> gather_rows(const TensorT<S>& a, std::vector<int64_t> idx) {
  for (int64_t r : idx)
    if (r < 0 || r >= a.rows()) throw ValidationError("gather_rows: index out of range");
  auto an = a.node();
  auto shared_idx = std::make_shared<std::vector<int64_t>>(std::move(idx));
  TensorT<S> out = detail::make_op<S>(
      static_cast<int64_t>(shared_idx->size()), a.cols(), "gather_rows", {a},
      [an, shared_idx](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t r = 0; r < n.rows; ++r) {
          int64_t src = (*shared_idx)[r];
          for (int64_t c = 0; c < n.cols; ++c)
            an->grad[src * an->cols + c] += n.grad[r * n.cols + c];
        }
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t r = 0; r < out.rows(); ++r) {
    int64_t src = (*shared_idx)[r];
    std::copy(pa + src * a.cols(), pa + (src + 1) * a.cols(), po + r * out.cols());
  }
  detail::finite_check(*out.node());
  return out;
}

// ----------------------------------------------------------------------------
// Pointwise nonlinearities
// ----------------------------------------------------------------------------

namespace detail {
template <class S, class Fwd, class BwdFromOut>
TensorT<S> unary_from_output(const TensorT<S>& a, const char* name, Fwd fwd,
                             BwdFromOut dydx_from_y) {
  auto an = a.node();
  TensorT<S> out = detail::make_op<S>(
      a.rows(), a.cols(), name, {a}, [an, dydx_from_y](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t i = 0; i < n.size(); ++i)
          an->grad[i] += n.grad[i] * dydx_from_y(n.val[i], an->val[i]);
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = fwd(pa[i]);
  detail::finite_check(*out.node());
  return out;
}
}  // namespace detail

template <class S>
TensorT<S> tanh_t(const TensorT<S>& a) {
  return detail::unary_from_output(
      a, "tanh", [](S x) { return std::tanh(x); },
      [](S y, S) { return S(1) - y * y; });
}

template <class S>
TensorT<S> sigmoid_t(const TensorT<S>& a) {
  return detail::unary_from_output(
      a, "sigmoid", [](S x) { return S(1) / (S(1) + std::exp(-x)); },
      [](S y, S) { return y * (S(1) - y); });
}

template <class S>
TensorT<S> relu_t(const TensorT<S>& a) {
  return detail::unary_from_output(
      a, "relu", [](S x) { return x > S(0) ? x : S(0); },
      [](S, S x) { return x > S(0) ? S(1) : S(0); });
}

template <class S>
TensorT<S> exp_t(const TensorT<S>& a) {
  return detail::unary_from_output(
      a, "exp", [](S x) { return std::exp(x); }, [](S y, S) { return y; });
}

template <class S>
TensorT<S> log_t(const TensorT<S>& a) {
  return detail::unary_from_output(
      a, "log", [](S x) { return std::log(x); }, [](S, S x) { return S(1) / x; });
}

template <class S>
TensorT<S> square_t(const TensorT<S>& a) {
  return detail::unary_from_output(
      a, "square", [](S x) { return x * x; }, [](S, S x) { return S(2) * x; });
}

// Clamp with straight-through gradient strictly inside (lo, hi); values at or
// beyond a bound get zero gradient.
template <class S>
TensorT<S> clamp_t(const TensorT<S>& a, S lo, S hi) {
  return detail::unary_from_output(
      a, "clamp", [lo, hi](S x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](S, S x) { return (x > lo && x < hi) ? S(1) : S(0); });
}

template <class S>
TensorT<S> clamp_min_t(const TensorT<S>& a, S lo) {
  return detail::unary_from_output(
      a, "clamp_min", [lo](S x) { return std::max(x, lo); },
      [lo](S, S x) { return x > lo ? S(1) : S(0); });
}

// ----------------------------------------------------------------------------
// Row softmax
// ----------------------------------------------------------------------------

template <class S>
TensorT<S> softmax_rows(const TensorT<S>& a) {
  auto an = a.node();
  TensorT<S> out =
      detail::make_op<S>(a.rows(), a.cols(), "softmax", {a}, [an](NodeT<S>& n) {
        an->ensure_grad();
        for (int64_t r = 0; r < n.rows; ++r) {
          const S* y = n.val.data() + r * n.cols;
          const S* g = n.grad.data() + r * n.cols;
          S dot = S(0);
          for (int64_t c = 0; c < n.cols; ++c) dot += g[c] * y[c];
          S* ga = an->grad.data() + r * n.cols;
          for (int64_t c = 0; c < n.cols; ++c) ga[c] += y[c] * (g[c] - dot);
        }
      });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t r = 0; r < a.rows(); ++r) {
    const S* x = pa + r * a.cols();
    S* y = po + r * a.cols();
    S mx = x[0];
    for (int64_t c = 1; c < a.cols(); ++c) mx = std::max(mx, x[c]);
    S sum = S(0);
    for (int64_t c = 0; c < a.cols(); ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    for (int64_t c = 0; c < a.cols(); ++c) y[c] /= sum;
  }
  detail::finite_check(*out.node());
  return out;
}

// ----------------------------------------------------------------------------
// Reductions
// ----------------------------------------------------------------------------

template <class S>
TensorT<S> sum_all(const TensorT<S>& a) {
  auto an = a.node();
  TensorT<S> out = detail::make_op<S>(1, 1, "sum", {a}, [an](NodeT<S>& n) {
    an->ensure_grad();
    S g = n.grad[0];
    for (int64_t i = 0; i < an->size(); ++i) an->grad[i] += g;
  });
  S acc = S(0);
  const S* pa = a.data();
  for (int64_t i = 0; i < a.size(); ++i) acc += pa[i];
  out.data()[0] = acc;
  detail::finite_check(*out.node());
  return out;
}

template <class S>
TensorT<S> mean_all(const TensorT<S>& a) {
  return scale(sum_all(a), S(1) / static_cast<S>(a.size()));
}

}  // namespace mint::neuro
