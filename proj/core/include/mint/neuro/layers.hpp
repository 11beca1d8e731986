#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mint/neuro/ops.hpp"
#include "mint/neuro/tensor.hpp"
#include "mint/rng.hpp"

namespace mint::neuro {

// ============================================================================
// Parameters
// ============================================================================

template <class S>
struct ParamT {
  TensorT<S> tensor;
  std::string name;
  bool decay_exempt = false;  // biases and normalization scales skip weight decay
};

// Weight matrices start uniform in +-1/sqrt(fan_in); biases and positional
// tables start at zero.
template <class S>
void init_uniform(TensorT<S>& t, int64_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (S& x : t.values()) x = static_cast<S>(rng.uniform(-bound, bound));
}

template <class S>
using ParamList = std::vector<ParamT<S>*>;

// ============================================================================
// Linear
// ============================================================================

template <class S>
struct LinearT {
  ParamT<S> W;  // (in, out)
  ParamT<S> b;  // (1, out)

  void init(int64_t in, int64_t out, Rng& rng, const std::string& name) {
    W.tensor = TensorT<S>::zeros(in, out, true);
    W.name = name + ".W";
    init_uniform(W.tensor, in, rng);
    b.tensor = TensorT<S>::zeros(1, out, true);
    b.name = name + ".b";
    b.decay_exempt = true;
  }

  TensorT<S> forward(const TensorT<S>& x) const {
    return add_rowvec(matmul(x, W.tensor), b.tensor);
  }

  void collect(ParamList<S>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
};

// ============================================================================
// Normalization layers
// ============================================================================

template <class S>
struct LayerNormT {
  ParamT<S> gamma, beta;
  S eps = S(1e-5);

  void init(int64_t dim, const std::string& name) {
    gamma.tensor = TensorT<S>::from(1, dim, std::vector<S>(dim, S(1)), true);
    gamma.name = name + ".gamma";
    gamma.decay_exempt = true;
    beta.tensor = TensorT<S>::zeros(1, dim, true);
    beta.name = name + ".beta";
    beta.decay_exempt = true;
  }

  TensorT<S> forward(const TensorT<S>& x) const {
    return layernorm_rows(x, gamma.tensor, beta.tensor, eps);
  }

  void collect(ParamList<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <class S>
struct BatchNormT {
  ParamT<S> gamma, beta;
  std::vector<S> running_mean, running_var;
  S eps = S(1e-5);
  S momentum = S(0.1);

  void init(int64_t dim, const std::string& name) {
    gamma.tensor = TensorT<S>::from(1, dim, std::vector<S>(dim, S(1)), true);
    gamma.name = name + ".gamma";
    gamma.decay_exempt = true;
    beta.tensor = TensorT<S>::zeros(1, dim, true);
    beta.name = name + ".beta";
    beta.decay_exempt = true;
    running_mean.assign(dim, S(0));
    running_var.assign(dim, S(1));
  }

  // Training mode normalizes with batch statistics (rows >= 2 enforced by the
  // op) and refreshes the running estimates in place. Evaluation mode is a
  // fixed affine map, deterministic for repeated inputs.
  TensorT<S> forward(const TensorT<S>& x, bool train) {
    if (train) {
      BatchNormResult<S> r = batchnorm_train(x, gamma.tensor, beta.tensor, eps);
      for (size_t c = 0; c < running_mean.size(); ++c) {
        running_mean[c] = (S(1) - momentum) * running_mean[c] + momentum * r.batch_mean[c];
        running_var[c] = (S(1) - momentum) * running_var[c] + momentum * r.batch_var[c];
      }
      return r.y;
    }
    int64_t dim = x.cols();
    std::vector<S> shift(dim), sc(dim);
    for (int64_t c = 0; c < dim; ++c) {
      S is = S(1) / std::sqrt(running_var[c] + eps);
      sc[c] = is;
      shift[c] = -running_mean[c] * is;
    }
    TensorT<S> scale_row = TensorT<S>::from(1, dim, std::move(sc));
    TensorT<S> shift_row = TensorT<S>::from(1, dim, std::move(shift));
    TensorT<S> xhat = add_rowvec(mul_rowvec(x, scale_row), shift_row);
    return add_rowvec(mul_rowvec(xhat, gamma.tensor), beta.tensor);
  }

  void collect(ParamList<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// ============================================================================
// Dropout
// ============================================================================

template <class S>
struct DropoutT {
  S p = S(0.1);

  // Inverted dropout: surviving activations are scaled by 1/(1-p) during
  // training so evaluation is the identity.
  TensorT<S> forward(const TensorT<S>& x, bool train, Rng& rng) const {
    if (!train || p <= S(0)) return x;
    std::vector<S> mask(static_cast<size_t>(x.size()));
    S keep_scale = S(1) / (S(1) - p);
    for (S& m : mask) m = rng.bernoulli(static_cast<double>(p)) ? S(0) : keep_scale;
    TensorT<S> mask_t = TensorT<S>::from(x.rows(), x.cols(), std::move(mask));
    return mul(x, mask_t);
  }
};

// ============================================================================
// Recurrent cells
// ============================================================================

// Gate convention:
//   z = sigmoid(Wz [x; h] + bz)
//   r = sigmoid(Wr [x; h] + br)
//   hcand = tanh(Wh [x; r * h] + bh)
//   h' = (1 - z) * h + z * hcand
template <class S>
struct GruCellT {
  ParamT<S> Wzr;  // (in + hidden, 2 * hidden), z block first
  ParamT<S> bzr;
  ParamT<S> Wh;  // (in + hidden, hidden)
  ParamT<S> bh;
  int64_t hidden = 0;

  void init(int64_t in, int64_t h, Rng& rng, const std::string& name) {
    hidden = h;
    Wzr.tensor = TensorT<S>::zeros(in + h, 2 * h, true);
    Wzr.name = name + ".Wzr";
    init_uniform(Wzr.tensor, in + h, rng);
    bzr.tensor = TensorT<S>::zeros(1, 2 * h, true);
    bzr.name = name + ".bzr";
    bzr.decay_exempt = true;
    Wh.tensor = TensorT<S>::zeros(in + h, h, true);
    Wh.name = name + ".Wh";
    init_uniform(Wh.tensor, in + h, rng);
    bh.tensor = TensorT<S>::zeros(1, h, true);
    bh.name = name + ".bh";
    bh.decay_exempt = true;
  }

  TensorT<S> step(const TensorT<S>& x, const TensorT<S>& h) const {
    TensorT<S> xh = concat_cols<S>({x, h});
    TensorT<S> zr = sigmoid_t(add_rowvec(matmul(xh, Wzr.tensor), bzr.tensor));
    TensorT<S> z = slice_cols(zr, 0, hidden);
    TensorT<S> r = slice_cols(zr, hidden, 2 * hidden);
    TensorT<S> xrh = concat_cols<S>({x, mul(r, h)});
    TensorT<S> hcand = tanh_t(add_rowvec(matmul(xrh, Wh.tensor), bh.tensor));
    TensorT<S> keep = mul(sub(ones_like(z), z), h);
    return add(keep, mul(z, hcand));
  }

  TensorT<S> initial_state(int64_t batch) const { return TensorT<S>::zeros(batch, hidden); }

  void collect(ParamList<S>& out) {
    out.push_back(&Wzr);
    out.push_back(&bzr);
    out.push_back(&Wh);
    out.push_back(&bh);
  }

 private:
  static TensorT<S> ones_like(const TensorT<S>& t) {
    return TensorT<S>::from(t.rows(), t.cols(),
                            std::vector<S>(static_cast<size_t>(t.size()), S(1)));
  }
};

// Standard cell:
//   i, f, o = sigmoid, g = tanh of the four gate blocks over [x; h]
//   c' = f * c + i * g
//   h' = o * tanh(c')
template <class S>
struct LstmCellT {
  ParamT<S> W;  // (in + hidden, 4 * hidden), gate order i, f, o, g
  ParamT<S> b;
  int64_t hidden = 0;

  void init(int64_t in, int64_t h, Rng& rng, const std::string& name) {
    hidden = h;
    W.tensor = TensorT<S>::zeros(in + h, 4 * h, true);
    W.name = name + ".W";
    init_uniform(W.tensor, in + h, rng);
    b.tensor = TensorT<S>::zeros(1, 4 * h, true);
    b.name = name + ".b";
    b.decay_exempt = true;
  }

  std::pair<TensorT<S>, TensorT<S>> step(const TensorT<S>& x, const TensorT<S>& h,
                                         const TensorT<S>& c) const {
    TensorT<S> gates = add_rowvec(matmul(concat_cols<S>({x, h}), W.tensor), b.tensor);
    TensorT<S> i = sigmoid_t(slice_cols(gates, 0, hidden));
    TensorT<S> f = sigmoid_t(slice_cols(gates, hidden, 2 * hidden));
    TensorT<S> o = sigmoid_t(slice_cols(gates, 2 * hidden, 3 * hidden));
    TensorT<S> g = tanh_t(slice_cols(gates, 3 * hidden, 4 * hidden));
    TensorT<S> c_next = add(mul(f, c), mul(i, g));
    TensorT<S> h_next = mul(o, tanh_t(c_next));
    return {h_next, c_next};
  }

  TensorT<S> initial_state(int64_t batch) const { return TensorT<S>::zeros(batch, hidden); }

  void collect(ParamList<S>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
};

// ============================================================================
// Transformer pieces
// ============================================================================

template <class S>
struct MultiHeadSelfAttentionT {
  LinearT<S> qkv;  // packed projections, query block first
  LinearT<S> out;
  int64_t heads = 4;
  int64_t dim = 0;

  void init(int64_t d, int64_t n_heads, Rng& rng, const std::string& name) {
    dim = d;
    heads = n_heads;
    if (d % n_heads != 0) throw ValidationError("attention width must divide by heads");
    qkv.init(d, 3 * d, rng, name + ".qkv");
    out.init(d, d, rng, name + ".out");
  }

  TensorT<S> forward(const TensorT<S>& x, int64_t batch, int64_t window) const {
    TensorT<S> packed = qkv.forward(x);
    TensorT<S> q = slice_cols(packed, 0, dim);
    TensorT<S> k = slice_cols(packed, dim, 2 * dim);
    TensorT<S> v = slice_cols(packed, 2 * dim, 3 * dim);
    return out.forward(attention(q, k, v, batch, window, heads));
  }

  void collect(ParamList<S>& out_list) {
    qkv.collect(out_list);
    out.collect(out_list);
  }
};

// Pre-norm encoder block: x + MHSA(LN(x)), then + MLP(LN(.)). With the output
// projections of both sublayers zeroed the block is the identity map.
template <class S>
struct TransformerBlockT {
  LayerNormT<S> ln1, ln2;
  MultiHeadSelfAttentionT<S> attn;
  LinearT<S> ff1, ff2;

  void init(int64_t dim, int64_t heads, int64_t ff_dim, Rng& rng, const std::string& name) {
    ln1.init(dim, name + ".ln1");
    ln2.init(dim, name + ".ln2");
    attn.init(dim, heads, rng, name + ".attn");
    ff1.init(dim, ff_dim, rng, name + ".ff1");
    ff2.init(ff_dim, dim, rng, name + ".ff2");
  }

  TensorT<S> forward(const TensorT<S>& x, int64_t batch, int64_t window) const {
    TensorT<S> h = add(x, attn.forward(ln1.forward(x), batch, window));
    return add(h, ff2.forward(relu_t(ff1.forward(ln2.forward(h)))));
  }

  void collect(ParamList<S>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    ff1.collect(out);
    ff2.collect(out);
  }
};

template <class S>
struct PositionalTableT {
  ParamT<S> table;  // (max_window, dim), zero initialized

  void init(int64_t max_window, int64_t dim, const std::string& name) {
    table.tensor = TensorT<S>::zeros(max_window, dim, true);
    table.name = name + ".table";
  }

  TensorT<S> forward(const TensorT<S>& x, int64_t batch, int64_t window) const {
    return add_positional(x, table.tensor, batch, window);
  }

  void collect(ParamList<S>& out) { out.push_back(&table); }
};

}  // namespace mint::neuro
