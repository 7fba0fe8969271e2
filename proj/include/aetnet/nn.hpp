#pragma once

// Minimal reverse-mode differentiable tensor engine. Every op returns a new
// node holding its forward value plus a backward closure that scatters the
// node's gradient into its parents; backward() topologically sorts the graph
// from the loss and replays those closures in reverse. Templated on the
// scalar type: float is the compute type, double exists so oracle tests can
// run finite-difference checks at tight tolerances.
//
// Conventions: row-major storage; conv inputs are [N, C, H, W] (2-d) or
// [C, L] (1-d); weights [C_out, C_in, K, K] / [C_out, C_in, K]. No
// broadcasting. A node whose `requires_grad` is false is a constant leaf.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace aetnet::nn {

template <typename S>
struct TensorData {
  std::vector<int> dims;
  std::vector<S> value;
  std::vector<S> grad;  // sized on demand
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorData<S>>> parents;
  std::function<void()> backward_fn;

  size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

template <typename S>
using Tensor = std::shared_ptr<TensorData<S>>;

inline size_t numel(const std::vector<int>& dims) {
  size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
    n *= (size_t)d;
  }
  return n;
}

template <typename S>
Tensor<S> make_tensor(std::vector<int> dims) {
  auto t = std::make_shared<TensorData<S>>();
  t->value.assign(numel(dims), S(0));
  t->dims = std::move(dims);
  return t;
}

template <typename S>
Tensor<S> make_tensor(std::vector<int> dims, std::vector<S> data) {
  if (numel(dims) != data.size()) throw std::invalid_argument("tensor data/shape mismatch");
  auto t = std::make_shared<TensorData<S>>();
  t->dims = std::move(dims);
  t->value = std::move(data);
  return t;
}

template <typename S>
Tensor<S> make_tensor(std::vector<int> dims, std::initializer_list<S> data) {
  return make_tensor(std::move(dims), std::vector<S>(data));
}

namespace detail {

template <typename S>
void check_dims(const Tensor<S>& t, size_t ndim, const char* what) {
  if (!t || t->dims.size() != ndim)
    throw std::invalid_argument(std::string(what) + ": expected a " + std::to_string(ndim) +
                                "-d tensor");
}

template <typename S, typename... Parents>
void wire(Tensor<S>& out, std::function<void()> fn, const Parents&... parents) {
  bool needs = (... || parents->requires_grad);
  if (!needs) return;
  out->requires_grad = true;
  out->ensure_grad();
  (out->parents.push_back(parents), ...);
  out->backward_fn = std::move(fn);
}

}  // namespace detail

// Runs reverse-mode accumulation from a scalar loss node.
template <typename S>
void backward(const Tensor<S>& loss) {
  if (!loss || loss->size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!loss->requires_grad)
    throw std::invalid_argument("backward: loss does not depend on any trainable tensor");

  std::vector<TensorData<S>*> order;
  std::unordered_set<TensorData<S>*> seen;
  std::vector<std::pair<TensorData<S>*, size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorData<S>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // `order` is parents-before-children; replay children first.
  loss->ensure_grad();
  loss->grad[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn();
}

// ---------------------------------------------------------------------------
// Elementwise / shape ops

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S alpha) {
  auto out = make_tensor<S>(x->dims);
  for (size_t i = 0; i < x->size(); ++i) {
    S v = x->value[i];
    out->value[i] = v > S(0) ? v : alpha * v;
  }
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, alpha] {
        x->ensure_grad();
        for (size_t i = 0; i < x->size(); ++i)
          x->grad[i] += o->grad[i] * (x->value[i] > S(0) ? S(1) : alpha);
      },
      x);
  return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> dims) {
  if (numel(dims) != x->size()) throw std::invalid_argument("reshape: element count mismatch");
  auto out = make_tensor<S>(std::move(dims));
  out->value = x->value;
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x] {
        x->ensure_grad();
        for (size_t i = 0; i < x->size(); ++i) x->grad[i] += o->grad[i];
      },
      x);
  return out;
}

// [A, B] -> [B, A].
template <typename S>
Tensor<S> transpose(const Tensor<S>& x) {
  detail::check_dims(x, 2, "transpose");
  const int a = x->dims[0], b = x->dims[1];
  auto out = make_tensor<S>({b, a});
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j) out->value[(size_t)j * a + i] = x->value[(size_t)i * b + j];
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, a, b] {
        x->ensure_grad();
        for (int i = 0; i < a; ++i)
          for (int j = 0; j < b; ++j) x->grad[(size_t)i * b + j] += o->grad[(size_t)j * a + i];
      },
      x);
  return out;
}

// Stacks a length-C vector under an [M, C] matrix, giving [M+1, C].
template <typename S>
Tensor<S> append_row(const Tensor<S>& mat, const Tensor<S>& vec) {
  detail::check_dims(mat, 2, "append_row matrix");
  detail::check_dims(vec, 1, "append_row vector");
  int m = mat->dims[0], c = mat->dims[1];
  if (vec->dims[0] != c) throw std::invalid_argument("append_row: column count mismatch");
  auto out = make_tensor<S>({m + 1, c});
  std::copy(mat->value.begin(), mat->value.end(), out->value.begin());
  std::copy(vec->value.begin(), vec->value.end(), out->value.begin() + (size_t)m * c);
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, mat, vec, m, c] {
        if (mat->requires_grad) {
          mat->ensure_grad();
          for (size_t i = 0; i < (size_t)m * c; ++i) mat->grad[i] += o->grad[i];
        }
        if (vec->requires_grad) {
          vec->ensure_grad();
          for (int j = 0; j < c; ++j) vec->grad[j] += o->grad[(size_t)m * c + j];
        }
      },
      mat, vec);
  return out;
}

// Arithmetic mean over the rows of an [M, C] matrix -> [C].
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& mat) {
  detail::check_dims(mat, 2, "mean_rows");
  int m = mat->dims[0], c = mat->dims[1];
  auto out = make_tensor<S>({c});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j) out->value[j] += mat->value[(size_t)i * c + j];
  for (int j = 0; j < c; ++j) out->value[j] /= S(m);
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, mat, m, c] {
        mat->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < c; ++j) mat->grad[(size_t)i * c + j] += o->grad[j] / S(m);
      },
      mat);
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions

enum class ConvImpl { Auto, Naive, Im2col };

namespace detail {

// Patch matrix for one batch element: rows indexed by k = (ci, ky, kx),
// columns by output pixel; out-of-range taps stored as explicit zeros so the
// naive and im2col paths perform identical arithmetic.
template <typename S>
void im2col(const S* x, int C, int H, int W, int KH, int KW, int pad, int OH, int OW, S* P) {
  size_t col = 0;
  for (int ci = 0; ci < C; ++ci)
    for (int ky = 0; ky < KH; ++ky)
      for (int kx = 0; kx < KW; ++kx) {
        S* row = P + col * (size_t)OH * OW;
        ++col;
        for (int oy = 0; oy < OH; ++oy) {
          int iy = oy - pad + ky;
          for (int ox = 0; ox < OW; ++ox) {
            int ix = ox - pad + kx;
            row[(size_t)oy * OW + ox] =
                (iy >= 0 && iy < H && ix >= 0 && ix < W) ? x[((size_t)ci * H + iy) * W + ix] : S(0);
          }
        }
      }
}

}  // namespace detail

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int pad = 0,
                 ConvImpl impl = ConvImpl::Auto) {
  detail::check_dims(x, 4, "conv2d input");
  detail::check_dims(w, 4, "conv2d weights");
  detail::check_dims(b, 1, "conv2d bias");
  const int N = x->dims[0], C = x->dims[1], H = x->dims[2], W = x->dims[3];
  const int Co = w->dims[0], KH = w->dims[2], KW = w->dims[3];
  if (w->dims[1] != C || b->dims[0] != Co)
    throw std::invalid_argument("conv2d: weight/bias shapes inconsistent with input");
  if (pad < 0) throw std::invalid_argument("conv2d: negative padding");
  const int OH = H + 2 * pad - KH + 1, OW = W + 2 * pad - KW + 1;
  if (OH < 1 || OW < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");

  auto out = make_tensor<S>({N, Co, OH, OW});
  const size_t ckk = (size_t)C * KH * KW, ohw = (size_t)OH * OW;
  const S* wv = w->value.data();
  const S* bv = b->value.data();

  if (impl == ConvImpl::Naive) {
    for (int n = 0; n < N; ++n) {
      const S* xv = x->value.data() + (size_t)n * C * H * W;
      S* ov = out->value.data() + (size_t)n * Co * ohw;
      for (int co = 0; co < Co; ++co)
        for (int oy = 0; oy < OH; ++oy)
          for (int ox = 0; ox < OW; ++ox) {
            S acc = bv[co];
            for (int ci = 0; ci < C; ++ci)
              for (int ky = 0; ky < KH; ++ky) {
                int iy = oy - pad + ky;
                for (int kx = 0; kx < KW; ++kx) {
                  int ix = ox - pad + kx;
                  S xval = (iy >= 0 && iy < H && ix >= 0 && ix < W)
                               ? xv[((size_t)ci * H + iy) * W + ix]
                               : S(0);
                  acc += wv[(((size_t)co * C + ci) * KH + ky) * KW + kx] * xval;
                }
              }
            ov[((size_t)co * OH + oy) * OW + ox] = acc;
          }
    }
  } else {
    std::vector<S> P(ckk * ohw);
    for (int n = 0; n < N; ++n) {
      detail::im2col(x->value.data() + (size_t)n * C * H * W, C, H, W, KH, KW, pad, OH, OW,
                     P.data());
      S* ov = out->value.data() + (size_t)n * Co * ohw;
      for (int co = 0; co < Co; ++co) {
        S* orow = ov + (size_t)co * ohw;
        std::fill(orow, orow + ohw, bv[co]);
        const S* wrow = wv + (size_t)co * ckk;
        for (size_t k = 0; k < ckk; ++k) {
          const S wk = wrow[k];
          const S* prow = P.data() + k * ohw;
          for (size_t o = 0; o < ohw; ++o) orow[o] += wk * prow[o];
        }
      }
    }
  }

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, w, b, pad, N, C, H, W, Co, KH, KW, OH, OW, ckk, ohw] {
        if (b->requires_grad) b->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        std::vector<S> P(ckk * ohw), dP(x->requires_grad ? ckk * ohw : 0);
        for (int n = 0; n < N; ++n) {
          const S* g = o->grad.data() + (size_t)n * Co * ohw;
          detail::im2col(x->value.data() + (size_t)n * C * H * W, C, H, W, KH, KW, pad, OH, OW,
                         P.data());
          if (b->requires_grad)
            for (int co = 0; co < Co; ++co) {
              S acc = S(0);
              const S* grow = g + (size_t)co * ohw;
              for (size_t oi = 0; oi < ohw; ++oi) acc += grow[oi];
              b->grad[co] += acc;
            }
          if (w->requires_grad)
            for (int co = 0; co < Co; ++co) {
              const S* grow = g + (size_t)co * ohw;
              for (size_t k = 0; k < ckk; ++k) {
                const S* prow = P.data() + k * ohw;
                S acc = S(0);
                for (size_t oi = 0; oi < ohw; ++oi) acc += grow[oi] * prow[oi];
                w->grad[(size_t)co * ckk + k] += acc;
              }
            }
          if (x->requires_grad) {
            std::fill(dP.begin(), dP.end(), S(0));
            const S* wv2 = w->value.data();
            for (int co = 0; co < Co; ++co) {
              const S* grow = g + (size_t)co * ohw;
              const S* wrow = wv2 + (size_t)co * ckk;
              for (size_t k = 0; k < ckk; ++k) {
                const S wk = wrow[k];
                S* drow = dP.data() + k * ohw;
                for (size_t oi = 0; oi < ohw; ++oi) drow[oi] += wk * grow[oi];
              }
            }
            S* dx = x->grad.data() + (size_t)n * C * H * W;
            size_t k = 0;
            for (int ci = 0; ci < C; ++ci)
              for (int ky = 0; ky < KH; ++ky)
                for (int kx = 0; kx < KW; ++kx) {
                  const S* drow = dP.data() + k * ohw;
                  ++k;
                  for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < OW; ++ox) {
                      int ix = ox - pad + kx;
                      if (ix >= 0 && ix < W)
                        dx[((size_t)ci * H + iy) * W + ix] += drow[(size_t)oy * OW + ox];
                    }
                  }
                }
          }
        }
      },
      x, w, b);
  return out;
}

template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int pad = 0) {
  detail::check_dims(x, 2, "conv1d input");
  detail::check_dims(w, 3, "conv1d weights");
  detail::check_dims(b, 1, "conv1d bias");
  const int C = x->dims[0], L = x->dims[1];
  const int Co = w->dims[0], K = w->dims[2];
  if (w->dims[1] != C || b->dims[0] != Co)
    throw std::invalid_argument("conv1d: weight/bias shapes inconsistent with input");
  if (pad < 0) throw std::invalid_argument("conv1d: negative padding");
  const int OL = L + 2 * pad - K + 1;
  if (OL < 1) throw std::invalid_argument("conv1d: kernel larger than padded input");

  auto out = make_tensor<S>({Co, OL});
  for (int co = 0; co < Co; ++co)
    for (int ol = 0; ol < OL; ++ol) {
      S acc = b->value[co];
      for (int ci = 0; ci < C; ++ci)
        for (int k = 0; k < K; ++k) {
          int il = ol - pad + k;
          S xval = (il >= 0 && il < L) ? x->value[(size_t)ci * L + il] : S(0);
          acc += w->value[((size_t)co * C + ci) * K + k] * xval;
        }
      out->value[(size_t)co * OL + ol] = acc;
    }

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, w, b, pad, C, L, Co, K, OL] {
        if (b->requires_grad) b->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        for (int co = 0; co < Co; ++co)
          for (int ol = 0; ol < OL; ++ol) {
            S g = o->grad[(size_t)co * OL + ol];
            if (b->requires_grad) b->grad[co] += g;
            for (int ci = 0; ci < C; ++ci)
              for (int k = 0; k < K; ++k) {
                int il = ol - pad + k;
                if (il < 0 || il >= L) continue;
                if (w->requires_grad)
                  w->grad[((size_t)co * C + ci) * K + k] += g * x->value[(size_t)ci * L + il];
                if (x->requires_grad)
                  x->grad[(size_t)ci * L + il] += g * w->value[((size_t)co * C + ci) * K + k];
              }
          }
      },
      x, w, b);
  return out;
}

// ---------------------------------------------------------------------------
// Linear maps

// x: [N, Din], w: [Dout, Din], b: [Dout] -> [N, Dout]
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  detail::check_dims(x, 2, "linear input");
  detail::check_dims(w, 2, "linear weights");
  detail::check_dims(b, 1, "linear bias");
  const int N = x->dims[0], Din = x->dims[1], Dout = w->dims[0];
  if (w->dims[1] != Din || b->dims[0] != Dout)
    throw std::invalid_argument("linear: weight/bias shapes inconsistent with input");

  auto out = make_tensor<S>({N, Dout});
  for (int n = 0; n < N; ++n)
    for (int d = 0; d < Dout; ++d) {
      S acc = b->value[d];
      for (int i = 0; i < Din; ++i)
        acc += w->value[(size_t)d * Din + i] * x->value[(size_t)n * Din + i];
      out->value[(size_t)n * Dout + d] = acc;
    }

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, w, b, N, Din, Dout] {
        if (b->requires_grad) b->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        for (int n = 0; n < N; ++n)
          for (int d = 0; d < Dout; ++d) {
            S g = o->grad[(size_t)n * Dout + d];
            if (b->requires_grad) b->grad[d] += g;
            for (int i = 0; i < Din; ++i) {
              if (w->requires_grad)
                w->grad[(size_t)d * Din + i] += g * x->value[(size_t)n * Din + i];
              if (x->requires_grad)
                x->grad[(size_t)n * Din + i] += g * w->value[(size_t)d * Din + i];
            }
          }
      },
      x, w, b);
  return out;
}

// Independent affine map per row group: x [g, D], w [g, C, D], b [g, C] ->
// [g, C]; row i of the output depends only on row i of the input (the
// grouped-1x1-convolution classifier head).
template <typename S>
Tensor<S> grouped_linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  detail::check_dims(x, 2, "grouped_linear input");
  detail::check_dims(w, 3, "grouped_linear weights");
  detail::check_dims(b, 2, "grouped_linear bias");
  const int G = x->dims[0], D = x->dims[1], C = w->dims[1];
  if (w->dims[0] != G || w->dims[2] != D || b->dims[0] != G || b->dims[1] != C)
    throw std::invalid_argument("grouped_linear: weight/bias shapes inconsistent with input");

  auto out = make_tensor<S>({G, C});
  for (int g = 0; g < G; ++g)
    for (int c = 0; c < C; ++c) {
      S acc = b->value[(size_t)g * C + c];
      for (int d = 0; d < D; ++d)
        acc += w->value[((size_t)g * C + c) * D + d] * x->value[(size_t)g * D + d];
      out->value[(size_t)g * C + c] = acc;
    }

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, w, b, G, D, C] {
        if (b->requires_grad) b->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        for (int g = 0; g < G; ++g)
          for (int c = 0; c < C; ++c) {
            S gr = o->grad[(size_t)g * C + c];
            if (b->requires_grad) b->grad[(size_t)g * C + c] += gr;
            for (int d = 0; d < D; ++d) {
              if (w->requires_grad)
                w->grad[((size_t)g * C + c) * D + d] += gr * x->value[(size_t)g * D + d];
              if (x->requires_grad)
                x->grad[(size_t)g * D + d] += gr * w->value[((size_t)g * C + c) * D + d];
            }
          }
      },
      x, w, b);
  return out;
}

// ---------------------------------------------------------------------------
// Pooling / reductions

// x: [N, C, H, W], square window `size` with stride `size`; trailing rows and
// columns that do not fill a window are dropped. Ties route to the first
// (row-major) index.
template <typename S>
Tensor<S> max_pool2d(const Tensor<S>& x, int size) {
  detail::check_dims(x, 4, "max_pool2d input");
  if (size < 1) throw std::invalid_argument("max_pool2d: size must be >= 1");
  const int N = x->dims[0], C = x->dims[1], H = x->dims[2], W = x->dims[3];
  const int OH = H / size, OW = W / size;
  if (OH < 1 || OW < 1) throw std::invalid_argument("max_pool2d: window exceeds input");

  auto out = make_tensor<S>({N, C, OH, OW});
  auto argmax = std::make_shared<std::vector<size_t>>(out->size());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const size_t plane = ((size_t)n * C + c) * H * W;
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          size_t best_idx = plane + (size_t)(oy * size) * W + ox * size;
          S best = x->value[best_idx];
          for (int dy = 0; dy < size; ++dy)
            for (int dx = 0; dx < size; ++dx) {
              size_t idx = plane + (size_t)(oy * size + dy) * W + (ox * size + dx);
              if (x->value[idx] > best) {
                best = x->value[idx];
                best_idx = idx;
              }
            }
          size_t oidx = (((size_t)n * C + c) * OH + oy) * OW + ox;
          out->value[oidx] = best;
          (*argmax)[oidx] = best_idx;
        }
    }

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, argmax] {
        x->ensure_grad();
        for (size_t i = 0; i < o->size(); ++i) x->grad[(*argmax)[i]] += o->grad[i];
      },
      x);
  return out;
}

// x: [C, L] -> [C, L / size]; same windowing and tie rules as max_pool2d.
template <typename S>
Tensor<S> max_pool1d(const Tensor<S>& x, int size) {
  detail::check_dims(x, 2, "max_pool1d input");
  if (size < 1) throw std::invalid_argument("max_pool1d: size must be >= 1");
  const int C = x->dims[0], L = x->dims[1];
  const int OL = L / size;
  if (OL < 1) throw std::invalid_argument("max_pool1d: window exceeds input");

  auto out = make_tensor<S>({C, OL});
  auto argmax = std::make_shared<std::vector<size_t>>(out->size());
  for (int c = 0; c < C; ++c)
    for (int ol = 0; ol < OL; ++ol) {
      size_t best_idx = (size_t)c * L + ol * size;
      S best = x->value[best_idx];
      for (int d = 0; d < size; ++d) {
        size_t idx = (size_t)c * L + ol * size + d;
        if (x->value[idx] > best) {
          best = x->value[idx];
          best_idx = idx;
        }
      }
      out->value[(size_t)c * OL + ol] = best;
      (*argmax)[(size_t)c * OL + ol] = best_idx;
    }

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, argmax] {
        x->ensure_grad();
        for (size_t i = 0; i < o->size(); ++i) x->grad[(*argmax)[i]] += o->grad[i];
      },
      x);
  return out;
}

// x: [N, C, H, W] -> [N, C], mean over the spatial plane.
template <typename S>
Tensor<S> global_avg(const Tensor<S>& x) {
  detail::check_dims(x, 4, "global_avg input");
  const int N = x->dims[0], C = x->dims[1];
  const size_t hw = (size_t)x->dims[2] * x->dims[3];
  auto out = make_tensor<S>({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* plane = x->value.data() + ((size_t)n * C + c) * hw;
      S acc = S(0);
      for (size_t i = 0; i < hw; ++i) acc += plane[i];
      out->value[(size_t)n * C + c] = acc / S(hw);
    }
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, N, C, hw] {
        x->ensure_grad();
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            S g = o->grad[(size_t)n * C + c] / S(hw);
            S* plane = x->grad.data() + ((size_t)n * C + c) * hw;
            for (size_t i = 0; i < hw; ++i) plane[i] += g;
          }
      },
      x);
  return out;
}

// x: [C, L] -> [C], max over positions; ties route to the first index.
template <typename S>
Tensor<S> global_max(const Tensor<S>& x) {
  detail::check_dims(x, 2, "global_max input");
  const int C = x->dims[0], L = x->dims[1];
  auto out = make_tensor<S>({C});
  auto argmax = std::make_shared<std::vector<size_t>>(C);
  for (int c = 0; c < C; ++c) {
    size_t best_idx = (size_t)c * L;
    S best = x->value[best_idx];
    for (int l = 1; l < L; ++l)
      if (x->value[(size_t)c * L + l] > best) {
        best = x->value[(size_t)c * L + l];
        best_idx = (size_t)c * L + l;
      }
    out->value[c] = best;
    (*argmax)[c] = best_idx;
  }
  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, x, argmax, C] {
        x->ensure_grad();
        for (int c = 0; c < C; ++c) x->grad[(*argmax)[c]] += o->grad[c];
      },
      x);
  return out;
}

// ---------------------------------------------------------------------------
// Loss

// logits: [C], target: class id -> scalar; loss = -log softmax(logits)[target].
template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, int target) {
  detail::check_dims(logits, 1, "softmax_cross_entropy logits");
  const int C = logits->dims[0];
  if (target < 0 || target >= C)
    throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(target) +
                                " out of range for " + std::to_string(C) + " classes");
  S mx = logits->value[0];
  for (int c = 1; c < C; ++c) mx = std::max(mx, logits->value[c]);
  S sum = S(0);
  for (int c = 0; c < C; ++c) sum += std::exp(logits->value[c] - mx);
  auto out = make_tensor<S>({1});
  out->value[0] = std::log(sum) + mx - logits->value[target];

  TensorData<S>* o = out.get();
  detail::wire(
      out,
      [o, logits, target, C, mx, sum] {
        logits->ensure_grad();
        S g = o->grad[0];
        for (int c = 0; c < C; ++c) {
          S p = std::exp(logits->value[c] - mx) / sum;
          logits->grad[c] += g * (p - (c == target ? S(1) : S(0)));
        }
      },
      logits);
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> tensor;
  bool trainable = true;
};

template <typename S>
Parameter<S> make_parameter(std::string name, std::vector<int> dims) {
  Parameter<S> p;
  p.name = std::move(name);
  p.tensor = make_tensor<S>(std::move(dims));
  p.tensor->requires_grad = true;
  p.tensor->ensure_grad();
  return p;
}

}  // namespace aetnet::nn
