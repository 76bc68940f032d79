// Copyright 2026 The dualpath Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Dense float64 tensors with a minimal reverse-mode tape.
// Operations record onto a Tape only when at least one input is watched;
// everything else runs tape-free, so inference carries no autodiff cost.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualpath {

inline constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Instrumentation: allocation high-water mark and multiply-accumulate counter.
// ---------------------------------------------------------------------------

struct AllocStats {
  static inline std::atomic<long long> live_bytes{0};
  static inline std::atomic<long long> peak_bytes{0};

  static void add(long long n) {
    long long v = live_bytes.fetch_add(n) + n;
    long long p = peak_bytes.load();
    while (v > p && !peak_bytes.compare_exchange_weak(p, v)) {
    }
  }
  static void sub(long long n) { live_bytes.fetch_sub(n); }
  static long long live() { return live_bytes.load(); }
  static long long peak() { return peak_bytes.load(); }
  // Restarts the high-water mark at the currently live amount.
  static void reset_peak() { peak_bytes.store(live_bytes.load()); }
};

// Counts forward-pass dense multiply-accumulates (one MAC = one multiply plus
// one accumulate), bucketed by the innermost active scope label.
struct MacCounter {
  static inline bool enabled = false;
  static inline std::string scope = "";
  static inline std::map<std::string, unsigned long long> by_scope{};

  static void add(unsigned long long n) {
    if (enabled) by_scope[scope] += n;
  }
  static void reset() {
    by_scope.clear();
    scope.clear();
  }
  static unsigned long long total() {
    unsigned long long t = 0;
    for (const auto& [k, v] : by_scope) t += v;
    return t;
  }
};

class MacScope {
 public:
  explicit MacScope(std::string label) : saved_(MacCounter::scope) { MacCounter::scope = std::move(label); }
  ~MacScope() { MacCounter::scope = saved_; }
  MacScope(const MacScope&) = delete;
  MacScope& operator=(const MacScope&) = delete;

 private:
  std::string saved_;
};

// ---------------------------------------------------------------------------
// Storage and Tensor
// ---------------------------------------------------------------------------

struct Storage {
  std::vector<double> v;

  explicit Storage(size_t n, double fill = 0.0) : v(n, fill) { AllocStats::add(static_cast<long long>(n) * 8); }
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;
  ~Storage() { AllocStats::sub(static_cast<long long>(v.size()) * 8); }
};

class Tape;

struct Tensor {
  std::vector<size_t> shape;
  std::shared_ptr<Storage> store;
  Tape* tape = nullptr;
  int node = -1;
  bool requires_grad = false;
  std::shared_ptr<Storage> grad;

  Tensor() = default;

  static size_t numel_of(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<size_t> s) {
    Tensor t;
    t.shape = std::move(s);
    t.store = std::make_shared<Storage>(numel_of(t.shape));
    return t;
  }
  static Tensor filled(std::vector<size_t> s, double v) {
    Tensor t = zeros(std::move(s));
    for (auto& x : t.store->v) x = v;
    return t;
  }
  static Tensor from(std::vector<size_t> s, std::vector<double> vals) {
    Tensor t;
    t.shape = std::move(s);
    if (vals.size() != numel_of(t.shape)) throw std::invalid_argument("tensor: value count does not match shape");
    t.store = std::make_shared<Storage>(vals.size());
    t.store->v = std::move(vals);
    return t;
  }
  static Tensor scalar(double v) { return from({}, {v}); }

  bool defined() const { return static_cast<bool>(store); }
  size_t ndim() const { return shape.size(); }
  size_t numel() const { return numel_of(shape); }
  double* data() { return store->v.data(); }
  const double* data() const { return store->v.data(); }
  double item() const {
    if (numel() != 1) throw std::logic_error("tensor: item() on non-scalar");
    return store->v[0];
  }
  double grad_at(size_t i) const {
    if (!grad) throw std::logic_error("tensor: gradient not populated");
    return grad->v[i];
  }
  void zero_grad() {
    if (grad) std::fill(grad->v.begin(), grad->v.end(), 0.0);
  }
  void detach() {
    tape = nullptr;
    node = -1;
    requires_grad = false;
  }
};

// ---------------------------------------------------------------------------
// Tape: ordered list of recorded operations with explicit topological order
// (node indices increase along construction; backward walks them in reverse).
// ---------------------------------------------------------------------------

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;

  // Registers a differentiable leaf; its gradient buffer is allocated once and
  // accumulates across backward() calls until zero_grad().
  void watch(Tensor& t) {
    if (t.tape == this && t.node >= 0) return;
    t.tape = this;
    t.requires_grad = true;
    t.node = record({}, t.numel(), nullptr);
    if (!t.grad) t.grad = std::make_shared<Storage>(t.numel());
    sinks_.push_back({t.node, t.grad});
  }

  int record(std::vector<int> parents, size_t out_numel, BackwardFn bw) {
    nodes_.push_back(Node{std::move(parents), out_numel, std::move(bw)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<double>& adjoint(int node) {
    auto& a = adj_[static_cast<size_t>(node)];
    if (a.empty()) a.assign(nodes_[static_cast<size_t>(node)].numel, 0.0);
    return a;
  }

  void backward(const Tensor& loss) {
    if (loss.tape != this || loss.node < 0) throw std::logic_error("tape: loss is not recorded on this tape");
    if (loss.numel() != 1) throw std::logic_error("tape: loss must be scalar");
    adj_.assign(nodes_.size(), {});
    adjoint(loss.node)[0] = 1.0;
    for (int i = loss.node; i >= 0; --i) {
      auto& a = adj_[static_cast<size_t>(i)];
      if (a.empty() || !nodes_[static_cast<size_t>(i)].bw) continue;
      nodes_[static_cast<size_t>(i)].bw(*this, a);
    }
    for (auto& [node, sink] : sinks_) {
      auto& a = adj_[static_cast<size_t>(node)];
      if (a.empty()) continue;
      for (size_t i = 0; i < a.size(); ++i) sink->v[i] += a[i];
    }
    adj_.clear();
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> parents;
    size_t numel;
    BackwardFn bw;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> adj_;
  std::vector<std::pair<int, std::shared_ptr<Storage>>> sinks_;
};

namespace detail {

inline Tape* common_tape(const std::vector<const Tensor*>& ts) {
  Tape* tp = nullptr;
  for (const Tensor* t : ts) {
    if (t->tape && t->node >= 0) {
      if (tp && tp != t->tape) throw std::logic_error("tensor: operands recorded on different tapes");
      tp = t->tape;
    }
  }
  return tp;
}

inline Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  return common_tape(std::vector<const Tensor*>(ts));
}

inline void attach(Tensor& out, Tape* tp, std::vector<int> parents, Tape::BackwardFn bw) {
  if (!tp) return;
  out.tape = tp;
  out.node = tp->record(std::move(parents), out.numel(), std::move(bw));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Matrix product over the last two axes; leading batch axes must match exactly
// (or both operands are plain matrices). No further broadcasting.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2 || b.ndim() < 2) throw std::invalid_argument("matmul: operands must have rank >= 2");
  if (a.ndim() != b.ndim()) throw std::invalid_argument("matmul: operand ranks differ");
  for (size_t i = 0; i + 2 < a.ndim(); ++i)
    if (a.shape[i] != b.shape[i]) throw std::invalid_argument("matmul: batch shape mismatch");
  size_t m = a.shape[a.ndim() - 2], k = a.shape[a.ndim() - 1];
  size_t k2 = b.shape[b.ndim() - 2], n = b.shape[b.ndim() - 1];
  if (k != k2) throw std::invalid_argument("matmul: inner dimensions differ");
  size_t batch = 1;
  for (size_t i = 0; i + 2 < a.ndim(); ++i) batch *= a.shape[i];

  std::vector<size_t> out_shape(a.shape.begin(), a.shape.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(out_shape);
  for (size_t t = 0; t < batch; ++t) {
    detail::CMapMat A(a.data() + t * m * k, m, k);
    detail::CMapMat B(b.data() + t * k * n, k, n);
    detail::MapMat C(out.data() + t * m * n, m, n);
    C.noalias() = A * B;
  }
  MacCounter::add(static_cast<unsigned long long>(batch) * m * k * n);

  Tape* tp = detail::common_tape({&a, &b});
  if (tp) {
    auto as = a.store, bs = b.store;
    int an = (a.tape == tp) ? a.node : -1;
    int bn = (b.tape == tp) ? b.node : -1;
    detail::attach(out, tp, {an, bn}, [as, bs, an, bn, batch, m, k, n](Tape& tape, const std::vector<double>& up) {
      for (size_t t = 0; t < batch; ++t) {
        detail::CMapMat A(as->v.data() + t * m * k, m, k);
        detail::CMapMat B(bs->v.data() + t * k * n, k, n);
        detail::CMapMat G(up.data() + t * m * n, m, n);
        if (an >= 0) {
          detail::MapMat GA(tape.adjoint(an).data() + t * m * k, m, k);
          GA.noalias() += G * B.transpose();
        }
        if (bn >= 0) {
          detail::MapMat GB(tape.adjoint(bn).data() + t * k * n, k, n);
          GB.noalias() += A.transpose() * G;
        }
      }
    });
  }
  return out;
}

namespace detail {

template <class Fwd, class Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  check_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape);
  size_t n = out.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i], b.data()[i]);
  Tape* tp = common_tape({&a, &b});
  if (tp) {
    auto as = a.store, bs = b.store;
    int an = (a.tape == tp) ? a.node : -1;
    int bn = (b.tape == tp) ? b.node : -1;
    attach(out, tp, {an, bn}, [as, bs, an, bn, n, bwd](Tape& tape, const std::vector<double>& up) {
      if (an >= 0) {
        auto& ga = tape.adjoint(an);
        for (size_t i = 0; i < n; ++i) ga[i] += up[i] * bwd(as->v[i], bs->v[i], true);
      }
      if (bn >= 0) {
        auto& gb = tape.adjoint(bn);
        for (size_t i = 0; i < n; ++i) gb[i] += up[i] * bwd(as->v[i], bs->v[i], false);
      }
    });
  }
  return out;
}

template <class Fwd, class Deriv>
Tensor unary_elementwise(const Tensor& x, Fwd fwd, Deriv dfd) {
  Tensor out = Tensor::zeros(x.shape);
  size_t n = out.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = fwd(x.data()[i]);
  Tape* tp = common_tape({&x});
  if (tp) {
    auto xs = x.store, os = out.store;
    attach(out, tp, {x.node}, [xs, os, n, dfd, xn = x.node](Tape& tape, const std::vector<double>& up) {
      auto& g = tape.adjoint(xn);
      for (size_t i = 0; i < n; ++i) g[i] += up[i] * dfd(xs->v[i], os->v[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, bool) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, bool is_a) { return is_a ? 1.0 : -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, bool is_a) { return is_a ? y : x; });
}

// out[..., j] = x[..., j] + b[j]
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.ndim() != 1 || x.ndim() < 1 || x.shape.back() != b.shape[0])
    throw std::invalid_argument("add_bias: bias must match the last axis");
  size_t d = b.shape[0];
  size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape);
  for (size_t r = 0; r < rows; ++r)
    for (size_t j = 0; j < d; ++j) out.data()[r * d + j] = x.data()[r * d + j] + b.data()[j];
  Tape* tp = detail::common_tape({&x, &b});
  if (tp) {
    int xn = (x.tape == tp) ? x.node : -1;
    int bn = (b.tape == tp) ? b.node : -1;
    detail::attach(out, tp, {xn, bn}, [xn, bn, rows, d](Tape& tape, const std::vector<double>& up) {
      if (xn >= 0) {
        auto& gx = tape.adjoint(xn);
        for (size_t i = 0; i < rows * d; ++i) gx[i] += up[i];
      }
      if (bn >= 0) {
        auto& gb = tape.adjoint(bn);
        for (size_t r = 0; r < rows; ++r)
          for (size_t j = 0; j < d; ++j) gb[j] += up[r * d + j];
      }
    });
  }
  return out;
}

inline Tensor smul(const Tensor& x, double c) {
  return detail::unary_elementwise(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary_elementwise(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

// Parametric ReLU with a single shared slope.
inline Tensor prelu(const Tensor& x, const Tensor& alpha) {
  if (alpha.numel() != 1) throw std::invalid_argument("prelu: slope must be a single value");
  double a = alpha.data()[0];
  Tensor out = Tensor::zeros(x.shape);
  size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] >= 0.0 ? x.data()[i] : a * x.data()[i];
  Tape* tp = detail::common_tape({&x, &alpha});
  if (tp) {
    auto xs = x.store;
    int xn = (x.tape == tp) ? x.node : -1;
    int an = (alpha.tape == tp) ? alpha.node : -1;
    detail::attach(out, tp, {xn, an}, [xs, xn, an, a, n](Tape& tape, const std::vector<double>& up) {
      if (xn >= 0) {
        auto& gx = tape.adjoint(xn);
        for (size_t i = 0; i < n; ++i) gx[i] += up[i] * (xs->v[i] >= 0.0 ? 1.0 : a);
      }
      if (an >= 0) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i)
          if (xs->v[i] < 0.0) acc += up[i] * xs->v[i];
        tape.adjoint(an)[0] += acc;
      }
    });
  }
  return out;
}

// Numerically stabilized softmax over the last axis.
inline Tensor softmax(const Tensor& x) {
  if (x.ndim() < 1) throw std::invalid_argument("softmax: rank must be >= 1");
  size_t d = x.shape.back();
  size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape);
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double* yr = out.data() + r * d;
    double mx = xr[0];
    for (size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      acc += yr[j];
    }
    double inv = 1.0 / acc;
    for (size_t j = 0; j < d; ++j) yr[j] *= inv;
  }
  Tape* tp = detail::common_tape({&x});
  if (tp) {
    auto os = out.store;
    detail::attach(out, tp, {x.node}, [os, rows, d, xn = x.node](Tape& tape, const std::vector<double>& up) {
      auto& gx = tape.adjoint(xn);
      for (size_t r = 0; r < rows; ++r) {
        const double* y = os->v.data() + r * d;
        const double* u = up.data() + r * d;
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += u[j] * y[j];
        for (size_t j = 0; j < d; ++j) gx[r * d + j] += y[j] * (u[j] - dot);
      }
    });
  }
  return out;
}

// Layer normalization over the last axis with learnable gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps) {
  size_t d = x.shape.back();
  if (gain.numel() != d || bias.numel() != d) throw std::invalid_argument("layer_norm: gain/bias must match last axis");
  size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape);
  auto xhat = std::make_shared<Storage>(x.numel());
  auto inv_std = std::make_shared<Storage>(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mu = 0.0;
    for (size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= double(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= double(d);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std->v[r] = inv;
    for (size_t j = 0; j < d; ++j) {
      double h = (xr[j] - mu) * inv;
      xhat->v[r * d + j] = h;
      out.data()[r * d + j] = h * gain.data()[j] + bias.data()[j];
    }
  }
  Tape* tp = detail::common_tape({&x, &gain, &bias});
  if (tp) {
    auto gs = gain.store;
    int xn = (x.tape == tp) ? x.node : -1;
    int gn = (gain.tape == tp) ? gain.node : -1;
    int bn = (bias.tape == tp) ? bias.node : -1;
    detail::attach(out, tp, {xn, gn, bn},
                   [xhat, inv_std, gs, xn, gn, bn, rows, d](Tape& tape, const std::vector<double>& up) {
                     for (size_t r = 0; r < rows; ++r) {
                       const double* u = up.data() + r * d;
                       const double* h = xhat->v.data() + r * d;
                       if (xn >= 0) {
                         double sum_dh = 0.0, sum_dh_h = 0.0;
                         for (size_t j = 0; j < d; ++j) {
                           double dh = u[j] * gs->v[j];
                           sum_dh += dh;
                           sum_dh_h += dh * h[j];
                         }
                         auto& gx = tape.adjoint(xn);
                         double inv = inv_std->v[r];
                         for (size_t j = 0; j < d; ++j) {
                           double dh = u[j] * gs->v[j];
                           gx[r * d + j] += inv * (dh - (sum_dh + h[j] * sum_dh_h) / double(d));
                         }
                       }
                       if (gn >= 0) {
                         auto& gg = tape.adjoint(gn);
                         for (size_t j = 0; j < d; ++j) gg[j] += u[j] * h[j];
                       }
                       if (bn >= 0) {
                         auto& gb = tape.adjoint(bn);
                         for (size_t j = 0; j < d; ++j) gb[j] += u[j];
                       }
                     }
                   });
  }
  return out;
}

inline Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (size_t i = 0; i < x.numel(); ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(acc);
  Tape* tp = detail::common_tape({&x});
  if (tp) {
    detail::attach(out, tp, {x.node}, [xn = x.node, n = x.numel()](Tape& tape, const std::vector<double>& up) {
      auto& gx = tape.adjoint(xn);
      for (size_t i = 0; i < n; ++i) gx[i] += up[0];
    });
  }
  return out;
}

inline Tensor inv_scalar(const Tensor& s) {
  if (s.numel() != 1) throw std::invalid_argument("inv_scalar: input must be scalar");
  double v = s.data()[0];
  Tensor out = Tensor::scalar(1.0 / v);
  Tape* tp = detail::common_tape({&s});
  if (tp)
    detail::attach(out, tp, {s.node}, [sn = s.node, v](Tape& tape, const std::vector<double>& up) {
      tape.adjoint(sn)[0] += -up[0] / (v * v);
    });
  return out;
}

inline Tensor log_scalar(const Tensor& s) {
  if (s.numel() != 1) throw std::invalid_argument("log_scalar: input must be scalar");
  double v = s.data()[0];
  Tensor out = Tensor::scalar(std::log(v));
  Tape* tp = detail::common_tape({&s});
  if (tp)
    detail::attach(out, tp, {s.node}, [sn = s.node, v](Tape& tape, const std::vector<double>& up) {
      tape.adjoint(sn)[0] += up[0] / v;
    });
  return out;
}

// out = x * s where s is a (possibly recorded) scalar tensor.
inline Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw std::invalid_argument("scale_by: scale must be scalar");
  double c = s.data()[0];
  Tensor out = Tensor::zeros(x.shape);
  size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
  Tape* tp = detail::common_tape({&x, &s});
  if (tp) {
    auto xs = x.store;
    int xn = (x.tape == tp) ? x.node : -1;
    int sn = (s.tape == tp) ? s.node : -1;
    detail::attach(out, tp, {xn, sn}, [xs, xn, sn, c, n](Tape& tape, const std::vector<double>& up) {
      if (xn >= 0) {
        auto& gx = tape.adjoint(xn);
        for (size_t i = 0; i < n; ++i) gx[i] += c * up[i];
      }
      if (sn >= 0) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) acc += up[i] * xs->v[i];
        tape.adjoint(sn)[0] += acc;
      }
    });
  }
  return out;
}

namespace detail {

// Swaps axes i<j by viewing the tensor as [outer, A, mid, B, inner] and
// copying contiguous inner blocks.
inline void swap_copy(const double* src, double* dst, size_t outer, size_t A, size_t mid, size_t B, size_t inner) {
  for (size_t o = 0; o < outer; ++o)
    for (size_t a = 0; a < A; ++a)
      for (size_t m = 0; m < mid; ++m)
        for (size_t b = 0; b < B; ++b) {
          const double* s = src + (((o * A + a) * mid + m) * B + b) * inner;
          double* d = dst + (((o * B + b) * mid + m) * A + a) * inner;
          std::memcpy(d, s, inner * sizeof(double));
        }
}

}  // namespace detail

inline Tensor swap_axes(const Tensor& x, size_t i, size_t j) {
  if (i > j) std::swap(i, j);
  if (j >= x.ndim() || i == j) throw std::invalid_argument("swap_axes: bad axes");
  size_t outer = 1, mid = 1, inner = 1;
  for (size_t k = 0; k < i; ++k) outer *= x.shape[k];
  for (size_t k = i + 1; k < j; ++k) mid *= x.shape[k];
  for (size_t k = j + 1; k < x.ndim(); ++k) inner *= x.shape[k];
  size_t A = x.shape[i], B = x.shape[j];

  std::vector<size_t> out_shape = x.shape;
  std::swap(out_shape[i], out_shape[j]);
  Tensor out = Tensor::zeros(out_shape);
  detail::swap_copy(x.data(), out.data(), outer, A, mid, B, inner);

  Tape* tp = detail::common_tape({&x});
  if (tp)
    detail::attach(out, tp, {x.node},
                   [xn = x.node, outer, A, mid, B, inner](Tape& tape, const std::vector<double>& up) {
                     std::vector<double> back(up.size());
                     detail::swap_copy(up.data(), back.data(), outer, B, mid, A, inner);
                     auto& gx = tape.adjoint(xn);
                     for (size_t k = 0; k < back.size(); ++k) gx[k] += back[k];
                   });
  return out;
}

inline Tensor transpose_last2(const Tensor& x) {
  if (x.ndim() < 2) throw std::invalid_argument("transpose_last2: rank must be >= 2");
  return swap_axes(x, x.ndim() - 2, x.ndim() - 1);
}

// out[..., j] = x[..., j] * g[j]
inline Tensor mul_last_axis(const Tensor& x, const Tensor& g) {
  if (g.ndim() != 1 || x.ndim() < 1 || x.shape.back() != g.shape[0])
    throw std::invalid_argument("mul_last_axis: gain must match the last axis");
  size_t d = g.shape[0];
  size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape);
  for (size_t r = 0; r < rows; ++r)
    for (size_t j = 0; j < d; ++j) out.data()[r * d + j] = x.data()[r * d + j] * g.data()[j];
  Tape* tp = detail::common_tape({&x, &g});
  if (tp) {
    int xn = (x.tape == tp) ? x.node : -1;
    int gn = (g.tape == tp) ? g.node : -1;
    detail::attach(out, tp, {xn, gn},
                   [xn, gn, rows, d, xs = x.store, gs = g.store](Tape& tape, const std::vector<double>& up) {
                     if (xn >= 0) {
                       auto& gx = tape.adjoint(xn);
                       for (size_t r = 0; r < rows; ++r)
                         for (size_t j = 0; j < d; ++j) gx[r * d + j] += up[r * d + j] * gs->v[j];
                     }
                     if (gn >= 0) {
                       auto& gg = tape.adjoint(gn);
                       for (size_t r = 0; r < rows; ++r)
                         for (size_t j = 0; j < d; ++j) gg[j] += up[r * d + j] * xs->v[r * d + j];
                     }
                   });
  }
  return out;
}

// out[..., 0:len] = x[..., start:start+len]
inline Tensor slice_last_axis(const Tensor& x, size_t start, size_t len) {
  if (x.ndim() < 1) throw std::invalid_argument("slice_last_axis: rank must be >= 1");
  size_t d = x.shape.back();
  if (len == 0 || start + len > d) throw std::invalid_argument("slice_last_axis: range out of bounds");
  size_t rows = x.numel() / d;
  std::vector<size_t> out_shape = x.shape;
  out_shape.back() = len;
  Tensor out = Tensor::zeros(out_shape);
  for (size_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * len, x.data() + r * d + start, len * sizeof(double));
  Tape* tp = detail::common_tape({&x});
  if (tp)
    detail::attach(out, tp, {x.node},
                   [xn = x.node, rows, d, start, len](Tape& tape, const std::vector<double>& up) {
                     auto& gx = tape.adjoint(xn);
                     for (size_t r = 0; r < rows; ++r)
                       for (size_t j = 0; j < len; ++j) gx[r * d + start + j] += up[r * len + j];
                   });
  return out;
}

// Concatenates tensors along the last axis; all other axes must agree.
inline Tensor concat_last_axis(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last_axis: no inputs");
  std::vector<size_t> lead(parts[0].shape.begin(), parts[0].shape.end() - 1);
  size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != parts[0].ndim() ||
        !std::equal(lead.begin(), lead.end(), p.shape.begin()))
      throw std::invalid_argument("concat_last_axis: leading axes differ");
    total += p.shape.back();
  }
  size_t rows = parts[0].numel() / parts[0].shape.back();
  std::vector<size_t> out_shape = lead;
  out_shape.push_back(total);
  Tensor out = Tensor::zeros(out_shape);
  size_t off = 0;
  for (const Tensor& p : parts) {
    size_t w = p.shape.back();
    for (size_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * total + off, p.data() + r * w, w * sizeof(double));
    off += w;
  }
  std::vector<const Tensor*> ptrs;
  for (const Tensor& p : parts) ptrs.push_back(&p);
  Tape* tp = detail::common_tape(ptrs);
  if (tp) {
    std::vector<int> nodes;
    std::vector<size_t> widths;
    for (const Tensor& p : parts) {
      nodes.push_back((p.tape == tp) ? p.node : -1);
      widths.push_back(p.shape.back());
    }
    detail::attach(out, tp, nodes, [nodes, widths, rows, total](Tape& tape, const std::vector<double>& up) {
      size_t off2 = 0;
      for (size_t k = 0; k < nodes.size(); ++k) {
        size_t w = widths[k];
        if (nodes[k] >= 0) {
          auto& gp = tape.adjoint(nodes[k]);
          for (size_t r = 0; r < rows; ++r)
            for (size_t j = 0; j < w; ++j) gp[r * w + j] += up[r * total + off2 + j];
        }
        off2 += w;
      }
    });
  }
  return out;
}

// Zero-pads the last axis out to new_len (backward slices the padding off).
inline Tensor pad_last_axis(const Tensor& x, size_t new_len) {
  if (x.ndim() < 1) throw std::invalid_argument("pad_last_axis: rank must be >= 1");
  size_t d = x.shape.back();
  if (new_len < d) throw std::invalid_argument("pad_last_axis: new length shorter than the axis");
  size_t rows = x.numel() / d;
  std::vector<size_t> out_shape = x.shape;
  out_shape.back() = new_len;
  Tensor out = Tensor::zeros(out_shape);
  for (size_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * new_len, x.data() + r * d, d * sizeof(double));
  Tape* tp = detail::common_tape({&x});
  if (tp)
    detail::attach(out, tp, {x.node}, [xn = x.node, rows, d, new_len](Tape& tape, const std::vector<double>& up) {
      auto& gx = tape.adjoint(xn);
      for (size_t r = 0; r < rows; ++r)
        for (size_t j = 0; j < d; ++j) gx[r * d + j] += up[r * new_len + j];
    });
  return out;
}

// Gathers strided frames of a 1-D signal into rows: out[l, t] = x[l*hop + t].
inline Tensor frame_rows(const Tensor& x, size_t win, size_t hop) {
  if (x.ndim() != 1) throw std::invalid_argument("frame_rows: input must be rank 1");
  if (win == 0 || hop == 0 || x.shape[0] < win)
    throw std::invalid_argument("frame_rows: signal shorter than one window");
  size_t n_frames = 1 + (x.shape[0] - win) / hop;
  Tensor out = Tensor::zeros({n_frames, win});
  for (size_t l = 0; l < n_frames; ++l)
    std::memcpy(out.data() + l * win, x.data() + l * hop, win * sizeof(double));
  Tape* tp = detail::common_tape({&x});
  if (tp)
    detail::attach(out, tp, {x.node},
                   [xn = x.node, n_frames, win, hop](Tape& tape, const std::vector<double>& up) {
                     auto& gx = tape.adjoint(xn);
                     for (size_t l = 0; l < n_frames; ++l)
                       for (size_t t = 0; t < win; ++t) gx[l * hop + t] += up[l * win + t];
                   });
  return out;
}

// Scatters rows back into a 1-D signal with overlap-add: out[l*hop + t] += y[l, t].
// Exact adjoint of frame_rows with the same (win, hop).
inline Tensor overlap_add_rows(const Tensor& y, size_t hop, size_t out_len) {
  if (y.ndim() != 2) throw std::invalid_argument("overlap_add_rows: input must be rank 2");
  size_t n_frames = y.shape[0], win = y.shape[1];
  if (hop == 0 || out_len < (n_frames - 1) * hop + win)
    throw std::invalid_argument("overlap_add_rows: output too short for the frame span");
  Tensor out = Tensor::zeros({out_len});
  for (size_t l = 0; l < n_frames; ++l)
    for (size_t t = 0; t < win; ++t) out.data()[l * hop + t] += y.data()[l * win + t];
  Tape* tp = detail::common_tape({&y});
  if (tp)
    detail::attach(out, tp, {y.node},
                   [yn = y.node, n_frames, win, hop](Tape& tape, const std::vector<double>& up) {
                     auto& gy = tape.adjoint(yn);
                     for (size_t l = 0; l < n_frames; ++l)
                       for (size_t t = 0; t < win; ++t) gy[l * win + t] += up[l * hop + t];
                   });
  return out;
}

// Reinterprets the buffer with a new shape (no copy in the forward direction).
inline Tensor reshape(const Tensor& x, std::vector<size_t> new_shape) {
  if (Tensor::numel_of(new_shape) != x.numel()) throw std::invalid_argument("reshape: element count mismatch");
  Tensor out;
  out.shape = std::move(new_shape);
  out.store = x.store;
  Tape* tp = detail::common_tape({&x});
  if (tp)
    detail::attach(out, tp, {x.node}, [xn = x.node, n = x.numel()](Tape& tape, const std::vector<double>& up) {
      auto& gx = tape.adjoint(xn);
      for (size_t i = 0; i < n; ++i) gx[i] += up[i];
    });
  return out;
}

}  // namespace dualpath
