#pragma once

// Dense-tensor reverse-mode engine. A Tape owns every tensor created during
// one forward pass; ops append nodes and register backward closures that run
// in exact reverse creation order. Closures hold node ids, never pointers,
// because the node vector reallocates as the graph grows.
//
// Scalar type S is float or double. Training code uses double throughout so
// runs are bit-reproducible; finite-difference tests rely on it too.

#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "raylift/common.hpp"

namespace raylift::ad {

struct Shape {
  std::array<long, 4> d{0, 0, 0, 0};
  int nd = 0;

  static Shape of(std::initializer_list<long> dims) {
    Shape s;
    expect(dims.size() >= 1 && dims.size() <= 4, ErrorCode::ShapeMismatch,
           "tensors have one to four axes");
    for (long v : dims) {
      expect(v > 0, ErrorCode::ShapeMismatch, "axis extents must be positive");
      s.d[s.nd++] = v;
    }
    return s;
  }

  long numel() const {
    long n = 1;
    for (int i = 0; i < nd; ++i) n *= d[i];
    return n;
  }

  long operator[](int i) const { return d[i]; }
  bool operator==(const Shape& o) const { return nd == o.nd && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < nd; ++i) {
      if (i) s += ',';
      s += std::to_string(d[i]);
    }
    return s + ")";
  }
};

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename S>
class Tape {
 public:
  explicit Tape(std::uint64_t seed = 0) : rng_(seed) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training = true;

  int leaf(const Shape& shape, const std::vector<S>& data, bool requires_grad) {
    expect(long(data.size()) == shape.numel(), ErrorCode::ShapeMismatch,
           "leaf data length does not match shape " + shape.str());
    int id = alloc(shape, requires_grad);
    nodes_[id].val = data;
    return id;
  }

  int constant(const Shape& shape, const std::vector<S>& data) { return leaf(shape, data, false); }

  const Shape& shape(int id) const { return at(id).shape; }
  const std::vector<S>& val(int id) const { return at(id).val; }
  const std::vector<S>& grad(int id) const { return at(id).grad; }
  bool requires_grad(int id) const { return at(id).requires_grad; }
  int size() const { return int(nodes_.size()); }

  // ---- elementwise and linear algebra ----

  int add(int a, int b) {
    binary_same_shape("add", a, b);
    int id = alloc(shape(a), requires_grad(a) || requires_grad(b));
    auto& out = nodes_[id].val;
    const auto& va = val(a);
    const auto& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, b] {
        const auto& g = nodes_[id].grad;
        accumulate(a, [&](size_t i) { return g[i]; });
        accumulate(b, [&](size_t i) { return g[i]; });
      };
    return id;
  }

  int sub(int a, int b) {
    binary_same_shape("sub", a, b);
    int id = alloc(shape(a), requires_grad(a) || requires_grad(b));
    auto& out = nodes_[id].val;
    const auto& va = val(a);
    const auto& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, b] {
        const auto& g = nodes_[id].grad;
        accumulate(a, [&](size_t i) { return g[i]; });
        accumulate(b, [&](size_t i) { return -g[i]; });
      };
    return id;
  }

  int mul(int a, int b) {
    binary_same_shape("mul", a, b);
    int id = alloc(shape(a), requires_grad(a) || requires_grad(b));
    auto& out = nodes_[id].val;
    const auto& va = val(a);
    const auto& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, b] {
        const auto& g = nodes_[id].grad;
        const auto& va = nodes_[a].val;
        const auto& vb = nodes_[b].val;
        accumulate(a, [&](size_t i) { return g[i] * vb[i]; });
        accumulate(b, [&](size_t i) { return g[i] * va[i]; });
      };
    return id;
  }

  int scale(int a, S c) {
    int id = alloc(shape(a), requires_grad(a));
    auto& out = nodes_[id].val;
    const auto& va = val(a);
    for (size_t i = 0; i < out.size(); ++i) out[i] = c * va[i];
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, c] {
        const auto& g = nodes_[id].grad;
        accumulate(a, [&](size_t i) { return c * g[i]; });
      };
    return id;
  }

  int relu(int a) {
    int id = alloc(shape(a), requires_grad(a));
    auto& out = nodes_[id].val;
    const auto& va = val(a);
    for (size_t i = 0; i < out.size(); ++i) out[i] = va[i] > S(0) ? va[i] : S(0);
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a] {
        const auto& g = nodes_[id].grad;
        const auto& va = nodes_[a].val;
        accumulate(a, [&](size_t i) { return va[i] > S(0) ? g[i] : S(0); });
      };
    return id;
  }

  // x: (m,k) times w: (k,n) -> (m,n)
  int matmul(int x, int w) {
    const Shape sx = shape(x);
    const Shape sw = shape(w);
    expect(sx.nd == 2 && sw.nd == 2 && sx[1] == sw[0], ErrorCode::ShapeMismatch,
           "matmul: " + sx.str() + " x " + sw.str());
    int id = alloc(Shape::of({sx[0], sw[1]}), requires_grad(x) || requires_grad(w));
    ConstMatMap<S> X(val(x).data(), sx[0], sx[1]);
    ConstMatMap<S> W(val(w).data(), sw[0], sw[1]);
    MatMap<S>(nodes_[id].val.data(), sx[0], sw[1]) = X * W;
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, x, w] {
        const Shape& sx = nodes_[x].shape;
        const Shape& sw = nodes_[w].shape;
        ConstMatMap<S> G(nodes_[id].grad.data(), sx[0], sw[1]);
        if (nodes_[x].requires_grad) {
          ConstMatMap<S> W(nodes_[w].val.data(), sw[0], sw[1]);
          MatMap<S>(nodes_[x].grad.data(), sx[0], sx[1]) += G * W.transpose();
        }
        if (nodes_[w].requires_grad) {
          ConstMatMap<S> X(nodes_[x].val.data(), sx[0], sx[1]);
          MatMap<S>(nodes_[w].grad.data(), sw[0], sw[1]) += X.transpose() * G;
        }
      };
    return id;
  }

  // x: (m,n) plus row vector b: (n)
  int add_bias(int x, int b) {
    const Shape sx = shape(x);
    const Shape sb = shape(b);
    expect(sx.nd == 2 && sb.nd == 1 && sb[0] == sx[1], ErrorCode::ShapeMismatch,
           "add_bias: " + sx.str() + " vs " + sb.str());
    int id = alloc(sx, requires_grad(x) || requires_grad(b));
    const auto& vx = val(x);
    const auto& vb = val(b);
    auto& out = nodes_[id].val;
    for (long r = 0; r < sx[0]; ++r)
      for (long c = 0; c < sx[1]; ++c) out[r * sx[1] + c] = vx[r * sx[1] + c] + vb[c];
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, x, b] {
        const Shape& sx = nodes_[x].shape;
        const auto& g = nodes_[id].grad;
        accumulate(x, [&](size_t i) { return g[i]; });
        if (nodes_[b].requires_grad) {
          auto& gb = nodes_[b].grad;
          for (long r = 0; r < sx[0]; ++r)
            for (long c = 0; c < sx[1]; ++c) gb[c] += g[r * sx[1] + c];
        }
      };
    return id;
  }

  // ---- shape plumbing ----

  int reshape(int a, const Shape& to) {
    expect(to.numel() == shape(a).numel(), ErrorCode::ShapeMismatch,
           "reshape: " + shape(a).str() + " -> " + to.str());
    int id = alloc(to, requires_grad(a));
    nodes_[id].val = val(a);
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a] {
        const auto& g = nodes_[id].grad;
        accumulate(a, [&](size_t i) { return g[i]; });
      };
    return id;
  }

  int concat(const std::vector<int>& ids, int axis) {
    expect(!ids.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
    const Shape s0 = shape(ids[0]);
    expect(axis >= 0 && axis < s0.nd, ErrorCode::ShapeMismatch,
           "concat axis " + std::to_string(axis) + " out of range for " + s0.str());
    long total = 0;
    bool rg = false;
    for (int a : ids) {
      const Shape s = shape(a);
      expect(s.nd == s0.nd, ErrorCode::ShapeMismatch, "concat: " + s0.str() + " vs " + s.str());
      for (int i = 0; i < s.nd; ++i)
        expect(i == axis || s[i] == s0[i], ErrorCode::ShapeMismatch,
               "concat: " + s0.str() + " vs " + s.str());
      total += s[axis];
      rg = rg || requires_grad(a);
    }
    Shape so = s0;
    so.d[axis] = total;
    int id = alloc(so, rg);
    long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s0[i];
    for (int i = axis + 1; i < s0.nd; ++i) inner *= s0[i];
    auto& out = nodes_[id].val;
    long offset = 0;
    for (int a : ids) {
      long len = shape(a)[axis] * inner;
      const auto& va = val(a);
      for (long o = 0; o < outer; ++o)
        std::memcpy(out.data() + o * total * inner + offset, va.data() + o * len,
                    len * sizeof(S));
      offset += len;
    }
    if (rg)
      nodes_[id].backward = [this, id, ids, axis, outer, inner, total] {
        const auto& g = nodes_[id].grad;
        long offset = 0;
        for (int a : ids) {
          long len = nodes_[a].shape[axis] * inner;
          if (nodes_[a].requires_grad) {
            auto& ga = nodes_[a].grad;
            for (long o = 0; o < outer; ++o)
              for (long i = 0; i < len; ++i) ga[o * len + i] += g[o * total * inner + offset + i];
          }
          offset += len;
        }
      };
    return id;
  }

  int slice(int a, int axis, long start, long len) {
    const Shape s = shape(a);
    expect(axis >= 0 && axis < s.nd && start >= 0 && len > 0 && start + len <= s[axis],
           ErrorCode::ShapeMismatch,
           "slice [" + std::to_string(start) + "," + std::to_string(start + len) + ") on axis " +
               std::to_string(axis) + " of " + s.str());
    Shape so = s;
    so.d[axis] = len;
    int id = alloc(so, requires_grad(a));
    long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (int i = axis + 1; i < s.nd; ++i) inner *= s[i];
    const auto& va = val(a);
    auto& out = nodes_[id].val;
    for (long o = 0; o < outer; ++o)
      std::memcpy(out.data() + o * len * inner, va.data() + (o * s[axis] + start) * inner,
                  len * inner * sizeof(S));
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, axis, start, len, outer, inner] {
        const auto& g = nodes_[id].grad;
        auto& ga = nodes_[a].grad;
        long full = nodes_[a].shape[axis];
        for (long o = 0; o < outer; ++o)
          for (long i = 0; i < len * inner; ++i)
            ga[(o * full + start) * inner + i] += g[o * len * inner + i];
      };
    return id;
  }

  // ---- stochastic and normalizing layers ----

  int dropout(int a, double p) {
    expect(p >= 0 && p < 1, ErrorCode::InvalidArgument, "dropout rate must lie in [0,1)");
    if (!training || p == 0) {
      int id = alloc(shape(a), requires_grad(a));
      nodes_[id].val = val(a);
      if (nodes_[id].requires_grad)
        nodes_[id].backward = [this, id, a] {
          const auto& g = nodes_[id].grad;
          accumulate(a, [&](size_t i) { return g[i]; });
        };
      return id;
    }
    int id = alloc(shape(a), requires_grad(a));
    std::vector<S> mask(nodes_[id].val.size());
    const S keep = S(1.0 / (1.0 - p));
    for (auto& m : mask) m = rng_.uniform() >= p ? keep : S(0);
    const auto& va = val(a);
    auto& out = nodes_[id].val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = va[i] * mask[i];
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, mask = std::move(mask)] {
        const auto& g = nodes_[id].grad;
        accumulate(a, [&](size_t i) { return g[i] * mask[i]; });
      };
    return id;
  }

  // x: (N,C) or (B,C,T), normalized per channel; running buffers live outside
  // the tape and are updated only in training mode (biased batch variance)
  int batchnorm1d(int x, int gamma, int beta, std::vector<S>* run_mean, std::vector<S>* run_var,
                  double momentum = 0.1, double eps = 1e-5) {
    const Shape s = shape(x);
    expect(s.nd == 2 || s.nd == 3, ErrorCode::ShapeMismatch,
           "batchnorm1d expects (N,C) or (B,C,T), got " + s.str());
    const long C = s.nd == 2 ? s[1] : s[1];
    expect(shape(gamma) == Shape::of({C}) && shape(beta) == Shape::of({C}),
           ErrorCode::ShapeMismatch,
           "batchnorm1d affine shape " + shape(gamma).str() + " vs channels " + std::to_string(C));
    expect(run_mean && run_var && long(run_mean->size()) == C && long(run_var->size()) == C,
           ErrorCode::ShapeMismatch, "batchnorm1d running buffers must have C entries");
    const long N = s.nd == 2 ? s[0] : s[0] * s[2];
    expect(N > 1 || !training, ErrorCode::InvalidArgument,
           "batchnorm1d needs more than one row per channel in training");

    // element index for (row r, channel c): 2-D rows are batch entries,
    // 3-D rows run over batch x time
    const long T = s.nd == 3 ? s[2] : 1;
    auto at_rc = [C, T, nd = s.nd](long r, long c) {
      return nd == 2 ? r * C + c : ((r / T) * C + c) * T + (r % T);
    };

    int id = alloc(s, requires_grad(x) || requires_grad(gamma) || requires_grad(beta));
    const auto& vx = val(x);
    const auto& vg = val(gamma);
    const auto& vb = val(beta);
    auto& out = nodes_[id].val;

    std::vector<S> xhat(vx.size());
    std::vector<S> inv_std(C);
    for (long c = 0; c < C; ++c) {
      S mean, var;
      if (training) {
        S m = 0;
        for (long r = 0; r < N; ++r) m += vx[at_rc(r, c)];
        m /= S(N);
        S v = 0;
        for (long r = 0; r < N; ++r) {
          S d = vx[at_rc(r, c)] - m;
          v += d * d;
        }
        v /= S(N);
        (*run_mean)[c] = S(1 - momentum) * (*run_mean)[c] + S(momentum) * m;
        (*run_var)[c] = S(1 - momentum) * (*run_var)[c] + S(momentum) * v;
        mean = m;
        var = v;
      } else {
        mean = (*run_mean)[c];
        var = (*run_var)[c];
      }
      inv_std[c] = S(1) / std::sqrt(var + S(eps));
      for (long r = 0; r < N; ++r) {
        long i = at_rc(r, c);
        xhat[i] = (vx[i] - mean) * inv_std[c];
        out[i] = vg[c] * xhat[i] + vb[c];
      }
    }

    if (nodes_[id].requires_grad) {
      bool train_stats = training;
      nodes_[id].backward = [this, id, x, gamma, beta, xhat = std::move(xhat),
                             inv_std = std::move(inv_std), at_rc, C, N, train_stats] {
        const auto& g = nodes_[id].grad;
        const auto& vg = nodes_[gamma].val;
        if (nodes_[gamma].requires_grad) {
          auto& gg = nodes_[gamma].grad;
          for (long c = 0; c < C; ++c) {
            S acc = 0;
            for (long r = 0; r < N; ++r) acc += g[at_rc(r, c)] * xhat[at_rc(r, c)];
            gg[c] += acc;
          }
        }
        if (nodes_[beta].requires_grad) {
          auto& gb = nodes_[beta].grad;
          for (long c = 0; c < C; ++c) {
            S acc = 0;
            for (long r = 0; r < N; ++r) acc += g[at_rc(r, c)];
            gb[c] += acc;
          }
        }
        if (!nodes_[x].requires_grad) return;
        auto& gx = nodes_[x].grad;
        for (long c = 0; c < C; ++c) {
          if (!train_stats) {
            for (long r = 0; r < N; ++r) {
              long i = at_rc(r, c);
              gx[i] += g[i] * vg[c] * inv_std[c];
            }
            continue;
          }
          S sum_g = 0, sum_gx = 0;
          for (long r = 0; r < N; ++r) {
            long i = at_rc(r, c);
            sum_g += g[i];
            sum_gx += g[i] * xhat[i];
          }
          const S k = vg[c] * inv_std[c] / S(N);
          for (long r = 0; r < N; ++r) {
            long i = at_rc(r, c);
            gx[i] += k * (S(N) * g[i] - sum_g - xhat[i] * sum_gx);
          }
        }
      };
    }
    return id;
  }

  // x: (B,Cin,T), w: (Cout,Cin,k), bias: (Cout); valid convolution with
  // dilation, output (B,Cout,T-(k-1)*dilation)
  int temporal_conv1d(int x, int w, int bias, long dilation = 1) {
    const Shape sx = shape(x);
    const Shape sw = shape(w);
    expect(sx.nd == 3 && sw.nd == 3 && sx[1] == sw[1], ErrorCode::ShapeMismatch,
           "temporal_conv1d: input " + sx.str() + " vs kernel " + sw.str());
    expect(dilation >= 1, ErrorCode::InvalidArgument, "dilation must be at least 1");
    const long B = sx[0], Cin = sx[1], T = sx[2], Cout = sw[0], k = sw[2];
    const long Tout = T - (k - 1) * dilation;
    expect(Tout >= 1, ErrorCode::ShapeMismatch,
           "temporal_conv1d: input " + sx.str() + " too short for kernel " + sw.str() +
               " at dilation " + std::to_string(dilation));
    expect(shape(bias) == Shape::of({Cout}), ErrorCode::ShapeMismatch,
           "temporal_conv1d bias " + shape(bias).str() + " vs " + std::to_string(Cout));

    int id = alloc(Shape::of({B, Cout, Tout}),
                   requires_grad(x) || requires_grad(w) || requires_grad(bias));
    const auto& vx = val(x);
    const auto& vb = val(bias);

    // columns: for each batch a (Tout, Cin*k) matrix, rows are time steps
    std::vector<S> col(size_t(B) * Tout * Cin * k);
    for (long b = 0; b < B; ++b)
      for (long t = 0; t < Tout; ++t)
        for (long ci = 0; ci < Cin; ++ci)
          for (long kk = 0; kk < k; ++kk)
            col[((b * Tout + t) * Cin + ci) * k + kk] = vx[(b * Cin + ci) * T + t + kk * dilation];

    ConstMatMap<S> W2(val(w).data(), Cout, Cin * k);
    auto& out = nodes_[id].val;
    std::vector<S> y(size_t(Tout) * Cout);
    for (long b = 0; b < B; ++b) {
      ConstMatMap<S> Cb(col.data() + size_t(b) * Tout * Cin * k, Tout, Cin * k);
      MatMap<S> Yb(y.data(), Tout, Cout);
      Yb = Cb * W2.transpose();
      for (long co = 0; co < Cout; ++co)
        for (long t = 0; t < Tout; ++t) out[(b * Cout + co) * Tout + t] = y[t * Cout + co] + vb[co];
    }

    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, x, w, bias, dilation, B, Cin, T, Cout, k, Tout,
                             col = std::move(col)] {
        const auto& g = nodes_[id].grad;
        std::vector<S> gy(size_t(Tout) * Cout);
        for (long b = 0; b < B; ++b) {
          for (long co = 0; co < Cout; ++co)
            for (long t = 0; t < Tout; ++t) gy[t * Cout + co] = g[(b * Cout + co) * Tout + t];
          ConstMatMap<S> Gy(gy.data(), Tout, Cout);
          ConstMatMap<S> Cb(col.data() + size_t(b) * Tout * Cin * k, Tout, Cin * k);
          if (nodes_[w].requires_grad)
            MatMap<S>(nodes_[w].grad.data(), Cout, Cin * k) += Gy.transpose() * Cb;
          if (nodes_[bias].requires_grad) {
            auto& gb = nodes_[bias].grad;
            for (long co = 0; co < Cout; ++co)
              for (long t = 0; t < Tout; ++t) gb[co] += gy[t * Cout + co];
          }
          if (nodes_[x].requires_grad) {
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> gcol =
                Gy * ConstMatMap<S>(nodes_[w].val.data(), Cout, Cin * k);
            auto& gx = nodes_[x].grad;
            for (long t = 0; t < Tout; ++t)
              for (long ci = 0; ci < Cin; ++ci)
                for (long kk = 0; kk < k; ++kk)
                  gx[(b * Cin + ci) * T + t + kk * dilation] += gcol(t, ci * k + kk);
          }
        }
      };
    return id;
  }

  // ---- reductions ----

  int sum(int a) {
    int id = alloc(Shape::of({1}), requires_grad(a));
    S acc = 0;
    for (S v : val(a)) acc += v;
    nodes_[id].val[0] = acc;
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a] {
        const S g = nodes_[id].grad[0];
        accumulate(a, [&](size_t) { return g; });
      };
    return id;
  }

  int mean(int a) {
    const S inv = S(1) / S(shape(a).numel());
    int id = alloc(Shape::of({1}), requires_grad(a));
    S acc = 0;
    for (S v : val(a)) acc += v;
    nodes_[id].val[0] = acc * inv;
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a, inv] {
        const S g = nodes_[id].grad[0] * inv;
        accumulate(a, [&](size_t) { return g; });
      };
    return id;
  }

  // x: (m,n) -> (m,1), Euclidean norm of each row; zero rows get zero gradient
  int l2_norm_per_row(int a) {
    const Shape s = shape(a);
    expect(s.nd == 2, ErrorCode::ShapeMismatch, "l2_norm_per_row expects a matrix, got " + s.str());
    int id = alloc(Shape::of({s[0], 1}), requires_grad(a));
    const auto& va = val(a);
    auto& out = nodes_[id].val;
    for (long r = 0; r < s[0]; ++r) {
      S acc = 0;
      for (long c = 0; c < s[1]; ++c) acc += va[r * s[1] + c] * va[r * s[1] + c];
      out[r] = std::sqrt(acc);
    }
    if (nodes_[id].requires_grad)
      nodes_[id].backward = [this, id, a] {
        const Shape& s = nodes_[a].shape;
        const auto& g = nodes_[id].grad;
        const auto& va = nodes_[a].val;
        const auto& norms = nodes_[id].val;
        auto& ga = nodes_[a].grad;
        for (long r = 0; r < s[0]; ++r) {
          if (norms[r] == S(0)) continue;
          const S k = g[r] / norms[r];
          for (long c = 0; c < s[1]; ++c) ga[r * s[1] + c] += k * va[r * s[1] + c];
        }
      };
    return id;
  }

  // ---- reverse pass ----

  void backward(int loss) {
    expect(shape(loss).numel() == 1, ErrorCode::ShapeMismatch,
           "backward needs a scalar loss, got " + shape(loss).str());
    expect(requires_grad(loss), ErrorCode::InvalidArgument,
           "loss does not depend on any parameter");
    nodes_[loss].grad[0] = S(1);
    for (int id = loss; id >= 0; --id)
      if (nodes_[id].backward) nodes_[id].backward();
  }

 private:
  struct Node {
    Shape shape;
    std::vector<S> val;
    std::vector<S> grad;
    std::function<void()> backward;
    bool requires_grad = false;
  };

  int alloc(const Shape& shape, bool requires_grad) {
    Node n;
    n.shape = shape;
    n.val.assign(shape.numel(), S(0));
    if (requires_grad) n.grad.assign(shape.numel(), S(0));
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  const Node& at(int id) const {
    expect(id >= 0 && id < int(nodes_.size()), ErrorCode::InvalidArgument, "bad node id");
    return nodes_[size_t(id)];
  }

  void binary_same_shape(const char* op, int a, int b) {
    expect(shape(a) == shape(b), ErrorCode::ShapeMismatch,
           std::string(op) + ": " + shape(a).str() + " vs " + shape(b).str());
  }

  template <typename F>
  void accumulate(int a, F contribution) {
    if (!nodes_[a].requires_grad) return;
    auto& g = nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] += contribution(i);
  }

  std::vector<Node> nodes_;
  Rng rng_;
};

// ---- optimizer ----

template <typename S>
struct AdamState {
  std::vector<S> m, v;
  long t = 0;
};

template <typename S>
void adam_step(std::vector<S>& w, const std::vector<S>& g, AdamState<S>& st, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  expect(w.size() == g.size(), ErrorCode::ShapeMismatch, "adam: parameter/gradient size mismatch");
  if (st.m.empty()) {
    st.m.assign(w.size(), S(0));
    st.v.assign(w.size(), S(0));
  }
  expect(st.m.size() == w.size() && st.v.size() == w.size(), ErrorCode::ShapeMismatch,
         "adam: moment buffers do not match parameters");
  st.t += 1;
  const S b1 = S(beta1), b2 = S(beta2);
  const S c1 = S(1) - S(std::pow(beta1, double(st.t)));
  const S c2 = S(1) - S(std::pow(beta2, double(st.t)));
  for (size_t i = 0; i < w.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (S(1) - b1) * g[i];
    st.v[i] = b2 * st.v[i] + (S(1) - b2) * g[i] * g[i];
    const S mhat = st.m[i] / c1;
    const S vhat = st.v[i] / c2;
    w[i] -= S(lr) * mhat / (std::sqrt(vhat) + S(eps));
  }
}

inline double exp_lr_decay(double base_lr, int epoch) { return base_lr * std::pow(0.99, epoch); }

// ---- named-tensor manifests (checkpoint building block) ----

template <typename S>
struct NamedTensor {
  std::string name;
  std::vector<long> shape;
  std::vector<S> data;
};

template <typename S>
const char* precision_name() {
  if constexpr (sizeof(S) == 4) return "float32";
  else return "float64";
}

inline std::string bytes_to_hex(const void* p, size_t n) {
  static const char* digits = "0123456789abcdef";
  const auto* b = static_cast<const unsigned char*>(p);
  std::string out(2 * n, '0');
  for (size_t i = 0; i < n; ++i) {
    out[2 * i] = digits[b[i] >> 4];
    out[2 * i + 1] = digits[b[i] & 15];
  }
  return out;
}

inline void hex_to_bytes(const std::string& hex, void* p, size_t n) {
  expect(hex.size() == 2 * n, ErrorCode::IoError, "hex payload has wrong length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw Error(ErrorCode::IoError, "bad hex digit in tensor payload");
  };
  auto* b = static_cast<unsigned char*>(p);
  for (size_t i = 0; i < n; ++i) b[i] = (unsigned char)((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
}

// stored as version-1 JSON with raw little-endian payloads; reload is
// bit-exact at the stored precision
template <typename S>
void save_tensor_manifest(const std::string& path, const std::vector<NamedTensor<S>>& tensors,
                          const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["precision"] = precision_name<S>();
  doc["meta"] = meta;
  auto& arr = doc["tensors"] = nlohmann::ordered_json::array();
  for (const auto& t : tensors) {
    nlohmann::ordered_json jt;
    jt["name"] = t.name;
    jt["shape"] = t.shape;
    long n = 1;
    for (long d : t.shape) n *= d;
    expect(n == long(t.data.size()), ErrorCode::ShapeMismatch,
           "tensor " + t.name + " data does not match its shape");
    jt["data"] = bytes_to_hex(t.data.data(), t.data.size() * sizeof(S));
    arr.push_back(std::move(jt));
  }
  write_text_file(path, doc.dump());
}

template <typename S>
std::pair<std::vector<NamedTensor<S>>, nlohmann::json> load_tensor_manifest(
    const std::string& path) {
  nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
  expect(doc.value("format_version", 0) == 1, ErrorCode::IoError,
         "unsupported manifest version in " + path);
  expect(doc.value("precision", "") == precision_name<S>(), ErrorCode::IoError,
         "manifest precision mismatch in " + path);
  std::vector<NamedTensor<S>> tensors;
  for (const auto& jt : doc.at("tensors")) {
    NamedTensor<S> t;
    t.name = jt.at("name").get<std::string>();
    t.shape = jt.at("shape").get<std::vector<long>>();
    long n = 1;
    for (long d : t.shape) n *= d;
    t.data.resize(size_t(n));
    hex_to_bytes(jt.at("data").get<std::string>(), t.data.data(), t.data.size() * sizeof(S));
    tensors.push_back(std::move(t));
  }
  return {std::move(tensors), doc.at("meta")};
}

}  // namespace raylift::ad
