#include "lphom/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "lphom/errors.hpp"

namespace lphom::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Message construction is deferred until the check fails.
#define LPHOM_REQUIRE(cond, msg)            \
  do {                                      \
    if (!(cond)) throw ShapeError(msg);     \
  } while (0)

std::string pair_str(const char* what, const Shape& a, const Shape& b) {
  return std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b);
}

template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  T* d = dst.raw();
  const T* s = src.raw();
  const std::size_t n = dst.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

struct ConvGeom {
  int n, c, h, w;  // input
  int k_h, k_w, stride, pad;
  int out_h, out_w;
  int rows() const { return c * k_h * k_w; }
  int cols() const { return n * out_h * out_w; }
};

// Output columns [lo, hi) whose input column ow*stride - pad + j lies inside [0, w).
inline void valid_range(int out_w, int w, int stride, int pad, int j, int& lo, int& hi) {
  lo = std::max(0, (pad - j + stride - 1) / stride);
  const int last = w - 1 + pad - j;
  hi = last < 0 ? 0 : std::min(out_w, last / stride + 1);
  if (hi < lo) hi = lo;
}

// col[(c*kH + i)*kW + j][(n*outH + oh)*outW + ow] = x[n][c][oh*s - p + i][ow*s - p + j]
template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const int plane = g.out_h * g.out_w;
  const std::size_t cols = static_cast<std::size_t>(g.cols());
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.k_h; ++i) {
      for (int j = 0; j < g.k_w; ++j) {
        int lo, hi;
        valid_range(g.out_w, g.w, g.stride, g.pad, j, lo, hi);
        T* row = col + static_cast<std::size_t>((c * g.k_h + i) * g.k_w + j) * cols;
        for (int n = 0; n < g.n; ++n) {
          const T* src = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          T* dst = row + static_cast<std::size_t>(n) * plane;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.stride - g.pad + i;
            T* drow = dst + oh * g.out_w;
            if (ih < 0 || ih >= g.h) {
              std::fill(drow, drow + g.out_w, T(0));
              continue;
            }
            const T* srow = src + ih * g.w - g.pad + j;
            std::fill(drow, drow + lo, T(0));
            if (g.stride == 1) {
              std::copy(srow + lo, srow + hi, drow + lo);
            } else {
              for (int ow = lo; ow < hi; ++ow) drow[ow] = srow[ow * g.stride];
            }
            std::fill(drow + hi, drow + g.out_w, T(0));
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters col back into x (accumulating).
template <typename T>
void col2im(const T* col, const ConvGeom& g, T* x) {
  const int plane = g.out_h * g.out_w;
  const std::size_t cols = static_cast<std::size_t>(g.cols());
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.k_h; ++i) {
      for (int j = 0; j < g.k_w; ++j) {
        int lo, hi;
        valid_range(g.out_w, g.w, g.stride, g.pad, j, lo, hi);
        const T* row = col + static_cast<std::size_t>((c * g.k_h + i) * g.k_w + j) * cols;
        for (int n = 0; n < g.n; ++n) {
          T* dst = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          const T* src = row + static_cast<std::size_t>(n) * plane;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.stride - g.pad + i;
            if (ih < 0 || ih >= g.h) continue;
            const T* srow = src + oh * g.out_w;
            T* drow = dst + ih * g.w - g.pad + j;
            if (g.stride == 1) {
              for (int ow = lo; ow < hi; ++ow) drow[ow] += srow[ow];
            } else {
              for (int ow = lo; ow < hi; ++ow) drow[ow * g.stride] += srow[ow];
            }
          }
        }
      }
    }
  }
}

// Spatial planes at least this large run one GEMM per batch item directly in
// NCHW layout; smaller planes are batched into a single GEMM.
constexpr int kPerItemPlane = 256;

// (N,C,P) -> (C, N*P)
template <typename T>
void nchw_to_cn(const T* x, int n, int c, int plane, T* out) {
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x + (static_cast<std::size_t>(b) * c + ch) * plane;
      std::copy(src, src + plane, out + (static_cast<std::size_t>(ch) * n + b) * plane);
    }
  }
}

// (C, N*P) -> (N,C,P)
template <typename T>
void cn_to_nchw(const T* x, int n, int c, int plane, T* out) {
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x + (static_cast<std::size_t>(ch) * n + b) * plane;
      std::copy(src, src + plane, out + (static_cast<std::size_t>(b) * c + ch) * plane);
    }
  }
}

template <typename T>
void check_bias(const Tape<T>& tape, Var bias, int channels, const char* kernel) {
  if (!bias.valid()) return;
  const auto& s = tape.value(bias).shape();
  LPHOM_REQUIRE(s.size() == 1 && s[0] == channels,
          std::string(kernel) + ": bias shape " + shape_str(s) + " does not match " +
              std::to_string(channels) + " output channels");
}

template <typename T, typename F, typename D>
Var unary(Tape<T>& tape, Var x, F f, D dfdx, const char* name) {
  const auto& xv = tape.value(x);
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return tape.record(
      std::move(out), {x},
      [x, dfdx](Tape<T>& tp, const BasicTensor<T>& g) {
        const auto& xv = tp.value(x);
        auto& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * dfdx(xv[i]);
      },
      name);
}

template <typename T>
void require_same(const Tape<T>& tape, Var a, Var b, const char* what) {
  LPHOM_REQUIRE(tape.value(a).shape() == tape.value(b).shape(),
          pair_str(what, tape.value(a).shape(), tape.value(b).shape()));
}

}  // namespace

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var bias, int stride, int pad) {
  const auto& xs = tape.value(x).shape();
  const auto& ws = tape.value(w).shape();
  LPHOM_REQUIRE(xs.size() == 4 && ws.size() == 4, pair_str("conv2d expects NCHW input and OIHW kernel", xs, ws));
  LPHOM_REQUIRE(xs[1] == ws[1], pair_str("conv2d channel mismatch (input vs kernel)", xs, ws));
  LPHOM_REQUIRE(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");
  LPHOM_REQUIRE(xs[2] + 2 * pad >= ws[2] && xs[3] + 2 * pad >= ws[3],
                pair_str("conv2d kernel larger than padded input", xs, ws));
  const int n = xs[0], out_c = ws[0];
  const int out_h = (xs[2] + 2 * pad - ws[2]) / stride + 1;
  const int out_w = (xs[3] + 2 * pad - ws[3]) / stride + 1;
  check_bias(tape, bias, out_c, "conv2d");
  const int plane = out_h * out_w;
  const bool per_item = plane >= kPerItemPlane;
  // Per-item geometry covers one image; batched geometry covers all of them.
  const ConvGeom g{per_item ? 1 : n, xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad, out_h, out_w};
  const std::size_t in_stride = static_cast<std::size_t>(xs[1]) * xs[2] * xs[3];
  const std::size_t out_stride = static_cast<std::size_t>(out_c) * plane;

  BasicTensor<T> out({n, out_c, out_h, out_w});
  AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap<T> wm(tape.value(w).raw(), out_c, g.rows());
  ConstMatMap<T> cm(col.data(), g.rows(), g.cols());
  if (per_item) {
    for (int b = 0; b < n; ++b) {
      im2col(tape.value(x).raw() + b * in_stride, g, col.data());
      MatMap<T> ym(out.raw() + b * out_stride, out_c, plane);
      ym.noalias() = wm * cm;
    }
  } else {
    im2col(tape.value(x).raw(), g, col.data());
    AlignedVector<T> y(static_cast<std::size_t>(out_c) * g.cols());
    MatMap<T> ym(y.data(), out_c, g.cols());
    ym.noalias() = wm * cm;
    cn_to_nchw(y.data(), n, out_c, plane, out.raw());
  }
  if (bias.valid()) {
    const auto& bv = tape.value(bias);
    for (int b = 0; b < n; ++b)
      for (int o = 0; o < out_c; ++o) {
        T* p = out.raw() + b * out_stride + static_cast<std::size_t>(o) * plane;
        const T bo = bv[static_cast<std::size_t>(o)];
        for (int i = 0; i < plane; ++i) p[i] += bo;
      }
  }
  return tape.record(
      std::move(out), {x, w, bias},
      [x, w, bias, g, n, out_c, plane, per_item, in_stride, out_stride](Tape<T>& tp, const BasicTensor<T>& gout) {
        const bool need_w = tp.requires_grad(w);
        const bool need_x = tp.requires_grad(x);
        if (bias.valid() && tp.requires_grad(bias)) {
          auto& gb = tp.grad_buffer(bias);
          for (int b = 0; b < n; ++b)
            for (int o = 0; o < out_c; ++o) {
              const T* p = gout.raw() + b * out_stride + static_cast<std::size_t>(o) * plane;
              T s = 0;
              for (int i = 0; i < plane; ++i) s += p[i];
              gb[static_cast<std::size_t>(o)] += s;
            }
        }
        if (!need_w && !need_x) return;
        ConstMatMap<T> wm(tp.value(w).raw(), out_c, g.rows());
        AlignedVector<T> col(need_w ? static_cast<std::size_t>(g.rows()) * g.cols() : 0);
        AlignedVector<T> dcol(need_x ? static_cast<std::size_t>(g.rows()) * g.cols() : 0);
        T* gw = need_w ? tp.grad_buffer(w).raw() : nullptr;
        T* gx = need_x ? tp.grad_buffer(x).raw() : nullptr;
        auto step = [&](const T* dy_data, const T* x_data, T* dx_data) {
          ConstMatMap<T> dym(dy_data, out_c, g.cols());
          if (need_w) {
            im2col(x_data, g, col.data());
            ConstMatMap<T> cm(col.data(), g.rows(), g.cols());
            MatMap<T> gwm(gw, out_c, g.rows());
            gwm.noalias() += dym * cm.transpose();
          }
          if (need_x) {
            MatMap<T> dcm(dcol.data(), g.rows(), g.cols());
            dcm.noalias() = wm.transpose() * dym;
            col2im(dcol.data(), g, dx_data);
          }
        };
        if (per_item) {
          for (int b = 0; b < n; ++b) {
            step(gout.raw() + b * out_stride, tp.value(x).raw() + b * in_stride,
                 need_x ? gx + b * in_stride : nullptr);
          }
        } else {
          AlignedVector<T> dy(static_cast<std::size_t>(out_c) * g.cols());
          nchw_to_cn(gout.raw(), n, out_c, plane, dy.data());
          step(dy.data(), tp.value(x).raw(), gx);
        }
      },
      "conv2d");
}

template <typename T>
Var conv_transpose2d(Tape<T>& tape, Var x, Var w, Var bias, int stride, int pad) {
  const auto& xs = tape.value(x).shape();
  const auto& ws = tape.value(w).shape();
  LPHOM_REQUIRE(xs.size() == 4 && ws.size() == 4,
                pair_str("conv_transpose2d expects NCHW input and IOHW kernel", xs, ws));
  LPHOM_REQUIRE(xs[1] == ws[0], pair_str("conv_transpose2d channel mismatch (input vs kernel)", xs, ws));
  LPHOM_REQUIRE(stride >= 1 && pad >= 0, "conv_transpose2d: stride must be >= 1 and pad >= 0");
  const int n = xs[0], in_c = xs[1], h = xs[2], wd = xs[3];
  const int out_c = ws[1], k_h = ws[2], k_w = ws[3];
  const int out_h = (h - 1) * stride - 2 * pad + k_h;
  const int out_w = (wd - 1) * stride - 2 * pad + k_w;
  LPHOM_REQUIRE(out_h > 0 && out_w > 0, pair_str("conv_transpose2d produces empty output", xs, ws));
  check_bias(tape, bias, out_c, "conv_transpose2d");
  const int in_plane = h * wd;
  const int out_plane = out_h * out_w;
  const bool per_item = in_plane >= kPerItemPlane;
  // The equivalent forward convolution maps output space back to input space.
  const ConvGeom g{per_item ? 1 : n, out_c, out_h, out_w, k_h, k_w, stride, pad, h, wd};
  const std::size_t in_stride = static_cast<std::size_t>(in_c) * in_plane;
  const std::size_t out_stride = static_cast<std::size_t>(out_c) * out_plane;

  BasicTensor<T> out({n, out_c, out_h, out_w});
  AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap<T> wm(tape.value(w).raw(), in_c, g.rows());
  MatMap<T> cm(col.data(), g.rows(), g.cols());
  if (per_item) {
    for (int b = 0; b < n; ++b) {
      ConstMatMap<T> xm(tape.value(x).raw() + b * in_stride, in_c, g.cols());
      cm.noalias() = wm.transpose() * xm;
      col2im(col.data(), g, out.raw() + b * out_stride);
    }
  } else {
    AlignedVector<T> xbuf(static_cast<std::size_t>(in_c) * g.cols());
    nchw_to_cn(tape.value(x).raw(), n, in_c, in_plane, xbuf.data());
    ConstMatMap<T> xm(xbuf.data(), in_c, g.cols());
    cm.noalias() = wm.transpose() * xm;
    col2im(col.data(), g, out.raw());
  }
  if (bias.valid()) {
    const auto& bv = tape.value(bias);
    for (int b = 0; b < n; ++b)
      for (int o = 0; o < out_c; ++o) {
        T* p = out.raw() + b * out_stride + static_cast<std::size_t>(o) * out_plane;
        const T bo = bv[static_cast<std::size_t>(o)];
        for (int i = 0; i < out_plane; ++i) p[i] += bo;
      }
  }
  return tape.record(
      std::move(out), {x, w, bias},
      [x, w, bias, g, n, in_c, out_c, in_plane, out_plane, per_item, in_stride, out_stride](
          Tape<T>& tp, const BasicTensor<T>& gout) {
        const bool need_w = tp.requires_grad(w);
        const bool need_x = tp.requires_grad(x);
        if (bias.valid() && tp.requires_grad(bias)) {
          auto& gb = tp.grad_buffer(bias);
          for (int b = 0; b < n; ++b)
            for (int o = 0; o < out_c; ++o) {
              const T* p = gout.raw() + b * out_stride + static_cast<std::size_t>(o) * out_plane;
              T s = 0;
              for (int i = 0; i < out_plane; ++i) s += p[i];
              gb[static_cast<std::size_t>(o)] += s;
            }
        }
        if (!need_w && !need_x) return;
        ConstMatMap<T> wm(tp.value(w).raw(), in_c, g.rows());
        AlignedVector<T> dcol(static_cast<std::size_t>(g.rows()) * g.cols());
        ConstMatMap<T> dcm(dcol.data(), g.rows(), g.cols());
        T* gw = need_w ? tp.grad_buffer(w).raw() : nullptr;
        auto step = [&](const T* gout_data, const T* x_data, T* dx_data) {
          im2col(gout_data, g, dcol.data());
          if (need_w) {
            ConstMatMap<T> xm(x_data, in_c, g.cols());
            MatMap<T> gwm(gw, in_c, g.rows());
            gwm.noalias() += xm * dcm.transpose();
          }
          if (need_x) {
            MatMap<T> dxm(dx_data, in_c, g.cols());
            dxm.noalias() += wm * dcm;
          }
        };
        if (per_item) {
          T* gx = need_x ? tp.grad_buffer(x).raw() : nullptr;
          for (int b = 0; b < n; ++b) {
            step(gout.raw() + b * out_stride, tp.value(x).raw() + b * in_stride,
                 need_x ? gx + b * in_stride : nullptr);
          }
        } else {
          AlignedVector<T> xbuf(static_cast<std::size_t>(in_c) * g.cols());
          nchw_to_cn(tp.value(x).raw(), n, in_c, in_plane, xbuf.data());
          AlignedVector<T> dx(need_x ? static_cast<std::size_t>(in_c) * g.cols() : 0);
          step(gout.raw(), xbuf.data(), dx.data());
          if (need_x) {
            BasicTensor<T> dxt(tp.value(x).shape());
            cn_to_nchw(dx.data(), n, in_c, in_plane, dxt.raw());
            add_into(tp.grad_buffer(x), dxt);
          }
        }
      },
      "conv_transpose2d");
}

template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var bias) {
  const auto& xs = tape.value(x).shape();
  const auto& ws = tape.value(w).shape();
  LPHOM_REQUIRE(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[1],
          pair_str("linear expects x (N,in) and w (out,in)", xs, ws));
  const int n = xs[0], in = xs[1], out_f = ws[0];
  check_bias(tape, bias, out_f, "linear");
  BasicTensor<T> out({n, out_f});
  {
    ConstMatMap<T> xm(tape.value(x).raw(), n, in);
    ConstMatMap<T> wm(tape.value(w).raw(), out_f, in);
    MatMap<T> ym(out.raw(), n, out_f);
    ym.noalias() = xm * wm.transpose();
    if (bias.valid()) {
      Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(tape.value(bias).raw(), out_f);
      ym.rowwise() += bm;
    }
  }
  return tape.record(
      std::move(out), {x, w, bias},
      [x, w, bias, n, in, out_f](Tape<T>& tp, const BasicTensor<T>& gout) {
        ConstMatMap<T> gm(gout.raw(), n, out_f);
        if (tp.requires_grad(x)) {
          ConstMatMap<T> wm(tp.value(w).raw(), out_f, in);
          MatMap<T> gx(tp.grad_buffer(x).raw(), n, in);
          gx.noalias() += gm * wm;
        }
        if (tp.requires_grad(w)) {
          ConstMatMap<T> xm(tp.value(x).raw(), n, in);
          MatMap<T> gw(tp.grad_buffer(w).raw(), out_f, in);
          gw.noalias() += gm.transpose() * xm;
        }
        if (bias.valid() && tp.requires_grad(bias)) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(tp.grad_buffer(bias).raw(), out_f);
          gb += gm.colwise().sum();
        }
      },
      "linear");
}

template <typename T>
Var group_norm(Tape<T>& tape, Var x, Var gamma, Var beta, int groups, double eps) {
  const auto& xs = tape.value(x).shape();
  LPHOM_REQUIRE(xs.size() >= 2, "group_norm expects (N,C,...) input, got " + shape_str(xs));
  const int n = xs[0], c = xs[1];
  LPHOM_REQUIRE(groups >= 1 && c % groups == 0,
          "group_norm: " + std::to_string(c) + " channels not divisible into " +
              std::to_string(groups) + " groups");
  for (Var p : {gamma, beta}) {
    LPHOM_REQUIRE(tape.value(p).shape() == Shape{c},
            pair_str("group_norm affine parameter shape", tape.value(p).shape(), Shape{c}));
  }
  const std::size_t plane = tape.value(x).size() / (static_cast<std::size_t>(n) * c);
  const int cg = c / groups;
  const std::size_t m = plane * static_cast<std::size_t>(cg);
  // Normalized activations and inverse std per (n, group) are kept for the adjoint.
  auto xhat = std::make_shared<BasicTensor<T>>(xs);
  auto rstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * groups);
  BasicTensor<T> out(xs);
  const T* xd = tape.value(x).raw();
  const auto& gv = tape.value(gamma);
  const auto& bv = tape.value(beta);
  for (int b = 0; b < n; ++b) {
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + static_cast<std::size_t>(gi) * cg) * plane;
      double s = 0, s2 = 0;
      for (std::size_t i = 0; i < m; ++i) s += xd[off + i];
      const double mu = s / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double d = xd[off + i] - mu;
        s2 += d * d;
      }
      const double r = 1.0 / std::sqrt(s2 / static_cast<double>(m) + eps);
      (*rstd)[static_cast<std::size_t>(b) * groups + gi] = r;
      for (int cc = 0; cc < cg; ++cc) {
        const int ch = gi * cg + cc;
        const T ga = gv[static_cast<std::size_t>(ch)], be = bv[static_cast<std::size_t>(ch)];
        const std::size_t o = off + static_cast<std::size_t>(cc) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T xh = static_cast<T>((xd[o + i] - mu) * r);
          (*xhat)[o + i] = xh;
          out[o + i] = xh * ga + be;
        }
      }
    }
  }
  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, rstd, n, c, groups, cg, plane, m](Tape<T>& tp, const BasicTensor<T>& g) {
        const auto& gv = tp.value(gamma);
        if (tp.requires_grad(gamma) || tp.requires_grad(beta)) {
          std::vector<double> dg(static_cast<std::size_t>(c), 0.0), db(static_cast<std::size_t>(c), 0.0);
          for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
              const std::size_t o = (static_cast<std::size_t>(b) * c + ch) * plane;
              double sg = 0, sb = 0;
              for (std::size_t i = 0; i < plane; ++i) {
                sg += static_cast<double>(g[o + i]) * (*xhat)[o + i];
                sb += g[o + i];
              }
              dg[static_cast<std::size_t>(ch)] += sg;
              db[static_cast<std::size_t>(ch)] += sb;
            }
          if (tp.requires_grad(gamma)) {
            auto& gg = tp.grad_buffer(gamma);
            for (int ch = 0; ch < c; ++ch) gg[static_cast<std::size_t>(ch)] += static_cast<T>(dg[static_cast<std::size_t>(ch)]);
          }
          if (tp.requires_grad(beta)) {
            auto& gb = tp.grad_buffer(beta);
            for (int ch = 0; ch < c; ++ch) gb[static_cast<std::size_t>(ch)] += static_cast<T>(db[static_cast<std::size_t>(ch)]);
          }
        }
        if (!tp.requires_grad(x)) return;
        auto& gx = tp.grad_buffer(x);
        for (int b = 0; b < n; ++b) {
          for (int gi = 0; gi < groups; ++gi) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + static_cast<std::size_t>(gi) * cg) * plane;
            double sum_d = 0, sum_dx = 0;
            for (int cc = 0; cc < cg; ++cc) {
              const double ga = gv[static_cast<std::size_t>(gi * cg + cc)];
              const std::size_t o = off + static_cast<std::size_t>(cc) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                const double d = g[o + i] * ga;
                sum_d += d;
                sum_dx += d * (*xhat)[o + i];
              }
            }
            const double r = (*rstd)[static_cast<std::size_t>(b) * groups + gi];
            const double inv_m = 1.0 / static_cast<double>(m);
            for (int cc = 0; cc < cg; ++cc) {
              const double ga = gv[static_cast<std::size_t>(gi * cg + cc)];
              const std::size_t o = off + static_cast<std::size_t>(cc) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                const double d = g[o + i] * ga;
                gx[o + i] += static_cast<T>(r * (d - inv_m * (sum_d + (*xhat)[o + i] * sum_dx)));
              }
            }
          }
        }
      },
      "group_norm");
}

template <typename T>
Var silu(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(xv.size());
  Eigen::Map<const Arr> xa(xv.raw(), n);
  auto sig = std::make_shared<Arr>((T(1) + (-xa).exp()).inverse());
  BasicTensor<T> out(xv.shape());
  Eigen::Map<Arr>(out.raw(), n) = xa * *sig;
  return tape.record(
      std::move(out), {x},
      [x, sig, n](Tape<T>& tp, const BasicTensor<T>& g) {
        Eigen::Map<const Arr> xa(tp.value(x).raw(), n);
        Eigen::Map<const Arr> ga(g.raw(), n);
        Eigen::Map<Arr>(tp.grad_buffer(x).raw(), n) += ga * *sig * (T(1) + xa * (T(1) - *sig));
      },
      "silu");
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return unary(
      tape, x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); },
      "relu");
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(xv.size());
  BasicTensor<T> out(xv.shape());
  Eigen::Map<Arr>(out.raw(), n) = (T(1) + (-Eigen::Map<const Arr>(xv.raw(), n)).exp()).inverse();
  auto saved = std::make_shared<Arr>(Eigen::Map<const Arr>(out.raw(), n));
  return tape.record(
      std::move(out), {x},
      [x, saved, n](Tape<T>& tp, const BasicTensor<T>& g) {
        Eigen::Map<const Arr> ga(g.raw(), n);
        Eigen::Map<Arr>(tp.grad_buffer(x).raw(), n) += ga * *saved * (T(1) - *saved);
      },
      "sigmoid");
}

template <typename T>
Var exp(Tape<T>& tape, Var x) {
  return unary(
      tape, x, [](T v) { return std::exp(v); }, [](T v) { return std::exp(v); }, "exp");
}

template <typename T>
Var clamp(Tape<T>& tape, Var x, double lo, double hi) {
  const T l = static_cast<T>(lo), h = static_cast<T>(hi);
  return unary(
      tape, x, [l, h](T v) { return std::clamp(v, l, h); },
      [l, h](T v) { return (v > l && v < h) ? T(1) : T(0); }, "clamp");
}

template <typename T>
Var scale(Tape<T>& tape, Var x, double s) {
  const T k = static_cast<T>(s);
  return unary(
      tape, x, [k](T v) { return v * k; }, [k](T) { return k; }, "scale");
}

template <typename T>
Var avg_pool2d(Tape<T>& tape, Var x) {
  const auto& xs = tape.value(x).shape();
  LPHOM_REQUIRE(xs.size() == 4 && xs[2] % 2 == 0 && xs[3] % 2 == 0,
          "avg_pool2d expects NCHW with even spatial dims, got " + shape_str(xs));
  const int nc = xs[0] * xs[1], h = xs[2], w = xs[3], oh = h / 2, ow = w / 2;
  BasicTensor<T> out({xs[0], xs[1], oh, ow});
  const T* xd = tape.value(x).raw();
  for (int p = 0; p < nc; ++p) {
    const T* src = xd + static_cast<std::size_t>(p) * h * w;
    T* dst = out.raw() + static_cast<std::size_t>(p) * oh * ow;
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        const T* s = src + 2 * i * w + 2 * j;
        dst[i * ow + j] = T(0.25) * (s[0] + s[1] + s[w] + s[w + 1]);
      }
  }
  return tape.record(
      std::move(out), {x},
      [x, nc, h, w, oh, ow](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gx = tp.grad_buffer(x);
        for (int p = 0; p < nc; ++p) {
          T* dst = gx.raw() + static_cast<std::size_t>(p) * h * w;
          const T* src = g.raw() + static_cast<std::size_t>(p) * oh * ow;
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
              const T v = T(0.25) * src[i * ow + j];
              T* d = dst + 2 * i * w + 2 * j;
              d[0] += v;
              d[1] += v;
              d[w] += v;
              d[w + 1] += v;
            }
        }
      },
      "avg_pool2d");
}

template <typename T>
Var upsample_nearest2x(Tape<T>& tape, Var x) {
  const auto& xs = tape.value(x).shape();
  LPHOM_REQUIRE(xs.size() == 4, "upsample_nearest2x expects NCHW, got " + shape_str(xs));
  const int nc = xs[0] * xs[1], h = xs[2], w = xs[3], oh = 2 * h, ow = 2 * w;
  BasicTensor<T> out({xs[0], xs[1], oh, ow});
  const T* xd = tape.value(x).raw();
  for (int p = 0; p < nc; ++p) {
    const T* src = xd + static_cast<std::size_t>(p) * h * w;
    T* dst = out.raw() + static_cast<std::size_t>(p) * oh * ow;
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) dst[i * ow + j] = src[(i / 2) * w + j / 2];
  }
  return tape.record(
      std::move(out), {x},
      [x, nc, h, w, oh, ow](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gx = tp.grad_buffer(x);
        for (int p = 0; p < nc; ++p) {
          T* dst = gx.raw() + static_cast<std::size_t>(p) * h * w;
          const T* src = g.raw() + static_cast<std::size_t>(p) * oh * ow;
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) dst[(i / 2) * w + j / 2] += src[i * ow + j];
        }
      },
      "upsample_nearest2x");
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "add shape mismatch");
  BasicTensor<T> out = tape.value(a);
  add_into(out, tape.value(b));
  return tape.record(
      std::move(out), {a, b},
      [a, b](Tape<T>& tp, const BasicTensor<T>& g) {
        if (tp.requires_grad(a)) add_into(tp.grad_buffer(a), g);
        if (tp.requires_grad(b)) add_into(tp.grad_buffer(b), g);
      },
      "add");
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "sub shape mismatch");
  BasicTensor<T> out = tape.value(a);
  const auto& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(
      std::move(out), {a, b},
      [a, b](Tape<T>& tp, const BasicTensor<T>& g) {
        if (tp.requires_grad(a)) add_into(tp.grad_buffer(a), g);
        if (tp.requires_grad(b)) {
          auto& gb = tp.grad_buffer(b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
        }
      },
      "sub");
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "mul shape mismatch");
  BasicTensor<T> out = tape.value(a);
  const auto& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(
      std::move(out), {a, b},
      [a, b](Tape<T>& tp, const BasicTensor<T>& g) {
        const auto& av = tp.value(a);
        const auto& bv = tp.value(b);
        if (tp.requires_grad(a)) {
          auto& ga = tp.grad_buffer(a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tp.requires_grad(b)) {
          auto& gb = tp.grad_buffer(b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
        }
      },
      "mul");
}

template <typename T>
Var add_channel_bias(Tape<T>& tape, Var x, Var e) {
  const auto& xs = tape.value(x).shape();
  const auto& es = tape.value(e).shape();
  LPHOM_REQUIRE(xs.size() == 4 && es.size() == 2 && es[0] == xs[0] && es[1] == xs[1],
          pair_str("add_channel_bias expects x (N,C,H,W) and e (N,C)", xs, es));
  const int nc = xs[0] * xs[1];
  const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  BasicTensor<T> out = tape.value(x);
  const auto& ev = tape.value(e);
  for (int p = 0; p < nc; ++p) {
    T* d = out.raw() + p * plane;
    const T v = ev[static_cast<std::size_t>(p)];
    for (std::size_t i = 0; i < plane; ++i) d[i] += v;
  }
  return tape.record(
      std::move(out), {x, e},
      [x, e, nc, plane](Tape<T>& tp, const BasicTensor<T>& g) {
        if (tp.requires_grad(x)) add_into(tp.grad_buffer(x), g);
        if (tp.requires_grad(e)) {
          auto& ge = tp.grad_buffer(e);
          for (int p = 0; p < nc; ++p) {
            const T* s = g.raw() + p * plane;
            T acc = 0;
            for (std::size_t i = 0; i < plane; ++i) acc += s[i];
            ge[static_cast<std::size_t>(p)] += acc;
          }
        }
      },
      "add_channel_bias");
}

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const auto& as = tape.value(a).shape();
  const auto& bs = tape.value(b).shape();
  bool ok = as.size() >= 2 && as.size() == bs.size() && as[0] == bs[0];
  for (std::size_t i = 2; ok && i < as.size(); ++i) ok = as[i] == bs[i];
  LPHOM_REQUIRE(ok, pair_str("concat_channels shape mismatch", as, bs));
  const int n = as[0], ca = as[1], cb = bs[1];
  const std::size_t plane = tape.value(a).size() / (static_cast<std::size_t>(n) * ca);
  Shape os = as;
  os[1] = ca + cb;
  BasicTensor<T> out(os);
  const T* ad = tape.value(a).raw();
  const T* bd = tape.value(b).raw();
  for (int i = 0; i < n; ++i) {
    T* dst = out.raw() + static_cast<std::size_t>(i) * (ca + cb) * plane;
    std::copy(ad + i * ca * plane, ad + (i + 1) * ca * plane, dst);
    std::copy(bd + i * cb * plane, bd + (i + 1) * cb * plane, dst + ca * plane);
  }
  return tape.record(
      std::move(out), {a, b},
      [a, b, n, ca, cb, plane](Tape<T>& tp, const BasicTensor<T>& g) {
        for (int i = 0; i < n; ++i) {
          const T* src = g.raw() + static_cast<std::size_t>(i) * (ca + cb) * plane;
          if (tp.requires_grad(a)) {
            T* d = tp.grad_buffer(a).raw() + i * ca * plane;
            for (std::size_t k = 0; k < ca * plane; ++k) d[k] += src[k];
          }
          if (tp.requires_grad(b)) {
            T* d = tp.grad_buffer(b).raw() + i * cb * plane;
            for (std::size_t k = 0; k < cb * plane; ++k) d[k] += src[ca * plane + k];
          }
        }
      },
      "concat_channels");
}

template <typename T>
Var slice_channels(Tape<T>& tape, Var x, int begin, int end) {
  const auto& xs = tape.value(x).shape();
  LPHOM_REQUIRE(xs.size() >= 2 && 0 <= begin && begin < end && end <= xs[1],
          "slice_channels [" + std::to_string(begin) + "," + std::to_string(end) +
              ") out of range for " + shape_str(xs));
  const int n = xs[0], c = xs[1], k = end - begin;
  const std::size_t plane = tape.value(x).size() / (static_cast<std::size_t>(n) * c);
  Shape os = xs;
  os[1] = k;
  BasicTensor<T> out(os);
  const T* xd = tape.value(x).raw();
  for (int i = 0; i < n; ++i) {
    const T* src = xd + (static_cast<std::size_t>(i) * c + begin) * plane;
    std::copy(src, src + k * plane, out.raw() + static_cast<std::size_t>(i) * k * plane);
  }
  return tape.record(
      std::move(out), {x},
      [x, n, c, k, begin, plane](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gx = tp.grad_buffer(x);
        for (int i = 0; i < n; ++i) {
          T* dst = gx.raw() + (static_cast<std::size_t>(i) * c + begin) * plane;
          const T* src = g.raw() + static_cast<std::size_t>(i) * k * plane;
          for (std::size_t q = 0; q < k * plane; ++q) dst[q] += src[q];
        }
      },
      "slice_channels");
}

template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  LPHOM_REQUIRE(xv.rank() >= 1, "flatten of a rank-0 tensor");
  const int n = xv.dim(0);
  BasicTensor<T> out = xv.reshaped({n, static_cast<int>(xv.size() / static_cast<std::size_t>(n))});
  return tape.record(
      std::move(out), {x},
      [x](Tape<T>& tp, const BasicTensor<T>& g) { add_into(tp.grad_buffer(x), g.reshaped(tp.value(x).shape())); },
      "flatten");
}

template <typename T>
Var global_avg_pool(Tape<T>& tape, Var x) {
  const auto& xs = tape.value(x).shape();
  LPHOM_REQUIRE(xs.size() == 4, "global_avg_pool expects NCHW, got " + shape_str(xs));
  const int nc = xs[0] * xs[1];
  const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  BasicTensor<T> out({xs[0], xs[1]});
  const T* xd = tape.value(x).raw();
  for (int p = 0; p < nc; ++p) {
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += xd[p * plane + i];
    out[static_cast<std::size_t>(p)] = s / static_cast<T>(plane);
  }
  return tape.record(
      std::move(out), {x},
      [x, nc, plane](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gx = tp.grad_buffer(x);
        for (int p = 0; p < nc; ++p) {
          const T v = g[static_cast<std::size_t>(p)] / static_cast<T>(plane);
          for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += v;
        }
      },
      "global_avg_pool");
}

template <typename T>
Var embedding(Tape<T>& tape, Var table, std::span<const int> indices) {
  const auto& ts = tape.value(table).shape();
  LPHOM_REQUIRE(ts.size() == 2, "embedding table must be (K,d), got " + shape_str(ts));
  const int k = ts[0], d = ts[1];
  const int n = static_cast<int>(indices.size());
  LPHOM_REQUIRE(n > 0, "embedding lookup with no indices");
  std::vector<int> idx(indices.begin(), indices.end());
  BasicTensor<T> out({n, d});
  for (int i = 0; i < n; ++i) {
    LPHOM_REQUIRE(idx[static_cast<std::size_t>(i)] >= 0 && idx[static_cast<std::size_t>(i)] < k,
            "embedding index " + std::to_string(idx[static_cast<std::size_t>(i)]) + " outside table of " +
                std::to_string(k) + " rows");
    const T* src = tape.value(table).raw() + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * d;
    std::copy(src, src + d, out.raw() + static_cast<std::size_t>(i) * d);
  }
  return tape.record(
      std::move(out), {table},
      [table, idx, d](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gt = tp.grad_buffer(table);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          T* dst = gt.raw() + static_cast<std::size_t>(idx[i]) * d;
          const T* src = g.raw() + i * d;
          for (int q = 0; q < d; ++q) dst[q] += src[q];
        }
      },
      "embedding");
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  double s = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
  return tape.record(
      BasicTensor<T>({1}, {static_cast<T>(s)}), {x},
      [x](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      },
      "sum");
}

template <typename T>
Var mean(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  double s = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
  const double inv = 1.0 / static_cast<double>(xv.size());
  return tape.record(
      BasicTensor<T>({1}, {static_cast<T>(s * inv)}), {x},
      [x, inv](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gx = tp.grad_buffer(x);
        const T v = static_cast<T>(g[0] * inv);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += v;
      },
      "mean");
}

template <typename T>
Var mse(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "mse shape mismatch");
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  double s = 0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(av.size());
  return tape.record(
      BasicTensor<T>({1}, {static_cast<T>(s * inv)}), {a, b},
      [a, b, inv](Tape<T>& tp, const BasicTensor<T>& g) {
        const auto& av = tp.value(a);
        const auto& bv = tp.value(b);
        const T k = static_cast<T>(2.0 * inv * g[0]);
        if (tp.requires_grad(a)) {
          auto& ga = tp.grad_buffer(a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += k * (av[i] - bv[i]);
        }
        if (tp.requires_grad(b)) {
          auto& gb = tp.grad_buffer(b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= k * (av[i] - bv[i]);
        }
      },
      "mse");
}

template <typename T>
Var kl_standard_normal(Tape<T>& tape, Var mu, Var logvar) {
  require_same(tape, mu, logvar, "kl_standard_normal shape mismatch");
  const auto& mv = tape.value(mu);
  const auto& lv = tape.value(logvar);
  LPHOM_REQUIRE(mv.rank() >= 1, "kl_standard_normal needs a batch axis");
  const double inv_n = 1.0 / mv.dim(0);
  double s = 0;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    const double m = mv[i], l = lv[i];
    s += m * m + std::exp(l) - 1.0 - l;
  }
  return tape.record(
      BasicTensor<T>({1}, {static_cast<T>(0.5 * s * inv_n)}), {mu, logvar},
      [mu, logvar, inv_n](Tape<T>& tp, const BasicTensor<T>& g) {
        const auto& mv = tp.value(mu);
        const auto& lv = tp.value(logvar);
        const double k = g[0] * inv_n;
        if (tp.requires_grad(mu)) {
          auto& gm = tp.grad_buffer(mu);
          for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += static_cast<T>(k * mv[i]);
        }
        if (tp.requires_grad(logvar)) {
          auto& gl = tp.grad_buffer(logvar);
          for (std::size_t i = 0; i < gl.size(); ++i)
            gl[i] += static_cast<T>(0.5 * k * (std::exp(static_cast<double>(lv[i])) - 1.0));
        }
      },
      "kl_standard_normal");
}

template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets) {
  const auto& ls = tape.value(logits).shape();
  LPHOM_REQUIRE(ls.size() == 2 && ls[0] == static_cast<int>(targets.size()),
          "cross_entropy expects logits (N,K) with N targets, got " + shape_str(ls) + " and " +
              std::to_string(targets.size()) + " targets");
  const int n = ls[0], k = ls[1];
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * k);
  std::vector<int> tg(targets.begin(), targets.end());
  double loss = 0;
  const T* ld = tape.value(logits).raw();
  for (int i = 0; i < n; ++i) {
    LPHOM_REQUIRE(tg[static_cast<std::size_t>(i)] >= 0 && tg[static_cast<std::size_t>(i)] < k,
            "cross_entropy target out of range");
    const T* row = ld + static_cast<std::size_t>(i) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (int j = 0; j < k; ++j) (*probs)[static_cast<std::size_t>(i) * k + j] = std::exp(row[j] - mx) / z;
    loss += -(row[tg[static_cast<std::size_t>(i)]] - mx - std::log(z));
  }
  return tape.record(
      BasicTensor<T>({1}, {static_cast<T>(loss / n)}), {logits},
      [logits, probs, tg, n, k](Tape<T>& tp, const BasicTensor<T>& g) {
        auto& gl = tp.grad_buffer(logits);
        const double s = g[0] / n;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < k; ++j) {
            const std::size_t q = static_cast<std::size_t>(i) * k + j;
            const double y = (j == tg[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
            gl[q] += static_cast<T>(s * ((*probs)[q] - y));
          }
      },
      "cross_entropy");
}

#define LPHOM_INSTANTIATE_OPS(T)                                                    \
  template Var conv2d(Tape<T>&, Var, Var, Var, int, int);                           \
  template Var conv_transpose2d(Tape<T>&, Var, Var, Var, int, int);                 \
  template Var linear(Tape<T>&, Var, Var, Var);                                     \
  template Var group_norm(Tape<T>&, Var, Var, Var, int, double);                    \
  template Var silu(Tape<T>&, Var);                                                 \
  template Var relu(Tape<T>&, Var);                                                 \
  template Var sigmoid(Tape<T>&, Var);                                              \
  template Var exp(Tape<T>&, Var);                                                  \
  template Var clamp(Tape<T>&, Var, double, double);                                \
  template Var scale(Tape<T>&, Var, double);                                        \
  template Var avg_pool2d(Tape<T>&, Var);                                           \
  template Var upsample_nearest2x(Tape<T>&, Var);                                   \
  template Var add(Tape<T>&, Var, Var);                                             \
  template Var sub(Tape<T>&, Var, Var);                                             \
  template Var mul(Tape<T>&, Var, Var);                                             \
  template Var add_channel_bias(Tape<T>&, Var, Var);                                \
  template Var concat_channels(Tape<T>&, Var, Var);                                 \
  template Var slice_channels(Tape<T>&, Var, int, int);                             \
  template Var flatten(Tape<T>&, Var);                                              \
  template Var global_avg_pool(Tape<T>&, Var);                                      \
  template Var embedding(Tape<T>&, Var, std::span<const int>);                      \
  template Var mean(Tape<T>&, Var);                                                 \
  template Var sum(Tape<T>&, Var);                                                  \
  template Var mse(Tape<T>&, Var, Var);                                             \
  template Var kl_standard_normal(Tape<T>&, Var, Var);                              \
  template Var cross_entropy(Tape<T>&, Var, std::span<const int>);

LPHOM_INSTANTIATE_OPS(float)
LPHOM_INSTANTIATE_OPS(double)

}  // namespace lphom::ops
