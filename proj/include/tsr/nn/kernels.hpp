#pragma once

// Forward/backward kernels for the 1D layer set. All operate on
// channel-major sequences (C x T) and flat weight vectors.

#include "tsr/core.hpp"
#include "tsr/nn/counter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>

namespace tsr::nn {

// Keeps optional pointer arguments (nullptr) out of template deduction.
template <typename T>
using NoDeduce = std::type_identity_t<T>;

struct ConvSpec {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

inline Eigen::Index conv_out_len(Eigen::Index t, const ConvSpec& s) {
  const Eigen::Index span = t + 2 * s.padding - s.kernel;
  if (s.kernel < 1 || s.stride < 1 || s.padding < 0 || span < 0)
    throw DimensionError("conv1d: non-positive output length for T=" + std::to_string(t) +
                         " K=" + std::to_string(s.kernel) + " pad=" + std::to_string(s.padding));
  return span / s.stride + 1;
}

namespace detail {

template <typename S>
using RowMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using MutRowMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using StridedRow = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>, 0, Eigen::InnerStride<>>;
template <typename S>
using MutStridedRow = Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>, 0, Eigen::InnerStride<>>;
template <typename S>
using StridedMat =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
               Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
template <typename S>
using MutStridedMat = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                                 Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

template <typename S>
FeatureSequence<S> pad_time(const FeatureSequence<S>& x, int pad) {
  if (pad == 0) return x;
  FeatureSequence<S> xp = FeatureSequence<S>::Zero(x.rows(), x.cols() + 2 * pad);
  xp.middleCols(pad, x.cols()) = x;
  return xp;
}

// Rows (i*K + j) hold the padded input row i shifted by j and sampled at stride.
template <typename S>
FeatureSequence<S> im2col(const FeatureSequence<S>& xp, Eigen::Index row0, Eigen::Index rows, int k,
                          int stride, Eigen::Index tout) {
  FeatureSequence<S> col(rows * k, tout);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (int j = 0; j < k; ++j)
      col.row(i * k + j) = StridedRow<S>(xp.row(row0 + i).data() + j, tout, Eigen::InnerStride<>(stride));
  return col;
}

inline void check_conv(Eigen::Index cin, int cout, Eigen::Index wsize, Eigen::Index bsize,
                       const ConvSpec& s) {
  if (s.groups < 1 || cin % s.groups != 0 || cout % s.groups != 0)
    throw DimensionError("conv1d: channels " + std::to_string(cin) + "->" + std::to_string(cout) +
                         " not divisible by groups " + std::to_string(s.groups));
  const Eigen::Index expect = static_cast<Eigen::Index>(cout) * (cin / s.groups) * s.kernel;
  if (wsize != expect)
    throw DimensionError("conv1d: weight has " + std::to_string(wsize) + " elements, expected " +
                         std::to_string(expect));
  if (bsize >= 0 && bsize != cout) throw DimensionError("conv1d: bias size mismatch");
}

}  // namespace detail

// y[o][t] = b[o] + sum_{i,j} w[o][i][j] * xpad[i][t*stride + j], weight layout [Cout][Cin/g][K].
template <typename S>
FeatureSequence<S> conv1d_forward(const FeatureSequence<S>& x, const Vector<S>& w, const NoDeduce<Vector<S>>* b,
                                  int cout, const ConvSpec& s) {
  detail::check_conv(x.rows(), cout, w.size(), b ? b->size() : -1, s);
  const Eigen::Index tout = conv_out_len(x.cols(), s);
  const Eigen::Index cin_g = x.rows() / s.groups;
  const Eigen::Index cout_g = cout / s.groups;
  const auto xp = detail::pad_time(x, s.padding);
  FeatureSequence<S> y(cout, tout);

  if (cin_g == 1 && cout_g == 1) {
    for (Eigen::Index c = 0; c < cout; ++c) {
      y.row(c).setConstant(b ? (*b)[c] : S(0));
      for (int j = 0; j < s.kernel; ++j)
        y.row(c) += w[c * s.kernel + j] *
                    detail::StridedRow<S>(xp.row(c).data() + j, tout, Eigen::InnerStride<>(s.stride));
    }
  } else {
    const detail::RowMap<S> wm(w.data(), cout, cin_g * s.kernel);
    for (int g = 0; g < s.groups; ++g) {
      const auto col = detail::im2col(xp, g * cin_g, cin_g, s.kernel, s.stride, tout);
      y.middleRows(g * cout_g, cout_g).noalias() = wm.middleRows(g * cout_g, cout_g) * col;
    }
    if (b) y.colwise() += *b;
  }
  count_op(2ull * s.kernel * cin_g * cout * tout + (b ? cout * tout : 0), x.size(), y.size(),
           w.size() + (b ? b->size() : 0));
  return y;
}

// Accumulates into gx/gw/gb (any may be null).
template <typename S>
void conv1d_backward(const FeatureSequence<S>& x, const Vector<S>& w, const FeatureSequence<S>& gy,
                     int cout, const ConvSpec& s, NoDeduce<FeatureSequence<S>>* gx, NoDeduce<Vector<S>>* gw,
                     NoDeduce<Vector<S>>* gb) {
  const Eigen::Index tout = gy.cols();
  const Eigen::Index cin_g = x.rows() / s.groups;
  const Eigen::Index cout_g = cout / s.groups;
  const auto xp = detail::pad_time(x, s.padding);
  FeatureSequence<S> gxp;
  if (gx) gxp = FeatureSequence<S>::Zero(xp.rows(), xp.cols());

  if (cin_g == 1 && cout_g == 1) {
    for (Eigen::Index c = 0; c < cout; ++c) {
      for (int j = 0; j < s.kernel; ++j) {
        if (gw)
          (*gw)[c * s.kernel + j] +=
              gy.row(c).dot(detail::StridedRow<S>(xp.row(c).data() + j, tout, Eigen::InnerStride<>(s.stride)));
        if (gx)
          detail::MutStridedRow<S>(gxp.row(c).data() + j, tout, Eigen::InnerStride<>(s.stride)) +=
              w[c * s.kernel + j] * gy.row(c);
      }
    }
  } else {
    const detail::RowMap<S> wm(w.data(), cout, cin_g * s.kernel);
    for (int g = 0; g < s.groups; ++g) {
      const auto gyg = gy.middleRows(g * cout_g, cout_g);
      if (gw) {
        const auto col = detail::im2col(xp, g * cin_g, cin_g, s.kernel, s.stride, tout);
        detail::MutRowMap<S> gwm(gw->data(), cout, cin_g * s.kernel);
        gwm.middleRows(g * cout_g, cout_g).noalias() += gyg * col.transpose();
      }
      if (gx) {
        const FeatureSequence<S> gcol = wm.middleRows(g * cout_g, cout_g).transpose() * gyg;
        for (Eigen::Index i = 0; i < cin_g; ++i)
          for (int j = 0; j < s.kernel; ++j)
            detail::MutStridedRow<S>(gxp.row(g * cin_g + i).data() + j, tout, Eigen::InnerStride<>(s.stride)) +=
                gcol.row(i * s.kernel + j);
      }
    }
  }
  if (gb) *gb += gy.rowwise().sum();
  if (gx) *gx += gxp.middleCols(s.padding, x.cols());
}

inline Eigen::Index transposed_out_len(Eigen::Index t, int kernel, int stride) {
  if (kernel < 1 || stride < 1 || t < 1) throw DimensionError("transposed_conv1d: invalid geometry");
  return (t - 1) * stride + kernel;
}

// y[o][t*stride + j] += sum_i w[i][o][j] * x[i][t], weight layout [Cin][Cout][K].
template <typename S>
FeatureSequence<S> transposed_conv1d_forward(const FeatureSequence<S>& x, const Vector<S>& w,
                                             const NoDeduce<Vector<S>>* b, int cout, int kernel, int stride) {
  const Eigen::Index cin = x.rows();
  const Eigen::Index tin = x.cols();
  if (w.size() != cin * cout * kernel)
    throw DimensionError("transposed_conv1d: weight has " + std::to_string(w.size()) + " elements, expected " +
                         std::to_string(cin * cout * kernel));
  if (b && b->size() != cout) throw DimensionError("transposed_conv1d: bias size mismatch");
  const Eigen::Index tout = transposed_out_len(tin, kernel, stride);
  FeatureSequence<S> y = FeatureSequence<S>::Zero(cout, tout);
  for (int j = 0; j < kernel; ++j) {
    const detail::StridedMat<S> wj(w.data() + j, cin, cout,
                                   Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(cout * kernel, kernel));
    detail::MutStridedMat<S> yj(y.data() + j, cout, tin, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(tout, stride));
    yj.noalias() += wj.transpose() * x;
  }
  if (b) y.colwise() += *b;
  count_op(2ull * kernel * cin * cout * tin + (b ? cout * tout : 0), x.size(), y.size(),
           w.size() + (b ? b->size() : 0));
  return y;
}

template <typename S>
void transposed_conv1d_backward(const FeatureSequence<S>& x, const Vector<S>& w, const FeatureSequence<S>& gy,
                                int cout, int kernel, int stride, NoDeduce<FeatureSequence<S>>* gx,
                                NoDeduce<Vector<S>>* gw, NoDeduce<Vector<S>>* gb) {
  const Eigen::Index cin = x.rows();
  const Eigen::Index tin = x.cols();
  const Eigen::Index tout = gy.cols();
  for (int j = 0; j < kernel; ++j) {
    const detail::StridedMat<S> gyj(gy.data() + j, cout, tin,
                                    Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(tout, stride));
    if (gx) {
      const detail::StridedMat<S> wj(w.data() + j, cin, cout,
                                     Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(cout * kernel, kernel));
      gx->noalias() += wj * gyj;
    }
    if (gw) {
      detail::MutStridedMat<S> gwj(gw->data() + j, cin, cout,
                                   Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(cout * kernel, kernel));
      gwj.noalias() += x * gyj.transpose();
    }
  }
  if (gb) *gb += gy.rowwise().sum();
}

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

template <typename S>
struct BatchNormCache {
  FeatureSequence<S> xhat;
  Vector<S> inv_std;
  bool train = true;
};

// Per-channel normalization over the time axis of one sequence.
template <typename S>
FeatureSequence<S> batchnorm_forward(const FeatureSequence<S>& x, const Vector<S>& gamma, const Vector<S>& beta,
                                     Vector<S>& running_mean, Vector<S>& running_var, bool train,
                                     bool update_running, const BatchNormOptions& opt,
                                     NoDeduce<BatchNormCache<S>>* cache) {
  const Eigen::Index c = x.rows();
  const Eigen::Index t = x.cols();
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c || running_var.size() != c)
    throw DimensionError("batchnorm: channel mismatch, input has " + std::to_string(c));
  BatchNormCache<S> local;
  BatchNormCache<S>& bc = cache ? *cache : local;
  bc.train = train;
  if (train) {
    const Vector<S> mean = x.rowwise().mean();
    FeatureSequence<S> centered = x.colwise() - mean;
    const Vector<S> var = centered.array().square().rowwise().sum() / static_cast<S>(t);
    bc.inv_std = (var.array() + static_cast<S>(opt.eps)).rsqrt();
    bc.xhat = centered.array().colwise() * bc.inv_std.array();
    if (update_running) {
      const S m = static_cast<S>(opt.momentum);
      const S unbias = t > 1 ? static_cast<S>(t) / static_cast<S>(t - 1) : S(1);
      running_mean = (S(1) - m) * running_mean + m * mean;
      running_var = (S(1) - m) * running_var + m * unbias * var;
    }
  } else {
    bc.inv_std = (running_var.array() + static_cast<S>(opt.eps)).rsqrt();
    bc.xhat = (x.colwise() - running_mean).array().colwise() * bc.inv_std.array();
  }
  FeatureSequence<S> y = (bc.xhat.array().colwise() * gamma.array()).colwise() + beta.array();
  count_op(2ull * x.size(), x.size(), y.size(), 2ull * c);
  return y;
}

template <typename S>
void batchnorm_backward(const FeatureSequence<S>& gy, const Vector<S>& gamma, const BatchNormCache<S>& bc,
                        NoDeduce<FeatureSequence<S>>* gx, NoDeduce<Vector<S>>* ggamma, NoDeduce<Vector<S>>* gbeta) {
  const Vector<S> sum_g = gy.rowwise().sum();
  const Vector<S> sum_gx = (gy.array() * bc.xhat.array()).rowwise().sum();
  if (ggamma) *ggamma += sum_gx;
  if (gbeta) *gbeta += sum_g;
  if (!gx) return;
  const Vector<S> scale = gamma.array() * bc.inv_std.array();
  if (bc.train) {
    const S inv_t = S(1) / static_cast<S>(gy.cols());
    FeatureSequence<S> inner = (gy.colwise() - sum_g * inv_t);
    inner -= (bc.xhat.array().colwise() * (sum_gx * inv_t).array()).matrix();
    *gx += (inner.array().colwise() * scale.array()).matrix();
  } else {
    *gx += (gy.array().colwise() * scale.array()).matrix();
  }
}

template <typename S>
FeatureSequence<S> relu_forward(const FeatureSequence<S>& x) {
  FeatureSequence<S> y = x.cwiseMax(S(0));
  count_op(static_cast<std::uint64_t>(x.size()), x.size(), y.size(), 0);
  return y;
}

// Uses the output to mask: y > 0 exactly where x > 0.
template <typename S>
void relu_backward(const FeatureSequence<S>& y, const FeatureSequence<S>& gy, FeatureSequence<S>& gx) {
  gx += (y.array() > S(0)).select(gy, S(0)).matrix();
}

template <typename S>
FeatureSequence<S> add_forward(const FeatureSequence<S>& a, const FeatureSequence<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("add: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
  FeatureSequence<S> y = a + b;
  count_op(static_cast<std::uint64_t>(y.size()), a.size() + b.size(), y.size(), 0);
  return y;
}

template <typename S>
FeatureSequence<S> repeat_upsample(const FeatureSequence<S>& x, int n) {
  if (n < 1) throw ArgumentError("repeat_upsample: factor must be >= 1");
  FeatureSequence<S> y(x.rows(), x.cols() * n);
  for (Eigen::Index t = 0; t < y.cols(); ++t) y.col(t) = x.col(t / n);
  return y;
}

template <typename S>
void repeat_upsample_backward(const FeatureSequence<S>& gy, int n, FeatureSequence<S>& gx) {
  for (Eigen::Index t = 0; t < gy.cols(); ++t) gx.col(t / n) += gy.col(t);
}

// Per-frame affine map; each frame is computed independently so results do
// not depend on sequence length or frame order.
template <typename S>
FeatureSequence<S> pointwise_forward(const FeatureSequence<S>& x, const Vector<S>& w, const Vector<S>& b, int cout) {
  const Eigen::Index cin = x.rows();
  if (w.size() != cin * cout || b.size() != cout)
    throw DimensionError("pointwise: weight shape does not match " + std::to_string(cin) + "->" +
                         std::to_string(cout));
  const detail::RowMap<S> wm(w.data(), cout, cin);
  FeatureSequence<S> y(cout, x.cols());
  Vector<S> frame(cin);
  Vector<S> out(cout);
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    frame = x.col(t);
    out.noalias() = wm * frame;
    y.col(t) = out + b;
  }
  count_op(2ull * cin * cout * x.cols() + cout * x.cols(), x.size(), y.size(), w.size() + b.size());
  return y;
}

template <typename S>
void pointwise_backward(const FeatureSequence<S>& x, const Vector<S>& w, const FeatureSequence<S>& gy, int cout,
                        NoDeduce<FeatureSequence<S>>* gx, NoDeduce<Vector<S>>* gw, NoDeduce<Vector<S>>* gb) {
  const Eigen::Index cin = x.rows();
  if (gw) {
    detail::MutRowMap<S> gwm(gw->data(), cout, cin);
    gwm.noalias() += gy * x.transpose();
  }
  if (gb) *gb += gy.rowwise().sum();
  if (gx) {
    const detail::RowMap<S> wm(w.data(), cout, cin);
    gx->noalias() += wm.transpose() * gy;
  }
}

// Normalizes over the channel axis of every frame.
template <typename S>
FeatureSequence<S> log_softmax_forward(const FeatureSequence<S>& x) {
  FeatureSequence<S> y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const S mx = x.col(t).maxCoeff();
    const S lse = mx + std::log((x.col(t).array() - mx).exp().sum());
    y.col(t) = x.col(t).array() - lse;
  }
  count_op(4ull * x.size(), x.size(), y.size(), 0);
  return y;
}

template <typename S>
void log_softmax_backward(const FeatureSequence<S>& y, const FeatureSequence<S>& gy, FeatureSequence<S>& gx) {
  const Eigen::Matrix<S, 1, Eigen::Dynamic> colsum = gy.colwise().sum();
  gx += gy - (y.array().exp().rowwise() * colsum.array()).matrix();
}

}  // namespace tsr::nn
