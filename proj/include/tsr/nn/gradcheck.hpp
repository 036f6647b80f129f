#pragma once

#include "tsr/nn/param.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsr::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Gradients smaller than this in magnitude are compared absolutely.
  double magnitude_floor = 1e-3;
  // 0 checks every element; otherwise at most this many per tensor, evenly spread.
  std::size_t max_per_tensor = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Moves entries within `margin` of zero out to +-margin so that relu kinks
// are not straddled by the finite-difference stencil.
template <typename Derived>
void nudge_away_from_zero(Eigen::MatrixBase<Derived>& x, double margin = 1e-3) {
  using S = typename Derived::Scalar;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (std::abs(x(i, j)) < margin) x(i, j) = x(i, j) < S(0) ? S(-margin) : S(margin);
}

// `loss(bool with_grad)` evaluates the scalar loss; with_grad=true must also
// run backward so that param grads hold dloss/dparam. Only params with
// requires_grad() are checked. Central differences, 64-bit.
template <typename LossFn>
GradCheckReport grad_check(ParamSet<double>& params, LossFn&& loss, const GradCheckOptions& opt = {}) {
  params.zero_grad();
  loss(true);
  GradCheckReport report;
  params.for_each([&](Param<double>& p) {
    if (!p.requires_grad()) return;
    const auto n = static_cast<std::size_t>(p.value.size());
    const std::size_t stride = (opt.max_per_tensor == 0 || n <= opt.max_per_tensor) ? 1 : n / opt.max_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const auto k = static_cast<Eigen::Index>(i);
      const double orig = p.value[k];
      p.value[k] = orig + opt.step;
      const double lp = loss(false);
      p.value[k] = orig - opt.step;
      const double lm = loss(false);
      p.value[k] = orig;
      const double numeric = (lp - lm) / (2.0 * opt.step);
      const double analytic = p.grad[k];
      const double err = relative_error(analytic, numeric, opt.magnitude_floor);
      ++report.checked;
      if (err > report.max_rel_error || report.worst_param.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        if (err >= report.max_rel_error) {
          report.worst_param = p.name;
          report.worst_index = i;
          report.worst_analytic = analytic;
          report.worst_numeric = numeric;
        }
      }
    }
  });
  params.zero_grad();
  return report;
}

}  // namespace tsr::nn
