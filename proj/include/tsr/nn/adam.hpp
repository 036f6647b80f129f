#pragma once

#include "tsr/nn/param.hpp"

#include <cmath>

namespace tsr::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Bias-corrected Adam with decoupled weight decay. Gradients of every
// learnable param are zeroed after the update, frozen ones included.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

  AdamOptions& options() { return opt_; }
  long steps() const { return step_; }

  void step(ParamSet<S>& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    params.for_each([&](Param<S>& p) {
      if (!p.learnable) return;
      if (p.trainable) update(p, bc1, bc2);
      p.grad.setZero();
    });
  }

 private:
  void update(Param<S>& p, double bc1, double bc2) const {
    const S b1 = static_cast<S>(opt_.beta1);
    const S b2 = static_cast<S>(opt_.beta2);
    p.m = b1 * p.m + (S(1) - b1) * p.grad;
    p.v = b2 * p.v + (S(1) - b2) * p.grad.cwiseAbs2();
    if (opt_.weight_decay != 0.0) p.value *= static_cast<S>(1.0 - opt_.lr * opt_.weight_decay);
    const auto mhat = p.m.array() / static_cast<S>(bc1);
    const auto vhat = p.v.array() / static_cast<S>(bc2);
    p.value.array() -= static_cast<S>(opt_.lr) * mhat / (vhat.sqrt() + static_cast<S>(opt_.eps));
  }

  AdamOptions opt_;
  long step_ = 0;
};

}  // namespace tsr::nn
