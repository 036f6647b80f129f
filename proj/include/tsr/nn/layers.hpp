#pragma once

#include "tsr/nn/kernels.hpp"
#include "tsr/nn/param.hpp"
#include "tsr/nn/tape.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace tsr::nn {

enum class Mode { kTrain, kEval };

template <typename S>
using Var = typename Tape<S>::Var;

template <typename S>
struct Conv1d {
  Param<S>* weight = nullptr;
  Param<S>* bias = nullptr;
  int cin = 0;
  int cout = 0;
  ConvSpec spec;

  static Conv1d create(ParamSet<S>& ps, const std::string& name, int cin, int cout, ConvSpec spec,
                       std::mt19937_64& rng, bool with_bias = true) {
    if (spec.groups < 1 || cin % spec.groups || cout % spec.groups)
      throw DimensionError(name + ": channels not divisible by groups");
    Conv1d c;
    c.cin = cin;
    c.cout = cout;
    c.spec = spec;
    c.weight = &ps.add(name + ".weight", {static_cast<std::uint32_t>(cout),
                                          static_cast<std::uint32_t>(cin / spec.groups),
                                          static_cast<std::uint32_t>(spec.kernel)});
    init_uniform_fan_in(*c.weight, static_cast<std::size_t>(cin / spec.groups) * spec.kernel, rng);
    if (with_bias) c.bias = &ps.add(name + ".bias", {static_cast<std::uint32_t>(cout)});
    return c;
  }

  std::size_t num_params() const { return weight->size() + (bias ? bias->size() : 0); }

  FeatureSequence<S> apply(const FeatureSequence<S>& x) const {
    check_input(x);
    return conv1d_forward(x, weight->value, bias ? &bias->value : nullptr, cout, spec);
  }

  Var<S> forward(Tape<S>& tape, Var<S> x) const {
    const std::size_t in = x.id;
    auto y = apply(tape.value(x));
    return tape.record(std::move(y), [self = *this, in](Tape<S>& t, std::size_t out) {
      const bool gp = self.weight->requires_grad();
      const bool gb = self.bias && self.bias->requires_grad();
      conv1d_backward(t.value(in), self.weight->value, t.grad(out), self.cout, self.spec, &t.grad(in),
                      gp ? &self.weight->grad : nullptr, gb ? &self.bias->grad : nullptr);
    });
  }

 private:
  void check_input(const FeatureSequence<S>& x) const {
    if (x.rows() != cin)
      throw DimensionError("conv1d: expected " + std::to_string(cin) + " input channels, got " +
                           std::to_string(x.rows()));
  }
};

template <typename S>
struct TransposedConv1d {
  Param<S>* weight = nullptr;
  Param<S>* bias = nullptr;
  int cin = 0;
  int cout = 0;
  int kernel = 1;
  int stride = 1;

  static TransposedConv1d create(ParamSet<S>& ps, const std::string& name, int cin, int cout, int kernel,
                                 int stride, std::mt19937_64& rng, bool with_bias = true) {
    TransposedConv1d c;
    c.cin = cin;
    c.cout = cout;
    c.kernel = kernel;
    c.stride = stride;
    c.weight = &ps.add(name + ".weight", {static_cast<std::uint32_t>(cin), static_cast<std::uint32_t>(cout),
                                          static_cast<std::uint32_t>(kernel)});
    const int taps = (kernel + stride - 1) / stride;
    init_uniform_fan_in(*c.weight, static_cast<std::size_t>(cin) * taps, rng);
    if (with_bias) c.bias = &ps.add(name + ".bias", {static_cast<std::uint32_t>(cout)});
    return c;
  }

  std::size_t num_params() const { return weight->size() + (bias ? bias->size() : 0); }

  FeatureSequence<S> apply(const FeatureSequence<S>& x) const {
    if (x.rows() != cin)
      throw DimensionError("transposed_conv1d: expected " + std::to_string(cin) + " input channels, got " +
                           std::to_string(x.rows()));
    return transposed_conv1d_forward(x, weight->value, bias ? &bias->value : nullptr, cout, kernel, stride);
  }

  Var<S> forward(Tape<S>& tape, Var<S> x) const {
    const std::size_t in = x.id;
    auto y = apply(tape.value(x));
    return tape.record(std::move(y), [self = *this, in](Tape<S>& t, std::size_t out) {
      const bool gp = self.weight->requires_grad();
      const bool gb = self.bias && self.bias->requires_grad();
      transposed_conv1d_backward(t.value(in), self.weight->value, t.grad(out), self.cout, self.kernel,
                                 self.stride, &t.grad(in), gp ? &self.weight->grad : nullptr,
                                 gb ? &self.bias->grad : nullptr);
    });
  }
};

template <typename S>
struct BatchNorm1d {
  Param<S>* gamma = nullptr;
  Param<S>* beta = nullptr;
  Param<S>* running_mean = nullptr;
  Param<S>* running_var = nullptr;
  Param<S>* tracked = nullptr;
  int channels = 0;
  BatchNormOptions options;

  static BatchNorm1d create(ParamSet<S>& ps, const std::string& name, int channels) {
    BatchNorm1d bn;
    const auto c = static_cast<std::uint32_t>(channels);
    bn.channels = channels;
    bn.gamma = &ps.add(name + ".gamma", {c});
    bn.gamma->value.setOnes();
    bn.beta = &ps.add(name + ".beta", {c});
    bn.running_mean = &ps.add(name + ".running_mean", {c}, false);
    bn.running_var = &ps.add(name + ".running_var", {c}, false);
    bn.running_var->value.setOnes();
    bn.tracked = &ps.add(name + ".num_batches_tracked", {1}, false);
    return bn;
  }

  std::size_t num_params() const { return gamma->size() + beta->size(); }

  bool initialized() const { return tracked->value[0] > S(0); }

  // Train mode updates running statistics unless they are frozen.
  FeatureSequence<S> apply(const FeatureSequence<S>& x, Mode mode, BatchNormCache<S>* cache = nullptr) const {
    const bool train = mode == Mode::kTrain;
    if (!train && !initialized())
      throw StateError("batchnorm: eval before running statistics were populated");
    const bool update = train && running_mean->trainable;
    auto y = batchnorm_forward(x, gamma->value, beta->value, running_mean->value, running_var->value, train,
                               update, options, cache);
    if (update) tracked->value[0] += S(1);
    return y;
  }

  Var<S> forward(Tape<S>& tape, Var<S> x, Mode mode) const {
    const std::size_t in = x.id;
    auto cache = std::make_shared<BatchNormCache<S>>();
    auto y = apply(tape.value(x), mode, tape.recording() ? cache.get() : nullptr);
    return tape.record(std::move(y), [self = *this, in, cache](Tape<S>& t, std::size_t out) {
      batchnorm_backward(t.grad(out), self.gamma->value, *cache, &t.grad(in),
                         self.gamma->requires_grad() ? &self.gamma->grad : nullptr,
                         self.beta->requires_grad() ? &self.beta->grad : nullptr);
    });
  }
};

// Per-frame affine layer (a 1x1 convolution evaluated frame by frame).
template <typename S>
struct Pointwise {
  Param<S>* weight = nullptr;
  Param<S>* bias = nullptr;
  int cin = 0;
  int cout = 0;

  static Pointwise create(ParamSet<S>& ps, const std::string& name, int cin, int cout, std::mt19937_64& rng) {
    Pointwise l;
    l.cin = cin;
    l.cout = cout;
    l.weight = &ps.add(name + ".weight", {static_cast<std::uint32_t>(cout), static_cast<std::uint32_t>(cin)});
    init_uniform_fan_in(*l.weight, static_cast<std::size_t>(cin), rng);
    l.bias = &ps.add(name + ".bias", {static_cast<std::uint32_t>(cout)});
    return l;
  }

  std::size_t num_params() const { return weight->size() + bias->size(); }

  FeatureSequence<S> apply(const FeatureSequence<S>& x) const {
    if (x.rows() != cin)
      throw DimensionError("pointwise: expected " + std::to_string(cin) + " input channels, got " +
                           std::to_string(x.rows()));
    return pointwise_forward(x, weight->value, bias->value, cout);
  }

  Var<S> forward(Tape<S>& tape, Var<S> x) const {
    const std::size_t in = x.id;
    auto y = apply(tape.value(x));
    return tape.record(std::move(y), [self = *this, in](Tape<S>& t, std::size_t out) {
      pointwise_backward(t.value(in), self.weight->value, t.grad(out), self.cout, &t.grad(in),
                         self.weight->requires_grad() ? &self.weight->grad : nullptr,
                         self.bias->requires_grad() ? &self.bias->grad : nullptr);
    });
  }
};

template <typename S>
Var<S> relu(Tape<S>& tape, Var<S> x) {
  const std::size_t in = x.id;
  auto y = relu_forward(tape.value(x));
  return tape.record(std::move(y), [in](Tape<S>& t, std::size_t out) {
    relu_backward(t.value(out), t.grad(out), t.grad(in));
  });
}

template <typename S>
Var<S> add(Tape<S>& tape, Var<S> a, Var<S> b) {
  const std::size_t ia = a.id;
  const std::size_t ib = b.id;
  auto y = add_forward(tape.value(a), tape.value(b));
  return tape.record(std::move(y), [ia, ib](Tape<S>& t, std::size_t out) {
    t.grad(ia) += t.grad(out);
    t.grad(ib) += t.grad(out);
  });
}

template <typename S>
Var<S> repeat_upsample(Tape<S>& tape, Var<S> x, int n) {
  const std::size_t in = x.id;
  auto y = repeat_upsample(tape.value(x), n);
  return tape.record(std::move(y), [in, n](Tape<S>& t, std::size_t out) {
    repeat_upsample_backward(t.grad(out), n, t.grad(in));
  });
}

// Keeps the first `length` frames.
template <typename S>
Var<S> trim(Tape<S>& tape, Var<S> x, Eigen::Index length) {
  const auto& v = tape.value(x);
  if (length < 1 || length > v.cols()) throw DimensionError("trim: invalid length");
  if (length == v.cols()) return x;
  const std::size_t in = x.id;
  FeatureSequence<S> y = v.leftCols(length);
  return tape.record(std::move(y), [in, length](Tape<S>& t, std::size_t out) {
    t.grad(in).leftCols(length) += t.grad(out);
  });
}

template <typename S>
Var<S> gather_frames(Tape<S>& tape, Var<S> x, const std::vector<Eigen::Index>& idx) {
  const auto& v = tape.value(x);
  FeatureSequence<S> y(v.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= v.cols()) throw DimensionError("gather_frames: index out of range");
    y.col(static_cast<Eigen::Index>(k)) = v.col(idx[k]);
  }
  const std::size_t in = x.id;
  return tape.record(std::move(y), [in, idx](Tape<S>& t, std::size_t out) {
    auto& g = t.grad(in);
    const auto& go = t.grad(out);
    for (std::size_t k = 0; k < idx.size(); ++k) g.col(idx[k]) += go.col(static_cast<Eigen::Index>(k));
  });
}

template <typename S>
Var<S> log_softmax(Tape<S>& tape, Var<S> x) {
  const std::size_t in = x.id;
  auto y = log_softmax_forward(tape.value(x));
  return tape.record(std::move(y), [in](Tape<S>& t, std::size_t out) {
    log_softmax_backward(t.value(out), t.grad(out), t.grad(in));
  });
}

}  // namespace tsr::nn
