#pragma once

// Temporal super-resolution generator. A sparse c1 x T1 feature sequence is
// reconstructed to c1 x (n*T1) as relu(rough + detail), where rough repeats
// each frame n times and detail is
//   raise (conv + BN + relu) -> m resblocks -> transposed conv (x n)
//   -> k resblocks -> reduce (conv + BN).

#include "tsr/nn/layers.hpp"

#include <random>
#include <string>
#include <vector>

namespace tsr {

enum class ResBlockVariant { kA, kB, kC, kD };

inline ResBlockVariant parse_resblock_variant(const std::string& s) {
  if (s == "A" || s == "a") return ResBlockVariant::kA;
  if (s == "B" || s == "b") return ResBlockVariant::kB;
  if (s == "C" || s == "c") return ResBlockVariant::kC;
  if (s == "D" || s == "d") return ResBlockVariant::kD;
  throw ArgumentError("unknown resblock variant: " + s);
}

inline std::string to_string(ResBlockVariant v) {
  switch (v) {
    case ResBlockVariant::kA: return "A";
    case ResBlockVariant::kB: return "B";
    case ResBlockVariant::kC: return "C";
    case ResBlockVariant::kD: return "D";
  }
  return "?";
}

struct TsrConfig {
  int c1 = 512;
  int c2 = 1024;
  int c3 = 1024;
  int m = 2;
  int k = 2;
  int n = 4;
  ResBlockVariant variant = ResBlockVariant::kC;
  int dw_kernel = 3;
  int in_kernel = 1;   // channel-raising conv
  int out_kernel = 3;  // channel-reducing conv
  int up_kernel = 0;   // transposed conv; 0 means n (non-overlapping)
  // Start with the detail branch switched off (final BN gamma = 0), so an
  // untrained TSRNet reproduces nearest-neighbour upsampling.
  bool zero_init_detail = false;

  int upsample_kernel() const { return up_kernel > 0 ? up_kernel : n; }

  void validate() const {
    if (n < 1) throw ArgumentError("tsr: n must be >= 1");
    if (m < 0 || k < 0) throw ArgumentError("tsr: m and k must be >= 0");
    if (c1 < 1 || c2 < 1 || c3 < 1) throw ArgumentError("tsr: channel counts must be >= 1");
    if (dw_kernel < 1 || dw_kernel % 2 == 0) throw ArgumentError("tsr: dw_kernel must be odd");
    if (in_kernel < 1 || in_kernel % 2 == 0 || out_kernel < 1 || out_kernel % 2 == 0)
      throw ArgumentError("tsr: in/out kernels must be odd");
    if (upsample_kernel() < n) throw ArgumentError("tsr: up_kernel must be >= n");
  }
};

// Kernel width of the ordinary convolution in variants A and B.
inline int resblock_full_kernel(ResBlockVariant v) { return v == ResBlockVariant::kA ? 5 : 3; }

inline bool resblock_is_depthwise(ResBlockVariant v) {
  return v == ResBlockVariant::kC || v == ResBlockVariant::kD;
}

// C (default): relu(BN(dwconv(x) + x)).  D: x + relu(BN(dwconv(x))).
// A / B: as C with an ordinary K=5 / K=3 convolution.
template <typename S>
struct ResBlock {
  ResBlockVariant variant = ResBlockVariant::kC;
  nn::Conv1d<S> conv;
  nn::BatchNorm1d<S> bn;

  static ResBlock create(nn::ParamSet<S>& ps, const std::string& name, int channels, ResBlockVariant v,
                         int dw_kernel, std::mt19937_64& rng) {
    ResBlock r;
    r.variant = v;
    nn::ConvSpec spec;
    if (resblock_is_depthwise(v)) {
      spec.kernel = dw_kernel;
      spec.groups = channels;
    } else {
      spec.kernel = resblock_full_kernel(v);
    }
    spec.padding = spec.kernel / 2;
    r.conv = nn::Conv1d<S>::create(ps, name + ".conv", channels, channels, spec, rng);
    r.bn = nn::BatchNorm1d<S>::create(ps, name + ".bn", channels);
    return r;
  }

  nn::Var<S> forward(nn::Tape<S>& tape, nn::Var<S> x, nn::Mode mode) const {
    if (tape.value(x).rows() != conv.cin)
      throw DimensionError("resblock: expected " + std::to_string(conv.cin) + " channels, got " +
                           std::to_string(tape.value(x).rows()));
    auto h = conv.forward(tape, x);
    if (variant == ResBlockVariant::kD) {
      h = nn::relu(tape, bn.forward(tape, h, mode));
      return nn::add(tape, x, h);
    }
    h = nn::add(tape, h, x);
    return nn::relu(tape, bn.forward(tape, h, mode));
  }

  std::size_t num_params() const { return conv.num_params() + bn.num_params(); }
};

template <typename S>
FeatureSequence<S> rough_descriptor(const FeatureSequence<S>& f2, int n) {
  return nn::repeat_upsample(f2, n);
}

template <typename S>
class TsrNet {
 public:
  TsrNet(const TsrConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    nn::ConvSpec in_spec{cfg_.in_kernel, 1, cfg_.in_kernel / 2, 1};
    raise_ = nn::Conv1d<S>::create(params_, "tsr.raise", cfg_.c1, cfg_.c2, in_spec, rng);
    raise_bn_ = nn::BatchNorm1d<S>::create(params_, "tsr.raise_bn", cfg_.c2);
    for (int i = 0; i < cfg_.m; ++i)
      pre_.push_back(ResBlock<S>::create(params_, "tsr.pre" + std::to_string(i), cfg_.c2, cfg_.variant,
                                         cfg_.dw_kernel, rng));
    up_ = nn::TransposedConv1d<S>::create(params_, "tsr.up", cfg_.c2, cfg_.c3, cfg_.upsample_kernel(), cfg_.n, rng);
    for (int i = 0; i < cfg_.k; ++i)
      post_.push_back(ResBlock<S>::create(params_, "tsr.post" + std::to_string(i), cfg_.c3, cfg_.variant,
                                          cfg_.dw_kernel, rng));
    nn::ConvSpec out_spec{cfg_.out_kernel, 1, cfg_.out_kernel / 2, 1};
    reduce_ = nn::Conv1d<S>::create(params_, "tsr.reduce", cfg_.c3, cfg_.c1, out_spec, rng);
    reduce_bn_ = nn::BatchNorm1d<S>::create(params_, "tsr.reduce_bn", cfg_.c1);
    if (cfg_.zero_init_detail) reduce_bn_.gamma->value.setZero();
  }

  TsrNet(TsrNet&&) noexcept = default;

  const TsrConfig& config() const { return cfg_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }
  std::size_t num_params() const { return params_.count_learnable(); }

  // f5 of shape c1 x (n*T1).
  nn::Var<S> detail(nn::Tape<S>& tape, nn::Var<S> f2, nn::Mode mode) const {
    check_input(tape.value(f2));
    const Eigen::Index t1 = tape.value(f2).cols();
    auto h = nn::relu(tape, raise_bn_.forward(tape, raise_.forward(tape, f2), mode));
    for (const auto& b : pre_) h = b.forward(tape, h, mode);
    h = up_.forward(tape, h);
    h = nn::trim(tape, h, t1 * cfg_.n);
    for (const auto& b : post_) h = b.forward(tape, h, mode);
    return reduce_bn_.forward(tape, reduce_.forward(tape, h), mode);
  }

  nn::Var<S> forward(nn::Tape<S>& tape, nn::Var<S> f2, nn::Mode mode) const {
    auto f5 = detail(tape, f2, mode);
    auto f2_dense = nn::repeat_upsample(tape, f2, cfg_.n);
    return nn::relu(tape, nn::add(tape, f2_dense, f5));
  }

  FeatureSequence<S> apply(const FeatureSequence<S>& f2, nn::Mode mode) const {
    nn::Tape<S> tape(false);
    return tape.value(forward(tape, tape.leaf(f2), mode));
  }

  // Zeroes the final normalization affine so the detail branch outputs 0.
  void zero_detail_branch() {
    reduce_bn_.gamma->value.setZero();
    reduce_bn_.beta->value.setZero();
  }

  const nn::Conv1d<S>& reduce_conv() const { return reduce_; }
  const nn::BatchNorm1d<S>& reduce_bn() const { return reduce_bn_; }

 private:
  void check_input(const FeatureSequence<S>& f2) const {
    if (f2.rows() != cfg_.c1)
      throw DimensionError("tsrnet: expected " + std::to_string(cfg_.c1) + " channels, got " +
                           std::to_string(f2.rows()));
  }

  TsrConfig cfg_;
  nn::ParamSet<S> params_;
  nn::Conv1d<S> raise_;
  nn::BatchNorm1d<S> raise_bn_;
  std::vector<ResBlock<S>> pre_;
  nn::TransposedConv1d<S> up_;
  std::vector<ResBlock<S>> post_;
  nn::Conv1d<S> reduce_;
  nn::BatchNorm1d<S> reduce_bn_;
};

}  // namespace tsr
