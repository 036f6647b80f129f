#pragma once

// The recognizer that TSRNet plugs into: a per-frame encoder followed by a
// convolutional temporal head producing per-frame gloss log-probabilities.

#include "tsr/ctc.hpp"
#include "tsr/nn/layers.hpp"
#include "tsr/sampling.hpp"
#include "tsr/tsrnet.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tsr {

struct EncoderConfig {
  int c0 = 64;
  int hidden = 128;
  int c1 = 512;
};

// Maps every frame independently: relu(W2 relu(W1 x + b1) + b2).
// The output relu keeps features non-negative like pooled CNN features.
template <typename S>
class FrameEncoder {
 public:
  FrameEncoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.c0 < 1 || cfg.hidden < 1 || cfg.c1 < 1) throw ArgumentError("encoder: dimensions must be >= 1");
    std::mt19937_64 rng(seed);
    l1_ = nn::Pointwise<S>::create(params_, "encoder.fc1", cfg.c0, cfg.hidden, rng);
    l2_ = nn::Pointwise<S>::create(params_, "encoder.fc2", cfg.hidden, cfg.c1, rng);
  }
  FrameEncoder(FrameEncoder&&) noexcept = default;

  const EncoderConfig& config() const { return cfg_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }

  nn::Var<S> forward(nn::Tape<S>& tape, nn::Var<S> raw) const {
    auto h = nn::relu(tape, l1_.forward(tape, raw));
    return nn::relu(tape, l2_.forward(tape, h));
  }

  FeatureSequence<S> apply(const RawSequence<S>& raw) const {
    nn::Tape<S> tape(false);
    return tape.value(forward(tape, tape.leaf(raw)));
  }

  // Sets both layers to identity maps (requires c0 == hidden == c1).
  void set_identity() {
    if (cfg_.c0 != cfg_.hidden || cfg_.hidden != cfg_.c1) throw DimensionError("encoder: identity needs equal widths");
    for (auto* l : {&l1_, &l2_}) {
      nn::detail::MutRowMap<S>(l->weight->value.data(), l->cout, l->cin).setIdentity();
      l->bias->value.setZero();
    }
  }

 private:
  EncoderConfig cfg_;
  nn::ParamSet<S> params_;
  nn::Pointwise<S> l1_;
  nn::Pointwise<S> l2_;
};

enum class HeadVariant { kSmall, kLarge };

inline HeadVariant parse_head_variant(const std::string& s) {
  if (s == "tconv-small") return HeadVariant::kSmall;
  if (s == "tconv-large") return HeadVariant::kLarge;
  throw ArgumentError("unknown head variant: " + s);
}

inline std::string to_string(HeadVariant v) { return v == HeadVariant::kSmall ? "tconv-small" : "tconv-large"; }

struct HeadConfig {
  HeadVariant variant = HeadVariant::kSmall;
  int vocab_size = 20;
  int hidden = 512;
  int kernel = 5;

  int layers() const { return variant == HeadVariant::kSmall ? 2 : 4; }
};

// (conv K + BN + relu) x layers, 1x1 projection to |V|+1, log-softmax.
template <typename S>
class TemporalHead {
 public:
  TemporalHead(const HeadConfig& cfg, int in_channels, std::uint64_t seed) : cfg_(cfg), in_channels_(in_channels) {
    if (cfg.vocab_size < 1) throw ArgumentError("head: vocab_size must be >= 1");
    if (cfg.kernel < 1 || cfg.kernel % 2 == 0) throw ArgumentError("head: kernel must be odd");
    std::mt19937_64 rng(seed);
    int c = in_channels;
    for (int i = 0; i < cfg.layers(); ++i) {
      const std::string name = "head.conv" + std::to_string(i);
      convs_.push_back(nn::Conv1d<S>::create(params_, name, c, cfg.hidden, {cfg.kernel, 1, cfg.kernel / 2, 1}, rng));
      bns_.push_back(nn::BatchNorm1d<S>::create(params_, "head.bn" + std::to_string(i), cfg.hidden));
      c = cfg.hidden;
    }
    proj_ = nn::Pointwise<S>::create(params_, "head.proj", c, cfg.vocab_size + 1, rng);
  }
  TemporalHead(TemporalHead&&) noexcept = default;

  const HeadConfig& config() const { return cfg_; }
  int in_channels() const { return in_channels_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }

  // (|V|+1) x T log-probabilities.
  nn::Var<S> forward(nn::Tape<S>& tape, nn::Var<S> f, nn::Mode mode) const {
    if (tape.value(f).rows() != in_channels_)
      throw DimensionError("head: expected " + std::to_string(in_channels_) + " channels, got " +
                           std::to_string(tape.value(f).rows()));
    auto h = f;
    for (std::size_t i = 0; i < convs_.size(); ++i)
      h = nn::relu(tape, bns_[i].forward(tape, convs_[i].forward(tape, h), mode));
    return nn::log_softmax(tape, proj_.forward(tape, h));
  }

  LogProbLattice<S> apply(const FeatureSequence<S>& f, nn::Mode mode = nn::Mode::kEval) const {
    nn::Tape<S> tape(false);
    return tape.value(forward(tape, tape.leaf(f), mode)).transpose();
  }

  void zero_projection() {
    proj_.weight->value.setZero();
    proj_.bias->value.setZero();
  }

 private:
  HeadConfig cfg_;
  int in_channels_;
  nn::ParamSet<S> params_;
  std::vector<nn::Conv1d<S>> convs_;
  std::vector<nn::BatchNorm1d<S>> bns_;
  nn::Pointwise<S> proj_;
};

// How a sparse feature sequence is brought back to full frame rate.
enum class Reconstructor { kTsrNet, kNearest, kLinear };

inline Reconstructor parse_reconstructor(const std::string& s) {
  if (s == "tsrnet") return Reconstructor::kTsrNet;
  if (s == "nearest") return Reconstructor::kNearest;
  if (s == "linear") return Reconstructor::kLinear;
  throw ArgumentError("unknown reconstructor: " + s);
}

inline std::string to_string(Reconstructor r) {
  switch (r) {
    case Reconstructor::kTsrNet: return "tsrnet";
    case Reconstructor::kNearest: return "nearest";
    case Reconstructor::kLinear: return "linear";
  }
  return "?";
}

// Test-time path: downsample raw frames (equal spacing), encode the kept
// frames, reconstruct to full length, run the head. Factor 1 skips the
// reconstructor entirely.
template <typename S>
LogProbLattice<S> recognize_lattice(const RawSequence<S>& raw, const FrameEncoder<S>& encoder,
                                    const TemporalHead<S>& head, int factor, Reconstructor rec,
                                    const nn::NoDeduce<TsrNet<S>>* tsr) {
  if (factor < 1) throw ArgumentError("recognize: factor must be >= 1");
  if (factor == 1) return head.apply(encoder.apply(raw));
  const auto idx = sampling::sample_indices(raw.cols(), factor, sampling::Method::kEqual, 0);
  const FeatureSequence<S> sparse = encoder.apply(sampling::gather(raw, idx));
  FeatureSequence<S> dense;
  if (rec == Reconstructor::kTsrNet) {
    if (!tsr) throw ConfigError("recognize: tsrnet reconstructor requested without a trained TSRNet");
    if (tsr->config().n != factor)
      throw ConfigError("recognize: TSRNet trained for factor " + std::to_string(tsr->config().n) +
                        ", requested " + std::to_string(factor));
    dense = tsr->apply(sparse, nn::Mode::kEval).leftCols(raw.cols());
  } else {
    dense = sampling::reconstruct(sparse, factor,
                                  rec == Reconstructor::kNearest ? sampling::Interp::kNearest : sampling::Interp::kLinear,
                                  raw.cols());
  }
  return head.apply(dense);
}

template <typename S>
GlossSequence recognize(const RawSequence<S>& raw, const FrameEncoder<S>& encoder, const TemporalHead<S>& head,
                        int factor, Reconstructor rec, const nn::NoDeduce<TsrNet<S>>* tsr, std::size_t beam_width = 10) {
  return ctc::beam_decode(recognize_lattice(raw, encoder, head, factor, rec, tsr), beam_width);
}

}  // namespace tsr
