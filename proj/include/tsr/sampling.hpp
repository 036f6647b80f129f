#pragma once

#include "tsr/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace tsr::sampling {

enum class Method { kEqual, kProportionalRandom, kRandom };
enum class Interp { kNearest, kLinear };

inline Method parse_method(const std::string& s) {
  if (s == "equal") return Method::kEqual;
  if (s == "proportional_random") return Method::kProportionalRandom;
  if (s == "random") return Method::kRandom;
  throw ArgumentError("unknown sampling method: " + s);
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kEqual: return "equal";
    case Method::kProportionalRandom: return "proportional_random";
    case Method::kRandom: return "random";
  }
  return "?";
}

inline Interp parse_interp(const std::string& s) {
  if (s == "nearest") return Interp::kNearest;
  if (s == "linear") return Interp::kLinear;
  throw ArgumentError("unknown interpolation method: " + s);
}

inline std::string to_string(Interp m) { return m == Interp::kNearest ? "nearest" : "linear"; }

// Length after right-padding to the next multiple of n.
inline Eigen::Index padded_length(Eigen::Index t, int n) { return (t + n - 1) / n * n; }

// Indices into the padded sequence; positions >= T refer to the repeated final frame.
inline std::vector<Eigen::Index> sample_indices(Eigen::Index t, int n, Method method, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("downsample: factor must be >= 1, got " + std::to_string(n));
  if (t < 1) throw ArgumentError("downsample: empty sequence");
  const Eigen::Index tp = padded_length(t, n);
  const Eigen::Index segments = tp / n;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(segments));
  std::mt19937_64 rng(seed);
  switch (method) {
    case Method::kEqual:
      for (Eigen::Index s = 0; s < segments; ++s) idx[static_cast<std::size_t>(s)] = s * n;
      break;
    case Method::kProportionalRandom: {
      std::uniform_int_distribution<int> offset(0, n - 1);
      for (Eigen::Index s = 0; s < segments; ++s) idx[static_cast<std::size_t>(s)] = s * n + offset(rng);
      break;
    }
    case Method::kRandom: {
      std::vector<Eigen::Index> all(static_cast<std::size_t>(tp));
      std::iota(all.begin(), all.end(), Eigen::Index{0});
      for (Eigen::Index s = 0; s < segments; ++s) {
        std::uniform_int_distribution<Eigen::Index> pick(s, tp - 1);
        std::swap(all[static_cast<std::size_t>(s)], all[static_cast<std::size_t>(pick(rng))]);
      }
      std::copy(all.begin(), all.begin() + segments, idx.begin());
      std::sort(idx.begin(), idx.end());
      break;
    }
  }
  return idx;
}

template <typename S>
FeatureSequence<S> gather(const FeatureSequence<S>& seq, const std::vector<Eigen::Index>& idx) {
  FeatureSequence<S> out(seq.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = seq.col(std::min(idx[k], seq.cols() - 1));
  return out;
}

// Source indices clamped into the unpadded sequence.
inline std::vector<Eigen::Index> clamp_indices(std::vector<Eigen::Index> idx, Eigen::Index t) {
  for (auto& i : idx) i = std::min(i, t - 1);
  return idx;
}

template <typename S>
struct Downsampled {
  FeatureSequence<S> sparse;
  std::vector<Eigen::Index> indices;
  Eigen::Index original_length = 0;
};

template <typename S>
Downsampled<S> downsample(const FeatureSequence<S>& seq, int n, Method method, std::uint64_t seed) {
  Downsampled<S> d;
  d.indices = sample_indices(seq.cols(), n, method, seed);
  d.sparse = gather(seq, d.indices);
  d.original_length = seq.cols();
  return d;
}

template <typename S>
FeatureSequence<S> interp_upsample(const FeatureSequence<S>& seq, int n, Interp method) {
  if (n < 1) throw ArgumentError("interp_upsample: factor must be >= 1");
  const Eigen::Index t1 = seq.cols();
  FeatureSequence<S> out(seq.rows(), t1 * n);
  for (Eigen::Index t = 0; t < out.cols(); ++t) {
    if (method == Interp::kNearest) {
      out.col(t) = seq.col(t / n);
      continue;
    }
    // Half-sample-offset mapping, clamped at both edges.
    double src = (static_cast<double>(t) + 0.5) / n - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(t1 - 1));
    const auto i0 = static_cast<Eigen::Index>(std::floor(src));
    const Eigen::Index i1 = std::min(i0 + 1, t1 - 1);
    const S w = static_cast<S>(src - static_cast<double>(i0));
    out.col(t) = seq.col(i0) + w * (seq.col(i1) - seq.col(i0));
  }
  return out;
}

// Upsample then trim back to the pre-padding length.
template <typename S>
FeatureSequence<S> reconstruct(const FeatureSequence<S>& sparse, int n, Interp method, Eigen::Index length) {
  FeatureSequence<S> dense = interp_upsample(sparse, n, method);
  if (length > dense.cols()) throw DimensionError("reconstruct: target length exceeds upsampled length");
  return dense.leftCols(length);
}

// Nearest-index resampling to length round(T * scale), scale in [0.8, 1.2].
inline std::vector<Eigen::Index> resample_indices(Eigen::Index t, double scale) {
  const auto lo = static_cast<Eigen::Index>(std::ceil(0.8 * static_cast<double>(t)));
  const auto hi = static_cast<Eigen::Index>(std::floor(1.2 * static_cast<double>(t)));
  Eigen::Index t2 = static_cast<Eigen::Index>(std::llround(static_cast<double>(t) * scale));
  t2 = std::max<Eigen::Index>(1, std::clamp(t2, lo, hi));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(t2));
  const double ratio = static_cast<double>(t) / static_cast<double>(t2);
  for (Eigen::Index i = 0; i < t2; ++i) {
    const double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    idx[static_cast<std::size_t>(i)] = std::clamp<Eigen::Index>(std::llround(src), 0, t - 1);
  }
  return idx;
}

template <typename S>
FeatureSequence<S> temporal_augment_with_scale(const FeatureSequence<S>& seq, double scale) {
  if (seq.cols() < 2) throw ArgumentError("temporal_augment: need at least 2 frames");
  return gather(seq, resample_indices(seq.cols(), scale));
}

inline double draw_augment_scale(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(0.8, 1.2)(rng);
}

template <typename S>
FeatureSequence<S> temporal_augment(const FeatureSequence<S>& seq, std::uint64_t seed) {
  return temporal_augment_with_scale(seq, draw_augment_scale(seed));
}

}  // namespace tsr::sampling
