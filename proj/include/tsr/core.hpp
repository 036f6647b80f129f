#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsr {

// Channels x time, each channel row contiguous in time.
template <typename S>
using FeatureSequence = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raw per-frame observations share the feature layout (c0 x T).
template <typename S>
using RawSequence = FeatureSequence<S>;

// T x (|V|+1) per-frame log-probabilities, blank in column 0.
template <typename S>
using LogProbLattice = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Vocabulary ids in 1..|V|; the blank (0) never appears.
using GlossSequence = std::vector<int>;

inline constexpr int kBlank = 0;

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename To, typename From>
FeatureSequence<To> cast_sequence(const FeatureSequence<From>& x) {
  return x.template cast<To>();
}

}  // namespace tsr
