#pragma once

#include "tsr/core.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <tuple>
#include <vector>

namespace tsr::metrics {

struct WerResult {
  double wer = 0.0;  // percent
  int ins = 0;
  int del = 0;
  int sub = 0;

  int errors() const { return ins + del + sub; }
};

// Unit-cost Levenshtein alignment. Among minimum-cost alignments the one with
// fewest substitutions, then fewest insertions, is reported.
inline WerResult wer(const GlossSequence& hyp, const GlossSequence& ref) {
  if (ref.empty()) throw ArgumentError("wer: empty reference");
  // (cost, sub, ins) compared lexicographically; del = cost - sub - ins.
  using Cell = std::tuple<int, int, int>;
  const std::size_t h = hyp.size();
  const std::size_t r = ref.size();
  std::vector<std::vector<Cell>> d(r + 1, std::vector<Cell>(h + 1));
  for (std::size_t i = 0; i <= r; ++i) d[i][0] = {static_cast<int>(i), 0, 0};
  for (std::size_t j = 0; j <= h; ++j) d[0][j] = {static_cast<int>(j), 0, static_cast<int>(j)};
  auto plus = [](Cell c, int dc, int ds, int di) {
    return Cell{std::get<0>(c) + dc, std::get<1>(c) + ds, std::get<2>(c) + di};
  };
  for (std::size_t i = 1; i <= r; ++i) {
    for (std::size_t j = 1; j <= h; ++j) {
      const bool match = ref[i - 1] == hyp[j - 1];
      Cell best = plus(d[i - 1][j - 1], match ? 0 : 1, match ? 0 : 1, 0);
      best = std::min(best, plus(d[i - 1][j], 1, 0, 0));  // deletion
      best = std::min(best, plus(d[i][j - 1], 1, 0, 1));  // insertion
      d[i][j] = best;
    }
  }
  const auto [cost, sub, ins] = d[r][h];
  WerResult out;
  out.sub = sub;
  out.ins = ins;
  out.del = cost - sub - ins;
  out.wer = 100.0 * cost / static_cast<double>(r);
  return out;
}

// Inputs and output in percentage points; unclamped.
inline double werd(double wer_estimated, double wer_reference) {
  const double q = std::pow(1.1, -(wer_estimated - wer_reference));
  return 100.0 * (1.0 - q) / (1.0 + q);
}

class DegenerateFrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cosine similarity between every pair of frames.
template <typename S>
Eigen::MatrixXd autocorrelation_matrix(const FeatureSequence<S>& f) {
  const Eigen::MatrixXd x = f.template cast<double>();
  Eigen::VectorXd norms = x.colwise().norm().transpose();
  for (Eigen::Index t = 0; t < norms.size(); ++t)
    if (!(norms[t] > 0.0)) throw DegenerateFrameError("autocorrelation: frame " + std::to_string(t) + " has zero norm");
  Eigen::MatrixXd unit = x.array().rowwise() / norms.transpose().array();
  Eigen::MatrixXd m = unit.transpose() * unit;
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) = 1.0;
  return (m + m.transpose()) * 0.5;
}

// Mean of M[i][j] over pairs with |i - j| in [lo, hi].
inline double mean_at_lag(const Eigen::MatrixXd& m, Eigen::Index lo, Eigen::Index hi) {
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const Eigen::Index lag = i > j ? i - j : j - i;
      if (lag >= lo && lag <= hi) {
        sum += m(i, j);
        ++count;
      }
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

// Row-major CSV, 6 significant digits.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  os << std::setprecision(6);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
}

}  // namespace tsr::metrics
