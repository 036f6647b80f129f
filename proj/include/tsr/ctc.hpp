#pragma once

// CTC over a T x (|V|+1) log-probability lattice with the blank in column 0.

#include "tsr/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace tsr::ctc {

class InfeasibleLabelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Merge adjacent repeats, then drop blanks.
inline GlossSequence collapse(const std::vector<int>& path) {
  GlossSequence out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != kBlank) out.push_back(s);
    prev = s;
  }
  return out;
}

// Minimum number of frames that can emit `label`.
inline std::size_t min_frames(const GlossSequence& label) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < label.size(); ++i)
    if (label[i] == label[i - 1]) ++repeats;
  return label.size() + repeats;
}

template <typename S>
void check_label(const LogProbLattice<S>& lp, const GlossSequence& label) {
  for (int s : label)
    if (s <= kBlank || s >= lp.cols())
      throw ArgumentError("ctc: label id " + std::to_string(s) + " outside 1.." + std::to_string(lp.cols() - 1));
}

template <typename S>
struct LossResult {
  double loss = 0.0;
  // d loss / d logp, same shape as the lattice.
  LogProbLattice<S> grad;
};

// Negative log-likelihood of `label` by the forward-backward recursion over
// the blank-interleaved label, in log space.
template <typename S>
LossResult<S> loss(const LogProbLattice<S>& lp, const GlossSequence& label) {
  check_label(lp, label);
  const Eigen::Index t_len = lp.rows();
  if (t_len < 1) throw DimensionError("ctc: empty lattice");
  if (static_cast<std::size_t>(t_len) < min_frames(label))
    throw InfeasibleLabelError("ctc: label of length " + std::to_string(label.size()) + " needs at least " +
                               std::to_string(min_frames(label)) + " frames, lattice has " +
                               std::to_string(t_len));
  const Eigen::Index s_len = 2 * static_cast<Eigen::Index>(label.size()) + 1;
  std::vector<int> ext(static_cast<std::size_t>(s_len), kBlank);
  for (std::size_t i = 0; i < label.size(); ++i) ext[2 * i + 1] = label[i];

  auto y = [&](Eigen::Index t, Eigen::Index s) { return static_cast<double>(lp(t, ext[static_cast<std::size_t>(s)])); };
  auto can_skip = [&](Eigen::Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != kBlank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };

  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(t_len, s_len, kNegInf);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(t_len, s_len, kNegInf);
  alpha(0, 0) = y(0, 0);
  if (s_len > 1) alpha(0, 1) = y(0, 1);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (Eigen::Index s = 0; s < s_len; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + y(t, s);
    }
  }
  beta(t_len - 1, s_len - 1) = y(t_len - 1, s_len - 1);
  if (s_len > 1) beta(t_len - 1, s_len - 2) = y(t_len - 1, s_len - 2);
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < s_len; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < s_len) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < s_len && can_skip(s + 2)) b = log_add(b, beta(t + 1, s + 2));
      beta(t, s) = b == kNegInf ? kNegInf : b + y(t, s);
    }
  }

  double log_p = alpha(t_len - 1, s_len - 1);
  if (s_len > 1) log_p = log_add(log_p, alpha(t_len - 1, s_len - 2));

  LossResult<S> r;
  r.loss = -log_p;
  r.grad = LogProbLattice<S>::Zero(lp.rows(), lp.cols());
  if (log_p == kNegInf) return r;
  std::vector<double> acc(static_cast<std::size_t>(lp.cols()));
  for (Eigen::Index t = 0; t < t_len; ++t) {
    std::fill(acc.begin(), acc.end(), kNegInf);
    for (Eigen::Index s = 0; s < s_len; ++s) {
      auto& a = acc[static_cast<std::size_t>(ext[static_cast<std::size_t>(s)])];
      a = log_add(a, alpha(t, s) + beta(t, s));
    }
    for (Eigen::Index k = 0; k < lp.cols(); ++k) {
      const double a = acc[static_cast<std::size_t>(k)];
      if (a == kNegInf) continue;
      r.grad(t, k) = static_cast<S>(-std::exp(a - static_cast<double>(lp(t, k)) - log_p));
    }
  }
  return r;
}

namespace detail {

template <typename S>
void check_enumerable(const LogProbLattice<S>& lp) {
  double paths = 1.0;
  for (Eigen::Index t = 0; t < lp.rows(); ++t) paths *= static_cast<double>(lp.cols());
  if (paths > 1e6) throw SizeError("ctc: brute force over more than 1e6 paths");
}

// Calls f(path, prob) for every frame path.
template <typename S, typename F>
void for_each_path(const LogProbLattice<S>& lp, F&& f) {
  check_enumerable(lp);
  const auto t_len = static_cast<std::size_t>(lp.rows());
  const int k = static_cast<int>(lp.cols());
  std::vector<int> path(t_len, 0);
  while (true) {
    double p = 1.0;
    for (std::size_t t = 0; t < t_len; ++t) p *= std::exp(static_cast<double>(lp(static_cast<Eigen::Index>(t), path[t])));
    f(path, p);
    std::size_t pos = 0;
    while (pos < t_len && ++path[pos] == k) path[pos++] = 0;
    if (pos == t_len) break;
  }
}

}  // namespace detail

// Sum of path probabilities over every path collapsing to `label`.
template <typename S>
double brute_force_prob(const LogProbLattice<S>& lp, const GlossSequence& label) {
  double total = 0.0;
  detail::for_each_path(lp, [&](const std::vector<int>& path, double p) {
    if (collapse(path) == label) total += p;
  });
  return total;
}

template <typename S>
std::map<GlossSequence, double> brute_force_distribution(const LogProbLattice<S>& lp) {
  std::map<GlossSequence, double> dist;
  detail::for_each_path(lp, [&](const std::vector<int>& path, double p) { dist[collapse(path)] += p; });
  return dist;
}

// Per-frame argmax (lowest index on ties), then collapse.
template <typename S>
GlossSequence greedy_decode(const LogProbLattice<S>& lp) {
  std::vector<int> path(static_cast<std::size_t>(lp.rows()));
  for (Eigen::Index t = 0; t < lp.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < lp.cols(); ++k)
      if (lp(t, k) > lp(t, best)) best = k;
    path[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return collapse(path);
}

// log P(label | lattice) by the forward recursion alone; -inf when the
// label cannot be emitted in lp.rows() frames.
template <typename S>
double log_prob(const LogProbLattice<S>& lp, const GlossSequence& label) {
  check_label(lp, label);
  const Eigen::Index t_len = lp.rows();
  if (t_len < 1) throw DimensionError("ctc: empty lattice");
  if (static_cast<std::size_t>(t_len) < min_frames(label)) return kNegInf;
  const std::size_t s_len = 2 * label.size() + 1;
  std::vector<int> ext(s_len, kBlank);
  for (std::size_t i = 0; i < label.size(); ++i) ext[2 * i + 1] = label[i];
  std::vector<double> alpha(s_len, kNegInf), next(s_len);
  alpha[0] = static_cast<double>(lp(0, kBlank));
  if (s_len > 1) alpha[1] = static_cast<double>(lp(0, ext[1]));
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (std::size_t s = 0; s < s_len; ++s) {
      double a = alpha[s];
      if (s >= 1) a = log_add(a, alpha[s - 1]);
      if (s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]) a = log_add(a, alpha[s - 2]);
      next[s] = a == kNegInf ? kNegInf : a + static_cast<double>(lp(t, ext[s]));
    }
    std::swap(alpha, next);
  }
  return s_len > 1 ? log_add(alpha[s_len - 1], alpha[s_len - 2]) : alpha[0];
}

namespace detail {

struct PrefixScore {
  double blank = kNegInf;
  double nonblank = kNegInf;
  double total() const { return log_add(blank, nonblank); }
};

// Higher score first; ties go to the shorter, then lexicographically smaller prefix.
inline bool ranks_before(const std::pair<GlossSequence, PrefixScore>& a,
                         const std::pair<GlossSequence, PrefixScore>& b) {
  const double sa = a.second.total();
  const double sb = b.second.total();
  if (sa != sb) return sa > sb;
  if (a.first.size() != b.first.size()) return a.first.size() < b.first.size();
  return a.first < b.first;
}

}  // namespace detail

// CTC prefix beam search scoring pure labeling probability. Prefix scores
// lose the mass of paths whose prefix was pruned earlier, so the surviving
// prefixes and the best-path labeling are rescored exactly at the end.
template <typename S>
GlossSequence beam_decode(const LogProbLattice<S>& lp, std::size_t width = 10) {
  if (width < 1) throw ArgumentError("beam_decode: width must be >= 1");
  if (lp.rows() == 0) return {};
  using Entry = std::pair<GlossSequence, detail::PrefixScore>;
  std::vector<Entry> beam{{GlossSequence{}, detail::PrefixScore{0.0, kNegInf}}};
  const int vocab = static_cast<int>(lp.cols());
  for (Eigen::Index t = 0; t < lp.rows(); ++t) {
    std::map<GlossSequence, detail::PrefixScore> next;
    for (const auto& [prefix, score] : beam) {
      const double total = score.total();
      auto& stay = next[prefix];
      stay.blank = log_add(stay.blank, total + static_cast<double>(lp(t, kBlank)));
      for (int c = 1; c < vocab; ++c) {
        const double p = static_cast<double>(lp(t, c));
        GlossSequence extended = prefix;
        extended.push_back(c);
        if (!prefix.empty() && prefix.back() == c) {
          auto& same = next[prefix];
          same.nonblank = log_add(same.nonblank, score.nonblank + p);
          auto& ext = next[extended];
          ext.nonblank = log_add(ext.nonblank, score.blank + p);
        } else {
          auto& ext = next[extended];
          ext.nonblank = log_add(ext.nonblank, total + p);
        }
      }
    }
    std::vector<Entry> ranked(next.begin(), next.end());
    const std::size_t keep = std::min(width, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                      detail::ranks_before);
    ranked.resize(keep);
    beam = std::move(ranked);
  }
  std::vector<Entry> finals;
  finals.reserve(beam.size() + 1);
  for (const auto& [prefix, score] : beam) finals.push_back({prefix, {log_prob(lp, prefix), kNegInf}});
  auto greedy = greedy_decode(lp);
  if (std::none_of(finals.begin(), finals.end(), [&](const Entry& e) { return e.first == greedy; }))
    finals.push_back({greedy, {log_prob(lp, greedy), kNegInf}});
  return std::min_element(finals.begin(), finals.end(), detail::ranks_before)->first;
}

}  // namespace tsr::ctc
