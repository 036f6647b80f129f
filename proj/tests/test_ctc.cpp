#include "tsr/ctc.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tsr;
using tsr::testing::random_lattice;

namespace {

LogProbLattice<double> from_probs(std::initializer_list<std::initializer_list<double>> rows) {
  LogProbLattice<double> lp(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double p : r) lp(i, j++) = std::log(p);
    ++i;
  }
  return lp;
}

GlossSequence random_label(std::mt19937_64& rng, int v, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> id(1, v);
  GlossSequence s(len(rng));
  for (auto& x : s) x = id(rng);
  return s;
}

}  // namespace

TEST(Collapse, MergesRepeatsBeforeDroppingBlanks) {
  // g=1 r=2 e=3 n=4
  EXPECT_EQ(ctc::collapse({0, 1, 0, 2, 3, 0, 3, 0, 4, 0}), (GlossSequence{1, 2, 3, 3, 4}));
  EXPECT_EQ(ctc::collapse({0, 1, 2, 0, 3, 0, 3, 4, 0}), (GlossSequence{1, 2, 3, 3, 4}));
  EXPECT_EQ(ctc::collapse({0, 0, 0}), GlossSequence{});
  EXPECT_EQ(ctc::collapse({2, 1, 3}), (GlossSequence{2, 1, 3}));
}

TEST(CtcLoss, TwoFrameUniformExample) {
  const auto lp = from_probs({{0.5, 0.5}, {0.5, 0.5}});
  const auto r = ctc::loss(lp, {1});
  EXPECT_NEAR(r.loss, -std::log(0.75), 1e-9);
  EXPECT_NEAR(r.loss, 0.2877, 1e-4);
}

TEST(CtcLoss, CertainPathHasZeroLoss) {
  LogProbLattice<double> lp = LogProbLattice<double>::Constant(3, 4, -std::numeric_limits<double>::infinity());
  lp(0, 2) = lp(1, 3) = lp(2, 1) = 0.0;
  const auto r = ctc::loss(lp, {2, 3, 1});
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(CtcLoss, InfeasibleLabel) {
  const auto lp = from_probs({{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_THROW(ctc::loss(lp, {1, 1}), ctc::InfeasibleLabelError);
  EXPECT_EQ(ctc::min_frames({1, 1, 2, 2, 2}), 8u);
  EXPECT_THROW(ctc::loss(lp, {2}), ArgumentError);
}

TEST(CtcLoss, MatchesBruteForceOracle) {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int v = 1 + trial % 3;
    const Eigen::Index t = 1 + trial % 5;
    const auto lp = random_lattice(t, v, 1000 + trial);
    const auto label = random_label(rng, v, static_cast<std::size_t>(t));
    if (ctc::min_frames(label) > static_cast<std::size_t>(t)) continue;
    const double p = ctc::brute_force_prob(lp, label);
    EXPECT_NEAR(std::exp(-ctc::loss(lp, label).loss), p, 1e-10);
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(CtcLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int v = 2 + trial % 3;
    const Eigen::Index t = 4 + trial % 4;
    auto lp = random_lattice(t, v, 50 + trial);
    GlossSequence label;
    do label = random_label(rng, v, 3);
    while (label.empty() || ctc::min_frames(label) > static_cast<std::size_t>(t));
    const auto r = ctc::loss(lp, label);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < lp.rows(); ++i)
      for (Eigen::Index k = 0; k < lp.cols(); ++k) {
        const double orig = lp(i, k);
        lp(i, k) = orig + h;
        const double up = ctc::loss(lp, label).loss;
        lp(i, k) = orig - h;
        const double down = ctc::loss(lp, label).loss;
        lp(i, k) = orig;
        const double fd = (up - down) / (2 * h);
        EXPECT_LE(std::abs(fd - r.grad(i, k)), 1e-5 * std::max(1.0, std::abs(fd)));
      }
  }
}

TEST(CtcLoss, RelabelingEquivariance) {
  const auto lp = random_lattice(6, 3, 9);
  const std::vector<int> perm{0, 3, 1, 2};  // blank fixed
  LogProbLattice<double> permuted(lp.rows(), lp.cols());
  for (int k = 0; k < 4; ++k) permuted.col(perm[static_cast<std::size_t>(k)]) = lp.col(k);
  const GlossSequence label{1, 2, 2, 3};
  GlossSequence mapped;
  for (int s : label) mapped.push_back(perm[static_cast<std::size_t>(s)]);
  EXPECT_NEAR(ctc::loss(lp, label).loss, ctc::loss(permuted, mapped).loss, 1e-12);
}

TEST(BruteForce, DistributionSumsToOne) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto dist = ctc::brute_force_distribution(random_lattice(1 + trial % 5, 1 + trial % 3, trial));
    double total = 0.0;
    for (const auto& [label, p] : dist) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(BruteForce, DeterministicLattice) {
  const auto lp = from_probs({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}});
  const auto dist = ctc::brute_force_distribution(lp);
  EXPECT_DOUBLE_EQ(dist.at({1, 2}), 1.0);
  for (const auto& [label, p] : dist) {
    if (label != GlossSequence{1, 2}) {
      EXPECT_EQ(p, 0.0);
    }
  }
}

TEST(BruteForce, SizeGuard) {
  EXPECT_THROW(ctc::brute_force_prob(random_lattice(7, 9, 1), {1}), ctc::SizeError);
  EXPECT_NO_THROW(ctc::brute_force_prob(random_lattice(6, 9, 1), {1}));
}

TEST(Greedy, CollapsesArgmaxPath) {
  const auto lp = from_probs({{0.1, 0.9}, {0.2, 0.8}, {0.7, 0.3}, {0.4, 0.6}});
  EXPECT_EQ(ctc::greedy_decode(lp), (GlossSequence{1, 1}));
}

TEST(Greedy, TiesGoToLowestIndex) {
  const auto lp = from_probs({{0.5, 0.5}, {0.25, 0.75}});
  EXPECT_EQ(ctc::greedy_decode(lp), (GlossSequence{1}));
}

TEST(Beam, DeterministicLatticeGivesGeneratingLabel) {
  const auto lp = from_probs({{0, 0, 1}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}});
  EXPECT_EQ(ctc::beam_decode(lp, 10), (GlossSequence{2, 2, 1}));
}

TEST(Beam, WidthOneEqualsGreedyWhenArgmaxDominates) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int v = 3;
    const Eigen::Index t = 6;
    LogProbLattice<double> lp(t, v + 1);
    std::uniform_int_distribution<int> pick(0, v);
    for (Eigen::Index i = 0; i < t; ++i) {
      const int top = pick(rng);
      for (int k = 0; k <= v; ++k) lp(i, k) = std::log(k == top ? 0.91 : 0.03);
    }
    EXPECT_EQ(ctc::beam_decode(lp, 1), ctc::greedy_decode(lp));
  }
}

TEST(Beam, ExhaustiveWidthFindsMostProbableLabeling) {
  for (int trial = 0; trial < 200; ++trial) {
    const int v = 1 + trial % 2;
    const Eigen::Index t = 1 + trial % 4;
    const auto lp = random_lattice(t, v, 500 + trial);
    const auto dist = ctc::brute_force_distribution(lp);
    double best = -1.0;
    for (const auto& [label, p] : dist) best = std::max(best, p);
    const auto got = ctc::beam_decode(lp, 1000);
    EXPECT_NEAR(dist.at(got), best, 1e-12) << "trial " << trial;
  }
}

TEST(Ctc, LogProbMatchesLoss) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto lp = random_lattice(2 + trial % 5, 1 + trial % 3, 700 + trial);
    const GlossSequence label = trial % 2 ? GlossSequence{1} : GlossSequence{};
    EXPECT_NEAR(ctc::log_prob(lp, label), -ctc::loss(lp, label).loss, 1e-12);
  }
  EXPECT_EQ(ctc::log_prob(random_lattice(2, 2, 1), {1, 1}), ctc::kNegInf);
}

TEST(Beam, NeverWorseThanGreedy) {
  for (int trial = 0; trial < 200; ++trial) {
    const auto lp = random_lattice(2 + trial % 4, 1 + trial % 3, 900 + trial);
    const double pb = ctc::brute_force_prob(lp, ctc::beam_decode(lp, 10));
    const double pg = ctc::brute_force_prob(lp, ctc::greedy_decode(lp));
    EXPECT_GE(pb, pg - 1e-12);
  }
}
