#include "tsr/recognizer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tsr;
using tsr::testing::random_seq;

namespace {

template <typename S>
void warm_up(const TemporalHead<S>& head, Eigen::Index t, std::uint64_t seed) {
  head.apply(random_seq<S>(head.in_channels(), t, seed, 0.0, 1.0), nn::Mode::kTrain);
}

template <typename S>
void warm_up(const TsrNet<S>& net, Eigen::Index t1, std::uint64_t seed) {
  net.apply(random_seq<S>(net.config().c1, t1, seed, 0.0, 1.0), nn::Mode::kTrain);
}

struct Small {
  EncoderConfig ecfg{6, 10, 8};
  HeadConfig hcfg{HeadVariant::kSmall, 4, 12, 3};
  FrameEncoder<double> encoder{ecfg, 1};
  TemporalHead<double> head{hcfg, 8, 2};

  Small() { warm_up(head, 24, 3); }
};

}  // namespace

TEST(FrameEncoder, Shape) {
  FrameEncoder<double> enc({6, 10, 8}, 1);
  const auto f = enc.apply(random_seq(6, 13, 2));
  EXPECT_EQ(f.rows(), 8);
  EXPECT_EQ(f.cols(), 13);
  EXPECT_GE(f.minCoeff(), 0.0);
  EXPECT_THROW(enc.apply(random_seq(5, 13, 2)), DimensionError);
}

TEST(FrameEncoder, FramesAreIndependent) {
  FrameEncoder<double> enc({6, 10, 8}, 1);
  const auto x = random_seq(6, 9, 4);
  const auto f = enc.apply(x);
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const RawSequence<double> one = x.col(t);
    EXPECT_TRUE(enc.apply(one).col(0).isApprox(f.col(t), 1e-14));
  }
}

TEST(FrameEncoder, CommutesWithPermutation) {
  FrameEncoder<double> enc({6, 10, 8}, 1);
  const auto x = random_seq(6, 10, 5);
  std::vector<Eigen::Index> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);
  EXPECT_EQ(enc.apply(sampling::gather(x, perm)), sampling::gather(enc.apply(x), perm));
}

TEST(FrameEncoder, CommutesWithDownsampling) {
  FrameEncoder<float> enc({6, 16, 8}, 3);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = random_seq<float>(6, 17 + static_cast<Eigen::Index>(s % 11), s);
    const int n = 2 + static_cast<int>(s % 4);
    const auto idx = sampling::sample_indices(x.cols(), n, sampling::Method::kProportionalRandom, s);
    ASSERT_EQ(enc.apply(sampling::gather(x, idx)), sampling::gather(enc.apply(x), idx)) << "seed " << s;
  }
}

TEST(FrameEncoder, IdentityOnNonNegativeInput) {
  FrameEncoder<double> enc({5, 5, 5}, 1);
  enc.set_identity();
  const auto x = random_seq(5, 7, 3, 0.0, 2.0);
  EXPECT_EQ(enc.apply(x), x);
  FrameEncoder<double> wide({5, 6, 5}, 1);
  EXPECT_THROW(wide.set_identity(), DimensionError);
}

TEST(FrameEncoder, Deterministic) {
  FrameEncoder<double> a({6, 10, 8}, 42), b({6, 10, 8}, 42), c({6, 10, 8}, 43);
  const auto x = random_seq(6, 5, 1);
  EXPECT_EQ(a.apply(x), b.apply(x));
  EXPECT_NE(a.apply(x), c.apply(x));
}

TEST(TemporalHead, RowsAreLogDistributions) {
  Small m;
  const auto lp = m.head.apply(random_seq(8, 15, 7, 0.0, 1.0));
  ASSERT_EQ(lp.rows(), 15);
  ASSERT_EQ(lp.cols(), 5);
  for (Eigen::Index t = 0; t < lp.rows(); ++t) EXPECT_NEAR(lp.row(t).array().exp().sum(), 1.0, 1e-12);
}

TEST(TemporalHead, ZeroProjectionIsUniform) {
  Small m;
  m.head.zero_projection();
  const auto lp = m.head.apply(random_seq(8, 6, 7, 0.0, 1.0));
  EXPECT_TRUE(lp.isApproxToConstant(-std::log(5.0), 1e-12));
}

TEST(TemporalHead, EvalNeedsStatistics) {
  TemporalHead<double> head({HeadVariant::kSmall, 4, 12, 3}, 8, 2);
  EXPECT_THROW(head.apply(random_seq(8, 6, 1)), StateError);
  EXPECT_NO_THROW(head.apply(random_seq(8, 6, 1), nn::Mode::kTrain));
  EXPECT_NO_THROW(head.apply(random_seq(8, 6, 1)));
}

TEST(TemporalHead, Variants) {
  EXPECT_EQ(parse_head_variant("tconv-small"), HeadVariant::kSmall);
  EXPECT_EQ(parse_head_variant("tconv-large"), HeadVariant::kLarge);
  EXPECT_THROW(parse_head_variant("lstm"), ArgumentError);
  TemporalHead<double> small({HeadVariant::kSmall, 4, 12, 3}, 8, 2);
  TemporalHead<double> large({HeadVariant::kLarge, 4, 12, 3}, 8, 2);
  // conv(8->12)+bn, conv(12->12)+bn, proj(12->5); large adds two more conv+bn.
  const std::size_t first = 8 * 12 * 3 + 12 + 24;
  const std::size_t inner = 12 * 12 * 3 + 12 + 24;
  const std::size_t proj = 12 * 5 + 5;
  EXPECT_EQ(small.params().count_learnable(), first + inner + proj);
  EXPECT_EQ(large.params().count_learnable(), first + 3 * inner + proj);
  EXPECT_THROW(TemporalHead<double>({HeadVariant::kSmall, 4, 12, 4}, 8, 2), ArgumentError);
}

TEST(Recognize, FactorOneIgnoresReconstructor) {
  Small m;
  const auto x = random_seq(6, 20, 11);
  const auto ref = recognize_lattice(x, m.encoder, m.head, 1, Reconstructor::kNearest, nullptr);
  EXPECT_EQ(recognize_lattice(x, m.encoder, m.head, 1, Reconstructor::kLinear, nullptr), ref);
  EXPECT_EQ(recognize_lattice(x, m.encoder, m.head, 1, Reconstructor::kTsrNet, nullptr), ref);
  EXPECT_EQ(recognize(x, m.encoder, m.head, 1, Reconstructor::kTsrNet, nullptr),
            ctc::beam_decode(ref, 10));
}

TEST(Recognize, ZeroDetailTsrNetMatchesNearest) {
  Small m;
  TsrConfig cfg;
  cfg.c1 = 8;
  cfg.c2 = cfg.c3 = 6;
  cfg.m = cfg.k = 1;
  cfg.n = 3;
  TsrNet<double> net(cfg, 5);
  warm_up(net, 7, 1);
  net.zero_detail_branch();
  for (Eigen::Index t : {18, 20, 22}) {
    const auto x = random_seq(6, t, static_cast<std::uint64_t>(t));
    const auto a = recognize_lattice(x, m.encoder, m.head, 3, Reconstructor::kTsrNet, &net);
    const auto b = recognize_lattice(x, m.encoder, m.head, 3, Reconstructor::kNearest, nullptr);
    EXPECT_EQ(a.rows(), t);
    EXPECT_TRUE(a.isApprox(b, 1e-12)) << "T=" << t;
  }
}

TEST(Recognize, OutputLengthMatchesInput) {
  Small m;
  for (int n : {2, 4, 5}) {
    for (Eigen::Index t : {9, 20, 21}) {
      const auto x = random_seq(6, t, 1);
      for (auto rec : {Reconstructor::kNearest, Reconstructor::kLinear})
        EXPECT_EQ(recognize_lattice(x, m.encoder, m.head, n, rec, nullptr).rows(), t);
    }
  }
}

TEST(Recognize, TsrNetErrors) {
  Small m;
  const auto x = random_seq(6, 16, 1);
  EXPECT_THROW(recognize_lattice(x, m.encoder, m.head, 4, Reconstructor::kTsrNet, nullptr), ConfigError);
  TsrConfig cfg;
  cfg.c1 = 8;
  cfg.c2 = cfg.c3 = 6;
  cfg.n = 2;
  TsrNet<double> net(cfg, 5);
  EXPECT_THROW(recognize_lattice(x, m.encoder, m.head, 4, Reconstructor::kTsrNet, &net), ConfigError);
  EXPECT_THROW(recognize_lattice(x, m.encoder, m.head, 0, Reconstructor::kNearest, nullptr), ArgumentError);
}

TEST(Recognize, ReconstructorNames) {
  for (auto r : {Reconstructor::kTsrNet, Reconstructor::kNearest, Reconstructor::kLinear})
    EXPECT_EQ(parse_reconstructor(to_string(r)), r);
  EXPECT_THROW(parse_reconstructor("cubic"), ArgumentError);
}
