#include "tsr/sampling.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace tsr;
using namespace tsr::sampling;
using tsr::testing::mat;
using tsr::testing::random_seq;

using Idx = std::vector<Eigen::Index>;

TEST(Downsample, EqualSpacing) {
  EXPECT_EQ(sample_indices(8, 4, Method::kEqual, 0), (Idx{0, 4}));
  EXPECT_EQ(sample_indices(10, 4, Method::kEqual, 0), (Idx{0, 4, 8}));
}

TEST(Downsample, FactorOneIsIdentity) {
  const auto x = random_seq(3, 7, 1);
  for (auto m : {Method::kEqual, Method::kProportionalRandom, Method::kRandom}) {
    EXPECT_EQ(sample_indices(7, 1, m, 5), (Idx{0, 1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(downsample(x, 1, m, 5).sparse, x);
  }
}

TEST(Downsample, BadFactor) {
  EXPECT_THROW(sample_indices(8, 0, Method::kEqual, 0), ArgumentError);
  EXPECT_THROW(sample_indices(8, -2, Method::kRandom, 0), ArgumentError);
}

TEST(Downsample, ProportionalRandomOnePerSegment) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const Eigen::Index t = 5 + static_cast<Eigen::Index>(seed % 30);
    const int n = 1 + static_cast<int>(seed % 6);
    const auto idx = sample_indices(t, n, Method::kProportionalRandom, seed);
    ASSERT_EQ(static_cast<Eigen::Index>(idx.size()), padded_length(t, n) / n);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      EXPECT_GE(idx[s], static_cast<Eigen::Index>(s) * n);
      EXPECT_LT(idx[s], static_cast<Eigen::Index>(s + 1) * n);
      if (s) {
        EXPECT_GT(idx[s], idx[s - 1]);
      }
    }
  }
}

// Each segment's offset is uniform over its n positions: chi-square, 3 dof,
// critical value 11.345 at p = 0.01.
TEST(Downsample, ProportionalRandomIsUniformWithinSegments) {
  std::array<std::array<int, 4>, 2> counts{};
  const int draws = 10000;
  for (int seed = 0; seed < draws; ++seed) {
    const auto idx = sample_indices(8, 4, Method::kProportionalRandom, static_cast<std::uint64_t>(seed));
    ++counts[0][static_cast<std::size_t>(idx[0])];
    ++counts[1][static_cast<std::size_t>(idx[1] - 4)];
  }
  for (const auto& c : counts) {
    double chi2 = 0.0;
    for (int k : c) chi2 += (k - draws / 4.0) * (k - draws / 4.0) / (draws / 4.0);
    EXPECT_LT(chi2, 11.345);
  }
}

TEST(Downsample, RandomIsSortedWithoutReplacement) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto idx = sample_indices(17, 3, Method::kRandom, seed);
    ASSERT_EQ(idx.size(), 6u);
    for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i - 1], idx[i]);
    EXPECT_GE(idx.front(), 0);
    EXPECT_LT(idx.back(), padded_length(17, 3));
  }
}

TEST(Downsample, PaddingRepeatsFinalFrame) {
  const auto x = mat({{1, 2, 3, 4, 5}});
  const auto d = downsample(x, 3, Method::kEqual, 0);
  EXPECT_EQ(d.indices, (Idx{0, 3}));
  EXPECT_EQ(d.sparse, mat({{1, 4}}));
  EXPECT_EQ(gather(x, {4, 5}), mat({{5, 5}}));
  EXPECT_EQ(clamp_indices({2, 5, 7}, 5), (Idx{2, 4, 4}));
}

TEST(Downsample, SeededDeterminism) {
  EXPECT_EQ(sample_indices(40, 4, Method::kProportionalRandom, 9), sample_indices(40, 4, Method::kProportionalRandom, 9));
  EXPECT_NE(sample_indices(40, 4, Method::kProportionalRandom, 9), sample_indices(40, 4, Method::kProportionalRandom, 10));
}

TEST(Interp, LinearHalfSampleExample) {
  EXPECT_EQ(interp_upsample(mat({{0, 2}}), 2, Interp::kLinear), mat({{0, 0.5, 1.5, 2}}));
}

TEST(Interp, NearestRepeats) {
  EXPECT_EQ(interp_upsample(mat({{3, -1}}), 2, Interp::kNearest), mat({{3, 3, -1, -1}}));
}

TEST(Interp, FactorOneIsIdentity) {
  const auto x = random_seq(4, 6, 3);
  EXPECT_EQ(interp_upsample(x, 1, Interp::kNearest), x);
  EXPECT_EQ(interp_upsample(x, 1, Interp::kLinear), x);
}

TEST(Interp, ConstantRoundTripIsExact) {
  const FeatureSequence<double> c = FeatureSequence<double>::Constant(3, 13, 0.3);
  for (auto m : {Method::kEqual, Method::kProportionalRandom, Method::kRandom})
    for (auto i : {Interp::kNearest, Interp::kLinear})
      for (int n : {1, 2, 4, 5}) {
        const auto d = downsample(c, n, m, 17);
        EXPECT_EQ(reconstruct(d.sparse, n, i, c.cols()), c);
      }
}

TEST(Interp, ReconstructTrimsToOriginalLength) {
  const auto x = random_seq(2, 10, 4);
  const auto d = downsample(x, 4, Method::kEqual, 0);
  EXPECT_EQ(reconstruct(d.sparse, 4, Interp::kLinear, 10).cols(), 10);
  EXPECT_THROW(reconstruct(d.sparse, 4, Interp::kLinear, 13), DimensionError);
}

TEST(Augment, UnitScaleIsIdentity) {
  const auto x = random_seq(3, 25, 5);
  EXPECT_EQ(temporal_augment_with_scale(x, 1.0), x);
}

TEST(Augment, LengthBoundsAndMonotoneIndices) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const double s = draw_augment_scale(seed);
    ASSERT_GE(s, 0.8);
    ASSERT_LE(s, 1.2);
    const auto idx = resample_indices(100, s);
    EXPECT_GE(idx.size(), 80u);
    EXPECT_LE(idx.size(), 120u);
    for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LE(idx[i - 1], idx[i]);
    EXPECT_EQ(idx.front(), 0);
    EXPECT_EQ(idx.back(), 99);
  }
}

TEST(Augment, NeedsTwoFrames) {
  EXPECT_THROW(temporal_augment(random_seq(2, 1, 1), 0), ArgumentError);
}

TEST(Names, ConfigStrings) {
  for (auto m : {Method::kEqual, Method::kProportionalRandom, Method::kRandom}) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(to_string(Method::kProportionalRandom), "proportional_random");
  EXPECT_EQ(parse_interp("linear"), Interp::kLinear);
  EXPECT_THROW(parse_method("uniform"), ArgumentError);
}
