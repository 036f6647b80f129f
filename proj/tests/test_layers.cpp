#include "tsr/nn/adam.hpp"
#include "tsr/nn/checkpoint.hpp"
#include "tsr/nn/gradcheck.hpp"
#include "tsr/nn/layers.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace tsr;
using namespace tsr::nn;
using tsr::testing::mat;
using tsr::testing::random_seq;

TEST(Tape, IdentityConvWeightGradIsCorrelation) {
  ParamSet<double> ps;
  std::mt19937_64 rng(1);
  auto conv = Conv1d<double>::create(ps, "c", 1, 1, {1, 1, 0, 1}, rng);
  conv.weight->value[0] = 1.0;
  const auto x = random_seq(1, 6, 2);
  const auto g = random_seq(1, 6, 3);
  Tape<double> tape;
  auto y = conv.forward(tape, tape.leaf(x));
  EXPECT_EQ(tape.value(y), x);
  tape.backward(y, g);
  EXPECT_NEAR(conv.weight->grad[0], (x.array() * g.array()).sum(), 1e-12);
  EXPECT_NEAR(conv.bias->grad[0], g.sum(), 1e-12);
}

TEST(Tape, ZeroOutputGradGivesZeroGrads) {
  ParamSet<double> ps;
  std::mt19937_64 rng(1);
  auto conv = Conv1d<double>::create(ps, "c", 3, 4, {3, 1, 1, 1}, rng);
  auto bn = BatchNorm1d<double>::create(ps, "bn", 4);
  Tape<double> tape;
  auto y = relu(tape, bn.forward(tape, conv.forward(tape, tape.leaf(random_seq(3, 8, 4))), Mode::kTrain));
  tape.backward(y, FeatureSequence<double>::Zero(4, 8));
  ps.for_each([](const Param<double>& p) { EXPECT_EQ(p.grad.cwiseAbs().maxCoeff(), 0.0) << p.name; });
}

TEST(Tape, GradientsAccumulateAcrossPasses) {
  ParamSet<double> ps;
  std::mt19937_64 rng(2);
  auto conv = Conv1d<double>::create(ps, "c", 2, 2, {3, 1, 1, 1}, rng);
  const auto x = random_seq(2, 5, 5);
  const auto g = random_seq(2, 5, 6);
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> tape;
    auto y = conv.forward(tape, tape.leaf(x));
    tape.backward(y, g);
  }
  const Vector<double> twice = conv.weight->grad;
  ps.zero_grad();
  Tape<double> tape;
  tape.backward(conv.forward(tape, tape.leaf(x)), g);
  EXPECT_LT((twice - 2.0 * conv.weight->grad).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tape, BackwardShapeMismatchThrows) {
  Tape<double> tape;
  auto x = tape.leaf(random_seq(2, 3, 1));
  auto y = relu(tape, x);
  EXPECT_THROW(tape.backward(y, FeatureSequence<double>::Zero(3, 2)), DimensionError);
}

TEST(Tape, NonRecordingTapeRefusesBackward) {
  Tape<double> tape(false);
  auto y = relu(tape, tape.leaf(random_seq(2, 3, 1)));
  EXPECT_THROW(tape.backward(y, FeatureSequence<double>::Zero(2, 3)), StateError);
}

// Composite stack of every layer type, checked against central differences.
TEST(GradCheck, CompositeStack) {
  ParamSet<double> ps;
  std::mt19937_64 rng(3);
  auto pw = Pointwise<double>::create(ps, "pw", 3, 4, rng);
  auto conv = Conv1d<double>::create(ps, "conv", 4, 4, {3, 1, 1, 1}, rng);
  auto dw = Conv1d<double>::create(ps, "dw", 4, 4, {3, 1, 1, 4}, rng);
  auto bn = BatchNorm1d<double>::create(ps, "bn", 4);
  auto up = TransposedConv1d<double>::create(ps, "up", 4, 2, 3, 2, rng);
  const auto x = random_seq(3, 5, 7);
  auto loss = [&](bool with_grad) {
    Tape<double> tape(with_grad);
    auto h = relu(tape, pw.forward(tape, tape.leaf(x)));
    h = add(tape, dw.forward(tape, conv.forward(tape, h)), h);
    h = relu(tape, bn.forward(tape, h, Mode::kTrain));
    h = trim(tape, up.forward(tape, h), 10);
    h = gather_frames(tape, h, {0, 2, 3, 9});
    h = repeat_upsample(tape, h, 2);
    auto out = log_softmax(tape, h);
    const FeatureSequence<double>& v = tape.value(out);
    const auto w = random_seq(2, 8, 99);
    if (with_grad) tape.backward(out, w);
    return (v.array() * w.array()).sum();
  };
  const auto r = grad_check(ps, loss);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
  EXPECT_GT(r.checked, 100u);
}

TEST(GradCheck, LinearLayerIsNearlyExact) {
  ParamSet<double> ps;
  std::mt19937_64 rng(4);
  auto pw = Pointwise<double>::create(ps, "pw", 5, 3, rng);
  const auto x = random_seq(5, 4, 9);
  const auto w = random_seq(3, 4, 10);
  auto loss = [&](bool with_grad) {
    Tape<double> tape(with_grad);
    auto out = pw.forward(tape, tape.leaf(x));
    if (with_grad) tape.backward(out, w);
    return (tape.value(out).array() * w.array()).sum();
  };
  EXPECT_LT(grad_check(ps, loss).max_rel_error, 1e-6);
}

TEST(GradCheck, NudgeMovesValuesAwayFromKink) {
  FeatureSequence<double> x = tsr::testing::mat({{0.0, 1e-5, -2e-4, 0.5}});
  nudge_away_from_zero(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) EXPECT_GE(std::abs(x.data()[i]), 1e-3);
  EXPECT_EQ(x(0, 3), 0.5);
}

TEST(BatchNormLayer, EvalBeforeTrainIsAnError) {
  ParamSet<float> ps;
  auto bn = BatchNorm1d<float>::create(ps, "bn", 2);
  const FeatureSequence<float> x = FeatureSequence<float>::Random(2, 5);
  EXPECT_THROW(bn.apply(x, Mode::kEval), StateError);
  bn.apply(x, Mode::kTrain);
  EXPECT_NO_THROW(bn.apply(x, Mode::kEval));
}

TEST(BatchNormLayer, FrozenStatsDoNotMove) {
  ParamSet<float> ps;
  auto bn = BatchNorm1d<float>::create(ps, "bn", 2);
  const FeatureSequence<float> x = FeatureSequence<float>::Random(2, 5);
  bn.apply(x, Mode::kTrain);
  ps.set_trainable(false);
  const auto snap = ps.snapshot();
  bn.apply(FeatureSequence<float>::Random(2, 5), Mode::kTrain);
  EXPECT_EQ(ps.snapshot(), snap);
}

TEST(BatchNormLayer, RunningVarianceStaysNonNegative) {
  ParamSet<double> ps;
  auto bn = BatchNorm1d<double>::create(ps, "bn", 3);
  for (std::uint64_t s = 0; s < 20; ++s) bn.apply(random_seq(3, 2 + s % 4, s, -5, 5), Mode::kTrain);
  EXPECT_GE(bn.running_var->value.minCoeff(), 0.0);
}

TEST(Params, LearnableCountExcludesRunningStats) {
  ParamSet<double> ps;
  std::mt19937_64 rng(1);
  Conv1d<double>::create(ps, "c", 2, 4, {3, 1, 1, 1}, rng);
  EXPECT_EQ(ps.count_learnable(), 28u);
  BatchNorm1d<double>::create(ps, "bn", 4);
  EXPECT_EQ(ps.count_learnable(), 36u);
  EXPECT_EQ(ParamSet<double>{}.count_learnable(), 0u);
}

TEST(Params, BuffersMatchShapes) {
  ParamSet<double> ps;
  std::mt19937_64 rng(1);
  Conv1d<double>::create(ps, "c", 3, 5, {3, 1, 1, 1}, rng);
  ps.for_each([](const Param<double>& p) {
    EXPECT_EQ(p.grad.size(), p.value.size());
    EXPECT_EQ(p.m.size(), p.value.size());
    EXPECT_EQ(p.v.size(), p.value.size());
  });
  EXPECT_THROW(ps.add("c.weight", {1}), ArgumentError);
}

TEST(Params, SeededInitIsDeterministic) {
  auto make = [] {
    ParamSet<float> ps;
    std::mt19937_64 rng(42);
    Conv1d<float>::create(ps, "c", 4, 4, {3, 1, 1, 1}, rng);
    return ps.snapshot();
  };
  EXPECT_EQ(make(), make());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet<double> ps;
  auto& p = ps.add("w", {1});
  p.value[0] = 0.5;
  p.grad[0] = 1.0;
  Adam<double> opt({1e-4, 0.9, 0.999, 1e-8, 0.0});
  opt.step(ps);
  EXPECT_NEAR(0.5 - p.value[0], 1e-4, 1e-9);
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParamUnchanged) {
  ParamSet<double> ps;
  auto& p = ps.add("w", {3});
  p.value << 1.0, -2.0, 3.0;
  const Vector<double> before = p.value;
  Adam<double> opt;
  opt.step(ps);
  EXPECT_EQ(p.value, before);
}

TEST(Adam, TwoStepsMoveFurtherThanOne) {
  auto run = [](int steps) {
    ParamSet<double> ps;
    auto& p = ps.add("w", {1});
    Adam<double> opt({1e-3, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < steps; ++i) {
      p.grad[0] = 0.7;
      opt.step(ps);
    }
    return -p.value[0];
  };
  EXPECT_GT(run(2), run(1));
  EXPECT_GT(run(1), 0.0);
}

TEST(Adam, FrozenParamsUnchangedButGradsCleared) {
  ParamSet<double> ps;
  auto& p = ps.add("w", {1});
  p.value[0] = 1.0;
  p.grad[0] = 3.0;
  p.trainable = false;
  Adam<double> opt;
  opt.step(ps);
  EXPECT_EQ(p.value[0], 1.0);
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ParamSet<float> ps;
  std::mt19937_64 rng(5);
  Conv1d<float>::create(ps, "a", 3, 2, {3, 1, 1, 1}, rng);
  BatchNorm1d<float>::create(ps, "b", 2).running_var->value << 0.25f, 3.5f;
  std::stringstream buf;
  write_tensors(buf, to_tensors(ps));
  ParamSet<float> other;
  std::mt19937_64 rng2(99);
  Conv1d<float>::create(other, "a", 3, 2, {3, 1, 1, 1}, rng2);
  BatchNorm1d<float>::create(other, "b", 2);
  load_into(other, read_tensors(buf));
  EXPECT_EQ(other.snapshot(), ps.snapshot());
}

TEST(Checkpoint, FormatErrors) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_tensors(bad), FormatError);

  ParamSet<float> ps;
  ps.add("w", {2, 3});
  std::stringstream buf;
  write_tensors(buf, to_tensors(ps));
  const std::string full = buf.str();
  std::stringstream truncated(full.substr(0, full.size() - 3));
  EXPECT_THROW(read_tensors(truncated), FormatError);

  ParamSet<float> other;
  other.add("w", {3, 2});
  std::stringstream again(full);
  EXPECT_THROW(load_into(other, read_tensors(again)), DimensionError);

  ParamSet<float> missing;
  missing.add("v", {1});
  std::stringstream once_more(full);
  EXPECT_THROW(load_into(missing, read_tensors(once_more)), FormatError);
}

TEST(Checkpoint, HeaderLayout) {
  ParamSet<float> ps;
  ps.add("ab", {1}).value[0] = 1.0f;
  std::stringstream buf;
  write_tensors(buf, to_tensors(ps));
  const std::string s = buf.str();
  // magic, count, name_len, "ab", rank, dim, value
  ASSERT_EQ(s.size(), 4u + 4 + 4 + 2 + 4 + 4 + 4);
  EXPECT_EQ(s.substr(0, 4), "TSR1");
  EXPECT_EQ(static_cast<unsigned char>(s[4]), 1u);
  EXPECT_EQ(s.substr(12, 2), "ab");
  // 1.0f little-endian: 00 00 80 3f
  EXPECT_EQ(static_cast<unsigned char>(s[22]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(s[23]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(s[24]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(s[25]), 0x3f);
}
