#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fededs/gradcheck.h"
#include "fededs/nn.h"
#include "fededs/tensor.h"
#include "fededs/training.h"
#include "test_util.h"

namespace fededs {
namespace {

using testing::KindOf;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_EQ(KindOf([] { Tensor({2, 3}, std::vector<double>(5)); }), ErrorKind::kDimension);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(Tensor, RejectsNonFiniteValues) {
  EXPECT_EQ(KindOf([] { Tensor({2}, {1.0, std::nan("")}); }), ErrorKind::kNumeric);
  EXPECT_EQ(KindOf([] { Tensor::FromVector({INFINITY}); }), ErrorKind::kNumeric);
}

TEST(Tensor, RejectsZeroDimensions) {
  EXPECT_THROW(Tensor({0, 2}), Error);
}

SegmentedParams Seed42Network(StochasticLayer layer) {
  const ModelLayout layout{2, {}, 4, 2, Activation::kTanh};
  SegmentedParams p = SegmentedParams::Create(layout, 42, std::move(layer));
  // Non-zero biases so the oracle exercises them.
  const double b1[] = {0.1, -0.2, 0.3, -0.4};
  for (size_t i = 0; i < 4; ++i) p.extractor.values()[8 + i] = b1[i];
  p.classifier.values()[8] = 0.05;
  p.classifier.values()[9] = -0.05;
  return p;
}

// Straight-line evaluation of the 2-4-2 network on x = (1, 0).
std::vector<double> Oracle(const SegmentedParams& p, const StochasticLayer* s) {
  const std::vector<double>& e = p.extractor.values();
  const std::vector<double>& c = p.classifier.values();
  const double x0 = 1.0, x1 = 0.0;
  double h[4];
  for (int i = 0; i < 4; ++i) h[i] = std::tanh(e[2 * i] * x0 + e[2 * i + 1] * x1 + e[8 + i]);
  double z[4];
  for (int i = 0; i < 4; ++i) {
    z[i] = h[i];
    if (s) {
      z[i] = s->weight[4 * i] * h[0] + s->weight[4 * i + 1] * h[1] +
             s->weight[4 * i + 2] * h[2] + s->weight[4 * i + 3] * h[3] + s->offset[i];
    }
  }
  const double l0 = c[0] * z[0] + c[1] * z[1] + c[2] * z[2] + c[3] * z[3] + c[8];
  const double l1 = c[4] * z[0] + c[5] * z[1] + c[6] * z[2] + c[7] * z[3] + c[9];
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

TEST(Forward, PlainMatchesStraightLineOracle) {
  const SegmentedParams p = Seed42Network(StochasticLayer::Identity(4));
  const Tensor out = ForwardPlain(p, Tensor::FromVector({1.0, 0.0}));
  const std::vector<double> expected = Oracle(p, nullptr);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0], expected[0], 1e-12);
  EXPECT_NEAR(out[1], expected[1], 1e-12);
}

TEST(Forward, StochasticMatchesStraightLineOracle) {
  const StochasticLayer s = StochasticLayer::Generate(4, 7, 0.5);
  const SegmentedParams p = Seed42Network(s);
  const Tensor out = ForwardStochastic(p, s, Tensor::FromVector({1.0, 0.0}));
  const std::vector<double> expected = Oracle(p, &s);
  EXPECT_NEAR(out[0], expected[0], 1e-12);
  EXPECT_NEAR(out[1], expected[1], 1e-12);
}

TEST(Forward, ZeroParamsGiveUniformOutput) {
  const ModelLayout layout = testing::TinyLayout();
  const SegmentedParams p = SegmentedParams::Zeros(layout, StochasticLayer::Identity(4));
  const Tensor out = ForwardPlain(p, Tensor::FromVector({0.3, -1.0, 2.0}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Forward, OutputsArePositiveAndSumToOne) {
  const ModelLayout layout = testing::TinyLayout();
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const StochasticLayer s = StochasticLayer::Generate(4, seed + 100, 0.5);
    const SegmentedParams p = SegmentedParams::Create(layout, seed, s);
    const Dataset ds = testing::RandomDataset(5, 3, 3, seed);
    for (const Tensor& x : ds.inputs) {
      for (const Tensor& out : {ForwardPlain(p, x), ForwardStochastic(p, s, x)}) {
        EXPECT_NEAR(std::accumulate(out.values().begin(), out.values().end(), 0.0), 1.0, 1e-9);
        for (double v : out.values()) EXPECT_GT(v, 0.0);
      }
    }
  }
}

TEST(Forward, IdentityStochasticEqualsPlainBitwise) {
  const ModelLayout layout = testing::TinyLayout();
  const SegmentedParams p = SegmentedParams::Create(layout, 3, StochasticLayer::Identity(4));
  const Dataset ds = testing::RandomDataset(10, 3, 3, 9);
  for (const Tensor& x : ds.inputs) {
    EXPECT_EQ(ForwardPlain(p, x), ForwardStochastic(p, StochasticLayer::Identity(4), x));
  }
}

TEST(Forward, DeterministicAcrossCalls) {
  const StochasticLayer s = StochasticLayer::Generate(4, 5, 0.5);
  const SegmentedParams p = SegmentedParams::Create(testing::TinyLayout(), 1, s);
  const Tensor x = Tensor::FromVector({0.5, 0.25, -0.75});
  EXPECT_EQ(ForwardStochastic(p, s, x), ForwardStochastic(p, s, x));
}

TEST(Forward, ShapeMismatchIsDimensionError) {
  const SegmentedParams p =
      SegmentedParams::Create(testing::TinyLayout(), 1, StochasticLayer::Identity(4));
  EXPECT_EQ(KindOf([&] { ForwardPlain(p, Tensor::FromVector({1.0, 2.0})); }),
            ErrorKind::kDimension);
  EXPECT_EQ(KindOf([&] {
              ForwardStochastic(p, StochasticLayer::Identity(5), Tensor::FromVector({1, 2, 3}));
            }),
            ErrorKind::kDimension);
}

TEST(StochasticLayer, RegeneratesBitwiseFromSeed) {
  EXPECT_EQ(StochasticLayer::Generate(6, 99, 0.5), StochasticLayer::Generate(6, 99, 0.5));
  EXPECT_NE(StochasticLayer::Generate(6, 99, 0.5), StochasticLayer::Generate(6, 100, 0.5));
}

TEST(StochasticLayer, FollowsIdentityPlusScaledGaussian) {
  const double scale = 0.5;
  const StochasticLayer s = StochasticLayer::Generate(3, 11, scale);
  Rng rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(s.weight[i * 3 + j], (i == j ? 1.0 : 0.0) + scale * normal(rng));
    }
  }
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(s.offset[i], scale * normal(rng));
}

TEST(SegmentedParams, AcceptsAnotherClientsStochasticSegment) {
  SegmentedParams p =
      SegmentedParams::Create(testing::TinyLayout(), 1, StochasticLayer::Generate(4, 1, 0.5));
  p.stochastic = StochasticLayer::Generate(4, 2, 0.5);
  const Tensor out = ForwardStochastic(p, p.stochastic, Tensor::FromVector({1, 2, 3}));
  EXPECT_EQ(out.size(), 3u);
}

TEST(Losses, CrossEntropyClosedForms) {
  const std::vector<double> uniform(10, 0.1);
  EXPECT_NEAR(CrossEntropy(uniform, 4), std::log(10.0), 1e-9);
  EXPECT_NEAR(CrossEntropy(std::vector<double>{0.0, 1.0}, 1), 0.0, 1e-9);
  EXPECT_NEAR(CrossEntropy(std::vector<double>{0.5, 0.5}, 0), 0.693147, 1e-6);
}

TEST(Losses, CrossEntropyLabelOutOfRange) {
  EXPECT_EQ(KindOf([] { CrossEntropy(std::vector<double>{0.5, 0.5}, 2); }), ErrorKind::kIndex);
}

TEST(Losses, KlClosedForms) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_NEAR(KlDivergence(p, p), 0.0, 1e-9);
  EXPECT_NEAR(KlDivergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}),
              0.693147, 1e-6);
}

TEST(Losses, KlIsNonNegative) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(4), b(4);
    for (double& v : a) v = u(rng);
    for (double& v : b) v = u(rng);
    const double sa = std::accumulate(a.begin(), a.end(), 0.0);
    const double sb = std::accumulate(b.begin(), b.end(), 0.0);
    for (double& v : a) v /= sa;
    for (double& v : b) v /= sb;
    EXPECT_GE(KlDivergence(a, b), -1e-9);
  }
}

TEST(Losses, KlLengthMismatch) {
  EXPECT_EQ(KindOf([] {
              KlDivergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.2, 0.3, 0.5});
            }),
            ErrorKind::kDimension);
}

TEST(Gradient, VanishesAtSaturatedOptimum) {
  // A classifier with huge logits for the true class makes the prediction
  // one-hot up to rounding.
  const ModelLayout layout{2, {}, 2, 2, Activation::kTanh};
  SegmentedParams p = SegmentedParams::Zeros(layout, StochasticLayer::Identity(2));
  p.classifier.values()[4] = 60.0;  // bias of class 0
  Dataset ds;
  ds.num_classes = 2;
  ds.inputs.push_back(Tensor::FromVector({0.3, -0.2}));
  ds.labels.push_back(0);
  ModelGrads g = ModelGrads::ZerosLike(p);
  MeanCrossEntropy(p, nullptr, ds, std::vector<size_t>{0}, &g);
  EXPECT_LT(std::sqrt(g.SquaredNorm()), 1e-8);
}

TEST(Gradient, EveryCompositionMatchesFiniteDifferences) {
  for (uint64_t seed : {1u, 42u, 2024u}) {
    for (const GradCheckResult& r : RunGradientChecks(seed)) {
      EXPECT_TRUE(r.passed) << r.name << " seed " << seed << " err " << r.max_relative_error;
      EXPECT_LE(r.num_params, 500u);
      EXPECT_GT(r.checked, r.num_params / 2) << r.name;
    }
  }
}

TEST(Gradient, CheckerFlagsAWrongGradient) {
  std::vector<double> x{1.0, 2.0};
  const std::vector<double> wrong{2.0, 5.0};  // true gradient of x0^2 + x1^2 is (2, 4)
  const GradCheckResult r =
      CheckGradient("quadratic", x, wrong, [&] { return x[0] * x[0] + x[1] * x[1]; });
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_relative_error, 0.2, 1e-6);
}

TEST(Gradient, ReluNetworkMatchesFiniteDifferences) {
  const ModelLayout layout{3, {6}, 4, 3, Activation::kRelu};
  SegmentedParams p = SegmentedParams::Create(layout, 8, StochasticLayer::Identity(4));
  const Dataset ds = testing::RandomDataset(6, 3, 3, 4);
  const std::vector<size_t> all = testing::AllIndices(ds.size());
  ModelGrads g = ModelGrads::ZerosLike(p);
  MeanCrossEntropy(p, nullptr, ds, all, &g);
  std::vector<double>& w = p.classifier.values();
  const GradCheckResult r = CheckGradient(
      "relu classifier", w, g.classifier, [&] { return MeanCrossEntropy(p, nullptr, ds, all, nullptr); });
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(Activation, ParseRoundTrip) {
  EXPECT_EQ(ParseActivation("tanh"), Activation::kTanh);
  EXPECT_EQ(ParseActivation(ActivationName(Activation::kRelu)), Activation::kRelu);
  EXPECT_EQ(KindOf([] { ParseActivation("sigmoid"); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace fededs
