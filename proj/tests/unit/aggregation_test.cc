#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fededs/aggregation.h"
#include "test_util.h"

namespace fededs {
namespace {

using testing::KindOf;

TrainableParams Random(Rng& rng, size_t ne = 13, size_t nc = 5) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TrainableParams p{std::vector<double>(ne), std::vector<double>(nc)};
  for (double& v : p.extractor) v = normal(rng);
  for (double& v : p.classifier) v = normal(rng);
  return p;
}

TEST(Weights, ProportionalToCounts) {
  EXPECT_EQ(WeightsPk(std::vector<size_t>{10, 30}), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(WeightsPk(std::vector<size_t>{7, 7, 7, 7}), (std::vector<double>(4, 0.25)));
  EXPECT_EQ(WeightsPk(std::vector<size_t>{1}), (std::vector<double>{1.0}));
  const std::vector<double> w = WeightsPk(std::vector<size_t>{3, 11, 17, 2});
  double s = 0.0;
  for (double v : w) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Weights, ZeroTotalRejected) {
  EXPECT_EQ(KindOf([] { WeightsPk(std::vector<size_t>{0, 0}); }), ErrorKind::kConfig);
}

TEST(FedAvg, MidpointAndFixedPoint) {
  const TrainableParams a{{1.0}, {1.0}}, b{{3.0}, {3.0}};
  const std::vector<TrainableParams> two{a, b};
  EXPECT_EQ(FedAvgAggregate(two, std::vector<double>{0.5, 0.5}), (TrainableParams{{2.0}, {2.0}}));
  Rng rng(1);
  const TrainableParams x = Random(rng);
  const std::vector<TrainableParams> same(3, x);
  const TrainableParams out = FedAvgAggregate(same, WeightsPk(std::vector<size_t>{1, 2, 3}));
  for (size_t i = 0; i < x.extractor.size(); ++i) EXPECT_NEAR(out.extractor[i], x.extractor[i], 1e-15);
}

TEST(FedAvg, DegenerateWeightsReturnThatClientBitwise) {
  Rng rng(2);
  const std::vector<TrainableParams> clients{Random(rng), Random(rng), Random(rng)};
  EXPECT_EQ(FedAvgAggregate(clients, std::vector<double>{1.0, 0.0, 0.0}), clients[0]);
}

TEST(FedAvg, PermutationInvariantAndAffineEquivariant) {
  Rng rng(3);
  std::vector<TrainableParams> clients{Random(rng), Random(rng), Random(rng), Random(rng)};
  std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  const TrainableParams base = FedAvgAggregate(clients, w);
  std::vector<TrainableParams> perm{clients[2], clients[0], clients[3], clients[1]};
  const TrainableParams permuted = FedAvgAggregate(perm, std::vector<double>{0.3, 0.1, 0.4, 0.2});
  for (size_t i = 0; i < base.extractor.size(); ++i)
    EXPECT_NEAR(base.extractor[i], permuted.extractor[i], 1e-14);
  for (auto& c : clients) {
    for (double& v : c.extractor) v += 2.5;
    for (double& v : c.classifier) v += 2.5;
  }
  const TrainableParams shifted = FedAvgAggregate(clients, w);
  for (size_t i = 0; i < base.classifier.size(); ++i)
    EXPECT_NEAR(shifted.classifier[i], base.classifier[i] + 2.5, 1e-13);
}

TEST(FedAvg, ShapeMismatchIsDimensionError) {
  Rng rng(4);
  const std::vector<TrainableParams> clients{Random(rng, 3, 2), Random(rng, 4, 2)};
  EXPECT_EQ(KindOf([&] { FedAvgAggregate(clients, std::vector<double>{0.5, 0.5}); }),
            ErrorKind::kDimension);
}

// Total weight of the momentum buffer contributions of tau unit gradients.
double BruteForceNorm(size_t tau, double rho) {
  double total = 0.0;
  for (size_t j = 1; j <= tau; ++j) {
    for (size_t i = 0; i <= tau - j; ++i) total += std::pow(rho, static_cast<double>(i));
  }
  return total;
}

TEST(FedNovaNormTest, MatchesBruteForceGrid) {
  for (size_t tau = 1; tau <= 20; ++tau) {
    for (double rho : {0.0, 0.5, 0.9, 0.99}) {
      EXPECT_NEAR(FedNovaNorm(tau, rho), BruteForceNorm(tau, rho), 1e-9) << tau << " " << rho;
    }
  }
}

TEST(FedNovaNormTest, ReferenceValues) {
  EXPECT_NEAR(FedNovaNorm(1, 0.9), 1.0, 1e-12);
  EXPECT_NEAR(FedNovaNorm(5, 0.9), 13.1441, 1e-9);
  EXPECT_EQ(FedNovaNorm(3, 0.0), 3.0);
}

TEST(FedNovaNormTest, InvalidMomentumRejected) {
  EXPECT_EQ(KindOf([] { FedNovaNorm(3, 1.0); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { FedNovaNorm(0, 0.5); }), ErrorKind::kConfig);
}

TEST(FedNovaAggregateTest, ReducesToUniformFedAvg) {
  Rng rng(5);
  const TrainableParams global = Random(rng);
  std::vector<TrainableParams> updated, deltas;
  std::vector<double> norms;
  for (int k = 0; k < 5; ++k) {
    updated.push_back(Random(rng));
    norms.push_back(FedNovaNorm(12, 0.0));
    deltas.push_back(FedNovaDelta(updated.back(), global, 0.01, norms.back()));
  }
  const TrainableParams nova = FedNovaAggregate(global, deltas, norms, 0.01, false);
  const TrainableParams avg = FedAvgAggregate(updated, UniformWeights(5));
  for (size_t i = 0; i < avg.extractor.size(); ++i)
    EXPECT_NEAR(nova.extractor[i], avg.extractor[i], 1e-9);
  for (size_t i = 0; i < avg.classifier.size(); ++i)
    EXPECT_NEAR(nova.classifier[i], avg.classifier[i], 1e-9);
}

TEST(FedNovaAggregateTest, ZeroDeltasKeepGlobal) {
  Rng rng(6);
  const TrainableParams global = Random(rng);
  const TrainableParams zero{std::vector<double>(13, 0.0), std::vector<double>(5, 0.0)};
  const std::vector<TrainableParams> deltas{zero, zero};
  EXPECT_EQ(FedNovaAggregate(global, deltas, std::vector<double>{3.0, 4.0}, 0.1, false), global);
}

TEST(FedNovaAggregateTest, SingleClientRecoversItsParams) {
  Rng rng(7);
  const TrainableParams global = Random(rng), updated = Random(rng);
  const double norm = FedNovaNorm(7, 0.9);
  const std::vector<TrainableParams> deltas{FedNovaDelta(updated, global, 0.05, norm)};
  const TrainableParams out = FedNovaAggregate(global, deltas, std::vector<double>{norm}, 0.05, false);
  for (size_t i = 0; i < out.extractor.size(); ++i)
    EXPECT_NEAR(out.extractor[i], updated.extractor[i], 1e-12);
}

TEST(FedNovaAggregateTest, OmitEtaScalesStepByOneOverEta) {
  Rng rng(8);
  const TrainableParams global = Random(rng), updated = Random(rng);
  const double eta = 0.1;
  const std::vector<TrainableParams> deltas{FedNovaDelta(updated, global, eta, 2.0)};
  const TrainableParams out = FedNovaAggregate(global, deltas, std::vector<double>{2.0}, eta, true);
  for (size_t i = 0; i < out.extractor.size(); ++i) {
    EXPECT_NEAR(out.extractor[i] - global.extractor[i],
                (updated.extractor[i] - global.extractor[i]) / eta, 1e-10);
  }
}

TEST(FedNovaAggregateTest, ShapeMismatchIsDimensionError) {
  Rng rng(9);
  const TrainableParams global = Random(rng);
  const std::vector<TrainableParams> deltas{Random(rng, 4, 5)};
  EXPECT_EQ(KindOf([&] { FedNovaAggregate(global, deltas, std::vector<double>{1.0}, 0.1, false); }),
            ErrorKind::kDimension);
}

ConvergenceBoundInputs Reference() {
  ConvergenceBoundInputs in;
  in.smoothness = 1.0;
  in.eta = 0.1;
  in.e_min = 1;
  in.rounds = 100;
  in.loss_gap = 1.0;
  in.weights = {0.5, 0.5};
  return in;
}

TEST(Bound, ReferenceValueAndScaling) {
  ConvergenceBoundInputs in = Reference();
  EXPECT_NEAR(ConvergenceBound(in), 0.4, 1e-12);
  in.rounds = 200;
  EXPECT_NEAR(ConvergenceBound(in), 0.2, 1e-12);
}

TEST(Bound, AllTermsAgainstHandEvaluation) {
  ConvergenceBoundInputs in = Reference();
  in.e_min = 2;
  in.sigma2 = 0.3;
  in.kappa2 = 0.2;
  in.beta2 = 1.5;
  in.eta = 0.05;
  in.smoothness = 2.0;
  in.weights = {0.2, 0.8};
  const double e = 2, eta = 0.05, l = 2.0;
  const double expected = 4.0 / (e * eta * 100) + 4 * eta * l * 0.3 * (0.04 + 0.64) +
                          3 * (e - 1) * eta * eta * 0.3 * l * l +
                          6 * e * (e - 1) * eta * eta * l * l * 0.2;
  EXPECT_NEAR(ConvergenceBound(in), expected, 1e-12);
}

TEST(Bound, MonotoneOverGrid) {
  for (double sigma2 : {0.0, 0.5, 1.0}) {
    for (double kappa2 : {0.0, 0.5, 1.0}) {
      ConvergenceBoundInputs in = Reference();
      in.e_min = 2;
      in.sigma2 = sigma2;
      in.kappa2 = kappa2;
      double prev = INFINITY;
      for (int64_t t : {1, 10, 100, 1000}) {
        in.rounds = t;
        const double b = ConvergenceBound(in);
        EXPECT_LE(b, prev);
        prev = b;
      }
      ConvergenceBoundInputs more = in;
      more.sigma2 += 0.1;
      more.kappa2 += 0.1;
      EXPECT_GE(ConvergenceBound(more), ConvergenceBound(in));
    }
  }
}

TEST(Bound, RejectsLearningRateViolations) {
  ConvergenceBoundInputs in = Reference();
  in.eta = 0.6;
  try {
    ConvergenceBound(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("1/(2 E_min)"), std::string::npos);
  }
  in = Reference();
  in.e_min = 3;
  in.beta2 = 4.0;
  in.eta = 0.1;  // 0.1 <= 1/6 but > 1/sqrt(12 * 9)
  try {
    ConvergenceBound(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sqrt"), std::string::npos);
  }
}

TEST(Bound, RejectsInvalidInvariants) {
  ConvergenceBoundInputs in = Reference();
  in.beta2 = 0.5;
  EXPECT_EQ(KindOf([&] { ConvergenceBound(in); }), ErrorKind::kConfig);
  in = Reference();
  in.weights = {0.5, 0.6};
  EXPECT_EQ(KindOf([&] { ConvergenceBound(in); }), ErrorKind::kConfig);
}

TEST(Trainable, SerializationRoundTrip) {
  Rng rng(10);
  const TrainableParams p = Random(rng);
  EXPECT_EQ(DeserializeTrainable(SerializeTrainable(p)), p);
}

}  // namespace
}  // namespace fededs
