#include <cmath>

#include <gtest/gtest.h>

#include "caradj/error.h"
#include "caradj/randomization.h"
#include "test_util.h"

namespace caradj {
namespace {

Eigen::VectorXd Pi(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(SchemeSpecTest, Validation) {
  EXPECT_NO_THROW(SchemeSpec::PermutedBlock(Pi({1.0 / 3, 2.0 / 3}), 6).Validate());
  EXPECT_THROW(SchemeSpec::PermutedBlock(Pi({1.0 / 3, 2.0 / 3}), 4).Validate(),
               InputError);
  EXPECT_THROW(SchemeSpec::Minimization(Pi({0.5, 0.5}), 0.5).Validate(),
               InputError);
  EXPECT_NO_THROW(SchemeSpec::Minimization(Pi({0.5, 0.5}), 1.0).Validate());
  EXPECT_EQ(SchemeSpec::PermutedBlock(Pi({1.0 / 3, 2.0 / 3}), 6).BlockComposition(),
            (std::vector<int>{2, 4}));
  EXPECT_EQ(ParseSchemeKind("pocock_simon"), SchemeKind::kMinimization);
  EXPECT_THROW(ParseSchemeKind("urn"), InputError);
}

TEST(SchemeStateTest, SimpleMatchesPi) {
  SchemeState state(SchemeSpec::Simple(Pi({1.0 / 3, 2.0 / 3})), 42);
  int arm0 = 0;
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) arm0 += state.AssignNext(0) == 0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(arm0) / draws, 1.0 / 3, 0.01);
}

TEST(SchemeStateTest, PermutedBlockPrefixBound) {
  const SchemeSpec spec = SchemeSpec::PermutedBlock(Pi({0.5, 0.5}), 6);
  SchemeState state(spec, 3);
  std::vector<int> n(4, 0), n1(4, 0);
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) {
    const int z = UniformIndex(rng, 4);
    const int a = state.AssignNext(z);
    ++n[z];
    n1[z] += a == 0 ? 1 : 0;
    ASSERT_LE(std::abs(n1[z] - n[z] / 2.0), 6.0);
    if (n[z] % 6 == 0) ASSERT_EQ(n1[z] * 2, n[z]);
  }
}

TEST(SchemeStateTest, PermutedBlockUnequalAllocationCompletesBlocks) {
  const SchemeSpec spec = SchemeSpec::PermutedBlock(Pi({1.0 / 3, 2.0 / 3}), 6);
  SchemeState state(spec, 5);
  int arm0 = 0;
  for (int i = 1; i <= 600; ++i) {
    arm0 += state.AssignNext(0) == 0 ? 1 : 0;
    if (i % 6 == 0) ASSERT_EQ(arm0 * 3, i);
  }
}

TEST(SchemeStateTest, MinimizationFirstPatientIsUniform) {
  const SchemeSpec spec = SchemeSpec::Minimization(Pi({0.5, 0.5}));
  int arm0 = 0;
  const int trials = 20000;
  const std::vector<int> margins = {0, 1};
  for (int s = 0; s < trials; ++s) {
    SchemeState state(spec, DeriveSeed(77, s));
    arm0 += state.AssignNext(0, margins) == 0 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(arm0) / trials, 0.5, 0.015);
}

TEST(SchemeStateTest, MinimizationSecondPatientFollowsBiasedCoin) {
  const SchemeSpec spec = SchemeSpec::Minimization(Pi({0.5, 0.5}), 0.8);
  int opposite = 0;
  const int trials = 20000;
  const std::vector<int> margins = {1, 0};
  for (int s = 0; s < trials; ++s) {
    SchemeState state(spec, DeriveSeed(78, s));
    const int first = state.AssignNext(0, margins);
    opposite += state.AssignNext(0, margins) != first ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(opposite) / trials, 0.8, 0.015);
}

// Replays the same patient stream and draws the same assignments.
TEST(SchemeStateTest, AssignmentsAreReproducible) {
  Rng rng(1);
  const TrialDataset d = testing::RandomDataset(300, 2, 1, rng);
  for (const SchemeSpec& spec :
       {SchemeSpec::Simple(Pi({0.5, 0.5})),
        SchemeSpec::PermutedBlock(Pi({0.5, 0.5}), 4),
        SchemeSpec::Minimization(Pi({0.5, 0.5}))}) {
    EXPECT_EQ(AssignAll(spec, d.baseline, 99), AssignAll(spec, d.baseline, 99));
    EXPECT_NE(AssignAll(spec, d.baseline, 99), AssignAll(spec, d.baseline, 100));
  }
}

TEST(SchemeStateTest, MarginalAllocationAcrossSeedsMatchesPi) {
  Rng rng(2);
  // Minimization with unequal pi carries an O(1) start-up excess, so the
  // trial must be long for the marginal fraction to settle.
  TrialDataset d = testing::RandomDataset(600, 2, 1, rng);
  const Eigen::VectorXd pi = Pi({1.0 / 3, 2.0 / 3});
  for (const SchemeSpec& spec :
       {SchemeSpec::Simple(pi), SchemeSpec::PermutedBlock(pi, 6),
        SchemeSpec::Minimization(pi)}) {
    double arm0 = 0.0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
      for (int a : AssignAll(spec, d.baseline, DeriveSeed(5, s))) {
        arm0 += a == 0 ? 1.0 : 0.0;
      }
    }
    EXPECT_NEAR(arm0 / (seeds * 600.0), 1.0 / 3, 0.005) << SchemeName(spec.kind);
  }
}

// Within-margin imbalance grows like sqrt(n) under simple randomization and
// stays bounded under minimization.
TEST(SchemeStateTest, MinimizationKeepsMarginsBalanced) {
  Rng rng(3);
  double simple_range = 0.0, minimization_range = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const TrialDataset d = testing::RandomDataset(2000, 2, 1, rng);
    Baseline b = d.baseline;
    std::vector<std::string> m1(2000), m2(2000);
    for (int i = 0; i < 2000; ++i) {
      m1[i] = b.covariates(i, 0) > 0 ? "hi" : "lo";
      m2[i] = i % 3 == 0 ? "a" : "b";
    }
    AssignJointStrata({m1, m2}, b);
    auto range = [&](const std::vector<int>& arms) {
      double worst = 0.0;
      for (int j = 0; j < 2; ++j) {
        for (int level = 0; level < b.margin_cardinality[j]; ++level) {
          int diff = 0;
          for (int i = 0; i < 2000; ++i) {
            if (b.margins(i, j) == level) diff += arms[i] == 0 ? 1 : -1;
          }
          worst = std::max(worst, std::abs(static_cast<double>(diff)));
        }
      }
      return worst;
    };
    simple_range += range(AssignAll(SchemeSpec::Simple(Pi({0.5, 0.5})), b, rep));
    minimization_range +=
        range(AssignAll(SchemeSpec::Minimization(Pi({0.5, 0.5})), b, rep));
  }
  EXPECT_LT(minimization_range, simple_range);
  EXPECT_LT(minimization_range / 20, 10.0);
}

TEST(OmegaTest, SimpleRandomizationExamples) {
  const Eigen::MatrixXd half = SimpleRandomizationCovariance(Pi({0.5, 0.5}));
  EXPECT_DOUBLE_EQ(half(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(half(0, 1), -0.25);
  const Eigen::MatrixXd third =
      SimpleRandomizationCovariance(Pi({1.0 / 3, 2.0 / 3}));
  EXPECT_NEAR(third(0, 0), 2.0 / 9, 1e-15);
  EXPECT_NEAR(third(1, 0), -2.0 / 9, 1e-15);
  EXPECT_NEAR(third(1, 1), 2.0 / 9, 1e-15);
}

TEST(OmegaTest, PerScheme) {
  const Eigen::VectorXd pi = Pi({0.5, 0.5});
  const OmegaSpec simple = OmegaFor(SchemeSpec::Simple(pi));
  EXPECT_EQ(simple.ForStratum(3), simple.omega_sr);
  const OmegaSpec block = OmegaFor(SchemeSpec::PermutedBlock(pi, 6));
  EXPECT_EQ(block.ForStratum(0), Eigen::MatrixXd::Zero(2, 2));
  const OmegaSpec minimization = OmegaFor(SchemeSpec::Minimization(pi));
  EXPECT_FALSE(minimization.known);
  try {
    minimization.ForStratum(0);
    FAIL() << "expected a refusal";
  } catch (const RefusalError& e) {
    EXPECT_FALSE(e.alternatives().empty());
  }
}

TEST(OmegaTest, RandomPiIsPsdWithZeroRowSums) {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + UniformIndex(rng, 4);
    Eigen::VectorXd pi(k);
    for (int a = 0; a < k; ++a) pi(a) = 0.05 + Uniform01(rng);
    pi /= pi.sum();
    const Eigen::MatrixXd omega = SimpleRandomizationCovariance(pi);
    EXPECT_LE(omega.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((omega - omega.transpose()).cwiseAbs().maxCoeff(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(AllocationCheckTest, PermutedBlockBoundAndSimpleStatistic) {
  Rng rng(4);
  TrialDataset d = testing::RandomDataset(600, 2, 1, rng);
  AssignJointStrata({}, d.baseline);
  const SchemeSpec block = SchemeSpec::PermutedBlock(Pi({0.5, 0.5}), 6);
  d.arm = AssignAll(block, d.baseline, 8);
  const AllocationCheck check = CheckAllocationRate(d, block);
  EXPECT_LE(check.max_count_deviation, 6.0);

  TrialDataset big = testing::RandomDataset(10000, 2, 1, rng);
  AssignJointStrata({}, big.baseline);
  const SchemeSpec simple = SchemeSpec::Simple(Pi({0.5, 0.5}));
  big.arm = AssignAll(simple, big.baseline, 8);
  const AllocationCheck s = CheckAllocationRate(big, simple);
  EXPECT_LE(std::abs(s.stats(0, 0)), 4.0 * 0.5);
}

TEST(AllocationCheckTest, CorruptedBlockIsDetected) {
  Rng rng(4);
  TrialDataset d = testing::RandomDataset(60, 2, 1, rng);
  AssignJointStrata({}, d.baseline);
  std::fill(d.arm.begin(), d.arm.end(), 0);
  d.arm[0] = 1;
  EXPECT_THROW(CheckAllocationRate(d, SchemeSpec::PermutedBlock(Pi({0.5, 0.5}), 6)),
               EstimationError);
}

TEST(AllocationCheckTest, SinglePatientStratumIsFinite) {
  TrialDataset d = testing::MakeDataset({0, 1, 0}, {1, 2, 3}, {"a", "a", "b"},
                                        Eigen::MatrixXd(3, 0), Pi({0.5, 0.5}));
  const AllocationCheck check =
      CheckAllocationRate(d, SchemeSpec::Simple(Pi({0.5, 0.5})));
  EXPECT_TRUE(check.stats.allFinite());
}

}  // namespace
}  // namespace caradj
