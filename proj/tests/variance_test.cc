#include <cmath>

#include <gtest/gtest.h>

#include "caradj/error.h"
#include "caradj/estimators.h"
#include "caradj/variance.h"
#include "test_util.h"

namespace caradj {
namespace {

WorkingModelSpec Spec(ModelFamily family) {
  WorkingModelSpec s;
  s.family = family;
  return s;
}

Eigen::VectorXd Vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double Cov(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / (x.size() - 1.0);
}

// Direct loop evaluation of the robust covariance estimate.
Eigen::MatrixXd BruteForceRobust(const TrialDataset& d, const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& mu,
                                 const Eigen::MatrixXd& omega_sr,
                                 const Eigen::MatrixXd& omega_z) {
  const int n = d.n(), k = d.k;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      std::vector<double> ya, mua_b, mub_a, all_a, all_b;
      for (int i = 0; i < n; ++i) {
        all_a.push_back(mu(i, a));
        all_b.push_back(mu(i, b));
      }
      std::vector<double> yb, mub_at_b;
      for (int i = 0; i < n; ++i) {
        if (d.arm[i] == a) {
          ya.push_back(d.response(i));
          mua_b.push_back(mu(i, b));
        }
        if (d.arm[i] == b) {
          yb.push_back(d.response(i));
          mub_at_b.push_back(mu(i, a));
        }
      }
      const double qab = Cov(ya, mua_b);
      const double qba = Cov(yb, mub_at_b);
      v(a, b) = qab + qba - Cov(all_a, all_b);
      if (a == b) {
        std::vector<double> mu_a;
        for (int i = 0; i < n; ++i) {
          if (d.arm[i] == a) mu_a.push_back(mu(i, a));
        }
        v(a, a) += (Cov(ya, ya) - 2.0 * Cov(ya, mu_a) + Cov(all_a, all_a)) / d.pi(a);
      }
    }
  }
  for (int z = 0; z < d.num_strata(); ++z) {
    double nz = 0.0;
    Eigen::VectorXd r(k);
    for (int a = 0; a < k; ++a) {
      double ys = 0.0, yn = 0.0, ms = 0.0, mall = 0.0;
      nz = 0.0;
      for (int i = 0; i < n; ++i) {
        mall += mu(i, a) / n;
        if (d.baseline.stratum[i] != z) continue;
        nz += 1.0;
        ms += mu(i, a);
        if (d.arm[i] == a) {
          ys += d.response(i);
          yn += 1.0;
        }
      }
      r(a) = (ys / yn - theta(a)) / d.pi(a) - (ms / nz - mall) / d.pi(a);
    }
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        v(a, b) -= nz / n * r(a) * (omega_sr(a, b) - omega_z(a, b)) * r(b);
      }
    }
  }
  return v;
}

TrialDataset SixPatients() {
  Eigen::MatrixXd x(6, 1);
  x << 0.3, -1.2, 0.8, 2.0, -0.4, 1.1;
  return testing::MakeDataset({0, 1, 0, 1, 0, 1}, {1.5, 2.0, 0.7, 3.9, 1.1, 2.6},
                              {"a", "a", "a", "b", "b", "b"}, x, EqualAllocation(2));
}

TEST(VarComponentsTest, ZeroModelHasNoCovarianceTerms) {
  Rng rng(1);
  const TrialDataset d = testing::RandomDataset(60, 3, 1, rng);
  const VarComponents c = ComputeVarComponents(d, SampleMean(d));
  EXPECT_EQ(c.q, Eigen::MatrixXd::Zero(3, 3));
  EXPECT_EQ(c.sigma, Eigen::MatrixXd::Zero(3, 3));
  EXPECT_EQ(c.rx, Eigen::MatrixXd::Zero(2, 3));
  EXPECT_NEAR(c.weights.sum(), 1.0, 1e-15);
}

TEST(VarComponentsTest, ConstantResponseHasZeroVariance) {
  const TrialDataset d = testing::MakeDataset({0, 1, 0, 1}, {2, 2, 2, 2}, {},
                                              Eigen::MatrixXd(4, 0),
                                              EqualAllocation(2));
  const VarComponents c = ComputeVarComponents(d, SampleMean(d));
  EXPECT_EQ(c.s2, Eigen::VectorXd::Zero(2));
}

TEST(VarComponentsTest, Errors) {
  const TrialDataset lonely = testing::MakeDataset(
      {0, 0, 1}, {1, 2, 3}, {}, Eigen::MatrixXd(3, 0), EqualAllocation(2));
  EXPECT_THROW(ComputeVarComponents(lonely, SampleMean(lonely)), EstimationError);
  const TrialDataset empty_cell = testing::MakeDataset(
      {0, 1, 0, 0, 1, 0}, {1, 2, 3, 4, 5, 6}, {"a", "a", "a", "b", "a", "b"},
      Eigen::MatrixXd(6, 0), EqualAllocation(2));
  try {
    ComputeVarComponents(empty_cell, SampleMean(empty_cell));
    FAIL() << "expected an empty-cell error";
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty (arm, stratum) cell"),
              std::string::npos);
  }
}

TEST(VhatTest, SixPatientBruteForce) {
  const TrialDataset d = SixPatients();
  const ThetaEstimate est = Aipw(d, Fit(Spec(ModelFamily::kZero), d));
  Eigen::MatrixXd mu(6, 2);
  mu << 0.2, 0.9, -0.5, 1.4, 0.6, 0.1, 1.3, 2.2, 0.0, -0.7, 0.8, 1.9;
  const ThetaEstimate aipw = Aipw(d, mu);
  const Eigen::VectorXd pi = EqualAllocation(2);
  for (const SchemeSpec& scheme :
       {SchemeSpec::Simple(pi), SchemeSpec::PermutedBlock(pi, 4)}) {
    const OmegaSpec omega = OmegaFor(scheme);
    for (const ThetaEstimate* e : {&est, &aipw}) {
      const Eigen::MatrixXd expected =
          BruteForceRobust(d, e->theta, e->mu_hat, omega.omega_sr, omega.common);
      const Eigen::MatrixXd got = VhatRobust(ComputeVarComponents(d, *e), omega).vhat;
      EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12)
          << SchemeName(scheme.kind) << "\n" << got << "\n" << expected;
    }
  }
}

TEST(VhatTest, RobustEqualsUniversalUnderSimpleRandomization) {
  Rng rng(2);
  const TrialDataset d = testing::RandomDataset(200, 3, 2, rng);
  const ThetaEstimate est = Aipw(d, Fit(Spec(ModelFamily::kLinear), d));
  const VarComponents c = ComputeVarComponents(d, est);
  const Eigen::MatrixXd robust =
      VhatRobust(c, OmegaFor(SchemeSpec::Simple(d.pi))).vhat;
  EXPECT_LE((robust - VhatUniversal(c).vhat).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(VhatNaive(c).vhat, VhatUniversal(c).vhat);
  EXPECT_EQ(VhatNaive(c).flavor, VarianceFlavor::kNaive);
}

TEST(VhatTest, ZeroModelUniversalIsScaledArmVariances) {
  Rng rng(3);
  const TrialDataset d = testing::RandomDataset(80, 2, 0, rng);
  const VarComponents c = ComputeVarComponents(d, SampleMean(d));
  const Eigen::MatrixXd v = VhatUniversal(c).vhat;
  EXPECT_NEAR(v(0, 0), c.s2(0) / 0.5, 1e-14);
  EXPECT_NEAR(v(1, 1), c.s2(1) / 0.5, 1e-14);
  EXPECT_EQ(v(0, 1), 0.0);
}

TEST(VhatTest, PermutedBlockNeverExceedsSimpleForTheMean) {
  Rng rng(4);
  const TrialDataset d = testing::RandomDataset(300, 2, 1, rng);
  const VarComponents c = ComputeVarComponents(d, SampleMean(d));
  const Eigen::MatrixXd block =
      VhatRobust(c, OmegaFor(SchemeSpec::PermutedBlock(d.pi, 4))).vhat;
  const Eigen::MatrixXd simple = VhatUniversal(c).vhat;
  Eigen::VectorXd g = Vec({-1.0, 1.0});
  EXPECT_LE(g.dot(block * g), g.dot(simple * g));
}

TEST(VhatTest, RobustIsRefusedUnderMinimization) {
  Rng rng(5);
  const TrialDataset d = testing::RandomDataset(60, 2, 1, rng);
  EXPECT_THROW(VhatRobust(ComputeVarComponents(d, SampleMean(d)),
                          OmegaFor(SchemeSpec::Minimization(d.pi))),
               RefusalError);
}

TEST(VhatTest, InvariantToConstantShiftOfPredictions) {
  Rng rng(6);
  const TrialDataset d = testing::RandomDataset(120, 2, 2, rng);
  const ThetaEstimate est = Aipw(d, Fit(Spec(ModelFamily::kLinear), d));
  ThetaEstimate shifted = est;
  shifted.mu_hat.col(1).array() += 4.5;
  const OmegaSpec omega = OmegaFor(SchemeSpec::PermutedBlock(d.pi, 4));
  EXPECT_LE((VhatRobust(ComputeVarComponents(d, est), omega).vhat -
             VhatRobust(ComputeVarComponents(d, shifted), omega).vhat)
                .cwiseAbs()
                .maxCoeff(),
            1e-11);
}

TEST(VhatJcTest, NeedsJointRecord) {
  Rng rng(7);
  const TrialDataset d = testing::RandomDataset(60, 2, 1, rng);
  EXPECT_THROW(VhatJc(d, SampleMean(d)), EstimationError);
}

TEST(VhatJcTest, UniversalFormulaOnCalibratedPredictions) {
  Rng rng(8);
  const TrialDataset d = testing::RandomDataset(200, 2, 2, rng, true);
  const ThetaEstimate jc =
      JointCalibrate(d, Fit(Spec(ModelFamily::kLogistic), d).Predict(d.baseline));
  const CovarianceEstimate v = VhatJc(d, jc);
  EXPECT_EQ(v.flavor, VarianceFlavor::kJc);
  EXPECT_LE((v.vhat - VhatUniversal(ComputeVarComponents(d, jc)).vhat)
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
}

TEST(VhatJcTest, ResidualsAreOrthogonalToRegressors) {
  Rng rng(9);
  const TrialDataset d = testing::RandomDataset(150, 3, 2, rng);
  const ThetaEstimate jc =
      JointCalibrate(d, Fit(Spec(ModelFamily::kLinear), d).Predict(d.baseline));
  const JointCalibrationRecord& rec = *jc.joint;
  for (int a = 0; a < d.k; ++a) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(rec.w.cols() + 1);
    for (int i = 0; i < d.n(); ++i) {
      if (d.arm[i] != a) continue;
      const double r = d.response(i) - jc.mu_hat(i, a) - rec.intercepts(a);
      score(0) += r;
      score.tail(rec.w.cols()) += r * rec.w.row(i).transpose();
    }
    EXPECT_LE(score.cwiseAbs().maxCoeff(), 1e-8) << "arm " << a;
  }
}

TEST(DeltaSeTest, WorkedDifference) {
  CovarianceEstimate v;
  v.vhat.resize(2, 2);
  v.vhat << 4, 1, 1, 4;
  ThetaEstimate est;
  est.theta = Vec({1.0, 1.5});
  const ContrastInference inf = DeltaSe(v, est, Contrast::Difference(0, 1), 100);
  EXPECT_NEAR(inf.se, std::sqrt(0.06), 1e-15);
  EXPECT_NEAR(inf.se, 0.2449, 1e-4);
  EXPECT_DOUBLE_EQ(inf.estimate, 0.5);
  EXPECT_NEAR(inf.p_value, std::erfc(0.5 / inf.se / std::sqrt(2.0)), 1e-15);
  EXPECT_FALSE(inf.clipped);
}

TEST(DeltaSeTest, LogRatioSeIsRatioSeOverRatio) {
  CovarianceEstimate v;
  v.vhat.resize(2, 2);
  v.vhat << 0.3, 0.05, 0.05, 0.4;
  ThetaEstimate est;
  est.theta = Vec({0.2, 0.35});
  const double rr = DeltaSe(v, est, Contrast::RiskRatio(0, 1), 500).se;
  const double lr = DeltaSe(v, est, Contrast::LogRatio(0, 1), 500).se;
  EXPECT_NEAR(lr, rr / (0.35 / 0.2), 1e-14);
}

TEST(DeltaSeTest, NonPositiveQuadraticFormIsAnError) {
  CovarianceEstimate v;
  v.vhat.resize(2, 2);
  v.vhat << 1, 2, 2, 1;
  ThetaEstimate est;
  est.theta = Vec({1.0, 2.0});
  EXPECT_THROW(DeltaSe(v, est, Contrast::Difference(0, 1), 10), EstimationError);
}

TEST(DeltaSeTest, NegativeDiagonalIsClippedForTheSeOnly) {
  CovarianceEstimate v;
  v.vhat.resize(2, 2);
  v.vhat << -1, 0, 0, 1;
  ThetaEstimate est;
  est.theta = Vec({1.0, 2.0});
  const ContrastInference inf = DeltaSe(v, est, Contrast::Difference(0, 1), 4);
  EXPECT_TRUE(inf.clipped);
  EXPECT_DOUBLE_EQ(inf.quad_form, 1.0);
  EXPECT_DOUBLE_EQ(inf.se, 0.5);
  EXPECT_EQ(v.vhat(0, 0), -1.0);
}

TEST(ContrastGradientTest, MatchesFiniteDifferences) {
  const Eigen::VectorXd theta = Vec({0.3, 0.55, 0.8});
  const std::vector<Contrast> contrasts = {
      Contrast::Difference(0, 2), Contrast::Linear(Vec({0.5, -1.0, 0.5})),
      Contrast::RiskRatio(1, 0), Contrast::LogRatio(2, 1)};
  for (const Contrast& c : contrasts) {
    const Eigen::VectorXd g = ContrastGradient(theta, c);
    for (int a = 0; a < 3; ++a) {
      const double h = 1e-6;
      Eigen::VectorXd up = theta, down = theta;
      up(a) += h;
      down(a) -= h;
      const double fd =
          (EvaluateContrast(up, c) - EvaluateContrast(down, c)) / (2.0 * h);
      EXPECT_NEAR(g(a), fd, 1e-7);
    }
  }
}

TEST(InfluenceTest, ColumnsAreCentredAndCovarianceMatchesVhat) {
  Rng rng(10);
  const TrialDataset d = testing::RandomDataset(5000, 2, 2, rng);
  const ThetaEstimate est = Aipw(d, Fit(Spec(ModelFamily::kLinear), d));
  const Eigen::MatrixXd phi = InfluenceDecomposition(d, est);
  EXPECT_LE(phi.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::MatrixXd centred = phi.rowwise() - phi.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / (d.n() - 1.0);
  const Eigen::MatrixXd v = VhatUniversal(ComputeVarComponents(d, est)).vhat;
  EXPECT_LE((cov - v).cwiseAbs().maxCoeff(), 0.05 * v.cwiseAbs().maxCoeff())
      << cov << "\n" << v;
}

TEST(InfluenceTest, ZeroModelForm) {
  const TrialDataset d = SixPatients();
  const ThetaEstimate est = SampleMean(d);
  const Eigen::MatrixXd phi = InfluenceDecomposition(d, est);
  for (int i = 0; i < d.n(); ++i) {
    for (int a = 0; a < 2; ++a) {
      const double expected =
          d.arm[i] == a ? (d.response(i) - est.theta(a)) / 0.5 : 0.0;
      EXPECT_NEAR(phi(i, a), expected, 1e-14);
    }
  }
}

}  // namespace
}  // namespace caradj
