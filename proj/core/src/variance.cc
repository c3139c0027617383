#include "caradj/variance.h"

#include <cmath>

#include "caradj/error.h"
#include "caradj/linalg.h"

namespace caradj {
namespace {

CovarianceEstimate Finish(Eigen::MatrixXd v, VarianceFlavor flavor) {
  CovarianceEstimate out;
  // Symmetrize away rounding so downstream consumers see an exact symmetric
  // matrix.
  out.vhat = 0.5 * (v + v.transpose());
  out.flavor = flavor;
  out.negative_diagonal = (out.vhat.diagonal().array() < 0.0).any();
  return out;
}

Eigen::MatrixXd UniversalMatrix(const VarComponents& c) {
  const int k = static_cast<int>(c.pi.size());
  Eigen::MatrixXd v = c.q + c.q.transpose() - c.sigma;
  for (int a = 0; a < k; ++a) {
    v(a, a) += (c.s2(a) - 2.0 * c.q(a, a) + c.sigma(a, a)) / c.pi(a);
  }
  return v;
}

}  // namespace

std::string VarianceFlavorName(VarianceFlavor flavor) {
  switch (flavor) {
    case VarianceFlavor::kRobust:
      return "robust";
    case VarianceFlavor::kUniversal:
      return "universal";
    case VarianceFlavor::kNaive:
      return "naive";
    case VarianceFlavor::kJc:
      return "jc";
  }
  return "unknown";
}

VarComponents ComputeVarComponents(const TrialDataset& d,
                                   const ThetaEstimate& est) {
  const int n = d.n();
  const int k = d.k;
  const int num_levels = d.num_strata();
  const Eigen::MatrixXd& mu = est.mu_hat;
  if (mu.rows() != n || mu.cols() != k || est.theta.size() != k) {
    throw InputError("estimate does not match the dataset dimensions");
  }

  std::vector<std::vector<int>> arm_rows(k);
  for (int i = 0; i < n; ++i) arm_rows[d.arm[i]].push_back(i);
  for (int a = 0; a < k; ++a) {
    if (arm_rows[a].size() < 2) {
      throw EstimationError("arm " + std::to_string(a + 1) +
                            " needs at least 2 patients for variance estimation");
    }
  }

  VarComponents c;
  c.n = n;
  c.pi = d.pi;
  c.s2.resize(k);
  c.q.resize(k, k);
  for (int a = 0; a < k; ++a) {
    const int m = static_cast<int>(arm_rows[a].size());
    Eigen::VectorXd y(m);
    Eigen::MatrixXd mu_a(m, k);
    for (int t = 0; t < m; ++t) {
      y(t) = d.response(arm_rows[a][t]);
      mu_a.row(t) = mu.row(arm_rows[a][t]);
    }
    c.s2(a) = SampleCovariance(y, y);
    for (int b = 0; b < k; ++b) c.q(a, b) = SampleCovariance(y, mu_a.col(b));
  }
  c.sigma = SampleCovarianceMatrix(mu);

  const Eigen::VectorXd mu_bar = mu.colwise().mean().transpose();
  Eigen::MatrixXd y_sum = Eigen::MatrixXd::Zero(num_levels, k);
  Eigen::MatrixXi y_count = Eigen::MatrixXi::Zero(num_levels, k);
  Eigen::MatrixXd mu_sum = Eigen::MatrixXd::Zero(num_levels, k);
  Eigen::VectorXi level_count = Eigen::VectorXi::Zero(num_levels);
  for (int i = 0; i < n; ++i) {
    const int z = d.baseline.stratum[i];
    y_sum(z, d.arm[i]) += d.response(i);
    ++y_count(z, d.arm[i]);
    mu_sum.row(z) += mu.row(i);
    ++level_count(z);
  }
  c.ry.resize(num_levels, k);
  c.rx.resize(num_levels, k);
  c.weights.resize(num_levels);
  for (int z = 0; z < num_levels; ++z) {
    if (level_count(z) == 0) {
      throw EstimationError("stratum " + d.baseline.stratum_labels[z] +
                            " has no patients");
    }
    c.weights(z) = static_cast<double>(level_count(z)) / n;
    for (int a = 0; a < k; ++a) {
      if (y_count(z, a) == 0) {
        throw EstimationError("empty (arm, stratum) cell: arm " +
                              std::to_string(a + 1) + ", stratum " +
                              d.baseline.stratum_labels[z]);
      }
      c.ry(z, a) = (y_sum(z, a) / y_count(z, a) - est.theta(a)) / d.pi(a);
      c.rx(z, a) = (mu_sum(z, a) / level_count(z) - mu_bar(a)) / d.pi(a);
    }
  }
  return c;
}

CovarianceEstimate VhatRobust(const VarComponents& c, const OmegaSpec& omega) {
  Eigen::MatrixXd v = UniversalMatrix(c);
  for (int z = 0; z < c.weights.size(); ++z) {
    const Eigen::MatrixXd& omega_z = omega.ForStratum(z);
    const Eigen::VectorXd r = (c.ry.row(z) - c.rx.row(z)).transpose();
    v -= c.weights(z) *
         (r.asDiagonal() * (omega.omega_sr - omega_z) * r.asDiagonal());
  }
  return Finish(std::move(v), VarianceFlavor::kRobust);
}

CovarianceEstimate VhatUniversal(const VarComponents& c) {
  return Finish(UniversalMatrix(c), VarianceFlavor::kUniversal);
}

CovarianceEstimate VhatNaive(const VarComponents& c) {
  return Finish(UniversalMatrix(c), VarianceFlavor::kNaive);
}

CovarianceEstimate VhatJc(const TrialDataset& d, const ThetaEstimate& est) {
  if (!est.joint.has_value()) {
    throw EstimationError("joint-calibration variance needs a joint record");
  }
  return Finish(UniversalMatrix(ComputeVarComponents(d, est)),
                VarianceFlavor::kJc);
}

Eigen::VectorXd ContrastGradient(const Eigen::VectorXd& theta,
                                 const Contrast& c) {
  const int k = static_cast<int>(theta.size());
  c.Validate(k);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
  switch (c.kind()) {
    case Contrast::Kind::kDifference:
      g(c.b()) += 1.0;
      g(c.a()) -= 1.0;
      break;
    case Contrast::Kind::kLinear:
      g = c.weights();
      break;
    case Contrast::Kind::kRiskRatio:
      if (theta(c.a()) == 0.0) {
        throw EstimationError("ratio gradient needs a nonzero denominator");
      }
      g(c.a()) = -theta(c.b()) / (theta(c.a()) * theta(c.a()));
      g(c.b()) += 1.0 / theta(c.a());
      break;
    case Contrast::Kind::kLogRatio:
      if (theta(c.a()) == 0.0 || theta(c.b()) == 0.0) {
        throw EstimationError("log-ratio gradient needs nonzero arm means");
      }
      g(c.a()) = -1.0 / theta(c.a());
      g(c.b()) += 1.0 / theta(c.b());
      break;
  }
  if (!g.allFinite()) throw EstimationError("contrast gradient is not finite");
  return g;
}

ContrastInference DeltaSe(const CovarianceEstimate& v,
                          const ThetaEstimate& est, const Contrast& c, int n) {
  if (n < 1) throw InputError("sample size must be positive");
  ContrastInference out;
  out.estimate = EvaluateContrast(est, c);
  const Eigen::VectorXd g = ContrastGradient(est.theta, c);
  Eigen::MatrixXd clipped = v.vhat;
  for (int a = 0; a < clipped.rows(); ++a) {
    if (clipped(a, a) < 0.0) {
      clipped(a, a) = 0.0;
      out.clipped = true;
    }
  }
  out.quad_form = g.dot(clipped * g);
  if (!(out.quad_form > 0.0)) {
    throw EstimationError("variance quadratic form is not positive (non-PSD at finite n)");
  }
  out.se = std::sqrt(out.quad_form / n);
  out.z = (out.estimate - c.NullValue()) / out.se;
  out.p_value = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  return out;
}

Eigen::MatrixXd InfluenceDecomposition(const TrialDataset& d,
                                       const ThetaEstimate& est) {
  const Eigen::MatrixXd& mu = est.mu_hat;
  if (mu.rows() != d.n() || mu.cols() != d.k) {
    throw InputError("estimate does not match the dataset dimensions");
  }
  const Eigen::VectorXd mu_bar = mu.colwise().mean().transpose();
  Eigen::MatrixXd phi(d.n(), d.k);
  for (int i = 0; i < d.n(); ++i) {
    for (int a = 0; a < d.k; ++a) {
      phi(i, a) = mu(i, a) - mu_bar(a);
      if (d.arm[i] == a) {
        phi(i, a) += (d.response(i) - mu(i, a) - est.theta(a) + mu_bar(a)) /
                     d.pi(a);
      }
    }
  }
  return phi;
}

}  // namespace caradj
