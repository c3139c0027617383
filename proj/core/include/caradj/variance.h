#ifndef CARADJ_VARIANCE_H_
#define CARADJ_VARIANCE_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caradj/data_model.h"
#include "caradj/estimators.h"
#include "caradj/randomization.h"

namespace caradj {

// Plug-in pieces of the asymptotic covariance of sqrt(n)(theta_hat - theta),
// computed from the predictions the estimator actually used.
struct VarComponents {
  int n = 0;
  Eigen::VectorXd pi;     // k, target allocation
  Eigen::VectorXd s2;     // k, within-arm sample variance of y
  Eigen::MatrixXd q;      // k x k, cov(y, mu_hat_b) over arm-a patients
  Eigen::MatrixXd sigma;  // k x k, covariance of mu_hat over all patients
  // Per stratum, the diagonals of R_Y(z) and R_X(z):
  //   ry(z, a) = (ybar_a(z) - theta_a) / pi_a
  //   rx(z, a) = (mubar_a(z) - mubar_a) / pi_a
  Eigen::MatrixXd ry;       // L x k
  Eigen::MatrixXd rx;       // L x k
  Eigen::VectorXd weights;  // L, n(z) / n
};

// Requires n_a >= 2 for every arm and at least one arm-a patient in every
// (arm, stratum) cell.
VarComponents ComputeVarComponents(const TrialDataset& d,
                                   const ThetaEstimate& est);

enum class VarianceFlavor { kRobust, kUniversal, kNaive, kJc };

std::string VarianceFlavorName(VarianceFlavor flavor);

struct CovarianceEstimate {
  Eigen::MatrixXd vhat;  // k x k, not clipped
  VarianceFlavor flavor = VarianceFlavor::kRobust;
  // Set when the finite-sample estimate has a negative diagonal entry.
  bool negative_diagonal = false;
};

// Full estimator, including the stratum correction for the scheme's Omega(z).
// Throws RefusalError when Omega is unknown.
CovarianceEstimate VhatRobust(const VarComponents& c, const OmegaSpec& omega);

// Drops the stratum correction. Valid when the stratum-conditional mean of
// y - mu is constant.
CovarianceEstimate VhatUniversal(const VarComponents& c);

// Same matrix as VhatUniversal, but labelled as the estimate that ignores
// the randomization scheme.
CovarianceEstimate VhatNaive(const VarComponents& c);

// Universal formula evaluated on the joint-calibrated predictions and
// estimate. Throws EstimationError when `est` carries no joint record.
CovarianceEstimate VhatJc(const TrialDataset& d, const ThetaEstimate& est);

// Gradient of the contrast at theta.
Eigen::VectorXd ContrastGradient(const Eigen::VectorXd& theta,
                                 const Contrast& c);

struct ContrastInference {
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;        // (estimate - null value) / se
  double p_value = 1.0;  // two-sided, normal reference
  double quad_form = 0.0;  // grad^T V grad, after diagonal clipping
  bool clipped = false;    // a negative diagonal entry was set to 0
};

// Delta-method inference for f(theta_hat): se = sqrt(grad^T V grad / n).
// Negative diagonal entries of V are clipped to 0 for this computation only.
// Throws EstimationError ("non-PSD at finite n") when the quadratic form is
// not positive.
ContrastInference DeltaSe(const CovarianceEstimate& v,
                          const ThetaEstimate& est, const Contrast& c, int n);

// n x k matrix of plug-in influence values
//   phi_a,i = I(A_i = a) / pi_a * (y_i - mu_hat_a,i - theta_a + mubar_a)
//             + mu_hat_a,i - mubar_a.
Eigen::MatrixXd InfluenceDecomposition(const TrialDataset& d,
                                       const ThetaEstimate& est);

}  // namespace caradj

#endif  // CARADJ_VARIANCE_H_
