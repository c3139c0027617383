#ifndef CARADJ_GLM_H_
#define CARADJ_GLM_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace caradj {

// Gaussian, logistic and Poisson use their canonical links (identity, logit,
// log). The negative binomial uses the log link, which is not canonical for
// that family.
enum class GlmFamily { kGaussian, kLogistic, kPoisson, kNegativeBinomial };

std::string GlmFamilyName(GlmFamily family);

struct GlmOptions {
  // Converged when max_j |score_j| / n <= tolerance * max(1, S), where S is
  // the same norm taken over the absolute values of the summed terms.
  double tolerance = 1e-10;
  int max_iterations = 100;
  // Added to the weighted Gram diagonal when it is numerically singular.
  double ridge = 1e-8;
  // Coefficient norm beyond which a logistic fit reports quasi-separation.
  double separation_norm = 1e6;
  // Negative binomial dispersion alpha (Var = mu + alpha mu^2) floor.
  double min_dispersion = 1e-6;
  int max_dispersion_rounds = 50;
};

struct GlmFit {
  Eigen::VectorXd coefficients;   // one per design column; dropped are 0
  std::vector<int> dropped_columns;
  int iterations = 0;
  double gradient_norm = 0.0;     // max_j |score_j| / n at the solution
  bool used_ridge = false;
  double dispersion = 0.0;        // negative binomial alpha; 0 otherwise
  // Deviance after each IRLS iteration of the final mean-coefficient solve.
  std::vector<double> deviance_trace;
};

// Fits the GLM of y on `design` (which must carry its own intercept column
// if one is wanted) by iteratively reweighted least squares with
// step-halving. Collinear design columns are pruned first.
//
// Throws ConvergenceError when the tolerance is not met within
// max_iterations, EstimationError("quasi-separation ...") when logistic
// coefficients diverge, and EstimationError when the weighted Gram matrix
// stays singular after the ridge fallback.
GlmFit FitGlm(GlmFamily family, const Eigen::MatrixXd& design,
              const Eigen::VectorXd& y, const GlmOptions& options = {});

// g^{-1}(eta) elementwise.
Eigen::VectorXd InverseLink(GlmFamily family, const Eigen::VectorXd& eta);

// Deviance of mean vector mu; `dispersion` is used by the negative binomial.
double Deviance(GlmFamily family, const Eigen::VectorXd& y,
                const Eigen::VectorXd& mu, double dispersion = 0.0);

}  // namespace caradj

#endif  // CARADJ_GLM_H_
