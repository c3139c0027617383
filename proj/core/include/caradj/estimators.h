#ifndef CARADJ_ESTIMATORS_H_
#define CARADJ_ESTIMATORS_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caradj/data_model.h"
#include "caradj/rng.h"
#include "caradj/working_models.h"

namespace caradj {

// Coefficients of the per-arm regression of y on (1, W_hat) with
// W_hat = (strata indicators, mu_hat(X)).
struct JointCalibrationRecord {
  std::vector<std::string> regressors;  // names of the W_hat columns
  Eigen::MatrixXd w;                    // n x p regressor matrix W_hat
  Eigen::MatrixXd gamma;                // p x k; column a is gamma_hat_a
  Eigen::VectorXd intercepts;           // k
  // Regressors pruned for collinearity, per arm.
  std::vector<std::vector<std::string>> dropped;
};

struct ThetaEstimate {
  Eigen::VectorXd theta;
  std::string method;
  // n x k predictions that entered the estimator. For cross-fitting, the
  // out-of-fold predictions stitched into one matrix.
  Eigen::MatrixXd mu_hat;
  std::vector<int> folds;  // cross-fit only
  std::optional<JointCalibrationRecord> joint;
  // Linear calibration: k x k matrix whose column a is gamma_tilde_a.
  std::optional<Eigen::MatrixXd> linear_gamma;
};

// Random partition of {0..n-1} into J folds whose sizes differ by at most 1.
struct FoldPlan {
  int folds = 0;
  std::vector<int> fold_of;

  static FoldPlan Random(int n, int folds, Rng& rng);

  std::vector<int> Members(int j) const;
  std::vector<int> Complement(int j) const;
};

// Arm fraction used inside the cross-fitted summand: the within-fold
// fraction n_a^(j) / n^(j) (default) or the whole-sample fraction n_a / n.
// Both give the same influence function.
enum class PiMode { kFoldSpecific, kWholeSample };

ThetaEstimate SampleMean(const TrialDataset& d);

// theta_a = mean over all patients of mu_hat_a(X_i).
ThetaEstimate GComputation(const TrialDataset& d, const Eigen::MatrixXd& mu_hat);

// theta_a = ybar_a - mean_{A_i = a} mu_hat_a(X_i) + mean_i mu_hat_a(X_i).
ThetaEstimate Aipw(const TrialDataset& d, const Eigen::MatrixXd& mu_hat);
ThetaEstimate Aipw(const TrialDataset& d, const WorkingModelFit& fit);

// Fits a model on the given training rows for fold `fold`.
using FoldFitter =
    std::function<WorkingModelFit(std::span<const int> training_rows, int fold)>;

ThetaEstimate CrossFitAipw(const TrialDataset& d, const FoldFitter& fitter,
                           const FoldPlan& plan,
                           PiMode pi_mode = PiMode::kFoldSpecific);
ThetaEstimate CrossFitAipw(const TrialDataset& d, const WorkingModelSpec& spec,
                           const FoldPlan& plan,
                           PiMode pi_mode = PiMode::kFoldSpecific);

// Per-arm OLS of y on (1, mu_hat_1, ..., mu_hat_k) over arm-a patients after
// collinearity pruning. Returns k x k gamma (column a for arm a, pruned
// entries 0); replacement predictions are mu_hat * gamma. The intercept is
// dropped because the AIPW estimator is invariant to constant shifts.
Eigen::MatrixXd LinearCalibrationCoefficients(const TrialDataset& d,
                                              const Eigen::MatrixXd& mu_hat);
WorkingModelFit LinearCalibrate(const TrialDataset& d,
                                const WorkingModelFit& fit);

// Strata indicators (first level dropped) followed by the prediction columns.
Eigen::MatrixXd JointCalibrationRegressors(const TrialDataset& d,
                                           const Eigen::MatrixXd& mu_hat,
                                           std::vector<std::string>* names);

// AIPW with mu_hat replaced by mu*_a = gamma_hat_a^T W_hat.
ThetaEstimate JointCalibrate(const TrialDataset& d,
                             const Eigen::MatrixXd& mu_hat);

// f(theta_hat) for the contrast.
double EvaluateContrast(const Eigen::VectorXd& theta, const Contrast& c);
double EvaluateContrast(const ThetaEstimate& est, const Contrast& c);

}  // namespace caradj

#endif  // CARADJ_ESTIMATORS_H_
