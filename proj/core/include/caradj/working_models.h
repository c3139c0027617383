#ifndef CARADJ_WORKING_MODELS_H_
#define CARADJ_WORKING_MODELS_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caradj/data_model.h"
#include "caradj/forest.h"
#include "caradj/glm.h"

namespace caradj {

enum class ModelFamily {
  kZero,              // mu_hat = 0: AIPW reduces to the sample mean
  kLinear,            // per-arm OLS (ANHECOVA)
  kGlmIdentity,       // per-arm Gaussian GLM, solved by IRLS
  kLogistic,
  kPoisson,
  kNegativeBinomial,  // log link, estimated dispersion
  kForest,            // bagged regression trees
};

std::string ModelFamilyName(ModelFamily family);
ModelFamily ParseModelFamily(const std::string& name);

// Canonical-link GLM families; fitted with an intercept they are
// prediction unbiased.
bool IsCanonicalGlm(ModelFamily family);

struct WorkingModelSpec {
  ModelFamily family = ModelFamily::kZero;
  // Covariate columns by name; empty selects every covariate.
  std::vector<std::string> covariates;
  // Adds indicators of the joint strata levels to the design. Unset means
  // on for parametric families and off for the forest.
  std::optional<bool> include_strata;
  ForestParams forest;
  GlmOptions glm;

  bool IncludesStrata() const;
};

// Maps baseline rows to the n x k matrix of predictions mu_hat_a(X_i).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Eigen::MatrixXd Predict(const Baseline& x) const = 0;
};

// Per-arm fit record, exported as JSON for inspection.
struct ArmFitInfo {
  int arm = 0;
  int rows = 0;
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  std::vector<std::string> dropped_terms;
  int iterations = 0;
  double gradient_norm = 0.0;
  double dispersion = 0.0;
  bool used_ridge = false;
};

class WorkingModelFit {
 public:
  WorkingModelFit(std::string family, int k,
                  std::shared_ptr<const Predictor> predictor,
                  std::vector<ArmFitInfo> arms = {}, int fold = -1);

  Eigen::MatrixXd Predict(const Baseline& x) const;

  const std::string& family() const { return family_; }
  int k() const { return k_; }
  int fold() const { return fold_; }
  const std::vector<ArmFitInfo>& arms() const { return arms_; }
  const std::shared_ptr<const Predictor>& predictor() const {
    return predictor_;
  }

 private:
  std::string family_;
  int k_;
  std::shared_ptr<const Predictor> predictor_;
  std::vector<ArmFitInfo> arms_;
  int fold_;
};

// Fits one model per arm on the rows of `rows` assigned to that arm. Fitting
// arms separately yields the full treatment-by-covariate interaction
// structure. `fold` only tags the fit and perturbs the forest seed.
WorkingModelFit Fit(const WorkingModelSpec& spec, const TrialDataset& d,
                    std::span<const int> rows, int fold = -1);
WorkingModelFit Fit(const WorkingModelSpec& spec, const TrialDataset& d);

struct UnbiasednessCheck {
  // gap_a = ybar_a - mean of mu_hat_a over arm-a patients.
  Eigen::VectorXd gap;
  std::vector<bool> unbiased;  // |gap_a| <= tol

  bool all() const;
};

UnbiasednessCheck CheckPredictionUnbiasedness(const Eigen::MatrixXd& mu_hat,
                                              const TrialDataset& d,
                                              double tol = 1e-8);
UnbiasednessCheck CheckPredictionUnbiasedness(const WorkingModelFit& fit,
                                              const TrialDataset& d,
                                              double tol = 1e-8);

// L x k offsets: mean residual y - mu_hat_a over arm-a patients in each
// stratum. Throws EstimationError naming the first empty (arm, stratum) cell.
Eigen::MatrixXd ZCalibrationOffsets(const TrialDataset& d,
                                    const Eigen::MatrixXd& mu_hat);

// Adds offsets(Z_i, a) to every prediction.
Eigen::MatrixXd ApplyZCalibration(const Eigen::MatrixXd& mu_hat,
                                  const std::vector<int>& stratum,
                                  const Eigen::MatrixXd& offsets);

// Stratum-specific bias calibration of a fit, learned on `d`.
WorkingModelFit ZCalibrate(const WorkingModelFit& fit, const TrialDataset& d);

}  // namespace caradj

#endif  // CARADJ_WORKING_MODELS_H_
