#ifndef CARADJ_PIPELINE_H_
#define CARADJ_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caradj/data_model.h"
#include "caradj/estimators.h"
#include "caradj/randomization.h"
#include "caradj/variance.h"
#include "caradj/working_models.h"

namespace caradj {

enum class Calibration { kNone, kZ, kLinear, kJoint };
enum class EstimatorKind { kMean, kGComputation, kAipw, kCrossFit };
enum class FlavorChoice { kAuto, kRobust, kUniversal, kNaive };

std::string CalibrationName(Calibration c);
Calibration ParseCalibration(const std::string& name);
std::string EstimatorKindName(EstimatorKind e);
EstimatorKind ParseEstimatorKind(const std::string& name);
std::string FlavorChoiceName(FlavorChoice f);
FlavorChoice ParseFlavorChoice(const std::string& name);

// Working model -> calibration -> estimator, plus the variance flavor used
// for the "correct" standard error.
struct PipelineSpec {
  std::string name;
  WorkingModelSpec model;
  Calibration calibration = Calibration::kNone;
  EstimatorKind estimator = EstimatorKind::kAipw;
  int folds = 5;
  PiMode pi_mode = PiMode::kFoldSpecific;
  FlavorChoice flavor = FlavorChoice::kAuto;

  void Validate() const;
  // "sample mean", "logistic AIPW", "forest CF + JC", ...
  std::string Label() const;
};

// Flavor rule table for the correct standard error:
//   joint calibration                          -> jc
//   Z-calibrated, or canonical GLM with strata
//   in the design fitted on the full sample    -> universal
//   Omega(z) known for the scheme              -> robust
//   otherwise                                  -> RefusalError
// Explicit choices are honoured, except that robust under an unknown Omega
// is refused. The sample mean never qualifies for universal under auto.
VarianceFlavor ResolveFlavor(const PipelineSpec& spec, const SchemeSpec& scheme);

struct PipelineDiagnostics {
  // ybar_a - mean of the used predictions over arm a.
  Eigen::VectorXd unbiasedness_gap;
  // Per arm, sample covariance of (y - mu_hat_a) and mu_hat_a over arm-a
  // patients; zero up to solver tolerance after joint calibration.
  Eigen::VectorXd orthogonality_residual;
  // Design columns or calibration regressors pruned for collinearity.
  std::vector<std::string> collinearity_drops;
  std::vector<ArmFitInfo> fits;
  std::vector<std::string> warnings;
};

struct PipelineResult {
  std::string name;
  ThetaEstimate estimate;
  double contrast = 0.0;
  std::optional<CovarianceEstimate> correct_vhat;
  std::optional<ContrastInference> correct;
  std::string refusal;  // why the correct SE is missing
  std::vector<std::string> refusal_alternatives;
  std::optional<CovarianceEstimate> naive_vhat;
  std::optional<ContrastInference> naive;
  PipelineDiagnostics diagnostics;
};

// Runs the pipeline on `d`. `seed` drives the fold partition and forest
// seeds. Estimation failures propagate as exceptions; a refused correct
// variance is reported in the result, not thrown.
PipelineResult RunPipeline(const PipelineSpec& spec, const TrialDataset& d,
                           const SchemeSpec& scheme, const Contrast& contrast,
                           std::uint64_t seed);

// Rows `rows` of a dataset, keeping k, pi, and stratum indexing.
TrialDataset SubsetDataset(const TrialDataset& d, std::span<const int> rows);

}  // namespace caradj

#endif  // CARADJ_PIPELINE_H_
