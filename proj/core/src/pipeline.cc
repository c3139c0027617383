#include "caradj/pipeline.h"

#include <algorithm>

#include "caradj/error.h"
#include "caradj/linalg.h"

namespace caradj {
namespace {

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

// Fit on the rows of `d`, then apply Z or linear calibration learned on the
// same rows.
WorkingModelFit FitCalibrated(const PipelineSpec& spec, const TrialDataset& d,
                              std::span<const int> rows, int fold) {
  WorkingModelFit fit = Fit(spec.model, d, rows, fold);
  if (spec.calibration == Calibration::kZ ||
      spec.calibration == Calibration::kLinear) {
    const TrialDataset training = SubsetDataset(d, rows);
    fit = spec.calibration == Calibration::kZ ? ZCalibrate(fit, training)
                                              : LinearCalibrate(training, fit);
  }
  return fit;
}

void CollectFitInfo(const WorkingModelFit& fit, PipelineDiagnostics& diag) {
  for (const ArmFitInfo& info : fit.arms()) {
    diag.fits.push_back(info);
    for (const std::string& term : info.dropped_terms) {
      diag.collinearity_drops.push_back("arm " + std::to_string(info.arm + 1) +
                                        ": " + term);
    }
  }
}

Eigen::VectorXd OrthogonalityResidual(const TrialDataset& d,
                                      const Eigen::MatrixXd& mu) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.k);
  const std::vector<int> counts = d.ArmCounts();
  for (int a = 0; a < d.k; ++a) {
    if (counts[a] < 2) continue;
    Eigen::VectorXd resid(counts[a]);
    Eigen::VectorXd pred(counts[a]);
    int t = 0;
    for (int i = 0; i < d.n(); ++i) {
      if (d.arm[i] != a) continue;
      resid(t) = d.response(i) - mu(i, a);
      pred(t) = mu(i, a);
      ++t;
    }
    out(a) = SampleCovariance(resid, pred);
  }
  return out;
}

}  // namespace

std::string CalibrationName(Calibration c) {
  switch (c) {
    case Calibration::kNone:
      return "none";
    case Calibration::kZ:
      return "z";
    case Calibration::kLinear:
      return "linear";
    case Calibration::kJoint:
      return "joint";
  }
  return "unknown";
}

Calibration ParseCalibration(const std::string& name) {
  const std::string s = Lower(name);
  if (s == "none" || s.empty()) return Calibration::kNone;
  if (s == "z" || s == "z_calibration") return Calibration::kZ;
  if (s == "linear" || s == "lc") return Calibration::kLinear;
  if (s == "joint" || s == "jc") return Calibration::kJoint;
  throw InputError("unknown calibration: " + name);
}

std::string EstimatorKindName(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::kMean:
      return "mean";
    case EstimatorKind::kGComputation:
      return "gcomp";
    case EstimatorKind::kAipw:
      return "aipw";
    case EstimatorKind::kCrossFit:
      return "crossfit";
  }
  return "unknown";
}

EstimatorKind ParseEstimatorKind(const std::string& name) {
  const std::string s = Lower(name);
  if (s == "mean" || s == "sample_mean") return EstimatorKind::kMean;
  if (s == "gcomp" || s == "g_computation") return EstimatorKind::kGComputation;
  if (s == "aipw") return EstimatorKind::kAipw;
  if (s == "crossfit" || s == "cf" || s == "cross_fit") {
    return EstimatorKind::kCrossFit;
  }
  throw InputError("unknown estimator: " + name);
}

std::string FlavorChoiceName(FlavorChoice f) {
  switch (f) {
    case FlavorChoice::kAuto:
      return "auto";
    case FlavorChoice::kRobust:
      return "robust";
    case FlavorChoice::kUniversal:
      return "universal";
    case FlavorChoice::kNaive:
      return "naive";
  }
  return "unknown";
}

FlavorChoice ParseFlavorChoice(const std::string& name) {
  const std::string s = Lower(name);
  if (s == "auto" || s.empty()) return FlavorChoice::kAuto;
  if (s == "robust" || s == "robust_b") return FlavorChoice::kRobust;
  if (s == "universal") return FlavorChoice::kUniversal;
  if (s == "naive") return FlavorChoice::kNaive;
  throw InputError("unknown variance flavor: " + name);
}

void PipelineSpec::Validate() const {
  if (estimator == EstimatorKind::kCrossFit && folds < 2) {
    throw InputError("cross-fitting needs folds >= 2");
  }
  if (estimator == EstimatorKind::kMean && calibration != Calibration::kNone) {
    throw InputError("the sample mean takes no calibration");
  }
  if (estimator == EstimatorKind::kGComputation &&
      calibration == Calibration::kJoint) {
    throw InputError("joint calibration is defined for AIPW and cross-fitting");
  }
}

std::string PipelineSpec::Label() const {
  if (!name.empty()) return name;
  if (estimator == EstimatorKind::kMean) return "sample mean";
  std::string label = ModelFamilyName(model.family);
  switch (estimator) {
    case EstimatorKind::kGComputation:
      label += " g-computation";
      break;
    case EstimatorKind::kCrossFit:
      label += " CF";
      break;
    default:
      label += " AIPW";
      break;
  }
  switch (calibration) {
    case Calibration::kZ:
      label += " + Z";
      break;
    case Calibration::kLinear:
      label += " + LC";
      break;
    case Calibration::kJoint:
      label += " + JC";
      break;
    case Calibration::kNone:
      break;
  }
  return label;
}

VarianceFlavor ResolveFlavor(const PipelineSpec& spec,
                             const SchemeSpec& scheme) {
  const bool omega_known = scheme.kind != SchemeKind::kMinimization;
  switch (spec.flavor) {
    case FlavorChoice::kNaive:
      return VarianceFlavor::kNaive;
    case FlavorChoice::kUniversal:
      return VarianceFlavor::kUniversal;
    case FlavorChoice::kRobust:
      if (!omega_known) {
        throw RefusalError(
            "robust variance needs Omega(z), which is unknown under " +
                SchemeName(scheme.kind),
            {"universal", "naive"});
      }
      return VarianceFlavor::kRobust;
    case FlavorChoice::kAuto:
      break;
  }
  if (spec.calibration == Calibration::kJoint) return VarianceFlavor::kJc;
  if (spec.estimator != EstimatorKind::kMean) {
    if (spec.calibration == Calibration::kZ) return VarianceFlavor::kUniversal;
    if (spec.calibration == Calibration::kNone &&
        spec.estimator != EstimatorKind::kCrossFit &&
        IsCanonicalGlm(spec.model.family) && spec.model.IncludesStrata()) {
      return VarianceFlavor::kUniversal;
    }
  }
  if (omega_known) return VarianceFlavor::kRobust;
  throw RefusalError(
      "no valid variance for " + spec.Label() + " under " +
          SchemeName(scheme.kind) +
          ": Omega(z) is unknown and the pipeline is not universally "
          "applicable",
      {"calibration=joint", "calibration=z", "flavor=naive"});
}

TrialDataset SubsetDataset(const TrialDataset& d, std::span<const int> rows) {
  TrialDataset out;
  out.baseline = d.baseline.Subset(rows);
  out.k = d.k;
  out.pi = d.pi;
  out.arm.reserve(rows.size());
  out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out.arm.push_back(d.arm[rows[t]]);
    out.response(static_cast<Eigen::Index>(t)) = d.response(rows[t]);
  }
  return out;
}

PipelineResult RunPipeline(const PipelineSpec& spec, const TrialDataset& d,
                           const SchemeSpec& scheme, const Contrast& contrast,
                           std::uint64_t seed) {
  spec.Validate();
  PipelineSpec local = spec;
  local.model.forest.seed = DeriveSeed(seed, 1);

  PipelineResult result;
  result.name = spec.Label();
  PipelineDiagnostics& diag = result.diagnostics;

  std::vector<int> all_rows(d.n());
  for (int i = 0; i < d.n(); ++i) all_rows[i] = i;

  switch (spec.estimator) {
    case EstimatorKind::kMean:
      result.estimate = SampleMean(d);
      break;
    case EstimatorKind::kGComputation:
    case EstimatorKind::kAipw: {
      const WorkingModelFit fit = FitCalibrated(local, d, all_rows, -1);
      CollectFitInfo(fit, diag);
      const Eigen::MatrixXd mu = fit.Predict(d.baseline);
      if (spec.estimator == EstimatorKind::kGComputation) {
        result.estimate = GComputation(d, mu);
      } else if (spec.calibration == Calibration::kJoint) {
        result.estimate = JointCalibrate(d, mu);
      } else {
        result.estimate = Aipw(d, mu);
      }
      break;
    }
    case EstimatorKind::kCrossFit: {
      Rng rng(DeriveSeed(seed, 0));
      const FoldPlan plan = FoldPlan::Random(d.n(), spec.folds, rng);
      ThetaEstimate cf = CrossFitAipw(
          d,
          [&](std::span<const int> rows, int fold) {
            WorkingModelFit fit = FitCalibrated(local, d, rows, fold);
            CollectFitInfo(fit, diag);
            return fit;
          },
          plan, spec.pi_mode);
      if (spec.calibration == Calibration::kJoint) {
        result.estimate = JointCalibrate(d, cf.mu_hat);
        result.estimate.folds = cf.folds;
      } else {
        result.estimate = std::move(cf);
      }
      break;
    }
  }
  if (spec.calibration == Calibration::kJoint && result.estimate.joint) {
    const JointCalibrationRecord& jc = *result.estimate.joint;
    for (int a = 0; a < d.k; ++a) {
      for (const std::string& name : jc.dropped[a]) {
        diag.collinearity_drops.push_back("arm " + std::to_string(a + 1) +
                                          " calibration: " + name);
      }
    }
  }

  result.contrast = EvaluateContrast(result.estimate, contrast);
  diag.unbiasedness_gap =
      CheckPredictionUnbiasedness(result.estimate.mu_hat, d).gap;
  diag.orthogonality_residual =
      OrthogonalityResidual(d, result.estimate.mu_hat);

  const VarComponents components = ComputeVarComponents(d, result.estimate);
  result.naive_vhat = VhatNaive(components);
  try {
    result.naive = DeltaSe(*result.naive_vhat, result.estimate, contrast, d.n());
  } catch (const EstimationError& e) {
    diag.warnings.push_back(std::string("naive SE: ") + e.what());
  }

  try {
    if (spec.estimator == EstimatorKind::kGComputation &&
        (diag.unbiasedness_gap.array().abs() > 1e-8).any()) {
      throw RefusalError(
          "g-computation variance needs prediction-unbiased fits; the "
          "arm-wise prediction gap is nonzero",
          {"estimator=aipw"});
    }
    const VarianceFlavor flavor = ResolveFlavor(spec, scheme);
    switch (flavor) {
      case VarianceFlavor::kRobust:
        result.correct_vhat = VhatRobust(components, OmegaFor(scheme));
        break;
      case VarianceFlavor::kUniversal:
        result.correct_vhat = VhatUniversal(components);
        break;
      case VarianceFlavor::kNaive:
        result.correct_vhat = VhatNaive(components);
        break;
      case VarianceFlavor::kJc:
        result.correct_vhat = VhatUniversal(components);
        result.correct_vhat->flavor = VarianceFlavor::kJc;
        break;
    }
    if (result.correct_vhat->negative_diagonal) {
      diag.warnings.push_back("variance estimate has a negative diagonal entry");
    }
    result.correct =
        DeltaSe(*result.correct_vhat, result.estimate, contrast, d.n());
  } catch (const RefusalError& e) {
    result.correct_vhat.reset();
    result.refusal = e.what();
    result.refusal_alternatives = e.alternatives();
  }
  return result;
}

}  // namespace caradj
