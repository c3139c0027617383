#include "caradj/working_models.h"

#include <cmath>

#include "caradj/error.h"
#include "caradj/linalg.h"
#include "caradj/rng.h"

namespace caradj {
namespace {

// Column layout shared by training and prediction.
struct DesignLayout {
  std::vector<std::string> covariates;
  bool intercept = true;
  bool strata = false;
  int num_strata = 0;
  std::vector<std::string> stratum_labels;

  std::vector<std::string> Terms() const {
    std::vector<std::string> terms;
    if (intercept) terms.push_back("(intercept)");
    terms.insert(terms.end(), covariates.begin(), covariates.end());
    if (strata) {
      for (int l = 1; l < num_strata; ++l) {
        terms.push_back("stratum=" + stratum_labels[l]);
      }
    }
    return terms;
  }

  Eigen::MatrixXd Build(const Baseline& x) const {
    if (strata && x.num_strata() != num_strata) {
      throw InputError("prediction data has " +
                       std::to_string(x.num_strata()) +
                       " strata, the fit expects " + std::to_string(num_strata));
    }
    std::vector<int> cols;
    for (const auto& name : covariates) cols.push_back(x.CovariateIndex(name));
    const int width = (intercept ? 1 : 0) + static_cast<int>(cols.size()) +
                      (strata ? num_strata - 1 : 0);
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(x.size(), width);
    int c = 0;
    if (intercept) design.col(c++).setOnes();
    for (int j : cols) design.col(c++) = x.covariates.col(j);
    if (strata) {
      for (int i = 0; i < x.size(); ++i) {
        if (x.stratum[i] > 0) design(i, c + x.stratum[i] - 1) = 1.0;
      }
    }
    return design;
  }
};

DesignLayout MakeLayout(const WorkingModelSpec& spec, const Baseline& x,
                        bool intercept) {
  DesignLayout layout;
  layout.covariates =
      spec.covariates.empty() ? x.covariate_names : spec.covariates;
  for (const auto& name : layout.covariates) x.CovariateIndex(name);
  layout.intercept = intercept;
  layout.strata = spec.IncludesStrata();
  layout.num_strata = x.num_strata();
  layout.stratum_labels = x.stratum_labels;
  return layout;
}

class ZeroPredictor : public Predictor {
 public:
  explicit ZeroPredictor(int k) : k_(k) {}
  Eigen::MatrixXd Predict(const Baseline& x) const override {
    return Eigen::MatrixXd::Zero(x.size(), k_);
  }

 private:
  int k_;
};

class GlmPredictor : public Predictor {
 public:
  GlmPredictor(GlmFamily family, DesignLayout layout,
               std::vector<Eigen::VectorXd> coefficients)
      : family_(family),
        layout_(std::move(layout)),
        coefficients_(std::move(coefficients)) {}

  Eigen::MatrixXd Predict(const Baseline& x) const override {
    const Eigen::MatrixXd design = layout_.Build(x);
    Eigen::MatrixXd out(x.size(), static_cast<int>(coefficients_.size()));
    for (std::size_t a = 0; a < coefficients_.size(); ++a) {
      out.col(a) = InverseLink(family_, design * coefficients_[a]);
    }
    return out;
  }

 private:
  GlmFamily family_;
  DesignLayout layout_;
  std::vector<Eigen::VectorXd> coefficients_;
};

class ForestPredictor : public Predictor {
 public:
  ForestPredictor(DesignLayout layout, std::vector<RegressionForest> forests)
      : layout_(std::move(layout)), forests_(std::move(forests)) {}

  Eigen::MatrixXd Predict(const Baseline& x) const override {
    const Eigen::MatrixXd features = layout_.Build(x);
    Eigen::MatrixXd out(x.size(), static_cast<int>(forests_.size()));
    for (std::size_t a = 0; a < forests_.size(); ++a) {
      out.col(a) = forests_[a].Predict(features);
    }
    return out;
  }

 private:
  DesignLayout layout_;
  std::vector<RegressionForest> forests_;
};

class ZCalibratedPredictor : public Predictor {
 public:
  ZCalibratedPredictor(std::shared_ptr<const Predictor> base,
                       Eigen::MatrixXd offsets)
      : base_(std::move(base)), offsets_(std::move(offsets)) {}

  Eigen::MatrixXd Predict(const Baseline& x) const override {
    if (x.num_strata() != offsets_.rows()) {
      throw InputError("Z-calibrated fit expects " +
                       std::to_string(offsets_.rows()) + " strata");
    }
    return ApplyZCalibration(base_->Predict(x), x.stratum, offsets_);
  }

 private:
  std::shared_ptr<const Predictor> base_;
  Eigen::MatrixXd offsets_;
};

GlmFamily ToGlmFamily(ModelFamily family) {
  switch (family) {
    case ModelFamily::kLinear:
    case ModelFamily::kGlmIdentity:
      return GlmFamily::kGaussian;
    case ModelFamily::kLogistic:
      return GlmFamily::kLogistic;
    case ModelFamily::kPoisson:
      return GlmFamily::kPoisson;
    case ModelFamily::kNegativeBinomial:
      return GlmFamily::kNegativeBinomial;
    default:
      throw InputError("not a GLM family: " + ModelFamilyName(family));
  }
}

}  // namespace

std::string ModelFamilyName(ModelFamily family) {
  switch (family) {
    case ModelFamily::kZero:
      return "zero";
    case ModelFamily::kLinear:
      return "linear";
    case ModelFamily::kGlmIdentity:
      return "glm_identity";
    case ModelFamily::kLogistic:
      return "logistic";
    case ModelFamily::kPoisson:
      return "poisson";
    case ModelFamily::kNegativeBinomial:
      return "negative_binomial";
    case ModelFamily::kForest:
      return "forest";
  }
  return "unknown";
}

ModelFamily ParseModelFamily(const std::string& name) {
  if (name == "zero" || name == "none") return ModelFamily::kZero;
  if (name == "linear" || name == "anhecova") return ModelFamily::kLinear;
  if (name == "glm_identity") return ModelFamily::kGlmIdentity;
  if (name == "logistic" || name == "glm_logistic") return ModelFamily::kLogistic;
  if (name == "poisson" || name == "glm_poisson") return ModelFamily::kPoisson;
  if (name == "negative_binomial" || name == "negbin") {
    return ModelFamily::kNegativeBinomial;
  }
  if (name == "forest" || name == "random_forest") return ModelFamily::kForest;
  throw InputError("unknown working model family '" + name + "'");
}

bool IsCanonicalGlm(ModelFamily family) {
  return family == ModelFamily::kLinear ||
         family == ModelFamily::kGlmIdentity ||
         family == ModelFamily::kLogistic || family == ModelFamily::kPoisson;
}

bool WorkingModelSpec::IncludesStrata() const {
  if (include_strata.has_value()) return *include_strata;
  return family != ModelFamily::kForest && family != ModelFamily::kZero;
}

WorkingModelFit::WorkingModelFit(std::string family, int k,
                                 std::shared_ptr<const Predictor> predictor,
                                 std::vector<ArmFitInfo> arms, int fold)
    : family_(std::move(family)),
      k_(k),
      predictor_(std::move(predictor)),
      arms_(std::move(arms)),
      fold_(fold) {}

Eigen::MatrixXd WorkingModelFit::Predict(const Baseline& x) const {
  Eigen::MatrixXd out = predictor_->Predict(x);
  if (out.cols() != k_ || out.rows() != x.size()) {
    throw EstimationError("predictor returned a matrix of the wrong shape");
  }
  if (!out.allFinite()) {
    throw EstimationError("working model produced non-finite predictions");
  }
  return out;
}

WorkingModelFit Fit(const WorkingModelSpec& spec, const TrialDataset& d) {
  std::vector<int> rows(d.n());
  for (int i = 0; i < d.n(); ++i) rows[i] = i;
  return Fit(spec, d, rows);
}

WorkingModelFit Fit(const WorkingModelSpec& spec, const TrialDataset& d,
                    std::span<const int> rows, int fold) {
  const std::string family = ModelFamilyName(spec.family);
  if (spec.family == ModelFamily::kZero) {
    return WorkingModelFit(family, d.k, std::make_shared<ZeroPredictor>(d.k),
                           {}, fold);
  }

  const bool is_forest = spec.family == ModelFamily::kForest;
  const DesignLayout layout = MakeLayout(spec, d.baseline, !is_forest);
  const Eigen::MatrixXd design = layout.Build(d.baseline);
  const std::vector<std::string> terms = layout.Terms();
  const int p = static_cast<int>(design.cols()) - (is_forest ? 0 : 1);

  std::vector<std::vector<int>> arm_rows(d.k);
  for (int i : rows) arm_rows[d.arm[i]].push_back(i);

  std::vector<ArmFitInfo> info(d.k);
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<RegressionForest> forests;
  for (int a = 0; a < d.k; ++a) {
    const std::vector<int>& r = arm_rows[a];
    const int m = static_cast<int>(r.size());
    if (m < p + 2) {
      throw EstimationError("arm " + std::to_string(a + 1) + " has " +
                            std::to_string(m) + " rows; the " + family +
                            " working model needs at least " +
                            std::to_string(p + 2));
    }
    Eigen::MatrixXd xa(m, design.cols());
    Eigen::VectorXd ya(m);
    for (int t = 0; t < m; ++t) {
      xa.row(t) = design.row(r[t]);
      ya(t) = d.response(r[t]);
    }
    ArmFitInfo& arm_info = info[a];
    arm_info.arm = a;
    arm_info.rows = m;
    arm_info.terms = terms;
    if (is_forest) {
      ForestParams params = spec.forest;
      params.seed = DeriveSeed(spec.forest.seed,
                               static_cast<std::uint64_t>(a) +
                                   1000ULL * static_cast<std::uint64_t>(fold + 1));
      forests.push_back(RegressionForest::Fit(xa, ya, params));
      continue;
    }
    GlmFit glm = FitGlm(ToGlmFamily(spec.family), xa, ya, spec.glm);
    arm_info.coefficients = glm.coefficients;
    for (int j : glm.dropped_columns) arm_info.dropped_terms.push_back(terms[j]);
    arm_info.iterations = glm.iterations;
    arm_info.gradient_norm = glm.gradient_norm;
    arm_info.dispersion = glm.dispersion;
    arm_info.used_ridge = glm.used_ridge;
    coefficients.push_back(std::move(glm.coefficients));
  }

  std::shared_ptr<const Predictor> predictor;
  if (is_forest) {
    predictor = std::make_shared<ForestPredictor>(layout, std::move(forests));
  } else {
    predictor = std::make_shared<GlmPredictor>(ToGlmFamily(spec.family), layout,
                                               std::move(coefficients));
  }
  return WorkingModelFit(family, d.k, std::move(predictor), std::move(info),
                         fold);
}

bool UnbiasednessCheck::all() const {
  for (bool u : unbiased) {
    if (!u) return false;
  }
  return true;
}

UnbiasednessCheck CheckPredictionUnbiasedness(const Eigen::MatrixXd& mu_hat,
                                              const TrialDataset& d,
                                              double tol) {
  UnbiasednessCheck check;
  check.gap = Eigen::VectorXd::Zero(d.k);
  std::vector<int> counts(d.k, 0);
  for (int i = 0; i < d.n(); ++i) {
    check.gap(d.arm[i]) += d.response(i) - mu_hat(i, d.arm[i]);
    ++counts[d.arm[i]];
  }
  for (int a = 0; a < d.k; ++a) {
    if (counts[a] == 0) {
      throw EstimationError("arm " + std::to_string(a + 1) + " is empty");
    }
    check.gap(a) /= counts[a];
    check.unbiased.push_back(std::abs(check.gap(a)) <= tol);
  }
  return check;
}

UnbiasednessCheck CheckPredictionUnbiasedness(const WorkingModelFit& fit,
                                              const TrialDataset& d,
                                              double tol) {
  return CheckPredictionUnbiasedness(fit.Predict(d.baseline), d, tol);
}

Eigen::MatrixXd ZCalibrationOffsets(const TrialDataset& d,
                                    const Eigen::MatrixXd& mu_hat) {
  const int num_levels = d.num_strata();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_levels, d.k);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(num_levels, d.k);
  for (int i = 0; i < d.n(); ++i) {
    const int z = d.baseline.stratum[i];
    const int a = d.arm[i];
    sums(z, a) += d.response(i) - mu_hat(i, a);
    ++counts(z, a);
  }
  for (int z = 0; z < num_levels; ++z) {
    for (int a = 0; a < d.k; ++a) {
      if (counts(z, a) == 0) {
        throw EstimationError("empty cell: arm " + std::to_string(a + 1) +
                              " has no patients in stratum '" +
                              d.baseline.stratum_labels[z] + "'");
      }
      sums(z, a) /= counts(z, a);
    }
  }
  return sums;
}

Eigen::MatrixXd ApplyZCalibration(const Eigen::MatrixXd& mu_hat,
                                  const std::vector<int>& stratum,
                                  const Eigen::MatrixXd& offsets) {
  Eigen::MatrixXd out = mu_hat;
  for (int i = 0; i < out.rows(); ++i) out.row(i) += offsets.row(stratum[i]);
  return out;
}

WorkingModelFit ZCalibrate(const WorkingModelFit& fit, const TrialDataset& d) {
  Eigen::MatrixXd offsets = ZCalibrationOffsets(d, fit.Predict(d.baseline));
  return WorkingModelFit(
      fit.family() + "+z_calibration", fit.k(),
      std::make_shared<ZCalibratedPredictor>(fit.predictor(), std::move(offsets)),
      fit.arms(), fit.fold());
}

}  // namespace caradj
