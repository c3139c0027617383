#include "caradj/estimators.h"

#include <cmath>
#include <numeric>

#include "caradj/error.h"
#include "caradj/linalg.h"

namespace caradj {
namespace {

class LinearCalibratedPredictor : public Predictor {
 public:
  LinearCalibratedPredictor(std::shared_ptr<const Predictor> base,
                            Eigen::MatrixXd gamma)
      : base_(std::move(base)), gamma_(std::move(gamma)) {}

  Eigen::MatrixXd Predict(const Baseline& x) const override {
    return base_->Predict(x) * gamma_;
  }

 private:
  std::shared_ptr<const Predictor> base_;
  Eigen::MatrixXd gamma_;
};

void CheckShape(const TrialDataset& d, const Eigen::MatrixXd& mu_hat) {
  if (mu_hat.rows() != d.n() || mu_hat.cols() != d.k) {
    throw InputError("prediction matrix must be n x k");
  }
  if (!mu_hat.allFinite()) {
    throw EstimationError("predictions must be finite");
  }
}

std::vector<int> NonEmptyArmCounts(const TrialDataset& d) {
  std::vector<int> counts = d.ArmCounts();
  for (int a = 0; a < d.k; ++a) {
    if (counts[a] == 0) {
      throw EstimationError("arm " + std::to_string(a + 1) +
                            " has no patients");
    }
  }
  return counts;
}

}  // namespace

FoldPlan FoldPlan::Random(int n, int folds, Rng& rng) {
  if (folds < 2 || folds > n) {
    throw InputError("cross-fitting needs 2 <= J <= n folds");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[UniformIndex(rng, i + 1)]);
  }
  FoldPlan plan;
  plan.folds = folds;
  plan.fold_of.resize(n);
  for (int pos = 0; pos < n; ++pos) plan.fold_of[order[pos]] = pos % folds;
  return plan;
}

std::vector<int> FoldPlan::Members(int j) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(fold_of.size()); ++i) {
    if (fold_of[i] == j) out.push_back(i);
  }
  return out;
}

std::vector<int> FoldPlan::Complement(int j) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(fold_of.size()); ++i) {
    if (fold_of[i] != j) out.push_back(i);
  }
  return out;
}

ThetaEstimate SampleMean(const TrialDataset& d) {
  const std::vector<int> counts = NonEmptyArmCounts(d);
  ThetaEstimate est;
  est.method = "sample_mean";
  est.theta = Eigen::VectorXd::Zero(d.k);
  for (int i = 0; i < d.n(); ++i) est.theta(d.arm[i]) += d.response(i);
  for (int a = 0; a < d.k; ++a) est.theta(a) /= counts[a];
  est.mu_hat = Eigen::MatrixXd::Zero(d.n(), d.k);
  return est;
}

ThetaEstimate GComputation(const TrialDataset& d,
                           const Eigen::MatrixXd& mu_hat) {
  CheckShape(d, mu_hat);
  ThetaEstimate est;
  est.method = "g_computation";
  est.theta = mu_hat.colwise().mean().transpose();
  est.mu_hat = mu_hat;
  return est;
}

ThetaEstimate Aipw(const TrialDataset& d, const Eigen::MatrixXd& mu_hat) {
  CheckShape(d, mu_hat);
  const std::vector<int> counts = NonEmptyArmCounts(d);
  // Accumulate ybar_a - mean_{A=a} mu_hat_a as one residual mean so that a
  // zero prediction matrix reproduces the sample mean exactly.
  Eigen::VectorXd residual_mean = Eigen::VectorXd::Zero(d.k);
  for (int i = 0; i < d.n(); ++i) {
    residual_mean(d.arm[i]) += d.response(i) - mu_hat(i, d.arm[i]);
  }
  ThetaEstimate est;
  est.method = "aipw";
  est.theta.resize(d.k);
  const Eigen::VectorXd overall = mu_hat.colwise().mean().transpose();
  for (int a = 0; a < d.k; ++a) {
    est.theta(a) = residual_mean(a) / counts[a] + overall(a);
  }
  est.mu_hat = mu_hat;
  return est;
}

ThetaEstimate Aipw(const TrialDataset& d, const WorkingModelFit& fit) {
  return Aipw(d, fit.Predict(d.baseline));
}

ThetaEstimate CrossFitAipw(const TrialDataset& d, const FoldFitter& fitter,
                           const FoldPlan& plan, PiMode pi_mode) {
  if (static_cast<int>(plan.fold_of.size()) != d.n()) {
    throw InputError("fold plan size differs from the number of patients");
  }
  if (plan.folds < 2) throw InputError("cross-fitting needs at least 2 folds");
  const std::vector<int> counts = NonEmptyArmCounts(d);

  ThetaEstimate est;
  est.method = "cross_fit_aipw";
  est.theta = Eigen::VectorXd::Zero(d.k);
  est.mu_hat = Eigen::MatrixXd::Zero(d.n(), d.k);
  est.folds = plan.fold_of;

  for (int j = 0; j < plan.folds; ++j) {
    const std::vector<int> members = plan.Members(j);
    const std::vector<int> training = plan.Complement(j);
    const int fold_size = static_cast<int>(members.size());
    if (fold_size == 0) {
      throw EstimationError("fold " + std::to_string(j + 1) + " is empty");
    }
    std::vector<int> fold_counts(d.k, 0);
    for (int i : members) ++fold_counts[d.arm[i]];
    for (int a = 0; a < d.k; ++a) {
      if (fold_counts[a] == 0) {
        throw EstimationError("empty arm in fold: arm " +
                              std::to_string(a + 1) + " has no patients in fold " +
                              std::to_string(j + 1));
      }
    }

    const WorkingModelFit fit = fitter(training, j);
    const Eigen::MatrixXd mu = fit.Predict(d.baseline.Subset(members));
    for (int a = 0; a < d.k; ++a) {
      const double pi_hat =
          pi_mode == PiMode::kFoldSpecific
              ? static_cast<double>(fold_counts[a]) / fold_size
              : static_cast<double>(counts[a]) / d.n();
      double total = 0.0;
      for (int t = 0; t < fold_size; ++t) {
        const int i = members[t];
        if (d.arm[i] == a) total += (d.response(i) - mu(t, a)) / pi_hat;
        total += mu(t, a);
      }
      est.theta(a) += total / fold_size / plan.folds;
    }
    for (int t = 0; t < fold_size; ++t) est.mu_hat.row(members[t]) = mu.row(t);
  }
  return est;
}

ThetaEstimate CrossFitAipw(const TrialDataset& d, const WorkingModelSpec& spec,
                           const FoldPlan& plan, PiMode pi_mode) {
  return CrossFitAipw(
      d,
      [&](std::span<const int> rows, int fold) {
        return Fit(spec, d, rows, fold);
      },
      plan, pi_mode);
}

Eigen::MatrixXd LinearCalibrationCoefficients(const TrialDataset& d,
                                              const Eigen::MatrixXd& mu_hat) {
  CheckShape(d, mu_hat);
  const std::vector<int> counts = NonEmptyArmCounts(d);
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(d.k, d.k);
  for (int a = 0; a < d.k; ++a) {
    Eigen::MatrixXd x(counts[a], d.k + 1);
    Eigen::VectorXd y(counts[a]);
    int t = 0;
    for (int i = 0; i < d.n(); ++i) {
      if (d.arm[i] != a) continue;
      x(t, 0) = 1.0;
      x.row(t).tail(d.k) = mu_hat.row(i);
      y(t) = d.response(i);
      ++t;
    }
    const LeastSquaresFit fit = PrunedLeastSquares(x, y);
    gamma.col(a) = fit.coefficients.tail(d.k);
  }
  return gamma;
}

WorkingModelFit LinearCalibrate(const TrialDataset& d,
                                const WorkingModelFit& fit) {
  Eigen::MatrixXd gamma =
      LinearCalibrationCoefficients(d, fit.Predict(d.baseline));
  return WorkingModelFit(
      fit.family() + "+linear_calibration", fit.k(),
      std::make_shared<LinearCalibratedPredictor>(fit.predictor(),
                                                  std::move(gamma)),
      fit.arms(), fit.fold());
}

Eigen::MatrixXd JointCalibrationRegressors(const TrialDataset& d,
                                           const Eigen::MatrixXd& mu_hat,
                                           std::vector<std::string>* names) {
  const int num_levels = d.num_strata();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d.n(), num_levels - 1 + d.k);
  for (int i = 0; i < d.n(); ++i) {
    if (d.baseline.stratum[i] > 0) w(i, d.baseline.stratum[i] - 1) = 1.0;
  }
  w.rightCols(d.k) = mu_hat;
  if (names != nullptr) {
    names->clear();
    for (int l = 1; l < num_levels; ++l) {
      names->push_back("stratum=" + d.baseline.stratum_labels[l]);
    }
    for (int a = 0; a < d.k; ++a) {
      names->push_back("mu_hat_" + std::to_string(a + 1));
    }
  }
  return w;
}

ThetaEstimate JointCalibrate(const TrialDataset& d,
                             const Eigen::MatrixXd& mu_hat) {
  CheckShape(d, mu_hat);
  const std::vector<int> counts = NonEmptyArmCounts(d);
  // Every (arm, stratum) cell must be populated.
  ZCalibrationOffsets(d, Eigen::MatrixXd::Zero(d.n(), d.k));

  JointCalibrationRecord record;
  record.w = JointCalibrationRegressors(d, mu_hat, &record.regressors);
  const int p = static_cast<int>(record.w.cols());
  record.gamma = Eigen::MatrixXd::Zero(p, d.k);
  record.intercepts = Eigen::VectorXd::Zero(d.k);
  record.dropped.resize(d.k);

  for (int a = 0; a < d.k; ++a) {
    Eigen::MatrixXd x(counts[a], p + 1);
    Eigen::VectorXd y(counts[a]);
    int t = 0;
    for (int i = 0; i < d.n(); ++i) {
      if (d.arm[i] != a) continue;
      x(t, 0) = 1.0;
      x.row(t).tail(p) = record.w.row(i);
      y(t) = d.response(i);
      ++t;
    }
    const LeastSquaresFit fit = PrunedLeastSquares(x, y);
    for (int j : fit.dropped) {
      if (j > 0) record.dropped[a].push_back(record.regressors[j - 1]);
    }
    if (fit.kept.empty() || fit.kept[0] != 0 ||
        counts[a] <= static_cast<int>(fit.kept.size())) {
      std::string list;
      for (const auto& name : record.dropped[a]) {
        list += (list.empty() ? "" : ", ") + name;
      }
      throw EstimationError(
          "joint calibration is rank deficient for arm " + std::to_string(a + 1) +
          " after pruning (dropped: " + (list.empty() ? "none" : list) + ")");
    }
    record.intercepts(a) = fit.coefficients(0);
    record.gamma.col(a) = fit.coefficients.tail(p);
  }

  const Eigen::MatrixXd mu_star = record.w * record.gamma;
  ThetaEstimate est = Aipw(d, mu_star);
  est.method = "joint_calibration";
  est.joint = std::move(record);
  return est;
}

double EvaluateContrast(const Eigen::VectorXd& theta, const Contrast& c) {
  c.Validate(static_cast<int>(theta.size()));
  switch (c.kind()) {
    case Contrast::Kind::kDifference:
      return theta(c.b()) - theta(c.a());
    case Contrast::Kind::kLinear:
      return c.weights().dot(theta);
    case Contrast::Kind::kRiskRatio:
    case Contrast::Kind::kLogRatio: {
      if (!(theta(c.a()) > 0.0)) {
        throw EstimationError("ratio contrast needs a positive denominator");
      }
      const double ratio = theta(c.b()) / theta(c.a());
      if (c.kind() == Contrast::Kind::kRiskRatio) return ratio;
      if (!(ratio > 0.0)) {
        throw EstimationError("log ratio needs a positive numerator");
      }
      return std::log(ratio);
    }
  }
  return 0.0;
}

double EvaluateContrast(const ThetaEstimate& est, const Contrast& c) {
  return EvaluateContrast(est.theta, c);
}

}  // namespace caradj
