#include "caradj/linalg.h"

#include "caradj/error.h"

namespace caradj {

std::vector<int> IndependentColumns(const Eigen::MatrixXd& x, double tol) {
  std::vector<int> kept;
  std::vector<Eigen::VectorXd> basis;
  for (int j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd v = x.col(j);
    const double norm = v.norm();
    if (!(norm > 0.0)) continue;
    // Two Gram-Schmidt passes keep the orthogonality error near epsilon.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Eigen::VectorXd& q : basis) v -= q.dot(v) * q;
    }
    const double residual = v.norm();
    if (residual > tol * norm) {
      basis.push_back(v / residual);
      kept.push_back(j);
    }
  }
  return kept;
}

Eigen::MatrixXd SelectColumns(const Eigen::MatrixXd& x,
                              const std::vector<int>& columns) {
  Eigen::MatrixXd out(x.rows(), static_cast<int>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) out.col(c) = x.col(columns[c]);
  return out;
}

LeastSquaresFit PrunedLeastSquares(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double tol) {
  LeastSquaresFit fit;
  fit.kept = IndependentColumns(x, tol);
  std::vector<bool> is_kept(x.cols(), false);
  for (int j : fit.kept) is_kept[j] = true;
  for (int j = 0; j < x.cols(); ++j) {
    if (!is_kept[j]) fit.dropped.push_back(j);
  }
  fit.coefficients = Eigen::VectorXd::Zero(x.cols());
  if (fit.kept.empty()) {
    fit.fitted = Eigen::VectorXd::Zero(x.rows());
    return fit;
  }
  const Eigen::MatrixXd reduced = SelectColumns(x, fit.kept);
  const Eigen::VectorXd beta = reduced.colPivHouseholderQr().solve(y);
  for (std::size_t c = 0; c < fit.kept.size(); ++c) {
    fit.coefficients(fit.kept[c]) = beta(c);
  }
  fit.fitted = reduced * beta;
  return fit;
}

double SampleCovariance(const Eigen::Ref<const Eigen::VectorXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b) {
  const auto n = a.size();
  if (n < 2) throw EstimationError("sample covariance needs at least 2 values");
  return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() /
         static_cast<double>(n - 1);
}

Eigen::MatrixXd SampleCovarianceMatrix(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) {
    throw EstimationError("sample covariance needs at least 2 rows");
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace caradj
