#ifndef CARADJ_LINALG_H_
#define CARADJ_LINALG_H_

#include <vector>

#include <Eigen/Dense>

namespace caradj {

// Columns of `x` kept by a left-to-right rank reveal: column j is dropped
// when the norm of its component orthogonal to the already kept columns is
// below `tol` times its own norm. Earlier columns win, so an intercept placed
// first is never pruned in favour of a collinear later column.
std::vector<int> IndependentColumns(const Eigen::MatrixXd& x,
                                    double tol = 1e-10);

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;  // full width; dropped columns are 0
  std::vector<int> kept;
  std::vector<int> dropped;
  Eigen::VectorXd fitted;
};

// OLS of y on x after collinearity pruning.
LeastSquaresFit PrunedLeastSquares(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   double tol = 1e-10);

// Selects the listed columns.
Eigen::MatrixXd SelectColumns(const Eigen::MatrixXd& x,
                              const std::vector<int>& columns);

// Sample covariance with denominator (n - 1).
double SampleCovariance(const Eigen::Ref<const Eigen::VectorXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b);

// Column-wise sample covariance matrix with denominator (n - 1).
Eigen::MatrixXd SampleCovarianceMatrix(const Eigen::MatrixXd& x);

}  // namespace caradj

#endif  // CARADJ_LINALG_H_
