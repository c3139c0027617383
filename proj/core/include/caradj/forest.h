#ifndef CARADJ_FOREST_H_
#define CARADJ_FOREST_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace caradj {

struct ForestParams {
  int trees = 100;
  int mtry = 0;       // 0 means ceil(d / 3)
  int min_leaf = 5;   // minimum bootstrap observations per leaf
  std::uint64_t seed = 0;
};

// CART regression tree grown on squared-error reduction.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  double Predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  friend class RegressionForest;
  std::vector<Node> nodes_;
};

// Bagged regression trees with per-split feature subsampling.
class RegressionForest {
 public:
  static RegressionForest Fit(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y,
                              const ForestParams& params);

  Eigen::VectorXd Predict(const Eigen::MatrixXd& x) const;
  int num_features() const { return num_features_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

 private:
  std::vector<RegressionTree> trees_;
  int num_features_ = 0;
};

}  // namespace caradj

#endif  // CARADJ_FOREST_H_
