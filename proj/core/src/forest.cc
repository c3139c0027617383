#include "caradj/forest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "caradj/error.h"
#include "caradj/rng.h"

namespace caradj {
namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
              const ForestParams& params, int mtry, Rng& rng,
              std::vector<RegressionTree::Node>& nodes)
      : x_(x), y_(y), params_(params), mtry_(mtry), rng_(rng), nodes_(nodes) {
    features_.resize(x.cols());
    std::iota(features_.begin(), features_.end(), 0);
  }

  int Grow(std::vector<int>& idx, int begin, int end) {
    const int node_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const int m = end - begin;
    double sum = 0.0;
    for (int i = begin; i < end; ++i) sum += y_(idx[i]);
    nodes_[node_id].value = sum / m;
    if (m < 2 * params_.min_leaf) return node_id;

    const Split split = BestSplit(idx, begin, end, sum);
    if (split.feature < 0) return node_id;

    const auto mid_it = std::partition(
        idx.begin() + begin, idx.begin() + end,
        [&](int i) { return x_(i, split.feature) <= split.threshold; });
    const int mid = static_cast<int>(mid_it - idx.begin());
    const int left = Grow(idx, begin, mid);
    const int right = Grow(idx, mid, end);
    RegressionTree::Node& node = nodes_[node_id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }

 private:
  Split BestSplit(const std::vector<int>& idx, int begin, int end, double sum) {
    const int m = end - begin;
    const int d = static_cast<int>(features_.size());
    // Partial Fisher-Yates draw of mtry candidate features.
    for (int j = 0; j < mtry_; ++j) {
      std::swap(features_[j], features_[j + UniformIndex(rng_, d - j)]);
    }
    Split best;
    best.score = sum * sum / m + 1e-12 * (1.0 + std::abs(sum * sum / m));
    std::vector<std::pair<double, double>> column(m);
    for (int j = 0; j < mtry_; ++j) {
      const int f = features_[j];
      for (int i = 0; i < m; ++i) {
        column[i] = {x_(idx[begin + i], f), y_(idx[begin + i])};
      }
      std::sort(column.begin(), column.end());
      double left_sum = 0.0;
      for (int s = 1; s < m; ++s) {
        left_sum += column[s - 1].second;
        if (s < params_.min_leaf || m - s < params_.min_leaf) continue;
        if (!(column[s - 1].first < column[s].first)) continue;
        const double right_sum = sum - left_sum;
        const double score =
            left_sum * left_sum / s + right_sum * right_sum / (m - s);
        if (score > best.score) {
          best.score = score;
          best.feature = f;
          best.threshold = 0.5 * (column[s - 1].first + column[s].first);
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const ForestParams& params_;
  int mtry_;
  Rng& rng_;
  std::vector<RegressionTree::Node>& nodes_;
  std::vector<int> features_;
};

}  // namespace

double RegressionTree::Predict(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const Node& node = nodes_[id];
    id = row(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].value;
}

RegressionForest RegressionForest::Fit(const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y,
                                       const ForestParams& params) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (n == 0 || y.size() != n) {
    throw EstimationError("forest needs a nonempty sample with matching y");
  }
  if (d == 0) throw EstimationError("forest needs at least one feature");
  if (params.trees < 1 || params.min_leaf < 1) {
    throw InputError("forest needs trees >= 1 and min_leaf >= 1");
  }
  const int mtry = params.mtry > 0 ? std::min(params.mtry, d)
                                   : std::max(1, (d + 2) / 3);
  RegressionForest forest;
  forest.num_features_ = d;
  forest.trees_.resize(params.trees);
  std::vector<int> idx(n);
  for (int t = 0; t < params.trees; ++t) {
    Rng rng(DeriveSeed(params.seed, static_cast<std::uint64_t>(t)));
    for (int i = 0; i < n; ++i) idx[i] = UniformIndex(rng, n);
    TreeBuilder builder(x, y, params, mtry, rng, forest.trees_[t].nodes_);
    builder.Grow(idx, 0, n);
  }
  return forest;
}

Eigen::VectorXd RegressionForest::Predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != num_features_) {
    throw InputError("forest was trained on " + std::to_string(num_features_) +
                     " features, got " + std::to_string(x.cols()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    double total = 0.0;
    for (const RegressionTree& tree : trees_) total += tree.Predict(x.row(i));
    out(i) = total / static_cast<double>(trees_.size());
  }
  return out;
}

}  // namespace caradj
