#include "caradj/data_model.h"

#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "caradj/error.h"

namespace caradj {

int Baseline::CovariateIndex(const std::string& name) const {
  for (int j = 0; j < static_cast<int>(covariate_names.size()); ++j) {
    if (covariate_names[j] == name) return j;
  }
  throw InputError("unknown covariate column '" + name + "'");
}

Baseline Baseline::Subset(std::span<const int> rows) const {
  Baseline out;
  const int m = static_cast<int>(rows.size());
  out.covariates.resize(m, covariates.cols());
  out.margins.resize(m, margins.cols());
  out.stratum.resize(m);
  for (int r = 0; r < m; ++r) {
    out.covariates.row(r) = covariates.row(rows[r]);
    out.margins.row(r) = margins.row(rows[r]);
    out.stratum[r] = stratum[rows[r]];
  }
  out.covariate_names = covariate_names;
  out.stratum_labels = stratum_labels;
  out.margin_cardinality = margin_cardinality;
  return out;
}

void Baseline::Validate() const {
  const int n = size();
  if (covariates.rows() != n) {
    throw InputError("covariate matrix has " +
                     std::to_string(covariates.rows()) + " rows, expected " +
                     std::to_string(n));
  }
  if (static_cast<int>(covariate_names.size()) != covariates.cols()) {
    throw InputError("covariate names do not match covariate columns");
  }
  if (margins.rows() != n ||
      static_cast<int>(margin_cardinality.size()) != margins.cols()) {
    throw InputError("margin matrix is inconsistent with the patient count");
  }
  const int num_levels = num_strata();
  if (num_levels < 1 || num_levels > std::max(n, 1)) {
    throw InputError("number of strata must be in [1, n]");
  }
  std::vector<int> seen(num_levels, 0);
  for (int i = 0; i < n; ++i) {
    if (stratum[i] < 0 || stratum[i] >= num_levels) {
      throw InputError("stratum index out of range at row " +
                       std::to_string(i + 1));
    }
    ++seen[stratum[i]];
    for (int j = 0; j < margins.cols(); ++j) {
      if (margins(i, j) < 0 || margins(i, j) >= margin_cardinality[j]) {
        throw InputError("margin level out of range at row " +
                         std::to_string(i + 1));
      }
    }
  }
  for (int l = 0; l < num_levels; ++l) {
    if (seen[l] == 0) {
      throw InputError("stratum '" + stratum_labels[l] + "' has no patients");
    }
  }
  if (!covariates.allFinite()) {
    throw InputError("covariates must be finite");
  }
}

void AssignJointStrata(
    const std::vector<std::vector<std::string>>& margin_values,
    Baseline& baseline) {
  const int m = static_cast<int>(margin_values.size());
  const int n = m == 0 ? static_cast<int>(baseline.covariates.rows())
                       : static_cast<int>(margin_values[0].size());
  baseline.stratum.assign(n, 0);
  baseline.stratum_labels.clear();
  baseline.margin_cardinality.assign(m, 0);
  baseline.margins.resize(n, m);
  if (m == 0) {
    baseline.stratum_labels.push_back("all");
    return;
  }
  std::vector<std::unordered_map<std::string, int>> margin_index(m);
  std::map<std::vector<int>, int> joint_index;
  for (int i = 0; i < n; ++i) {
    std::vector<int> key(m);
    for (int j = 0; j < m; ++j) {
      auto [it, inserted] = margin_index[j].try_emplace(
          margin_values[j][i], baseline.margin_cardinality[j]);
      if (inserted) ++baseline.margin_cardinality[j];
      key[j] = it->second;
      baseline.margins(i, j) = it->second;
    }
    auto [it, inserted] = joint_index.try_emplace(
        key, static_cast<int>(baseline.stratum_labels.size()));
    if (inserted) {
      std::string label;
      for (int j = 0; j < m; ++j) {
        if (j > 0) label += '/';
        label += margin_values[j][i];
      }
      baseline.stratum_labels.push_back(std::move(label));
    }
    baseline.stratum[i] = it->second;
  }
}

std::vector<int> TrialDataset::ArmCounts() const {
  std::vector<int> counts(k, 0);
  for (int a : arm) ++counts[a];
  return counts;
}

void TrialDataset::Validate() const {
  baseline.Validate();
  if (n() == 0) throw InputError("dataset has zero rows");
  if (k < 1) throw InputError("number of arms must be positive");
  if (pi.size() != k) {
    throw InputError("allocation vector has " + std::to_string(pi.size()) +
                     " entries, expected " + std::to_string(k));
  }
  if ((pi.array() <= 0.0).any()) {
    throw InputError("every allocation proportion must be positive");
  }
  if (std::abs(pi.sum() - 1.0) > 1e-12) {
    throw InputError("allocation proportions must sum to 1");
  }
  if (baseline.size() != n() || response.size() != n()) {
    throw InputError("arm, response and baseline lengths differ");
  }
  for (int i = 0; i < n(); ++i) {
    if (arm[i] < 0 || arm[i] >= k) {
      throw InputError("arm out of range at row " + std::to_string(i + 1));
    }
  }
  if (!response.allFinite()) throw InputError("responses must be finite");
}

TrialDataset PotentialOutcomeDataset::Reveal(std::span<const int> arms) const {
  if (static_cast<int>(arms.size()) != n()) {
    throw InputError("assignment vector length differs from patient count");
  }
  TrialDataset d;
  d.baseline = baseline;
  d.k = k;
  d.pi = pi;
  d.arm.assign(arms.begin(), arms.end());
  d.response.resize(n());
  for (int i = 0; i < n(); ++i) d.response(i) = potential(i, arms[i]);
  return d;
}

Contrast Contrast::Difference(int a, int b) {
  Contrast c;
  c.kind_ = Kind::kDifference;
  c.a_ = a;
  c.b_ = b;
  return c;
}

Contrast Contrast::Linear(Eigen::VectorXd weights) {
  Contrast c;
  c.kind_ = Kind::kLinear;
  c.weights_ = std::move(weights);
  return c;
}

Contrast Contrast::RiskRatio(int a, int b) {
  Contrast c = Difference(a, b);
  c.kind_ = Kind::kRiskRatio;
  return c;
}

Contrast Contrast::LogRatio(int a, int b) {
  Contrast c = Difference(a, b);
  c.kind_ = Kind::kLogRatio;
  return c;
}

double Contrast::NullValue() const {
  return kind_ == Kind::kRiskRatio ? 1.0 : 0.0;
}

std::string Contrast::Describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kDifference:
      os << "theta" << b_ + 1 << " - theta" << a_ + 1;
      break;
    case Kind::kLinear:
      os << "linear(";
      for (int i = 0; i < weights_.size(); ++i) {
        os << (i ? "," : "") << weights_(i);
      }
      os << ")";
      break;
    case Kind::kRiskRatio:
      os << "theta" << b_ + 1 << " / theta" << a_ + 1;
      break;
    case Kind::kLogRatio:
      os << "log(theta" << b_ + 1 << " / theta" << a_ + 1 << ")";
      break;
  }
  return os.str();
}

void Contrast::Validate(int k) const {
  if (kind_ == Kind::kLinear) {
    if (weights_.size() != k) {
      throw InputError("linear contrast needs " + std::to_string(k) +
                       " weights");
    }
    return;
  }
  if (a_ < 0 || a_ >= k || b_ < 0 || b_ >= k || a_ == b_) {
    throw InputError("contrast arms must be two distinct arms in 1.." +
                     std::to_string(k));
  }
}

std::vector<StratumSummary> SummarizeStrata(const TrialDataset& d) {
  std::vector<StratumSummary> rows(d.num_strata());
  for (int l = 0; l < d.num_strata(); ++l) {
    rows[l].level = l;
    rows[l].label = d.baseline.stratum_labels[l];
    rows[l].arm_counts.assign(d.k, 0);
  }
  for (int i = 0; i < d.n(); ++i) {
    StratumSummary& row = rows[d.baseline.stratum[i]];
    ++row.count;
    ++row.arm_counts[d.arm[i]];
  }
  return rows;
}

Eigen::VectorXd EqualAllocation(int k) {
  return Eigen::VectorXd::Constant(k, 1.0 / k);
}

}  // namespace caradj
