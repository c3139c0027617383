#ifndef CARADJ_DATA_MODEL_H_
#define CARADJ_DATA_MODEL_H_

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace caradj {

// Baseline (pre-randomization) information for n patients: the analysis
// covariates X and the discrete randomization covariate Z.
//
// Z is stored twice: as a single joint stratum index in [0, L) and as one
// level index per stratification margin (one column per stratification
// variable). Minimization needs the margins; everything else uses the joint
// index. Only observed joint combinations receive an index.
struct Baseline {
  Eigen::MatrixXd covariates;                // n x d, column-major
  std::vector<std::string> covariate_names;  // d
  std::vector<int> stratum;                  // n, joint level in [0, L)
  std::vector<std::string> stratum_labels;   // L
  Eigen::MatrixXi margins;                   // n x m
  std::vector<int> margin_cardinality;       // m, levels per margin

  int size() const { return static_cast<int>(stratum.size()); }
  int num_strata() const { return static_cast<int>(stratum_labels.size()); }
  int num_covariates() const { return static_cast<int>(covariates.cols()); }
  int num_margins() const { return static_cast<int>(margins.cols()); }

  // Column index of a covariate by name; throws InputError if absent.
  int CovariateIndex(const std::string& name) const;

  // Rows `rows` of this baseline; stratum and margin indexing is preserved.
  Baseline Subset(std::span<const int> rows) const;

  void Validate() const;
};

// Builds the joint stratum index and margins from per-patient margin levels.
// Joint levels are numbered in order of first appearance; labels join the
// margin labels with '/'.
void AssignJointStrata(const std::vector<std::vector<std::string>>& margin_values,
                       Baseline& baseline);

// Observed trial: one row per patient, arms are 0-based internally
// (files and CLI use 1-based arm numbers).
struct TrialDataset {
  Baseline baseline;
  int k = 2;
  Eigen::VectorXd pi;          // target allocation, k entries summing to 1
  std::vector<int> arm;        // n, in [0, k)
  Eigen::VectorXd response;    // n, observed y_{A_i, i}

  int n() const { return static_cast<int>(arm.size()); }
  int num_strata() const { return baseline.num_strata(); }
  std::vector<int> ArmCounts() const;

  // Checks all size and range invariants; throws InputError on violation.
  void Validate() const;
};

// Simulation-only: every potential response for every patient.
struct PotentialOutcomeDataset {
  Baseline baseline;
  int k = 2;
  Eigen::VectorXd pi;
  Eigen::MatrixXd potential;  // n x k

  int n() const { return baseline.size(); }

  // Observed dataset under the given assignments: y_i = potential(i, arm_i).
  TrialDataset Reveal(std::span<const int> arms) const;
};

// A smooth function of theta to report: linear contrasts or ratios.
class Contrast {
 public:
  enum class Kind { kDifference, kLinear, kRiskRatio, kLogRatio };

  // theta_b - theta_a.
  static Contrast Difference(int a, int b);
  static Contrast Linear(Eigen::VectorXd weights);
  // theta_b / theta_a.
  static Contrast RiskRatio(int a, int b);
  // log(theta_b / theta_a).
  static Contrast LogRatio(int a, int b);

  Kind kind() const { return kind_; }
  int a() const { return a_; }
  int b() const { return b_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  // Value under the null hypothesis of no effect (0 or 1).
  double NullValue() const;
  std::string Describe() const;
  void Validate(int k) const;

 private:
  Kind kind_ = Kind::kDifference;
  int a_ = 0;
  int b_ = 1;
  Eigen::VectorXd weights_;
};

struct StratumSummary {
  int level = 0;
  std::string label;
  int count = 0;
  std::vector<int> arm_counts;
};

// Per-stratum patient and per-arm counts; one row per joint stratum level.
std::vector<StratumSummary> SummarizeStrata(const TrialDataset& d);

Eigen::VectorXd EqualAllocation(int k);

}  // namespace caradj

#endif  // CARADJ_DATA_MODEL_H_
