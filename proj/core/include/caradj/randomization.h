#ifndef CARADJ_RANDOMIZATION_H_
#define CARADJ_RANDOMIZATION_H_

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "caradj/data_model.h"
#include "caradj/rng.h"

namespace caradj {

enum class SchemeKind { kSimple, kPermutedBlock, kMinimization };

std::string SchemeName(SchemeKind kind);
SchemeKind ParseSchemeKind(const std::string& name);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::kSimple;
  Eigen::VectorXd pi;
  // Stratified permuted block: block_size * pi_a must be a positive integer.
  int block_size = 6;
  // Pocock-Simon minimization.
  double biased_coin_p = 0.8;
  std::vector<double> margin_weights;  // empty means weight 1 per margin

  static SchemeSpec Simple(Eigen::VectorXd pi);
  static SchemeSpec PermutedBlock(Eigen::VectorXd pi, int block_size);
  static SchemeSpec Minimization(Eigen::VectorXd pi, double biased_coin_p = 0.8);

  int k() const { return static_cast<int>(pi.size()); }
  // Arm composition of one permuted block.
  std::vector<int> BlockComposition() const;
  void Validate() const;
};

// Sequential assignment state for one enrollment stream. Not thread-safe;
// independent streams get independent seeds.
class SchemeState {
 public:
  SchemeState(SchemeSpec spec, std::uint64_t seed);

  // Assigns the next patient. `stratum` is the joint level; `margins` holds
  // the patient's level on each stratification margin (used only by
  // minimization). Unseen strata and margin levels create fresh state.
  int AssignNext(int stratum, std::span<const int> margins = {});

  const SchemeSpec& spec() const { return spec_; }

 private:
  int DrawFromPi();
  int AssignMinimization(std::span<const int> margins);

  SchemeSpec spec_;
  Rng rng_;
  std::unordered_map<int, std::vector<int>> block_remaining_;
  // counts_[margin][level][arm]
  std::vector<std::vector<std::vector<int>>> counts_;
};

// Assigns every patient of `baseline` in row order.
std::vector<int> AssignAll(const SchemeSpec& spec, const Baseline& baseline,
                           std::uint64_t seed);

// Omega_SR = diag(pi) - pi pi^T.
Eigen::MatrixXd SimpleRandomizationCovariance(const Eigen::VectorXd& pi);

// Per-stratum k x k covariance Omega(z) of the limiting allocation
// fractions. Minimization has no such stratum-wise limit: `known` is false.
struct OmegaSpec {
  bool known = true;
  Eigen::MatrixXd omega_sr;
  Eigen::MatrixXd common;  // Omega(z) for every z when known

  const Eigen::MatrixXd& ForStratum(int z) const;
};

OmegaSpec OmegaFor(const SchemeSpec& spec);

struct AllocationCheck {
  // stats(l, a) = sqrt(n) * (n_a(z_l) / n(z_l) - pi_a)
  Eigen::MatrixXd stats;
  // max_l,a |n_a(z_l) - n(z_l) pi_a|
  double max_count_deviation = 0.0;
};

// Throws EstimationError under permuted blocks when the block-size bound is
// violated, which can only happen if the assignment state was corrupted.
AllocationCheck CheckAllocationRate(const TrialDataset& d,
                                    const SchemeSpec& spec);

}  // namespace caradj

#endif  // CARADJ_RANDOMIZATION_H_
