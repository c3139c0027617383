#include "caradj/randomization.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "caradj/error.h"

namespace caradj {

std::string SchemeName(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::kSimple:
      return "simple";
    case SchemeKind::kPermutedBlock:
      return "permuted_block";
    case SchemeKind::kMinimization:
      return "minimization";
  }
  return "unknown";
}

SchemeKind ParseSchemeKind(const std::string& name) {
  if (name == "simple") return SchemeKind::kSimple;
  if (name == "permuted_block" || name == "stratified_permuted_block") {
    return SchemeKind::kPermutedBlock;
  }
  if (name == "minimization" || name == "pocock_simon") {
    return SchemeKind::kMinimization;
  }
  throw InputError("unknown randomization scheme '" + name + "'");
}

SchemeSpec SchemeSpec::Simple(Eigen::VectorXd pi) {
  SchemeSpec s;
  s.kind = SchemeKind::kSimple;
  s.pi = std::move(pi);
  return s;
}

SchemeSpec SchemeSpec::PermutedBlock(Eigen::VectorXd pi, int block_size) {
  SchemeSpec s;
  s.kind = SchemeKind::kPermutedBlock;
  s.pi = std::move(pi);
  s.block_size = block_size;
  return s;
}

SchemeSpec SchemeSpec::Minimization(Eigen::VectorXd pi, double biased_coin_p) {
  SchemeSpec s;
  s.kind = SchemeKind::kMinimization;
  s.pi = std::move(pi);
  s.biased_coin_p = biased_coin_p;
  return s;
}

std::vector<int> SchemeSpec::BlockComposition() const {
  std::vector<int> slots(k());
  for (int a = 0; a < k(); ++a) {
    slots[a] = static_cast<int>(std::lround(block_size * pi(a)));
  }
  return slots;
}

void SchemeSpec::Validate() const {
  if (k() < 1) throw InputError("scheme needs at least one arm");
  if ((pi.array() <= 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12) {
    throw InputError("scheme allocation must be positive and sum to 1");
  }
  switch (kind) {
    case SchemeKind::kSimple:
      break;
    case SchemeKind::kPermutedBlock:
      if (block_size < 1) throw InputError("block size must be positive");
      for (int a = 0; a < k(); ++a) {
        const double slots = block_size * pi(a);
        if (std::abs(slots - std::round(slots)) > 1e-9 ||
            std::round(slots) < 1) {
          throw InputError("block size " + std::to_string(block_size) +
                           " times pi_" + std::to_string(a + 1) +
                           " is not a positive integer");
        }
      }
      break;
    case SchemeKind::kMinimization:
      if (!(biased_coin_p > 1.0 / k() && biased_coin_p <= 1.0)) {
        throw InputError("biased coin probability must lie in (1/k, 1]");
      }
      for (double w : margin_weights) {
        if (!(w >= 0.0)) throw InputError("margin weights must be nonnegative");
      }
      break;
  }
}

SchemeState::SchemeState(SchemeSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(seed) {
  spec_.Validate();
}

int SchemeState::DrawFromPi() {
  const double u = Uniform01(rng_);
  double cumulative = 0.0;
  for (int a = 0; a + 1 < spec_.k(); ++a) {
    cumulative += spec_.pi(a);
    if (u < cumulative) return a;
  }
  return spec_.k() - 1;
}

int SchemeState::AssignNext(int stratum, std::span<const int> margins) {
  switch (spec_.kind) {
    case SchemeKind::kSimple:
      return DrawFromPi();
    case SchemeKind::kPermutedBlock: {
      std::vector<int>& remaining = block_remaining_[stratum];
      if (remaining.empty()) {
        const std::vector<int> slots = spec_.BlockComposition();
        for (int a = 0; a < spec_.k(); ++a) {
          remaining.insert(remaining.end(), slots[a], a);
        }
      }
      const int pick = UniformIndex(rng_, static_cast<int>(remaining.size()));
      const int arm = remaining[pick];
      remaining[pick] = remaining.back();
      remaining.pop_back();
      return arm;
    }
    case SchemeKind::kMinimization:
      return AssignMinimization(margins);
  }
  return 0;
}

int SchemeState::AssignMinimization(std::span<const int> margins) {
  const int k = spec_.k();
  const int m = static_cast<int>(margins.size());
  if (static_cast<int>(counts_.size()) < m) counts_.resize(m);
  for (int j = 0; j < m; ++j) {
    if (margins[j] < 0) throw InputError("negative margin level");
    if (static_cast<int>(counts_[j].size()) <= margins[j]) {
      counts_[j].resize(margins[j] + 1, std::vector<int>(k, 0));
    }
  }

  // Imbalance after hypothetically assigning arm a: weighted sum over
  // margins of the range of pi-scaled counts at the patient's levels.
  std::vector<double> imbalance(k, 0.0);
  for (int a = 0; a < k; ++a) {
    for (int j = 0; j < m; ++j) {
      const std::vector<int>& c = counts_[j][margins[j]];
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (int b = 0; b < k; ++b) {
        const double scaled = (c[b] + (b == a ? 1 : 0)) / spec_.pi(b);
        lo = std::min(lo, scaled);
        hi = std::max(hi, scaled);
      }
      const double w = j < static_cast<int>(spec_.margin_weights.size())
                           ? spec_.margin_weights[j]
                           : 1.0;
      imbalance[a] += w * (hi - lo);
    }
  }
  const double best = *std::min_element(imbalance.begin(), imbalance.end());
  std::vector<int> minimizers;
  std::vector<int> others;
  for (int a = 0; a < k; ++a) {
    (imbalance[a] <= best + 1e-12 ? minimizers : others).push_back(a);
  }

  int arm;
  if (others.empty()) {
    arm = DrawFromPi();
  } else if (Bernoulli(rng_, spec_.biased_coin_p)) {
    arm = minimizers[UniformIndex(rng_, static_cast<int>(minimizers.size()))];
  } else {
    arm = others[UniformIndex(rng_, static_cast<int>(others.size()))];
  }
  for (int j = 0; j < m; ++j) ++counts_[j][margins[j]][arm];
  return arm;
}

std::vector<int> AssignAll(const SchemeSpec& spec, const Baseline& baseline,
                           std::uint64_t seed) {
  SchemeState state(spec, seed);
  const int n = baseline.size();
  std::vector<int> arms(n);
  std::vector<int> margins(baseline.num_margins());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < baseline.num_margins(); ++j) {
      margins[j] = baseline.margins(i, j);
    }
    arms[i] = state.AssignNext(baseline.stratum[i], margins);
  }
  return arms;
}

Eigen::MatrixXd SimpleRandomizationCovariance(const Eigen::VectorXd& pi) {
  Eigen::MatrixXd omega = -pi * pi.transpose();
  omega.diagonal() += pi;
  return omega;
}

const Eigen::MatrixXd& OmegaSpec::ForStratum(int /*z*/) const {
  if (!known) {
    throw RefusalError(
        "Omega(z) is unknown for this randomization scheme",
        {"universal", "naive"});
  }
  return common;
}

OmegaSpec OmegaFor(const SchemeSpec& spec) {
  OmegaSpec omega;
  omega.omega_sr = SimpleRandomizationCovariance(spec.pi);
  switch (spec.kind) {
    case SchemeKind::kSimple:
      omega.common = omega.omega_sr;
      break;
    case SchemeKind::kPermutedBlock:
      omega.common = Eigen::MatrixXd::Zero(spec.k(), spec.k());
      break;
    case SchemeKind::kMinimization:
      omega.known = false;
      break;
  }
  return omega;
}

AllocationCheck CheckAllocationRate(const TrialDataset& d,
                                    const SchemeSpec& spec) {
  const std::vector<StratumSummary> strata = SummarizeStrata(d);
  AllocationCheck check;
  check.stats.resize(d.num_strata(), d.k);
  const double root_n = std::sqrt(static_cast<double>(d.n()));
  for (const StratumSummary& s : strata) {
    for (int a = 0; a < d.k; ++a) {
      const double expected = s.count * spec.pi(a);
      check.stats(s.level, a) =
          root_n * (static_cast<double>(s.arm_counts[a]) / s.count - spec.pi(a));
      check.max_count_deviation = std::max(
          check.max_count_deviation, std::abs(s.arm_counts[a] - expected));
    }
  }
  if (spec.kind == SchemeKind::kPermutedBlock &&
      check.max_count_deviation > spec.block_size + 1e-9) {
    throw EstimationError(
        "permuted-block allocation bound violated: |n_a(z) - n(z) pi_a| = " +
        std::to_string(check.max_count_deviation) + " exceeds block size " +
        std::to_string(spec.block_size));
  }
  return check;
}

}  // namespace caradj
