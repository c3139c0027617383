#ifndef CARADJ_SIMULATION_H_
#define CARADJ_SIMULATION_H_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caradj/data_model.h"
#include "caradj/pipeline.h"
#include "caradj/randomization.h"
#include "caradj/rng.h"

namespace caradj {

enum class Dgp { kCase1, kCase2, kFigure1 };

std::string DgpName(Dgp dgp);
Dgp ParseDgp(const std::string& name);

// Where continuous covariates are cut to form the randomization strata.
enum class MedianRule { kSample, kPopulation };

// One simulated trial population: potential outcomes plus the true
// conditional means E(y_a | X_i) used by the oracle estimator.
struct SimulatedPopulation {
  PotentialOutcomeDataset data;
  Eigen::MatrixXd true_means;  // n x k
};

// Binary outcomes, X = (Xc, Xb), Z = (Xb, Xc cut at its median),
// pi = (1/2, 1/2).
SimulatedPopulation DrawCase1(int n, Rng& rng,
                              MedianRule rule = MedianRule::kSample);
// Binary outcomes, X = (Xc1, Xc2, Xc3, Xb), Z = the three continuous
// covariates cut at their medians, pi = (2/3, 1/3).
SimulatedPopulation DrawCase2(int n, Rng& rng,
                              MedianRule rule = MedianRule::kSample);
// Poisson counts, X = (Xc, Xb), a single stratum, pi = (1/3, 2/3).
SimulatedPopulation DrawFigure1(int n, Rng& rng);
SimulatedPopulation Draw(Dgp dgp, int n, Rng& rng,
                         MedianRule rule = MedianRule::kSample);

// Lower clamp applied to the count means of the Figure 1 process.
inline constexpr double kFigure1Floor = 1e-3;
double Figure1Mean1(double xc, double xb);
double Figure1Mean2(double xc, double xb);

Eigen::VectorXd AllocationFor(Dgp dgp);

// theta_a = E(y_a) by tensor-product Gauss-Legendre quadrature over the
// covariate distribution. Cached after the first call per process.
Eigen::VectorXd TrueArmMeans(Dgp dgp);

struct ScenarioSpec {
  Dgp dgp = Dgp::kCase1;
  int n = 1000;
  int replicates = 100;
  SchemeSpec scheme;  // pi is taken from the DGP when empty
  std::vector<PipelineSpec> pipelines;
  // Adds AIPW with the true conditional means as predictions.
  bool include_oracle = false;
  std::uint64_t seed = 1;
  Contrast contrast = Contrast::Difference(0, 1);
  MedianRule median = MedianRule::kSample;
  double level = 0.95;

  void Validate() const;
};

inline constexpr double kNotAvailable = std::numeric_limits<double>::quiet_NaN();

struct EstimatorSummary {
  std::string label;
  std::string model;   // working model column, "none" for the sample mean
  std::string method;  // "sample mean", "AIPW", "CF", "LC", "JC", ...
  std::string flavor;  // flavor of the correct SE, empty if always refused
  int used = 0;        // replicates with an estimate
  int failed = 0;      // estimator errors; excluded from every average
  int refused = 0;     // estimate available, correct SE refused
  // NaN marks "not available" (SD with fewer than 2 estimates, SE/CP when
  // every replicate refused).
  double bias = kNotAvailable;
  double sd = kNotAvailable;
  double se = kNotAvailable;
  double cp = kNotAvailable;
  double naive_se = kNotAvailable;
  double naive_cp = kNotAvailable;
  double mean_quad_form = kNotAvailable;  // mean grad^T V grad, correct SE
  std::vector<double> estimates;          // per used replicate, in order
  std::vector<double> quad_forms;         // per replicate with a correct SE
  std::vector<Eigen::VectorXd> vhat_diagonals;  // same replicates
  std::vector<std::string> errors;              // first few failure messages
};

struct ScenarioSummary {
  std::string dgp;
  std::string scheme;
  int n = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd truth;  // theta
  double truth_contrast = 0.0;
  std::vector<EstimatorSummary> estimators;
};

// Replicate r uses seeds derived from (seed, r) only, and results are
// reduced in replicate order, so the summary does not depend on `threads`.
ScenarioSummary RunScenario(const ScenarioSpec& spec, int threads = 1);

struct Figure1Result {
  double truth = 0.0;
  std::vector<double> g_computation;
  std::vector<double> aipw;
  EstimatorSummary g_summary;
  EstimatorSummary aipw_summary;
};

// Negative binomial working model with arm-specific coefficients on
// (Xc, Xb), under simple randomization with pi = (1/3, 2/3).
Figure1Result Figure1Experiment(int replicates, int n, std::uint64_t seed,
                                int threads = 1);

}  // namespace caradj

#endif  // CARADJ_SIMULATION_H_
