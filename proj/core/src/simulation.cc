#include "caradj/simulation.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "caradj/error.h"

namespace caradj {
namespace {

double Expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Case1Mean1(double xc, double xb) {
  return Expit(0.5 + 0.5 * xc + 0.5 * xb - 0.2 * xc * xc);
}

double Case1Mean2(double xc, double xb) {
  return Expit(0.2 + 0.5 * xc + 0.5 * xb);
}

double Case2Mean1(double x1, double x2, double x3, double xb) {
  return Expit(0.2 - 0.5 * x1 + 0.5 * x2 + x3 + 0.2 * xb + x1 * (x2 + x3) -
               0.2 * x1 * x1 * xb - 0.02 * x1 * x1 * (1.0 - xb));
}

double Case2Mean2(double x1, double x2) {
  return 1.0 - 0.02 * x1 * x1 - 0.02 * x2 * x2;
}

// Inversion sampler; portable across standard libraries, unlike
// std::poisson_distribution.
int DrawPoisson(Rng& rng, double mean) {
  const double u = Uniform01(rng);
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 100000) {
    ++k;
    p *= mean / k;
    cdf += p;
    if (p == 0.0 && k > mean) break;
  }
  return k;
}

double Median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

std::vector<std::string> CutAtMedian(const std::vector<double>& x,
                                     const std::string& name,
                                     MedianRule rule) {
  const double cut = rule == MedianRule::kSample ? Median(x) : 0.0;
  std::vector<std::string> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = name + (x[i] > cut ? "=high" : "=low");
  }
  return out;
}

std::vector<std::string> BinaryLabels(const std::vector<double>& x,
                                      const std::string& name) {
  std::vector<std::string> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = name + (x[i] > 0.5 ? "=1" : "=0");
  }
  return out;
}

SimulatedPopulation MakePopulation(
    const std::vector<std::vector<double>>& columns,
    std::vector<std::string> names,
    const std::vector<std::vector<std::string>>& margins, Eigen::VectorXd pi,
    Eigen::MatrixXd potential, Eigen::MatrixXd means) {
  SimulatedPopulation pop;
  const int n = static_cast<int>(potential.rows());
  Baseline& b = pop.data.baseline;
  b.covariates.resize(n, static_cast<int>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (int i = 0; i < n; ++i) b.covariates(i, j) = columns[j][i];
  }
  b.covariate_names = std::move(names);
  AssignJointStrata(margins, b);
  pop.data.k = static_cast<int>(pi.size());
  pop.data.pi = std::move(pi);
  pop.data.potential = std::move(potential);
  pop.true_means = std::move(means);
  return pop;
}

double UniformCovariate(Rng& rng) { return -5.0 + 10.0 * Uniform01(rng); }

// Composite Gauss-Legendre nodes and weights on (-5, 5), weights scaled to
// the U(-5, 5) density so they sum to 1.
struct UniformRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

UniformRule MakeUniformRule(int panels) {
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const auto& abscissa = Rule::abscissa();
  const auto& weight = Rule::weights();
  UniformRule rule;
  const double width = 10.0 / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = -5.0 + (p + 0.5) * width;
    const double half = 0.5 * width;
    for (std::size_t j = 0; j < abscissa.size(); ++j) {
      const double w = weight[j] * half / 10.0;
      if (abscissa[j] == 0.0) {
        rule.nodes.push_back(mid);
        rule.weights.push_back(w);
      } else {
        rule.nodes.push_back(mid - half * abscissa[j]);
        rule.weights.push_back(w);
        rule.nodes.push_back(mid + half * abscissa[j]);
        rule.weights.push_back(w);
      }
    }
  }
  return rule;
}

Eigen::VectorXd ComputeTrueArmMeans(Dgp dgp) {
  Eigen::VectorXd theta(2);
  switch (dgp) {
    case Dgp::kCase1: {
      const UniformRule r = MakeUniformRule(50);
      theta.setZero();
      for (double xb : {0.0, 1.0}) {
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
          theta(0) += 0.5 * r.weights[i] * Case1Mean1(r.nodes[i], xb);
          theta(1) += 0.5 * r.weights[i] * Case1Mean2(r.nodes[i], xb);
        }
      }
      break;
    }
    case Dgp::kCase2: {
      const UniformRule r = MakeUniformRule(8);
      const std::size_t m = r.nodes.size();
      double total = 0.0;
      for (double xb : {0.0, 1.0}) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            double inner = 0.0;
            for (std::size_t l = 0; l < m; ++l) {
              inner += r.weights[l] *
                       Case2Mean1(r.nodes[i], r.nodes[j], r.nodes[l], xb);
            }
            total += 0.5 * r.weights[i] * r.weights[j] * inner;
          }
        }
      }
      theta(0) = total;
      // E(X^2) = 25/3 for X ~ U(-5, 5).
      theta(1) = 1.0 - 2.0 * 0.02 * 25.0 / 3.0;
      break;
    }
    case Dgp::kFigure1: {
      // The floors introduce kinks, so use many short panels.
      const UniformRule r = MakeUniformRule(2000);
      theta.setZero();
      for (double xb : {0.0, 1.0}) {
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
          theta(0) += 0.5 * r.weights[i] * Figure1Mean1(r.nodes[i], xb);
          theta(1) += 0.5 * r.weights[i] * Figure1Mean2(r.nodes[i], xb);
        }
      }
      break;
    }
  }
  return theta;
}

struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  double estimate = 0.0;
  bool has_correct = false;
  std::string flavor;
  double se = 0.0;
  double quad_form = 0.0;
  Eigen::VectorXd vhat_diagonal;
  bool covered = false;
  bool has_naive = false;
  double naive_se = 0.0;
  bool naive_covered = false;
};

std::string MethodName(const PipelineSpec& p) {
  switch (p.estimator) {
    case EstimatorKind::kMean:
      return "sample mean";
    case EstimatorKind::kGComputation:
      return p.calibration == Calibration::kZ ? "g-computation+Z"
                                              : "g-computation";
    case EstimatorKind::kAipw:
    case EstimatorKind::kCrossFit: {
      const bool cf = p.estimator == EstimatorKind::kCrossFit;
      switch (p.calibration) {
        case Calibration::kNone:
          return cf ? "CF" : "AIPW";
        case Calibration::kZ:
          return cf ? "CF+Z" : "Z";
        case Calibration::kLinear:
          return cf ? "CF+LC" : "LC";
        case Calibration::kJoint:
          return cf ? "CF+JC" : "JC";
      }
    }
  }
  return "unknown";
}

ReplicateOutcome FromPipeline(const PipelineResult& r, double truth,
                              double z_crit) {
  ReplicateOutcome out;
  out.ok = true;
  out.estimate = r.contrast;
  if (r.correct.has_value()) {
    out.has_correct = true;
    out.flavor = VarianceFlavorName(r.correct_vhat->flavor);
    out.se = r.correct->se;
    out.quad_form = r.correct->quad_form;
    out.vhat_diagonal = r.correct_vhat->vhat.diagonal();
    out.covered = std::abs(out.estimate - truth) <= z_crit * out.se;
  }
  if (r.naive.has_value()) {
    out.has_naive = true;
    out.naive_se = r.naive->se;
    out.naive_covered = std::abs(out.estimate - truth) <= z_crit * out.naive_se;
  }
  return out;
}

ReplicateOutcome RunOracle(const TrialDataset& d, const Eigen::MatrixXd& means,
                           const Contrast& contrast, double truth,
                           double z_crit) {
  PipelineResult r;
  r.estimate = Aipw(d, means);
  r.contrast = EvaluateContrast(r.estimate, contrast);
  const VarComponents c = ComputeVarComponents(d, r.estimate);
  // True conditional means make y - mu mean zero within every stratum.
  r.correct_vhat = VhatUniversal(c);
  r.correct = DeltaSe(*r.correct_vhat, r.estimate, contrast, d.n());
  r.naive_vhat = VhatNaive(c);
  r.naive = DeltaSe(*r.naive_vhat, r.estimate, contrast, d.n());
  return FromPipeline(r, truth, z_crit);
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string DgpName(Dgp dgp) {
  switch (dgp) {
    case Dgp::kCase1:
      return "case1";
    case Dgp::kCase2:
      return "case2";
    case Dgp::kFigure1:
      return "figure1";
  }
  return "unknown";
}

Dgp ParseDgp(const std::string& name) {
  if (name == "case1" || name == "case_1") return Dgp::kCase1;
  if (name == "case2" || name == "case_2") return Dgp::kCase2;
  if (name == "figure1" || name == "figure_1") return Dgp::kFigure1;
  throw InputError("unknown data generating process: " + name);
}

double Figure1Mean1(double xc, double xb) {
  const double arg = 1.0 + xc + 6.0 * xc * xc * xc + xb;
  if (!(arg > 0.0)) return kFigure1Floor;
  return std::max(std::log(arg), kFigure1Floor);
}

double Figure1Mean2(double xc, double xb) {
  return std::max(xc + 10.0 * xc * xc + xb, kFigure1Floor);
}

Eigen::VectorXd AllocationFor(Dgp dgp) {
  Eigen::VectorXd pi(2);
  switch (dgp) {
    case Dgp::kCase1:
      pi << 0.5, 0.5;
      break;
    case Dgp::kCase2:
      pi << 2.0 / 3.0, 1.0 / 3.0;
      break;
    case Dgp::kFigure1:
      pi << 1.0 / 3.0, 2.0 / 3.0;
      break;
  }
  return pi;
}

SimulatedPopulation DrawCase1(int n, Rng& rng, MedianRule rule) {
  if (n < 1) throw InputError("n must be positive");
  std::vector<double> xc(n), xb(n);
  Eigen::MatrixXd y(n, 2), means(n, 2);
  for (int i = 0; i < n; ++i) {
    xc[i] = UniformCovariate(rng);
    xb[i] = Bernoulli(rng, 0.5) ? 1.0 : 0.0;
    means(i, 0) = Case1Mean1(xc[i], xb[i]);
    means(i, 1) = Case1Mean2(xc[i], xb[i]);
    y(i, 0) = Bernoulli(rng, means(i, 0)) ? 1.0 : 0.0;
    y(i, 1) = Bernoulli(rng, means(i, 1)) ? 1.0 : 0.0;
  }
  return MakePopulation({xc, xb}, {"Xc", "Xb"},
                        {BinaryLabels(xb, "Xb"), CutAtMedian(xc, "Xc", rule)},
                        AllocationFor(Dgp::kCase1), std::move(y),
                        std::move(means));
}

SimulatedPopulation DrawCase2(int n, Rng& rng, MedianRule rule) {
  if (n < 1) throw InputError("n must be positive");
  std::vector<double> x1(n), x2(n), x3(n), xb(n);
  Eigen::MatrixXd y(n, 2), means(n, 2);
  for (int i = 0; i < n; ++i) {
    x1[i] = UniformCovariate(rng);
    x2[i] = UniformCovariate(rng);
    x3[i] = UniformCovariate(rng);
    xb[i] = Bernoulli(rng, 0.5) ? 1.0 : 0.0;
    means(i, 0) = Case2Mean1(x1[i], x2[i], x3[i], xb[i]);
    means(i, 1) = Case2Mean2(x1[i], x2[i]);
    y(i, 0) = Bernoulli(rng, means(i, 0)) ? 1.0 : 0.0;
    y(i, 1) = Bernoulli(rng, means(i, 1)) ? 1.0 : 0.0;
  }
  return MakePopulation(
      {x1, x2, x3, xb}, {"Xc1", "Xc2", "Xc3", "Xb"},
      {CutAtMedian(x1, "Xc1", rule), CutAtMedian(x2, "Xc2", rule),
       CutAtMedian(x3, "Xc3", rule)},
      AllocationFor(Dgp::kCase2), std::move(y), std::move(means));
}

SimulatedPopulation DrawFigure1(int n, Rng& rng) {
  if (n < 1) throw InputError("n must be positive");
  std::vector<double> xc(n), xb(n);
  Eigen::MatrixXd y(n, 2), means(n, 2);
  for (int i = 0; i < n; ++i) {
    xc[i] = UniformCovariate(rng);
    xb[i] = Bernoulli(rng, 0.5) ? 1.0 : 0.0;
    means(i, 0) = Figure1Mean1(xc[i], xb[i]);
    means(i, 1) = Figure1Mean2(xc[i], xb[i]);
    y(i, 0) = DrawPoisson(rng, means(i, 0));
    y(i, 1) = DrawPoisson(rng, means(i, 1));
  }
  return MakePopulation({xc, xb}, {"Xc", "Xb"}, {}, AllocationFor(Dgp::kFigure1),
                        std::move(y), std::move(means));
}

SimulatedPopulation Draw(Dgp dgp, int n, Rng& rng, MedianRule rule) {
  switch (dgp) {
    case Dgp::kCase1:
      return DrawCase1(n, rng, rule);
    case Dgp::kCase2:
      return DrawCase2(n, rng, rule);
    case Dgp::kFigure1:
      return DrawFigure1(n, rng);
  }
  throw InputError("unknown data generating process");
}

Eigen::VectorXd TrueArmMeans(Dgp dgp) {
  static std::once_flag flags[3];
  static Eigen::VectorXd cache[3];
  const int idx = static_cast<int>(dgp);
  std::call_once(flags[idx], [&] { cache[idx] = ComputeTrueArmMeans(dgp); });
  return cache[idx];
}

void ScenarioSpec::Validate() const {
  if (replicates < 1) throw InputError("replicates must be >= 1");
  if (n < 20) throw InputError("n must be >= 20");
  if (pipelines.empty() && !include_oracle) {
    throw InputError("scenario needs at least one estimator");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw InputError("confidence level must lie in (0, 1)");
  }
  const Eigen::VectorXd pi = AllocationFor(dgp);
  if (scheme.pi.size() != 0 &&
      (scheme.pi.size() != pi.size() ||
       (scheme.pi - pi).cwiseAbs().maxCoeff() > 1e-12)) {
    throw InputError("scheme allocation differs from the " + DgpName(dgp) +
                     " allocation");
  }
  contrast.Validate(static_cast<int>(pi.size()));
  for (const PipelineSpec& p : pipelines) p.Validate();
}

ScenarioSummary RunScenario(const ScenarioSpec& spec, int threads) {
  spec.Validate();
  SchemeSpec scheme = spec.scheme;
  if (scheme.pi.size() == 0) scheme.pi = AllocationFor(spec.dgp);
  scheme.Validate();

  const Eigen::VectorXd truth = TrueArmMeans(spec.dgp);
  const double truth_contrast = EvaluateContrast(truth, spec.contrast);
  const double z_crit = boost::math::quantile(boost::math::normal(),
                                              0.5 + 0.5 * spec.level);
  const int num_estimators =
      static_cast<int>(spec.pipelines.size()) + (spec.include_oracle ? 1 : 0);
  const int reps = spec.replicates;

  std::vector<std::vector<ReplicateOutcome>> outcomes(reps);
  auto run_replicate = [&](int r) {
    const std::uint64_t rep_seed = DeriveSeed(spec.seed, r);
    Rng rng(DeriveSeed(rep_seed, 0));
    const SimulatedPopulation pop = Draw(spec.dgp, spec.n, rng, spec.median);
    const std::vector<int> arms =
        AssignAll(scheme, pop.data.baseline, DeriveSeed(rep_seed, 1));
    const TrialDataset d = pop.data.Reveal(arms);
    std::vector<ReplicateOutcome>& row = outcomes[r];
    row.resize(num_estimators);
    for (int e = 0; e < num_estimators; ++e) {
      try {
        if (e < static_cast<int>(spec.pipelines.size())) {
          const PipelineResult result =
              RunPipeline(spec.pipelines[e], d, scheme, spec.contrast,
                          DeriveSeed(rep_seed, 2 + e));
          row[e] = FromPipeline(result, truth_contrast, z_crit);
        } else {
          row[e] = RunOracle(d, pop.true_means, spec.contrast, truth_contrast,
                             z_crit);
        }
      } catch (const Error& err) {
        row[e] = ReplicateOutcome();
        row[e].error = err.what();
      }
    }
  };

  const int workers = std::max(1, std::min(threads, reps));
  if (workers == 1) {
    for (int r = 0; r < reps; ++r) run_replicate(r);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next++; r < reps; r = next++) {
          try {
            run_replicate(r);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ScenarioSummary summary;
  summary.dgp = DgpName(spec.dgp);
  summary.scheme = SchemeName(scheme.kind);
  summary.n = spec.n;
  summary.replicates = reps;
  summary.seed = spec.seed;
  summary.truth = truth;
  summary.truth_contrast = truth_contrast;
  for (int e = 0; e < num_estimators; ++e) {
    EstimatorSummary s;
    if (e < static_cast<int>(spec.pipelines.size())) {
      const PipelineSpec& p = spec.pipelines[e];
      s.label = p.Label();
      s.model = p.estimator == EstimatorKind::kMean
                    ? "none"
                    : ModelFamilyName(p.model.family);
      s.method = MethodName(p);
    } else {
      s.label = "oracle AIPW";
      s.model = "true";
      s.method = "AIPW";
    }
    std::vector<double> se, naive_se;
    int covered = 0, naive_covered = 0;
    for (int r = 0; r < reps; ++r) {
      const ReplicateOutcome& o = outcomes[r][e];
      if (!o.ok) {
        ++s.failed;
        if (s.errors.size() < 5) s.errors.push_back(o.error);
        continue;
      }
      ++s.used;
      s.estimates.push_back(o.estimate);
      if (o.has_correct) {
        if (s.flavor.empty()) s.flavor = o.flavor;
        se.push_back(o.se);
        s.quad_forms.push_back(o.quad_form);
        s.vhat_diagonals.push_back(o.vhat_diagonal);
        covered += o.covered ? 1 : 0;
      } else {
        ++s.refused;
      }
      if (o.has_naive) {
        naive_se.push_back(o.naive_se);
        naive_covered += o.naive_covered ? 1 : 0;
      }
    }
    if (s.used > 0) s.bias = Mean(s.estimates) - truth_contrast;
    if (s.used > 1) {
      const double mean = Mean(s.estimates);
      double ss = 0.0;
      for (double x : s.estimates) ss += (x - mean) * (x - mean);
      s.sd = std::sqrt(ss / (s.used - 1));
    }
    if (!se.empty()) {
      s.se = Mean(se);
      s.cp = static_cast<double>(covered) / se.size();
      s.mean_quad_form = Mean(s.quad_forms);
    }
    if (!naive_se.empty()) {
      s.naive_se = Mean(naive_se);
      s.naive_cp = static_cast<double>(naive_covered) / naive_se.size();
    }
    summary.estimators.push_back(std::move(s));
  }
  return summary;
}

Figure1Result Figure1Experiment(int replicates, int n, std::uint64_t seed,
                                int threads) {
  if (replicates < 100) {
    throw InputError("the Figure 1 experiment needs at least 100 replicates");
  }
  ScenarioSpec spec;
  spec.dgp = Dgp::kFigure1;
  spec.n = n;
  spec.replicates = replicates;
  spec.seed = seed;
  spec.scheme = SchemeSpec::Simple(AllocationFor(Dgp::kFigure1));
  PipelineSpec base;
  base.model.family = ModelFamily::kNegativeBinomial;
  base.model.include_strata = false;
  PipelineSpec gcomp = base;
  gcomp.name = "negative_binomial g-computation";
  gcomp.estimator = EstimatorKind::kGComputation;
  PipelineSpec aipw = base;
  aipw.name = "negative_binomial AIPW";
  aipw.estimator = EstimatorKind::kAipw;
  spec.pipelines = {gcomp, aipw};

  ScenarioSummary summary = RunScenario(spec, threads);
  Figure1Result out;
  out.truth = summary.truth_contrast;
  out.g_summary = std::move(summary.estimators[0]);
  out.aipw_summary = std::move(summary.estimators[1]);
  out.g_computation = out.g_summary.estimates;
  out.aipw = out.aipw_summary.estimates;
  return out;
}

}  // namespace caradj
