// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every run uses a fixed seed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "caradj/caradj.h"
#include "test_util.h"

namespace caradj {
namespace {

constexpr std::uint64_t kSeed = 20240501;
constexpr int kReps = 2000;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0.0, double c = 0.0,
                double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

PipelineSpec Mean() {
  PipelineSpec p;
  p.estimator = EstimatorKind::kMean;
  return p;
}

PipelineSpec Logistic(Calibration calibration) {
  PipelineSpec p;
  p.model.family = ModelFamily::kLogistic;
  p.model.include_strata = false;
  p.calibration = calibration;
  return p;
}

ScenarioSummary Case1(const SchemeSpec& scheme, std::vector<PipelineSpec> pipelines,
                      int n, int reps) {
  ScenarioSpec spec;
  spec.dgp = Dgp::kCase1;
  spec.n = n;
  spec.replicates = reps;
  spec.seed = kSeed;
  spec.scheme = scheme;
  spec.pipelines = std::move(pipelines);
  return RunScenario(spec);
}

SchemeSpec Simple() { return SchemeSpec::Simple(Eigen::VectorXd()); }
SchemeSpec Block() { return SchemeSpec::PermutedBlock(Eigen::VectorXd(), 4); }
SchemeSpec Minimization() { return SchemeSpec::Minimization(Eigen::VectorXd()); }

double McSeOfSd(const EstimatorSummary& s) {
  return s.sd / std::sqrt(2.0 * (s.used - 1));
}

Outcome Criterion1() {
  const Figure1Result r = Figure1Experiment(1000, 500, kSeed);
  const double reps = static_cast<double>(r.g_computation.size());
  const double g_bias = r.g_summary.bias;
  const double g_mcse = r.g_summary.sd / std::sqrt(reps);
  const double a_bias = r.aipw_summary.bias;
  const double a_mcse = r.aipw_summary.sd / std::sqrt(reps);
  Outcome o;
  o.pass = g_bias > 3.0 * g_mcse && std::abs(a_bias) < 3.0 * a_mcse;
  o.detail = Fmt("truth %.4f; g-computation bias %.4f (3 MC SE %.4f); ", r.truth,
                 g_bias, 3.0 * g_mcse) +
             Fmt("AIPW bias %.4f (3 MC SE %.4f)", a_bias, 3.0 * a_mcse);
  return o;
}

Outcome Criterion2() {
  const EstimatorSummary s = Case1(Simple(), {Mean()}, 1000, kReps).estimators[0];
  const double sd = 100 * s.sd, se = 100 * s.se, cp = 100 * s.cp;
  Outcome o;
  o.pass = sd >= 2.98 && sd <= 3.28 && std::abs(se - sd) <= 0.05 * sd &&
           cp >= 93.5 && cp <= 96.5;
  o.detail = Fmt("SD %.3f, SE %.3f, CP %.2f", sd, se, cp);
  return o;
}

// Shared by criteria 3, 4, and 5.
struct SchemeRuns {
  ScenarioSummary simple, block, minimization;
};

const SchemeRuns& Runs() {
  static const SchemeRuns runs = [] {
    const std::vector<PipelineSpec> pipelines = {Mean(),
                                                 Logistic(Calibration::kJoint)};
    return SchemeRuns{Case1(Simple(), pipelines, 1000, kReps),
                      Case1(Block(), pipelines, 1000, kReps),
                      Case1(Minimization(), pipelines, 1000, kReps)};
  }();
  return runs;
}

Outcome Criterion3() {
  const EstimatorSummary& s = Runs().block.estimators[0];
  const double gap = 100 * (s.naive_se - s.se);
  Outcome o;
  o.pass = gap >= 0.2 && 100 * s.naive_cp > 96.0;
  o.detail = Fmt("naive SE %.3f vs correct SE %.3f (gap %.3f), naive CP %.2f",
                 100 * s.naive_se, 100 * s.se, gap, 100 * s.naive_cp);
  return o;
}

Outcome Criterion4() {
  const EstimatorSummary* jc[3] = {&Runs().simple.estimators[1],
                                   &Runs().block.estimators[1],
                                   &Runs().minimization.estimators[1]};
  Outcome o;
  o.detail = Fmt("JC SD %.3f / %.3f / %.3f", 100 * jc[0]->sd, 100 * jc[1]->sd,
                 100 * jc[2]->sd);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const double pooled = std::hypot(McSeOfSd(*jc[i]), McSeOfSd(*jc[j]));
      const double diff = std::abs(jc[i]->sd - jc[j]->sd);
      if (diff > 3.0 * pooled) o.pass = false;
      o.detail += Fmt("; |d%.0f%.0f| %.3f <= %.3f", i + 1, j + 1, 100 * diff,
                      300 * pooled);
    }
  }
  return o;
}

// Paired over replicates: the JC and sample-mean diagonals come from the same
// simulated trials.
Outcome Criterion5() {
  Outcome o;
  for (const auto& [name, run] :
       {std::pair<const char*, const ScenarioSummary*>{"simple", &Runs().simple},
        {"permuted block", &Runs().block}}) {
    const EstimatorSummary& mean = run->estimators[0];
    const EstimatorSummary& jc = run->estimators[1];
    if (mean.vhat_diagonals.size() != jc.vhat_diagonals.size() ||
        mean.vhat_diagonals.empty()) {
      o.pass = false;
      o.detail += std::string(name) + ": replicate sets differ; ";
      continue;
    }
    const int reps = static_cast<int>(jc.vhat_diagonals.size());
    for (int a = 0; a < 2; ++a) {
      double sum = 0.0, sum2 = 0.0, jc_mean = 0.0, mean_mean = 0.0;
      for (int r = 0; r < reps; ++r) {
        const double d = jc.vhat_diagonals[r](a) - mean.vhat_diagonals[r](a);
        sum += d;
        sum2 += d * d;
        jc_mean += jc.vhat_diagonals[r](a) / reps;
        mean_mean += mean.vhat_diagonals[r](a) / reps;
      }
      const double avg = sum / reps;
      const double sd = std::sqrt((sum2 - reps * avg * avg) / (reps - 1));
      const double mcse = sd / std::sqrt(static_cast<double>(reps));
      if (avg > 3.0 * mcse) o.pass = false;
      o.detail += std::string(name) +
                  Fmt(" arm %.0f: JC %.4f vs mean %.4f (+3 MC SE %.4f); ", a + 1,
                      jc_mean, mean_mean, 3.0 * mcse);
    }
  }
  return o;
}

Outcome Criterion7() {
  const int n = 5000;
  const ScenarioSummary s =
      Case1(Simple(),
            {Mean(), Logistic(Calibration::kNone), Logistic(Calibration::kJoint)},
            n, 200);
  Outcome o;
  for (const EstimatorSummary& e : s.estimators) {
    const double empirical = n * e.sd * e.sd;
    const double rel = std::abs(empirical - e.mean_quad_form) / e.mean_quad_form;
    if (!(rel <= 0.15)) o.pass = false;
    o.detail += e.label + Fmt(": n var %.4f vs mean V %.4f (rel %.3f); ",
                              empirical, e.mean_quad_form, rel);
  }
  return o;
}

Outcome Criterion6() {
  Outcome o;
  Rng rng(kSeed);
  WorkingModelSpec zero, linear, logistic;
  linear.family = ModelFamily::kLinear;
  logistic.family = ModelFamily::kLogistic;

  bool a = true;
  for (int t = 0; t < 100; ++t) {
    const TrialDataset d = testing::RandomDataset(30 + t, 2 + t % 3, 2, rng, t % 2);
    if (Aipw(d, Fit(zero, d)).theta != SampleMean(d).theta) a = false;
  }

  bool b = true;
  for (int t = 0; t < 20; ++t) {
    const TrialDataset d = testing::RandomDataset(300, 2, 2, rng, true);
    const Eigen::MatrixXd mu = Fit(logistic, d).Predict(d.baseline);
    const Eigen::MatrixXd off = mu.array().square().matrix();
    const bool unbiased = CheckPredictionUnbiasedness(mu, d, 1e-10).all();
    const bool biased = !CheckPredictionUnbiasedness(off, d, 1e-10).all();
    const double same =
        (GComputation(d, mu).theta - Aipw(d, mu).theta).cwiseAbs().maxCoeff();
    const double differ =
        (GComputation(d, off).theta - Aipw(d, off).theta).cwiseAbs().maxCoeff();
    if (!(unbiased && same < 1e-10 && biased && differ >= 1e-10)) b = false;
  }

  bool c = true;
  double c_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const TrialDataset d = testing::RandomDataset(200, 2, 2, rng);
    const WorkingModelFit fit = Fit(linear, d);
    const FoldPlan plan = FoldPlan::Random(d.n(), 5, rng);
    const ThetaEstimate cf = CrossFitAipw(
        d, [&](std::span<const int>, int) { return fit; }, plan,
        PiMode::kWholeSample);
    c_err = std::max(c_err, (cf.theta - Aipw(d, fit).theta).cwiseAbs().maxCoeff());
  }
  if (c_err > 1e-12) c = false;

  bool dd = true;
  for (int t = 0; t < 20; ++t) {
    const TrialDataset d = testing::RandomDataset(150, 3, 2, rng);
    const VarComponents vc = ComputeVarComponents(d, Aipw(d, Fit(linear, d)));
    if (VhatRobust(vc, OmegaFor(SchemeSpec::Simple(d.pi))).vhat !=
        VhatUniversal(vc).vhat) {
      dd = false;
    }
  }

  double e_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const TrialDataset d = testing::RandomDataset(150, 2, 2, rng);
    const Eigen::MatrixXd mu = Fit(linear, d).Predict(d.baseline);
    Eigen::MatrixXd shifted = mu;
    shifted.col(t % 2).array() += 10.0 * Uniform01(rng) - 5.0;
    e_err = std::max(
        e_err, (Aipw(d, mu).theta - Aipw(d, shifted).theta).cwiseAbs().maxCoeff());
  }
  const bool e = e_err <= 1e-12;

  o.pass = a && b && c && dd && e;
  o.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " (b) " +
             (b ? "ok" : "FAIL") + " (c) " + (c ? "ok" : "FAIL") +
             Fmt(" [%.1e]", c_err) + " (d) " + (dd ? "ok" : "FAIL") + " (e) " +
             (e ? "ok" : "FAIL") + Fmt(" [%.1e]", e_err);
  return o;
}

Outcome Criterion8() {
  Outcome o;
  const int strata = 20, draws = 100000;
  double worst = 0.0;
  for (const SchemeSpec& spec :
       {SchemeSpec::PermutedBlock(EqualAllocation(2), 4),
        SchemeSpec::PermutedBlock(Eigen::Vector2d(1.0 / 3, 2.0 / 3), 6),
        SchemeSpec::PermutedBlock(EqualAllocation(3), 6)}) {
    const int k = static_cast<int>(spec.pi.size());
    SchemeState state(spec, kSeed);
    Rng rng(kSeed + 1);
    std::vector<std::vector<int>> counts(strata, std::vector<int>(k, 0));
    std::vector<int> totals(strata, 0);
    for (int i = 0; i < draws; ++i) {
      const int z = UniformIndex(rng, strata);
      ++counts[z][state.AssignNext(z)];
      ++totals[z];
      for (int a = 0; a < k; ++a) {
        const double dev = std::abs(counts[z][a] - totals[z] * spec.pi(a));
        worst = std::max(worst, dev / spec.block_size);
        if (dev > spec.block_size) o.pass = false;
      }
    }
  }
  Rng rng(kSeed + 2);
  double row_sum = 0.0, min_eig = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + UniformIndex(rng, 5);
    Eigen::VectorXd pi(k);
    for (int a = 0; a < k; ++a) pi(a) = 0.01 + Uniform01(rng);
    pi /= pi.sum();
    const Eigen::MatrixXd omega = SimpleRandomizationCovariance(pi);
    row_sum = std::max(row_sum, omega.rowwise().sum().cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  if (row_sum > 1e-12 || min_eig < -1e-12) o.pass = false;
  o.detail = Fmt("max |n_a(z) - n(z) pi_a| / block %.3f; max |row sum| %.1e, "
                 "min eigenvalue %.1e",
                 worst, row_sum, min_eig);
  return o;
}

Outcome Criterion9() {
  Outcome o;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(40, 1);
  Eigen::VectorXd binary = Eigen::VectorXd::Zero(40);
  binary.head(13).setOnes();
  Eigen::VectorXd counts(40);
  for (int i = 0; i < 40; ++i) counts(i) = (i * 7) % 11;
  const double logit_err =
      std::abs(FitGlm(GlmFamily::kLogistic, ones, binary).coefficients(0) -
               std::log(13.0 / 27.0));
  const double poisson_err =
      std::abs(FitGlm(GlmFamily::kPoisson, ones, counts).coefficients(0) -
               std::log(counts.mean()));
  const double nb_err = std::abs(
      std::exp(FitGlm(GlmFamily::kNegativeBinomial, ones, counts).coefficients(0)) -
      counts.mean());
  const double gauss_err =
      std::abs(FitGlm(GlmFamily::kGaussian, ones, counts).coefficients(0) -
               counts.mean());
  const double irls = std::max({logit_err, poisson_err, nb_err, gauss_err});
  if (irls > 1e-10) o.pass = false;

  Eigen::VectorXd theta(3);
  theta << 0.31, 0.47, 0.62;
  double grad = 0.0;
  for (const Contrast& c :
       {Contrast::Difference(0, 1), Contrast::RiskRatio(0, 2),
        Contrast::LogRatio(1, 2)}) {
    const Eigen::VectorXd g = ContrastGradient(theta, c);
    for (int a = 0; a < 3; ++a) {
      const double h = 1e-6 * std::abs(theta(a));
      Eigen::VectorXd up = theta, down = theta;
      up(a) += h;
      down(a) -= h;
      const double fd =
          (EvaluateContrast(up, c) - EvaluateContrast(down, c)) / (2.0 * h);
      grad = std::max(grad, std::abs(fd - g(a)) / std::max(1.0, std::abs(g(a))));
    }
  }
  if (grad > 1e-6) o.pass = false;
  o.detail = Fmt("IRLS max error %.1e; gradient max relative error %.1e", irls, grad);
  return o;
}

Outcome Criterion10() {
  ScenarioSpec spec;
  spec.dgp = Dgp::kCase1;
  spec.n = 300;
  spec.replicates = 40;
  spec.seed = kSeed;
  spec.scheme = Minimization();
  PipelineSpec forest;
  forest.model.family = ModelFamily::kForest;
  forest.model.forest.trees = 25;
  forest.estimator = EstimatorKind::kCrossFit;
  forest.calibration = Calibration::kJoint;
  spec.pipelines = {Mean(), Logistic(Calibration::kNone),
                    Logistic(Calibration::kJoint), forest};
  spec.include_oracle = true;
  const std::string one = ToJson(RunScenario(spec, 1), true).dump();
  const std::string two = ToJson(RunScenario(spec, 2), true).dump();
  const std::string four = ToJson(RunScenario(spec, 4), true).dump();
  Outcome o;
  o.pass = one == two && one == four;
  o.detail = Fmt("%.0f bytes; threads 1/2/4 identical: ", one.size()) +
             (o.pass ? "yes" : "no");
  return o;
}

}  // namespace
}  // namespace caradj

int main() {
  using caradj::Outcome;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, caradj::Criterion1}, {2, caradj::Criterion2}, {3, caradj::Criterion3},
      {4, caradj::Criterion4}, {5, caradj::Criterion5}, {6, caradj::Criterion6},
      {7, caradj::Criterion7}, {8, caradj::Criterion8}, {9, caradj::Criterion9},
      {10, caradj::Criterion10}};
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    std::printf("%s criterion %d: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
