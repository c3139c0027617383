#include "caradj/glm.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "caradj/error.h"
#include "caradj/linalg.h"

namespace caradj {
namespace {

constexpr double kProbClamp = 1e-15;
constexpr double kMaxEta = 700.0;

double Clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

struct Working {
  Eigen::VectorXd mu;
  Eigen::VectorXd dmu_deta;
  Eigen::VectorXd variance;
};

Working Evaluate(GlmFamily family, const Eigen::VectorXd& eta, double alpha) {
  const int n = static_cast<int>(eta.size());
  Working w{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    switch (family) {
      case GlmFamily::kGaussian:
        w.mu(i) = eta(i);
        w.dmu_deta(i) = 1.0;
        w.variance(i) = 1.0;
        break;
      case GlmFamily::kLogistic: {
        const double p = Clamp(1.0 / (1.0 + std::exp(-eta(i))), kProbClamp,
                               1.0 - kProbClamp);
        w.mu(i) = p;
        w.dmu_deta(i) = p * (1.0 - p);
        w.variance(i) = p * (1.0 - p);
        break;
      }
      case GlmFamily::kPoisson:
      case GlmFamily::kNegativeBinomial: {
        const double m = std::max(std::exp(std::min(eta(i), kMaxEta)), 1e-300);
        w.mu(i) = m;
        w.dmu_deta(i) = m;
        w.variance(i) = family == GlmFamily::kPoisson ? m : m + alpha * m * m;
        break;
      }
    }
  }
  return w;
}

double Link(GlmFamily family, double mu) {
  switch (family) {
    case GlmFamily::kGaussian:
      return mu;
    case GlmFamily::kLogistic:
      return std::log(mu / (1.0 - mu));
    case GlmFamily::kPoisson:
    case GlmFamily::kNegativeBinomial:
      return std::log(mu);
  }
  return mu;
}

double MaxAbsScore(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Working& w) {
  const Eigen::VectorXd r =
      ((y - w.mu).array() * w.dmu_deta.array() / w.variance.array()).matrix();
  return (x.transpose() * r).cwiseAbs().maxCoeff() /
         static_cast<double>(x.rows());
}

// Size of the terms summed in the score, max_j sum_i |x_ij| (|y_i| + |mu_i|)
// g_i / n. Rounding limits the attainable score norm relative to this.
double ScoreScale(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Working& w) {
  const Eigen::VectorXd r = ((y.array().abs() + w.mu.array().abs()) *
                             w.dmu_deta.array().abs() / w.variance.array())
                                .matrix();
  return (x.cwiseAbs().transpose() * r).maxCoeff() /
         static_cast<double>(x.rows());
}

// IRLS for the mean coefficients with the dispersion held fixed.
struct MeanSolve {
  Eigen::VectorXd beta;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool used_ridge = false;
  std::vector<double> deviance_trace;
};

MeanSolve SolveMean(GlmFamily family, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& y, double alpha,
                    const Eigen::VectorXd* start, const GlmOptions& options) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  MeanSolve out;

  Eigen::VectorXd eta(n);
  bool have_beta = false;
  if (start != nullptr) {
    out.beta = *start;
    eta = x * out.beta;
    have_beta = true;
  } else {
    const double ybar = y.mean();
    for (int i = 0; i < n; ++i) {
      double mu0 = 0.0;
      switch (family) {
        case GlmFamily::kGaussian:
          mu0 = y(i);
          break;
        case GlmFamily::kLogistic:
          mu0 = (y(i) + 0.5) / 2.0;
          break;
        case GlmFamily::kPoisson:
        case GlmFamily::kNegativeBinomial:
          mu0 = 0.5 * (y(i) + ybar) + 0.1;
          break;
      }
      eta(i) = Link(family, mu0);
    }
    out.beta = Eigen::VectorXd::Zero(p);
  }
  Working w = Evaluate(family, eta, alpha);
  double deviance = have_beta ? Deviance(family, y, w.mu, alpha)
                              : std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::ArrayXd weight;
    Eigen::VectorXd z;
    if (family == GlmFamily::kNegativeBinomial) {
      // Observed information. With the log link and alpha fixed the
      // log-likelihood is concave in eta, so these weights stay positive and
      // the update is an exact Newton step; Fisher scoring can crawl when the
      // mean model is badly misspecified.
      const Eigen::ArrayXd mu = w.mu.array();
      const Eigen::ArrayXd yy = y.array();
      weight = mu * (1.0 + alpha * yy) / (1.0 + alpha * mu).square();
      z = (eta.array() + (yy - mu) * (1.0 + alpha * mu) / (mu * (1.0 + alpha * yy)))
              .matrix();
    } else {
      weight = w.dmu_deta.array().square() / w.variance.array();
      z = (eta.array() + (y - w.mu).array() / w.dmu_deta.array()).matrix();
    }
    const Eigen::MatrixXd xw = x.array().colwise() * weight;
    Eigen::MatrixXd gram = xw.transpose() * x;
    const Eigen::VectorXd rhs = xw.transpose() * z;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14) ||
        !ldlt.isPositive()) {
      gram.diagonal().array() += options.ridge;
      ldlt.compute(gram);
      out.used_ridge = true;
      if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-16)) {
        throw EstimationError(
            "singular weighted design matrix after ridge fallback");
      }
    }
    Eigen::VectorXd beta_new = ldlt.solve(rhs);
    if (!beta_new.allFinite()) {
      throw EstimationError("non-finite IRLS update");
    }

    Eigen::VectorXd eta_new = x * beta_new;
    Working w_new = Evaluate(family, eta_new, alpha);
    double dev_new = Deviance(family, y, w_new.mu, alpha);
    if (have_beta) {
      // Step-halving keeps the deviance non-increasing.
      for (int half = 0;
           half < 50 && !(dev_new <= deviance + 1e-12 * (1.0 + std::abs(deviance)));
           ++half) {
        beta_new = 0.5 * (beta_new + out.beta);
        eta_new = x * beta_new;
        w_new = Evaluate(family, eta_new, alpha);
        dev_new = Deviance(family, y, w_new.mu, alpha);
      }
    }
    const double step = (beta_new - out.beta).norm();
    out.beta = beta_new;
    eta = eta_new;
    w = w_new;
    deviance = dev_new;
    have_beta = true;
    out.deviance_trace.push_back(deviance);
    out.iterations = iter;
    out.gradient_norm = MaxAbsScore(x, y, w);

    if (family == GlmFamily::kLogistic &&
        out.beta.norm() > options.separation_norm) {
      throw EstimationError(
          "quasi-separation: logistic coefficients diverge (norm " +
          std::to_string(out.beta.norm()) + ")");
    }
    const double tolerance =
        options.tolerance * std::max(1.0, ScoreScale(x, y, w));
    const bool converged =
        out.gradient_norm <= tolerance ||
        // Updates at rounding level with a small score: the tolerance is
        // below what double precision can resolve for this scale of data.
        (iter > 1 && step <= 1e-14 * (1.0 + out.beta.norm()) &&
         out.gradient_norm <= 1e-7);
    if (converged) {
      // Under separation the score vanishes only because fitted
      // probabilities reach 0 or 1 while the coefficients run off.
      if (family == GlmFamily::kLogistic &&
          (w.mu.array().min(1.0 - w.mu.array()) < 1e-8).any()) {
        throw EstimationError(
            "quasi-separation: fitted probabilities numerically 0 or 1");
      }
      return out;
    }
  }
  if (family == GlmFamily::kLogistic && eta.cwiseAbs().maxCoeff() > 30.0) {
    throw EstimationError(
        "quasi-separation: fitted probabilities approach 0 or 1");
  }
  throw ConvergenceError("IRLS did not converge in " +
                             std::to_string(options.max_iterations) +
                             " iterations (gradient norm " +
                             std::to_string(out.gradient_norm) + ")",
                         out.gradient_norm);
}

// Negative binomial log-likelihood in theta = 1/alpha, up to constants in
// theta, and its first two derivatives.
struct ThetaDerivatives {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

ThetaDerivatives ThetaLogLik(double theta, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& mu) {
  ThetaDerivatives d;
  const double psi_theta = boost::math::digamma(theta);
  const double tri_theta = boost::math::trigamma(theta);
  const double lg_theta = std::lgamma(theta);
  for (int i = 0; i < y.size(); ++i) {
    const double s = theta + mu(i);
    d.value += std::lgamma(y(i) + theta) - lg_theta + theta * std::log(theta) -
               (theta + y(i)) * std::log(s);
    d.first += boost::math::digamma(y(i) + theta) - psi_theta +
               std::log(theta) + 1.0 - std::log(s) - (theta + y(i)) / s;
    d.second += boost::math::trigamma(y(i) + theta) - tri_theta + 1.0 / theta -
                1.0 / s - (mu(i) - y(i)) / (s * s);
  }
  return d;
}

// Newton on log(theta) with step-halving; theta limited to
// [1e-8, 1 / min_dispersion].
double UpdateDispersion(double alpha, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& mu, const GlmOptions& options) {
  const double max_log_theta = std::log(1.0 / options.min_dispersion);
  const double min_log_theta = std::log(1e-8);
  double t = std::log(1.0 / alpha);
  for (int iter = 0; iter < 100; ++iter) {
    const double theta = std::exp(t);
    const ThetaDerivatives d = ThetaLogLik(theta, y, mu);
    const double grad = theta * d.first;
    const double hess = theta * theta * d.second + theta * d.first;
    double step = hess < 0.0 ? -grad / hess : (grad > 0 ? 1.0 : -1.0);
    step = Clamp(step, -2.0, 2.0);
    double t_new = Clamp(t + step, min_log_theta, max_log_theta);
    double value_new = ThetaLogLik(std::exp(t_new), y, mu).value;
    for (int half = 0; half < 30 && value_new < d.value; ++half) {
      step *= 0.5;
      t_new = Clamp(t + step, min_log_theta, max_log_theta);
      value_new = ThetaLogLik(std::exp(t_new), y, mu).value;
    }
    if (value_new < d.value) break;
    const double change = std::abs(t_new - t);
    t = t_new;
    if (change < 1e-10) break;
  }
  return std::max(std::exp(-t), options.min_dispersion);
}

}  // namespace

std::string GlmFamilyName(GlmFamily family) {
  switch (family) {
    case GlmFamily::kGaussian:
      return "gaussian";
    case GlmFamily::kLogistic:
      return "logistic";
    case GlmFamily::kPoisson:
      return "poisson";
    case GlmFamily::kNegativeBinomial:
      return "negative_binomial";
  }
  return "unknown";
}

Eigen::VectorXd InverseLink(GlmFamily family, const Eigen::VectorXd& eta) {
  switch (family) {
    case GlmFamily::kGaussian:
      return eta;
    case GlmFamily::kLogistic:
      return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    case GlmFamily::kPoisson:
    case GlmFamily::kNegativeBinomial:
      return eta.array().min(kMaxEta).exp().matrix();
  }
  return eta;
}

double Deviance(GlmFamily family, const Eigen::VectorXd& y,
                const Eigen::VectorXd& mu, double dispersion) {
  double dev = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    const double yi = y(i);
    const double mi = mu(i);
    switch (family) {
      case GlmFamily::kGaussian:
        dev += (yi - mi) * (yi - mi);
        break;
      case GlmFamily::kLogistic: {
        const double p = Clamp(mi, kProbClamp, 1.0 - kProbClamp);
        dev -= 2.0 * (yi * std::log(p) + (1.0 - yi) * std::log1p(-p));
        break;
      }
      case GlmFamily::kPoisson:
        dev += 2.0 * ((yi > 0 ? yi * std::log(yi / mi) : 0.0) - (yi - mi));
        break;
      case GlmFamily::kNegativeBinomial: {
        const double a = dispersion;
        double term = yi > 0 ? yi * std::log(yi / mi) : 0.0;
        // log1p keeps the near-Poisson limit (tiny a) free of cancellation.
        term -= (yi + 1.0 / a) * (std::log1p(a * yi) - std::log1p(a * mi));
        dev += 2.0 * term;
        break;
      }
    }
  }
  return dev;
}

GlmFit FitGlm(GlmFamily family, const Eigen::MatrixXd& design,
              const Eigen::VectorXd& y, const GlmOptions& options) {
  if (design.rows() != y.size()) {
    throw InputError("design rows and response length differ");
  }
  if (design.rows() == 0) throw EstimationError("cannot fit a GLM on no rows");
  for (int i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (family == GlmFamily::kLogistic && v != 0.0 && v != 1.0) {
      throw InputError("logistic working model needs a binary response");
    }
    if ((family == GlmFamily::kPoisson ||
         family == GlmFamily::kNegativeBinomial) &&
        (v < 0.0 || v != std::floor(v))) {
      throw InputError("count working model needs nonnegative integer responses");
    }
  }

  GlmFit fit;
  const std::vector<int> kept = IndependentColumns(design);
  {
    std::vector<bool> is_kept(design.cols(), false);
    for (int j : kept) is_kept[j] = true;
    for (int j = 0; j < design.cols(); ++j) {
      if (!is_kept[j]) fit.dropped_columns.push_back(j);
    }
  }
  const Eigen::MatrixXd x = SelectColumns(design, kept);

  MeanSolve solve;
  if (family == GlmFamily::kNegativeBinomial) {
    // Poisson start, moment estimate of alpha, then alternate.
    MeanSolve poisson = SolveMean(GlmFamily::kPoisson, x, y, 0.0, nullptr, options);
    Eigen::VectorXd mu = InverseLink(GlmFamily::kPoisson, x * poisson.beta);
    double alpha = ((y - mu).array().square() - mu.array()).sum() /
                   mu.array().square().sum();
    alpha = std::max(alpha, options.min_dispersion);
    solve = poisson;
    for (int round = 0; round < options.max_dispersion_rounds; ++round) {
      solve = SolveMean(family, x, y, alpha, &solve.beta, options);
      mu = InverseLink(family, x * solve.beta);
      const double next = UpdateDispersion(alpha, y, mu, options);
      const double change = std::abs(std::log(next) - std::log(alpha));
      alpha = next;
      if (change < 1e-8) break;
    }
    solve = SolveMean(family, x, y, alpha, &solve.beta, options);
    fit.dispersion = alpha;
  } else {
    solve = SolveMean(family, x, y, 0.0, nullptr, options);
  }

  fit.coefficients = Eigen::VectorXd::Zero(design.cols());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    fit.coefficients(kept[c]) = solve.beta(c);
  }
  fit.iterations = solve.iterations;
  fit.gradient_norm = solve.gradient_norm;
  fit.used_ridge = solve.used_ridge;
  fit.deviance_trace = std::move(solve.deviance_trace);
  return fit;
}

}  // namespace caradj
