#include "caradj/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "caradj/csv.h"

namespace caradj {
namespace {

Json Number(double v) {
  if (!std::isfinite(v)) return Json();
  return v;
}

Json Vector(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(Number(v(i)));
  return out;
}

Json Matrix(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back(Vector(m.row(i).transpose()));
  }
  return out;
}

std::string Sig4(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string Cell(double v, double scale) {
  if (!std::isfinite(v)) return "NA";
  return FormatDouble(v * scale);
}

std::string Pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace

Json ToJson(const ArmFitInfo& fit) {
  Json j;
  j["arm"] = fit.arm + 1;
  j["rows"] = fit.rows;
  j["terms"] = fit.terms;
  j["coefficients"] = Vector(fit.coefficients);
  j["dropped_terms"] = fit.dropped_terms;
  j["iterations"] = fit.iterations;
  j["gradient_norm"] = Number(fit.gradient_norm);
  j["dispersion"] = Number(fit.dispersion);
  j["used_ridge"] = fit.used_ridge;
  return j;
}

Json ToJson(const ThetaEstimate& est) {
  Json j;
  j["method"] = est.method;
  j["theta"] = Vector(est.theta);
  if (!est.folds.empty()) {
    int folds = 0;
    for (int f : est.folds) folds = std::max(folds, f + 1);
    j["folds"] = folds;
  }
  if (est.joint.has_value()) {
    Json jc;
    jc["regressors"] = est.joint->regressors;
    jc["intercepts"] = Vector(est.joint->intercepts);
    Json gamma = Json::array();
    for (Eigen::Index a = 0; a < est.joint->gamma.cols(); ++a) {
      gamma.push_back(Vector(est.joint->gamma.col(a)));
    }
    jc["gamma"] = gamma;
    jc["dropped"] = est.joint->dropped;
    j["joint_calibration"] = jc;
  }
  if (est.linear_gamma.has_value()) {
    j["linear_calibration_gamma"] = Matrix(*est.linear_gamma);
  }
  return j;
}

Json ToJson(const CovarianceEstimate& v) {
  Json j;
  j["flavor"] = VarianceFlavorName(v.flavor);
  j["vhat"] = Matrix(v.vhat);
  j["negative_diagonal"] = v.negative_diagonal;
  return j;
}

Json ToJson(const ContrastInference& inference) {
  Json j;
  j["estimate"] = Number(inference.estimate);
  j["se"] = Number(inference.se);
  j["z"] = Number(inference.z);
  j["p_value"] = Number(inference.p_value);
  j["clipped_diagonal"] = inference.clipped;
  return j;
}

Json ToJson(const PipelineResult& result) {
  Json j;
  j["name"] = result.name;
  j["estimate"] = ToJson(result.estimate);
  j["contrast"] = Number(result.contrast);
  if (result.correct_vhat.has_value()) {
    j["covariance"] = ToJson(*result.correct_vhat);
  } else {
    j["covariance"] = Json();
  }
  j["correct"] = result.correct ? ToJson(*result.correct) : Json();
  if (!result.refusal.empty()) {
    j["refusal"] = {{"reason", result.refusal},
                    {"alternatives", result.refusal_alternatives}};
  }
  j["naive_covariance"] =
      result.naive_vhat ? ToJson(*result.naive_vhat) : Json();
  j["naive"] = result.naive ? ToJson(*result.naive) : Json();
  const PipelineDiagnostics& d = result.diagnostics;
  Json diag;
  diag["unbiasedness_gap"] = Vector(d.unbiasedness_gap);
  diag["orthogonality_residual"] = Vector(d.orthogonality_residual);
  diag["collinearity_drops"] = d.collinearity_drops;
  Json fits = Json::array();
  for (const ArmFitInfo& f : d.fits) fits.push_back(ToJson(f));
  diag["fits"] = fits;
  diag["warnings"] = d.warnings;
  j["diagnostics"] = diag;
  return j;
}

Json ToJson(const EstimateReport& report) {
  Json j;
  j["n"] = report.n;
  j["k"] = report.k;
  j["pi"] = Vector(report.pi);
  j["scheme"] = report.scheme;
  j["contrast"] = report.contrast;
  Json strata = Json::array();
  for (const StratumSummary& s : report.strata) {
    strata.push_back({{"label", s.label},
                      {"count", s.count},
                      {"arm_counts", s.arm_counts}});
  }
  j["strata"] = strata;
  Json results = Json::array();
  for (const PipelineResult& r : report.results) results.push_back(ToJson(r));
  j["results"] = results;
  return j;
}

Json ToJson(const EstimatorSummary& s, bool include_samples) {
  Json j;
  j["label"] = s.label;
  j["model"] = s.model;
  j["method"] = s.method;
  j["flavor"] = s.flavor.empty() ? Json() : Json(s.flavor);
  j["used"] = s.used;
  j["failed"] = s.failed;
  j["refused"] = s.refused;
  j["bias"] = Number(s.bias);
  j["sd"] = Number(s.sd);
  j["se"] = Number(s.se);
  j["cp"] = Number(s.cp);
  j["naive_se"] = Number(s.naive_se);
  j["naive_cp"] = Number(s.naive_cp);
  j["mean_quad_form"] = Number(s.mean_quad_form);
  j["errors"] = s.errors;
  if (include_samples) {
    Json est = Json::array();
    for (double v : s.estimates) est.push_back(Number(v));
    j["estimates"] = est;
  }
  return j;
}

Json ToJson(const ScenarioSummary& s, bool include_samples) {
  Json j;
  j["dgp"] = s.dgp;
  j["scheme"] = s.scheme;
  j["n"] = s.n;
  j["replicates"] = s.replicates;
  j["seed"] = s.seed;
  j["truth"] = Vector(s.truth);
  j["truth_contrast"] = Number(s.truth_contrast);
  Json est = Json::array();
  for (const EstimatorSummary& e : s.estimators) {
    est.push_back(ToJson(e, include_samples));
  }
  j["estimators"] = est;
  return j;
}

std::string FormatReportTable(const EstimateReport& report, bool times100) {
  const double scale = times100 ? 100.0 : 1.0;
  std::ostringstream out;
  out << "n = " << report.n << ", k = " << report.k << ", scheme "
      << report.scheme << ", contrast " << report.contrast
      << (times100 ? " (estimates and SEs x100)" : "") << "\n";
  out << Pad("pipeline", 28);
  for (int a = 0; a < report.k; ++a) out << Pad("theta" + std::to_string(a + 1), 11);
  out << Pad("contrast", 11) << Pad("SE", 11) << Pad("p", 11)
      << Pad("naive SE", 11) << Pad("naive p", 11) << "flavor\n";
  for (const PipelineResult& r : report.results) {
    out << Pad(r.name, 28);
    for (int a = 0; a < report.k; ++a) {
      out << Pad(Sig4(r.estimate.theta(a) * scale), 11);
    }
    out << Pad(Sig4(r.contrast * scale), 11);
    if (r.correct) {
      out << Pad(Sig4(r.correct->se * scale), 11)
          << Pad(Sig4(r.correct->p_value), 11);
    } else {
      out << Pad("--", 11) << Pad("--", 11);
    }
    // Naive cells stay empty when they coincide with the correct ones.
    const bool same = r.correct && r.naive && r.correct->se == r.naive->se;
    if (r.naive && !same) {
      out << Pad(Sig4(r.naive->se * scale), 11)
          << Pad(Sig4(r.naive->p_value), 11);
    } else {
      out << Pad("", 11) << Pad("", 11);
    }
    out << (r.correct_vhat ? VarianceFlavorName(r.correct_vhat->flavor)
                           : std::string("refused"))
        << "\n";
  }
  for (const PipelineResult& r : report.results) {
    const PipelineDiagnostics& d = r.diagnostics;
    out << "\n[" << r.name << "]\n";
    out << "  prediction unbiasedness gap:";
    for (Eigen::Index a = 0; a < d.unbiasedness_gap.size(); ++a) {
      out << " " << Sig4(d.unbiasedness_gap(a));
    }
    out << "\n  orthogonality residual:";
    for (Eigen::Index a = 0; a < d.orthogonality_residual.size(); ++a) {
      out << " " << Sig4(d.orthogonality_residual(a));
    }
    out << "\n";
    for (const std::string& s : d.collinearity_drops) {
      out << "  dropped " << s << "\n";
    }
    for (const std::string& s : d.warnings) out << "  warning: " << s << "\n";
    if (!r.refusal.empty()) {
      out << "  refused: " << r.refusal << " (alternatives:";
      for (const std::string& a : r.refusal_alternatives) out << " " << a;
      out << ")\n";
    }
  }
  return out.str();
}

std::string FormatSummaryTable(const ScenarioSummary& s, bool times100) {
  const double scale = times100 ? 100.0 : 1.0;
  std::ostringstream out;
  out << s.dgp << ", " << s.scheme << ", n = " << s.n << ", "
      << s.replicates << " replicates, truth " << Sig4(s.truth_contrast)
      << (times100 ? " (x100)" : "") << "\n";
  out << Pad("model", 20) << Pad("method", 16) << Pad("Bias", 9) << Pad("SD", 9)
      << Pad("SE", 9) << Pad("CP", 9) << Pad("nSE", 9) << Pad("nCP", 9)
      << "failed/refused\n";
  for (const EstimatorSummary& e : s.estimators) {
    auto cell = [&](double v, double k) {
      return Pad(std::isfinite(v) ? Sig4(v * k) : std::string("--"), 9);
    };
    out << Pad(e.model, 20) << Pad(e.method, 16) << cell(e.bias, scale)
        << cell(e.sd, scale) << cell(e.se, scale) << cell(e.cp, 100.0)
        << cell(e.naive_se, scale) << cell(e.naive_cp, 100.0) << e.failed
        << "/" << e.refused << "\n";
  }
  return out.str();
}

std::string SummaryCsv(const ScenarioSummary& s) {
  std::ostringstream out;
  out << "scheme,working_model,method,bias,sd,se,cp,naive_se,naive_cp,used,"
         "failed,refused\n";
  for (const EstimatorSummary& e : s.estimators) {
    out << s.scheme << "," << e.model << "," << e.method << ","
        << Cell(e.bias, 100.0) << "," << Cell(e.sd, 100.0) << ","
        << Cell(e.se, 100.0) << "," << Cell(e.cp, 100.0) << ","
        << Cell(e.naive_se, 100.0) << "," << Cell(e.naive_cp, 100.0) << ","
        << e.used << "," << e.failed << "," << e.refused << "\n";
  }
  return out.str();
}

std::string Figure1SamplesCsv(const Figure1Result& r) {
  std::ostringstream out;
  out << "method,estimate\n";
  for (double v : r.g_computation) out << "g_computation," << FormatDouble(v) << "\n";
  for (double v : r.aipw) out << "aipw," << FormatDouble(v) << "\n";
  return out.str();
}

}  // namespace caradj
