#ifndef CARADJ_REPORT_H_
#define CARADJ_REPORT_H_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "caradj/data_model.h"
#include "caradj/pipeline.h"
#include "caradj/simulation.h"

namespace caradj {

using Json = nlohmann::ordered_json;

// Analysis of one observed dataset by one or more pipelines.
struct EstimateReport {
  int n = 0;
  int k = 0;
  Eigen::VectorXd pi;
  std::string scheme;
  std::string contrast;
  std::vector<StratumSummary> strata;
  std::vector<PipelineResult> results;
};

Json ToJson(const ArmFitInfo& fit);
Json ToJson(const ThetaEstimate& est);
Json ToJson(const CovarianceEstimate& v);
Json ToJson(const ContrastInference& inference);
Json ToJson(const PipelineResult& result);
Json ToJson(const EstimateReport& report);
// Per-replicate estimates are included only when `include_samples` is set.
Json ToJson(const EstimatorSummary& s, bool include_samples = false);
Json ToJson(const ScenarioSummary& s, bool include_samples = false);

// Fixed-width text table: 4 significant digits, optionally scaled by 100.
std::string FormatReportTable(const EstimateReport& report, bool times100);
std::string FormatSummaryTable(const ScenarioSummary& s, bool times100 = true);

// Columns scheme, working_model, method, bias, sd, se, cp, naive_se,
// naive_cp (all x100), then used, failed, refused. "NA" marks missing cells.
std::string SummaryCsv(const ScenarioSummary& s);
// Two columns: method, estimate.
std::string Figure1SamplesCsv(const Figure1Result& r);

}  // namespace caradj

#endif  // CARADJ_REPORT_H_
