#include "run_config.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caradj/error.h"
#include "caradj/report.h"

namespace caradj::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void CheckKeys(const json& j, const std::string& where,
               const std::set<std::string>& allowed) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw InputError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T Get(const json& j, const std::string& key, const std::string& where,
      T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("invalid value for '" + key + "' in " + where);
  }
}

template <typename T>
T Require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) {
    throw InputError("missing key '" + key + "' in " + where);
  }
  return Get<T>(j, key, where, T{});
}

Eigen::VectorXd ToVector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

SchemeSpec ParseScheme(const json& j, const Eigen::VectorXd& default_pi) {
  const std::string where = "scheme";
  CheckKeys(j, where, {"kind", "pi", "block_size", "biased_coin_p",
                       "margin_weights"});
  SchemeSpec s;
  s.kind = ParseSchemeKind(Require<std::string>(j, "kind", where));
  const auto pi = Get<std::vector<double>>(j, "pi", where, {});
  s.pi = pi.empty() ? default_pi : ToVector(pi);
  s.block_size = Get<int>(j, "block_size", where, 6);
  s.biased_coin_p = Get<double>(j, "biased_coin_p", where, 0.8);
  s.margin_weights =
      Get<std::vector<double>>(j, "margin_weights", where, {});
  if (s.pi.size() > 0) s.Validate();
  return s;
}

Contrast ParseContrast(const json& j) {
  const std::string where = "contrast";
  CheckKeys(j, where, {"kind", "a", "b", "weights"});
  const std::string kind = Get<std::string>(j, "kind", where, "difference");
  if (kind == "linear") {
    return Contrast::Linear(
        ToVector(Require<std::vector<double>>(j, "weights", where)));
  }
  const int a = Get<int>(j, "a", where, 1) - 1;
  const int b = Get<int>(j, "b", where, 2) - 1;
  if (kind == "difference") return Contrast::Difference(a, b);
  if (kind == "risk_ratio") return Contrast::RiskRatio(a, b);
  if (kind == "log_ratio") return Contrast::LogRatio(a, b);
  throw InputError("unknown contrast kind: " + kind);
}

PipelineSpec ParsePipeline(const json& j, int index) {
  const std::string where = "pipelines[" + std::to_string(index) + "]";
  CheckKeys(j, where, {"name", "model", "covariates", "include_strata",
                       "calibration", "estimator", "folds", "pi_mode",
                       "flavor", "forest", "glm"});
  PipelineSpec p;
  p.name = Get<std::string>(j, "name", where, "");
  p.estimator = ParseEstimatorKind(Get<std::string>(j, "estimator", where, "aipw"));
  p.model.family = ParseModelFamily(Get<std::string>(
      j, "model", where, p.estimator == EstimatorKind::kMean ? "zero" : ""));
  p.model.covariates =
      Get<std::vector<std::string>>(j, "covariates", where, {});
  if (j.contains("include_strata")) {
    p.model.include_strata = Get<bool>(j, "include_strata", where, true);
  }
  p.calibration =
      ParseCalibration(Get<std::string>(j, "calibration", where, "none"));
  p.folds = Get<int>(j, "folds", where, 5);
  const std::string pi_mode = Get<std::string>(j, "pi_mode", where, "fold");
  if (pi_mode == "fold") {
    p.pi_mode = PiMode::kFoldSpecific;
  } else if (pi_mode == "whole") {
    p.pi_mode = PiMode::kWholeSample;
  } else {
    throw InputError("pi_mode must be 'fold' or 'whole' in " + where);
  }
  p.flavor = ParseFlavorChoice(Get<std::string>(j, "flavor", where, "auto"));
  if (j.contains("forest")) {
    const json& f = j.at("forest");
    CheckKeys(f, where + ".forest", {"trees", "mtry", "min_leaf"});
    p.model.forest.trees = Get<int>(f, "trees", where + ".forest", 100);
    p.model.forest.mtry = Get<int>(f, "mtry", where + ".forest", 0);
    p.model.forest.min_leaf = Get<int>(f, "min_leaf", where + ".forest", 5);
  }
  if (j.contains("glm")) {
    const json& g = j.at("glm");
    CheckKeys(g, where + ".glm", {"tolerance", "max_iterations", "ridge"});
    p.model.glm.tolerance =
        Get<double>(g, "tolerance", where + ".glm", p.model.glm.tolerance);
    p.model.glm.max_iterations = Get<int>(g, "max_iterations", where + ".glm",
                                          p.model.glm.max_iterations);
    p.model.glm.ridge = Get<double>(g, "ridge", where + ".glm", p.model.glm.ridge);
  }
  p.Validate();
  return p;
}

// Writes every file under a temporary name first and renames only after all
// writes succeeded.
void WriteAll(const fs::path& dir,
              const std::vector<std::pair<std::string, std::string>>& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string());
  std::vector<fs::path> temps;
  for (const auto& [name, content] : files) {
    const fs::path tmp = dir / (name + ".tmp");
    std::ofstream f(tmp, std::ios::binary);
    f << content;
    f.close();
    temps.push_back(tmp);
    if (!f) {
      for (const fs::path& t : temps) fs::remove(t, ec);
      throw InputError("cannot write " + tmp.string());
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::rename(temps[i], dir / files[i].first);
  }
}

json ErrorJson(const std::string& kind, const std::string& message) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  return j;
}

}  // namespace

RunConfig ParseRunConfig(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  CheckKeys(root, "config", {"mode", "seed", "dataset", "scheme", "contrast",
                             "pipelines", "simulation", "output"});
  RunConfig c;
  const std::string mode = Require<std::string>(root, "mode", "config");
  if (mode == "analyze") {
    c.mode = Mode::kAnalyze;
  } else if (mode == "simulate") {
    c.mode = Mode::kSimulate;
  } else {
    throw InputError("mode must be 'analyze' or 'simulate'");
  }
  c.seed = Get<std::uint64_t>(root, "seed", "config", 1);
  if (root.contains("contrast")) c.contrast = ParseContrast(root.at("contrast"));

  if (root.contains("output")) {
    const json& o = root.at("output");
    CheckKeys(o, "output", {"dir", "prefix", "times100", "samples"});
    c.output.dir = Get<std::string>(o, "dir", "output", ".");
    c.output.prefix = Get<std::string>(o, "prefix", "output", "");
    c.output.times100 = Get<bool>(o, "times100", "output", false);
    c.output.samples = Get<bool>(o, "samples", "output", false);
  }
  if (c.output.prefix.empty()) {
    c.output.prefix = c.mode == Mode::kAnalyze ? "report" : "summary";
  }

  if (!root.contains("pipelines") || !root.at("pipelines").is_array() ||
      root.at("pipelines").empty()) {
    throw InputError("config needs a nonempty 'pipelines' array");
  }
  int index = 0;
  for (const json& p : root.at("pipelines")) {
    c.pipelines.push_back(ParsePipeline(p, index++));
  }

  if (c.mode == Mode::kAnalyze) {
    if (root.contains("simulation")) {
      throw InputError("'simulation' is only valid in simulate mode");
    }
    if (!root.contains("dataset")) throw InputError("analyze mode needs 'dataset'");
    const json& d = root.at("dataset");
    const std::string where = "dataset";
    CheckKeys(d, where, {"path", "response", "arm", "strata", "covariates",
                         "one_hot", "pi", "arms"});
    fs::path path = Require<std::string>(d, "path", where);
    if (path.is_relative()) path = fs::path(base_dir) / path;
    c.dataset_path = path.string();
    c.schema.response = Require<std::string>(d, "response", where);
    c.schema.arm = Require<std::string>(d, "arm", where);
    c.schema.strata = Get<std::vector<std::string>>(d, "strata", where, {});
    c.schema.covariates =
        Get<std::vector<std::string>>(d, "covariates", where, {});
    c.schema.one_hot = Get<std::vector<std::string>>(d, "one_hot", where, {});
    c.schema.pi = Get<std::vector<double>>(d, "pi", where, {});
    c.schema.arms = Get<int>(d, "arms", where, 0);
    if (!root.contains("scheme")) {
      throw InputError("analyze mode needs 'scheme' (the randomization used)");
    }
    c.scheme = ParseScheme(root.at("scheme"), ToVector(c.schema.pi));
  } else {
    if (root.contains("dataset")) {
      throw InputError("'dataset' is only valid in analyze mode");
    }
    if (!root.contains("simulation")) {
      throw InputError("simulate mode needs 'simulation'");
    }
    const json& s = root.at("simulation");
    const std::string where = "simulation";
    CheckKeys(s, where, {"dgp", "n", "replicates", "median", "oracle", "level"});
    ScenarioSpec& sc = c.scenario;
    sc.dgp = ParseDgp(Require<std::string>(s, "dgp", where));
    sc.n = Get<int>(s, "n", where, 1000);
    sc.replicates = Get<int>(s, "replicates", where, 100);
    const std::string median = Get<std::string>(s, "median", where, "sample");
    if (median == "sample") {
      sc.median = MedianRule::kSample;
    } else if (median == "population") {
      sc.median = MedianRule::kPopulation;
    } else {
      throw InputError("median must be 'sample' or 'population'");
    }
    sc.include_oracle = Get<bool>(s, "oracle", where, false);
    sc.level = Get<double>(s, "level", where, 0.95);
    c.scheme = root.contains("scheme")
                   ? ParseScheme(root.at("scheme"), AllocationFor(sc.dgp))
                   : SchemeSpec::Simple(AllocationFor(sc.dgp));
    sc.scheme = c.scheme;
    sc.pipelines = c.pipelines;
    sc.contrast = c.contrast;
    sc.seed = c.seed;
    sc.Validate();
  }
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open config file " + path);
  std::ostringstream text;
  text << f.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return ParseRunConfig(text.str(), parent.empty() ? "." : parent.string());
}

int ResolveThreads(const std::optional<int>& flag) {
  if (flag.has_value()) {
    if (*flag < 1) throw InputError("--threads must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("CARADJ_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    throw InputError("CARADJ_THREADS must be a positive integer");
  }
  return 1;
}

int Run(const CliOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RunConfig c = LoadRunConfig(options.config_path);
    if (options.seed) {
      c.seed = *options.seed;
      c.scenario.seed = *options.seed;
    }
    if (options.out_dir) c.output.dir = *options.out_dir;
    const int threads = ResolveThreads(options.threads);
    const fs::path dir = c.output.dir;
    const std::string& prefix = c.output.prefix;

    if (c.mode == Mode::kAnalyze) {
      const TrialDataset d = LoadCsv(c.dataset_path, c.schema);
      SchemeSpec scheme = c.scheme;
      if (scheme.pi.size() == 0) scheme.pi = d.pi;
      if (scheme.pi.size() != d.pi.size() ||
          (scheme.pi - d.pi).cwiseAbs().maxCoeff() > 1e-12) {
        throw InputError("scheme pi differs from the dataset pi");
      }
      scheme.Validate();
      EstimateReport report;
      report.n = d.n();
      report.k = d.k;
      report.pi = d.pi;
      report.scheme = SchemeName(scheme.kind);
      report.contrast = c.contrast.Describe();
      report.strata = SummarizeStrata(d);
      for (std::size_t p = 0; p < c.pipelines.size(); ++p) {
        PipelineResult r = RunPipeline(c.pipelines[p], d, scheme, c.contrast,
                                       DeriveSeed(c.seed, p));
        if (!r.refusal.empty()) {
          throw RefusalError(r.name + ": " + r.refusal, r.refusal_alternatives);
        }
        report.results.push_back(std::move(r));
      }
      const std::string table = FormatReportTable(report, c.output.times100);
      WriteAll(dir, {{prefix + ".json", ToJson(report).dump(2) + "\n"},
                     {prefix + ".txt", table}});
      out << table;
    } else {
      const ScenarioSummary s = RunScenario(c.scenario, threads);
      std::vector<std::pair<std::string, std::string>> files = {
          {prefix + ".csv", SummaryCsv(s)},
          {prefix + ".json", ToJson(s).dump(2) + "\n"}};
      if (c.output.samples) {
        std::ostringstream samples;
        samples << "method,estimate\n";
        for (const EstimatorSummary& e : s.estimators) {
          for (double v : e.estimates) {
            samples << e.label << "," << FormatDouble(v) << "\n";
          }
        }
        files.emplace_back(prefix + "_samples.csv", samples.str());
      }
      WriteAll(dir, files);
      out << FormatSummaryTable(s, true);
    }
    return kExitOk;
  } catch (const RefusalError& e) {
    json j = ErrorJson("refusal", e.what());
    j["alternatives"] = e.alternatives();
    err << j.dump() << "\n";
    return kExitRefusal;
  } catch (const InputError& e) {
    err << ErrorJson("config", e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << ErrorJson("estimation", e.what()).dump() << "\n";
    return kExitEstimation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << ErrorJson("io", e.what()).dump() << "\n";
    return kExitConfig;
  }
}

}  // namespace caradj::cli
