#ifndef CARADJ_TOOLS_RUN_CONFIG_H_
#define CARADJ_TOOLS_RUN_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "caradj/csv.h"
#include "caradj/pipeline.h"
#include "caradj/randomization.h"
#include "caradj/simulation.h"

namespace caradj::cli {

enum class Mode { kAnalyze, kSimulate };

struct OutputOptions {
  std::string dir = ".";
  std::string prefix;     // defaults to "report" / "summary"
  bool times100 = false;  // scaling of the human table
  bool samples = false;   // simulate: per-replicate estimates CSV
};

struct RunConfig {
  Mode mode = Mode::kAnalyze;
  std::uint64_t seed = 1;
  CsvSchema schema;
  std::string dataset_path;
  SchemeSpec scheme;
  Contrast contrast = Contrast::Difference(0, 1);
  std::vector<PipelineSpec> pipelines;
  ScenarioSpec scenario;  // simulate only; pipelines copied in
  OutputOptions output;
};

// Parses the JSON config text. Relative dataset paths resolve against
// `base_dir`. Throws InputError with the offending key on any problem.
RunConfig ParseRunConfig(const std::string& text,
                         const std::string& base_dir = ".");
RunConfig LoadRunConfig(const std::string& path);

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitEstimation = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRefusal = 3;

// Thread count: --threads, else $CARADJ_THREADS, else 1.
int ResolveThreads(const std::optional<int>& flag);

// Runs the configured analysis or simulation. Reports are written only after
// every computation succeeded. Errors are printed to `err` as one JSON
// object and mapped to the exit codes above.
int Run(const CliOptions& options, std::ostream& out, std::ostream& err);

}  // namespace caradj::cli

#endif  // CARADJ_TOOLS_RUN_CONFIG_H_
