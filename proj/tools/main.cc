#include <iostream>

#include <CLI11.hpp>

#include "run_config.h"

int main(int argc, char** argv) {
  CLI::App app{"Covariate-adjusted estimation for covariate-adaptive trials"};
  caradj::cli::CliOptions options;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  app.add_option("--config", options.config_path, "JSON run configuration")
      ->required();
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides config)");
  auto* threads_opt = app.add_option(
      "--threads", threads, "Worker threads (default $CARADJ_THREADS or 1)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : caradj::cli::kExitConfig;
  }
  if (*seed_opt) options.seed = seed;
  if (*threads_opt) options.threads = threads;
  if (*out_opt) options.out_dir = out_dir;
  return caradj::cli::Run(options, std::cout, std::cerr);
}
