// Copyright 2026 The ctsgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line front end: load a config, apply flag overrides, run the
// experiment and report the outcome through the exit status.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ctsgd/errors.hpp"
#include "ctsgd/experiment.hpp"

namespace {

template <typename T>
void optional_flag(CLI::App& app, const std::string& name, std::optional<T>& target,
                   const std::string& help) {
  app.add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed stochastic gradient flow simulator"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string("ctsgd ") + CTSGD_VERSION);

  std::string config_path;
  bool print_config = false;
  ctsgd::Overrides overrides;
  app.add_option("--config", config_path, "Experiment config (JSON); a manifest.json also works")
      ->required()
      ->check(CLI::ExistingFile);
  optional_flag(app, "--seed", overrides.seed, "Master seed");
  optional_flag(app, "--runs", overrides.runs, "Monte Carlo paths");
  optional_flag(app, "--workers", overrides.workers, "Worker threads");
  optional_flag(app, "--h", overrides.h, "Integration step (seconds)");
  optional_flag(app, "--horizon", overrides.horizon, "Simulated time (seconds)");
  optional_flag(app, "--a", overrides.a, "Step-size decay exponent in (1/2, 1]");
  optional_flag(app, "--beta", overrides.beta, "Step-size scale");
  optional_flag(app, "--noise-scale", overrides.noise_scale, "Multiplier on every noise intensity");
  optional_flag(app, "--out", overrides.output, "Output directory");
  optional_flag(app, "--experiment", overrides.experiment,
                "simulate | sweep | certify-bounds | consensus-only | isometry");
  app.add_flag("--print-config", print_config, "Print the resolved config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? ctsgd::kExitSuccess : ctsgd::kExitConfigError;
  }

  try {
    const ctsgd::ExperimentConfig config = ctsgd::load_config_file(config_path, overrides);
    if (print_config) {
      std::cout << config.document.dump(2) << '\n';
      return ctsgd::kExitSuccess;
    }
    const ctsgd::ExperimentOutcome outcome = ctsgd::run_experiment(config, std::cerr);
    for (const std::string& file : outcome.files) {
      std::cout << (config.output / file).string() << '\n';
    }
    if (outcome.exit_code != ctsgd::kExitSuccess) {
      std::cerr << "check failed; see " << (config.output / "report.txt").string() << '\n';
    }
    return outcome.exit_code;
  } catch (const ctsgd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ctsgd::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ctsgd::exit_code_for(e);
  }
}
