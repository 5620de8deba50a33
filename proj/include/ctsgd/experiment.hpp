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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsgd/analysis.hpp"
#include "ctsgd/dynamics.hpp"

namespace ctsgd {

enum class ExperimentKind { kSimulate, kSweep, kCertifyBounds, kConsensusOnly, kIsometry };

std::string_view to_string(ExperimentKind kind);
/// Throws ConfigError for unknown names.
ExperimentKind parse_experiment_kind(std::string_view name);

/// Exit statuses of the command line tool.
enum ExitCode : int {
  kExitSuccess = 0,
  kExitConfigError = 1,
  kExitCheckFailed = 2,
  kExitDivergence = 3,
};

/// Scalar fields a caller may replace after loading a config document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> workers;
  std::optional<double> h;
  std::optional<double> horizon;
  std::optional<double> a;
  std::optional<double> beta;
  std::optional<double> noise_scale;
  std::optional<std::string> output;
  std::optional<std::string> experiment;
};

/// (delta, tc) connectivity declared by a config; enforces balance too.
struct ConnectivityAssumption {
  double delta = 0.0;
  double tc = 0.0;
};

/// A fully resolved and validated experiment description. `document` holds
/// every field with defaults filled in, so writing it back out reproduces the
/// experiment exactly.
struct ExperimentConfig {
  nlohmann::json document;

  ExperimentKind kind = ExperimentKind::kSimulate;
  std::size_t runs = 1;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  std::vector<double> sweep_a;
  double fit_fraction = 0.2;
  std::optional<FitWindow> fit_window;
  std::size_t export_trajectories = 0;
  double region_margin = 0.5;
  double decay_horizon = 20.0;
  std::size_t decay_grid = 2001;
  double isometry_tolerance = 0.05;
  std::optional<ConnectivityAssumption> assumption;

  /// Simulation described by the document, optionally with a different
  /// step-size exponent.
  SimConfig simulation(std::optional<double> a = std::nullopt) const;
};

/// Parses, applies overrides and validates. Every problem is raised as a
/// ConfigError naming the offending field. A "manifest" entry is ignored,
/// so a written manifest loads as a config.
ExperimentConfig load_config(const nlohmann::json& document, const Overrides& overrides = {});
ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  const Overrides& overrides = {});

/// The reproduction setup of the six-agent example as a config document.
nlohmann::json six_agent_document();

/// 64-bit FNV-1a hash of the canonical serialization of `document`.
std::uint64_t config_hash(const nlohmann::json& document);

/// Resolved config plus a "manifest" entry (hash, seed, version, compiler).
nlohmann::json manifest(const ExperimentConfig& config);

struct ExperimentOutcome {
  int exit_code = kExitSuccess;
  /// Files written, relative to the output directory.
  std::vector<std::string> files;
};

/// Runs the configured experiment, writing artifacts into `config.output`
/// and a short human-readable log to `log`. Library errors propagate.
ExperimentOutcome run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Maps an exception thrown while loading or running to an exit status.
int exit_code_for(const std::exception& error);

}  // namespace ctsgd
