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
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ctsgd/dynamics.hpp"

namespace ctsgd {

/// Monte Carlo estimates at every sample time. Gap and consensus matrices
/// are (samples x agents).
struct EnsembleStats {
  std::vector<double> times;
  std::size_t agents = 0;
  std::size_t dim = 0;
  /// Paths that completed; diverged paths are excluded from every statistic.
  std::size_t runs = 0;
  std::vector<std::uint64_t> diverged_paths;

  std::vector<StateMatrix> mean_state;
  std::vector<StateMatrix> se_state;
  Eigen::MatrixXd mean_gap;
  Eigen::MatrixXd se_gap;
  Eigen::MatrixXd mean_consensus;
  Eigen::MatrixXd se_consensus;

  /// Coordinate-wise extent of every recorded state of every path.
  Eigen::VectorXd state_min;
  Eigen::VectorXd state_max;
};

/// Runs paths 0..runs-1 of `cfg` (path seeds are the path indices under the
/// master seed) on `workers` threads. Statistics are merged with a fixed
/// pairwise tree over path indices, so the result is bitwise independent of
/// the worker count. Throws DivergenceCeilingExceeded when more than 1% of
/// paths diverge.
EnsembleStats run_ensemble(const SimConfig& cfg, std::size_t runs, std::size_t workers = 1);

struct IsometryResult {
  /// Monte Carlo mean of ||sum_k g(t_k) dB_k||^2.
  double lhs = 0.0;
  double lhs_standard_error = 0.0;
  /// Quadrature of ||g(s)||^2 over [0, horizon].
  double rhs = 0.0;
  double relative_error = 0.0;
};

/// Compares E||int g dB||^2 against int ||g||^2 ds for a scalar Brownian
/// motion and intensity g : R -> R^m.
IsometryResult ito_isometry_check(const std::function<Eigen::VectorXd(double)>& g, double horizon,
                                  double h, std::size_t runs, std::uint64_t seed = 0,
                                  std::size_t workers = 1);

}  // namespace ctsgd
