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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctsgd/graph.hpp"
#include "ctsgd/objective.hpp"

namespace ctsgd {

/// Agent states, one row per agent.
using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Coordinates beyond this magnitude abort a path.
inline constexpr double kDivergenceThreshold = 1e12;

/// eta(t) = beta / (t + 1)^a.
class StepSchedule {
 public:
  /// Requires beta > 0 and 1/2 < a <= 1.
  StepSchedule(double beta, double a);

  double beta() const noexcept { return beta_; }
  double a() const noexcept { return a_; }

  double eta(double t) const;
  /// Closed-form integral of eta over [0, t].
  double phi(double t) const;

 private:
  double beta_;
  double a_;
};

/// Per-agent noise intensities g_i(t) in R^m with a declared bound K.
class NoiseModel {
 public:
  /// Writes g_i(t) into row i of `out` (n x m).
  using Intensity = std::function<void(double t, Eigen::Ref<StateMatrix> out)>;

  static NoiseModel zero(std::size_t agents, std::size_t dim);
  /// Every agent gets the same constant vector.
  static NoiseModel constant(std::size_t agents, Eigen::VectorXd value);
  /// g_i(t) = scale * [sin t, cos t, sin t, ...] for every agent.
  static NoiseModel sin_cos(std::size_t agents, std::size_t dim, double scale = 1.0);
  /// Arbitrary intensity; `bound` may be left empty when K is unknown.
  static NoiseModel custom(std::size_t agents, std::size_t dim, Intensity intensity,
                           std::optional<double> bound, std::string description = "custom");

  std::size_t agents() const noexcept { return agents_; }
  std::size_t dim() const noexcept { return dim_; }
  std::optional<double> bound() const noexcept { return bound_; }
  bool is_zero() const noexcept { return zero_; }
  const std::string& description() const noexcept { return description_; }

  void evaluate(double t, Eigen::Ref<StateMatrix> out) const;
  StateMatrix evaluate(double t) const;

  /// Same intensities multiplied by `factor` (K scales accordingly).
  NoiseModel scaled(double factor) const;

  /// Checks ||g_i(t)|| <= K on `samples` evenly spaced times of [0, horizon].
  bool verify_bound(double horizon, std::size_t samples) const;

 private:
  NoiseModel(std::size_t agents, std::size_t dim, Intensity intensity, std::optional<double> bound,
             bool zero, std::string description);

  std::size_t agents_ = 0;
  std::size_t dim_ = 0;
  Intensity intensity_;
  std::optional<double> bound_;
  bool zero_ = false;
  std::string description_;
};

struct SimConfig {
  GraphSchedule schedule;
  ObjectiveSet objectives;
  StepSchedule step;
  NoiseModel noise;
  /// Integration step in seconds; must divide every segment duration.
  double h = 1e-3;
  double horizon = 1.0;
  StateMatrix x0;
  std::uint64_t seed = 0;
  /// Euler steps between recorded samples.
  std::size_t sample_stride = 1;

  /// Throws ConfigError when any invariant fails.
  void validate() const;
  std::size_t steps() const;
  std::size_t agents() const noexcept { return schedule.agents(); }
  std::size_t dim() const noexcept { return objectives.dim(); }
};

/// Six-agent configuration: default schedule, the scalar-pattern objectives,
/// eta = 2/(t+1), g_i = [sin t, cos t], h = 1e-3.
SimConfig six_agent_config(double horizon = 30.0, std::uint64_t seed = 1);

/// Maps Euler steps to schedule segments without floating-point boundary
/// ambiguity.
class StepPlan {
 public:
  explicit StepPlan(const SimConfig& cfg);

  std::size_t segment_for_step(std::size_t k) const;
  std::size_t steps() const noexcept { return steps_; }

 private:
  std::vector<std::size_t> segment_ends_;  // cumulative step counts
  std::size_t cycle_steps_ = 0;
  bool periodic_ = true;
  std::size_t steps_ = 0;
};

/// Scalar Brownian increments addressed by (seed, path, step, agent). With
/// refinement r each step of size h sums r independent draws of the finer
/// grid h / r, so runs at h and h / r can share one Brownian path.
class BrownianSource {
 public:
  BrownianSource(std::uint64_t seed, std::uint64_t path, double h, std::uint32_t refinement = 1);

  double increment(std::size_t step, std::size_t agent) const;
  std::uint32_t refinement() const noexcept { return refinement_; }

 private:
  std::uint64_t seed_;
  std::uint64_t path_;
  double fine_scale_;
  std::uint32_t refinement_;
};

/// Terms of one Euler step, kept for diagnostics.
struct StepTerms {
  StateMatrix gradient;  // grad f_i(x_i^k)
  StateMatrix noise;     // g_i(t_k) * dB_i
  double eta = 0.0;
};

/// Precomputed, immutable view of a SimConfig used by the stepper.
class Integrator {
 public:
  explicit Integrator(const SimConfig& cfg);

  const SimConfig& config() const noexcept { return *cfg_; }
  const StepPlan& plan() const noexcept { return plan_; }

  /// x^{k+1} = x^k - h L(t_k) x^k - eta(t_k) (h grad f(x^k) + g(t_k) dB^k).
  /// `terms` doubles as scratch space and holds the step's terms on return.
  /// Throws NonFiniteState when a coordinate exceeds the divergence threshold.
  void step(const StateMatrix& x, std::size_t k, const BrownianSource& brownian, StateMatrix& next,
            StepTerms& terms) const;

 private:
  const SimConfig* cfg_;
  StepPlan plan_;
  std::vector<Eigen::MatrixXd> laplacians_;
};

/// One Euler-Maruyama step with fresh scratch space.
StateMatrix euler_step(const StateMatrix& states, std::size_t k, const SimConfig& cfg,
                       const BrownianSource& brownian, StepTerms* terms = nullptr);

struct Trajectory {
  std::vector<double> times;
  std::vector<StateMatrix> states;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
};

struct PathOptions {
  /// Brownian refinement (see BrownianSource).
  std::uint32_t brownian_refinement = 1;
  /// Called after every step with (k, x^k, x^{k+1}, terms of step k).
  std::function<void(std::size_t, const StateMatrix&, const StateMatrix&, const StepTerms&)>
      on_step;
};

/// Visits samples (index, time, states) at k = 0, every `sample_stride` steps,
/// and the final step.
using SampleVisitor = std::function<void(std::size_t, double, const StateMatrix&)>;

void run_path(const SimConfig& cfg, std::uint64_t path, const SampleVisitor& visit,
              const PathOptions& options = {});

Trajectory simulate_path(const SimConfig& cfg, std::uint64_t path, const PathOptions& options = {});

/// Sample times that run_path visits.
std::vector<double> sample_times(const SimConfig& cfg);

/// Mean over agents, per coordinate.
Eigen::VectorXd average_state(const StateMatrix& states);

}  // namespace ctsgd
