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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctsgd/dynamics.hpp"
#include "ctsgd/ensemble.hpp"
#include "ctsgd/graph.hpp"
#include "ctsgd/objective.hpp"

namespace ctsgd {

/// Pointwise comparison of a measured quantity against an upper bound.
/// violation = measured - bound (negative when the bound holds with room).
struct BoundReport {
  struct Point {
    std::string label;  // e.g. "agent=3"
    double at = 0.0;    // evaluation point (usually t)
    double measured = 0.0;
    double bound = 0.0;
    double slack = 0.0;  // allowance added to the bound for this point
    double violation = 0.0;
  };

  std::string claim;
  std::vector<Point> points;
  /// Points that could not be evaluated (for example integrand overflow).
  std::vector<std::string> skipped;
  std::vector<std::string> notes;
  double max_violation = 0.0;  // max over points of violation - slack
  /// Cleared when a precondition of the claim failed (e.g. region escape).
  bool pass_guard = true;
  bool pass = false;

  void add(std::string label, double at, double measured, double bound, double slack = 0.0);
  /// Sets max_violation and pass from the recorded points.
  void finalize();
};

/// Constants of the upper bound on int_0^t lambda^-s (s+1)^-a ds.
struct IntegralBoundConstants {
  double t0 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;

  double rhs(double t, double a, double lambda) const;
};

/// Uses t0 = max(a / ln(1/lambda) - 1, 0) + 1.
IntegralBoundConstants integral_bound_constants(double a, double lambda);

/// int_0^t lambda^-s / (s+1)^a ds by adaptive quadrature (relative 1e-8).
/// Returns nullopt when lambda^-t overflows double precision.
std::optional<double> discounted_integral(double a, double lambda, double t);

/// Checks int_0^t lambda^-s (s+1)^-a ds <= d1 lambda^-t (t+1)^-a + d2 (t+1)^-a + d3
/// at every grid point. Overflowing points are listed in `skipped`.
BoundReport integral_bound_check(double a, double lambda, std::span<const double> t_grid);

/// Largest t for which lambda^-t stays finite (with a small margin).
double overflow_limit(double lambda);

/// Weights of the initial, drift and diffusion terms of the consensus-error bound.
struct ConsensusConstants {
  double initial = 0.0;
  double drift = 0.0;
  double diffusion = 0.0;
};

ConsensusConstants consensus_constants(const SimConfig& cfg, const DecayConstants& decay,
                                       double gradient_bound, double noise_bound);

/// initial lambda^t + drift int_0^t lambda^(t-s) eta_s ds
///   + diffusion (int_0^t lambda^(2(t-s)) eta_s^2 ds)^(1/2).
double consensus_bound(const ConsensusConstants& weights, const StepSchedule& step, double lambda,
                       double t);

/// Checks E||x_i(t) - xbar(t)|| <= bound(t) + 2 SE for every agent and sample.
/// M comes from `certificate`, K from the noise model; either missing raises
/// MissingCertificate. Fails when the ensemble left the certified region.
BoundReport consensus_bound_check(const EnsembleStats& stats, const DecayConstants& decay,
                                  const SimConfig& cfg,
                                  const std::optional<SmoothnessCertificate>& certificate);

enum class RateModel { kPower, kLogPower, kInverseLog };

/// Convergence-rate class of E[f(x_i(t)) - f(x*)] for eta = beta/(t+1)^a.
struct RateRegime {
  RateModel model = RateModel::kPower;
  /// Polynomial exponent p of t^-p (0 for the inverse-log case).
  double exponent = 0.0;
  std::string description;
};

/// Throws OutOfRange unless 1/2 < a <= 1.
RateRegime regime_table(double a);

struct FitWindow {
  double start = 0.0;
  double end = 0.0;

  /// [fraction * horizon, horizon].
  static FitWindow from_fraction(double horizon, double fraction = 0.2);
};

struct RateFit {
  RateRegime predicted;
  /// -slope of ln(gap) against ln(t).
  double exponent = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of the line.
  double residual = 0.0;
  /// Quadratic coefficient of ln(gap) in ln(t); nonzero signals a
  /// non-power law such as a log factor.
  double curvature = 0.0;
  bool curved = false;
  FitWindow window;
  std::size_t points = 0;
  std::vector<std::string> warnings;

  /// exponent >= predicted.exponent - margin. Rates are upper bounds, so
  /// only "at least as fast" is ever asserted.
  bool at_least_as_fast(double margin = 0.15) const;
};

/// Least-squares fit of ln gap against ln t over the window. Samples with
/// t <= 0 are ignored. A nonpositive gap inside the window shrinks the window
/// (with a warning); throws NonPositiveGap if fewer than 3 points remain.
RateFit fit_rate(std::span<const double> times, std::span<const double> gaps, double a,
                 FitWindow window);

/// Fit for one agent of an ensemble.
RateFit fit_rate(const EnsembleStats& stats, std::size_t agent, double a, FitWindow window);

/// Splits the window into `blocks` equal pieces and requires the block means
/// to decrease strictly.
bool decreasing_trend(std::span<const double> times, std::span<const double> values,
                      FitWindow window, std::size_t blocks = 4);

/// Closed-form int_0^t eta_s ds.
double phi_integral(const StepSchedule& step, double t);

void write_report(std::ostream& out, const BoundReport& report);
void write_report(std::ostream& out, const RateFit& fit, const std::string& label);
/// CSV rows `claim,point,measured,bound,violation` (no header); the point
/// column joins the label and the evaluation time.
void write_csv_rows(std::ostream& out, const BoundReport& report);
inline constexpr const char* kBoundCsvHeader = "claim,point,measured,bound,violation";

}  // namespace ctsgd
