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
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ctsgd {

/// Absolute tolerance used when deciding whether a graph is balanced.
inline constexpr double kBalanceTolerance = 1e-12;

/// Directed edge `from -> to` (0-based). Agent `to` hears agent `from`, so the
/// weight lands in adjacency entry a(to, from).
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Static weighted digraph on n agents. Entry (i, j) of `weights()` is a_ij,
/// the weight agent i places on agent j; the diagonal is zero.
class WeightedDigraph {
 public:
  /// Throws std::invalid_argument unless `weights` is square, finite,
  /// nonnegative and has a zero diagonal.
  explicit WeightedDigraph(Eigen::MatrixXd weights);

  static WeightedDigraph from_edges(std::size_t n, std::span<const Edge> edges);

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  double weight(std::size_t i, std::size_t j) const { return weights_(i, j); }

  /// Positive-weight edges in row-major order of (to, from).
  std::vector<Edge> edges() const;

 private:
  Eigen::MatrixXd weights_;
};

/// l_ii = sum_j a_ij, l_ij = -a_ij.
Eigen::MatrixXd laplacian(const WeightedDigraph& g);

/// True iff in-weight equals out-weight at every node within `tol`.
bool is_balanced(const WeightedDigraph& g, double tol = kBalanceTolerance);

/// Path-existence check between every ordered pair of nodes.
bool is_strongly_connected(std::size_t n, std::span<const Edge> edges);

struct Segment {
  double duration = 0.0;
  WeightedDigraph graph;
};

/// Piecewise-constant graph signal. Segment k is active on
/// [start_k, start_k + duration_k). A periodic schedule wraps with its period;
/// otherwise the last segment is held forever.
class GraphSchedule {
 public:
  GraphSchedule(std::vector<Segment> segments, bool periodic);

  std::size_t agents() const noexcept { return agents_; }
  bool periodic() const noexcept { return periodic_; }
  /// Sum of durations (the period when periodic).
  double period() const noexcept { return period_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  double min_duration() const noexcept;

  /// Index of the segment active at time t >= 0.
  std::size_t segment_index_at(double t) const { return locate(t).index; }
  const WeightedDigraph& graph_at(double t) const { return segments_[segment_index_at(t)].graph; }

  /// Laplacian of segment k (cached at construction).
  const Eigen::MatrixXd& segment_laplacian(std::size_t k) const { return laplacians_[k]; }
  /// exp(-L_k * duration_k), the propagator across a whole segment.
  const Eigen::MatrixXd& segment_propagator(std::size_t k) const { return propagators_[k]; }

  /// Segment active at absolute time t and the absolute time at which it
  /// ends (+inf for the held last segment of a non-periodic schedule).
  struct Location {
    std::size_t index = 0;
    double end = 0.0;
  };
  Location locate(double t) const;

  /// True when every segment graph is balanced.
  bool balanced(double tol = kBalanceTolerance) const;

  /// Exact integral of the adjacency matrix over [t0, t1].
  Eigen::MatrixXd integrated_weights(double t0, double t1) const;

 private:
  // Integral of A over [0, t].
  Eigen::MatrixXd cumulative_weights(double t) const;

  std::vector<Segment> segments_;
  std::vector<Eigen::MatrixXd> laplacians_;
  std::vector<Eigen::MatrixXd> propagators_;
  std::vector<double> starts_;
  bool periodic_ = true;
  double period_ = 0.0;
  std::size_t agents_ = 0;
  Eigen::MatrixXd period_integral_;
};

/// Six agents cycling through four relabelings (i -> i + r mod 6, r = 0..3)
/// of the directed Hamiltonian cycle 1->3->2->5->4->6->1, unit weights,
/// 0.01 s per subgraph. Every subgraph is balanced.
GraphSchedule default_schedule();

struct ConnectivityVerdict {
  bool strongly_connected = false;
  /// Edges whose weight integrates to at least delta over every window; the
  /// weight field carries the smallest window integral observed.
  std::vector<Edge> edges;
  /// Set for non-periodic schedules: only windows inside the listed segments
  /// were examined.
  bool horizon_limited = false;
};

/// Builds the (delta, tc)-graph and checks it for strong connectivity.
/// Window integrals are piecewise linear in the window start, so they are
/// evaluated at every start where t or t + tc meets a switching instant,
/// together with the midpoints between those starts.
ConnectivityVerdict check_delta_tc_connectivity(const GraphSchedule& schedule, double delta,
                                                double tc);

/// State transition matrix Phi(to, from) of chi' = -L(t) chi, formed as the
/// time-ordered product of exp(-L_k dt_k) over the covered segments.
Eigen::MatrixXd transition_matrix(const GraphSchedule& schedule, double from, double to);

struct DecayConstants {
  double c = 0.0;
  double lambda = 0.0;
  /// exp(intercept) of the least-squares line before lifting to an envelope.
  double c_least_squares = 0.0;
};

/// Fits max_ij |Phi(t,0)_ij - 1/n| <= C lambda^t on `grid` evenly spaced
/// samples of [0, horizon]. lambda comes from the least-squares slope of
/// ln d(t); C is the smallest constant for which the envelope holds at every
/// retained sample. Samples with d(t) <= 1e-14 are dropped.
DecayConstants fit_decay_constants(const GraphSchedule& schedule, double horizon,
                                   std::size_t grid);

/// max_ij |Phi(t,0)_ij - 1/n| on the given sample times (ascending).
std::vector<double> consensus_deviation(const GraphSchedule& schedule,
                                        std::span<const double> times);

}  // namespace ctsgd
