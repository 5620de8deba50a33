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

#include "ctsgd/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ctsgd/errors.hpp"
#include "ctsgd/matrix_exponential.hpp"

namespace ctsgd {

using Eigen::MatrixXd;

WeightedDigraph::WeightedDigraph(MatrixXd weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols()) {
    throw std::invalid_argument("adjacency matrix must be square");
  }
  if (!weights_.allFinite()) throw std::invalid_argument("adjacency weights must be finite");
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("adjacency weights must be nonnegative");
  }
  if (weights_.rows() > 0 && weights_.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("adjacency diagonal must be zero (no self loops)");
  }
}

WeightedDigraph WeightedDigraph::from_edges(std::size_t n, std::span<const Edge> edges) {
  MatrixXd w = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const Edge& e : edges) {
    if (e.from >= n || e.to >= n) {
      throw std::invalid_argument("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                  " references an agent outside 0.." + std::to_string(n - 1));
    }
    w(static_cast<Eigen::Index>(e.to), static_cast<Eigen::Index>(e.from)) += e.weight;
  }
  return WeightedDigraph(std::move(w));
}

std::vector<Edge> WeightedDigraph::edges() const {
  std::vector<Edge> out;
  for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
      if (weights_(i, j) > 0.0) {
        out.push_back({static_cast<std::size_t>(j), static_cast<std::size_t>(i), weights_(i, j)});
      }
    }
  }
  return out;
}

MatrixXd laplacian(const WeightedDigraph& g) {
  MatrixXd l = -g.weights();
  l.diagonal() = g.weights().rowwise().sum();
  return l;
}

bool is_balanced(const WeightedDigraph& g, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("balance tolerance must be positive");
  const Eigen::VectorXd out_minus_in =
      g.weights().rowwise().sum() - g.weights().colwise().sum().transpose();
  return out_minus_in.size() == 0 || out_minus_in.cwiseAbs().maxCoeff() <= tol;
}

namespace {

std::vector<bool> reachable(std::size_t n, std::span<const Edge> edges, bool reverse) {
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (const Edge& e : edges) {
    if (reverse) {
      adjacency[e.to].push_back(e.from);
    } else {
      adjacency[e.from].push_back(e.to);
    }
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w : adjacency[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

bool is_strongly_connected(std::size_t n, std::span<const Edge> edges) {
  if (n <= 1) return true;
  for (const Edge& e : edges) {
    if (e.from >= n || e.to >= n) throw std::invalid_argument("edge endpoint out of range");
  }
  const auto all = [](const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
  };
  return all(reachable(n, edges, false)) && all(reachable(n, edges, true));
}

GraphSchedule::GraphSchedule(std::vector<Segment> segments, bool periodic)
    : segments_(std::move(segments)), periodic_(periodic) {
  if (segments_.empty()) throw std::invalid_argument("graph schedule needs at least one segment");
  agents_ = segments_.front().graph.size();
  double start = 0.0;
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const Segment& s = segments_[k];
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) {
      throw std::invalid_argument("segment " + std::to_string(k) +
                                  " must have a positive finite duration");
    }
    if (s.graph.size() != agents_) {
      throw std::invalid_argument("segment " + std::to_string(k) + " has " +
                                  std::to_string(s.graph.size()) + " agents, expected " +
                                  std::to_string(agents_));
    }
    starts_.push_back(start);
    start += s.duration;
    laplacians_.push_back(laplacian(s.graph));
    propagators_.push_back(expm(-s.duration * laplacians_.back()));
  }
  period_ = start;
  const auto n = static_cast<Eigen::Index>(agents_);
  period_integral_ = MatrixXd::Zero(n, n);
  for (const Segment& s : segments_) period_integral_ += s.duration * s.graph.weights();
}

double GraphSchedule::min_duration() const noexcept {
  double m = std::numeric_limits<double>::infinity();
  for (const Segment& s : segments_) m = std::min(m, s.duration);
  return m;
}

GraphSchedule::Location GraphSchedule::locate(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("schedule time must be nonnegative");
  // Times within this distance below a switching instant belong to the next
  // segment, so accumulated round-off never produces sliver steps.
  const double snap = 1e-12 * period_;
  double cycle_start = 0.0;
  double tau = t;
  if (periodic_) {
    const double cycles = std::floor(t / period_);
    cycle_start = cycles * period_;
    tau = t - cycle_start;
    if (tau >= period_ - snap) {
      cycle_start += period_;
      tau = std::max(0.0, tau - period_);
    }
  } else if (t >= period_ - snap) {
    return {segments_.size() - 1, std::numeric_limits<double>::infinity()};
  }
  auto it = std::upper_bound(starts_.begin(), starts_.end(), tau + snap);
  const auto index = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  const double end = cycle_start + starts_[index] + segments_[index].duration;
  if (!periodic_ && index + 1 == segments_.size()) {
    return {index, std::numeric_limits<double>::infinity()};
  }
  return {index, end};
}

bool GraphSchedule::balanced(double tol) const {
  return std::all_of(segments_.begin(), segments_.end(),
                     [tol](const Segment& s) { return is_balanced(s.graph, tol); });
}

MatrixXd GraphSchedule::cumulative_weights(double t) const {
  const auto n = static_cast<Eigen::Index>(agents_);
  MatrixXd total = MatrixXd::Zero(n, n);
  double tau = t;
  if (periodic_) {
    const double cycles = std::floor(t / period_);
    total += cycles * period_integral_;
    tau = t - cycles * period_;
  } else if (t >= period_) {
    return period_integral_ + (t - period_) * segments_.back().graph.weights();
  }
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const double covered = std::clamp(tau - starts_[k], 0.0, segments_[k].duration);
    if (covered <= 0.0) break;
    total += covered * segments_[k].graph.weights();
  }
  return total;
}

MatrixXd GraphSchedule::integrated_weights(double t0, double t1) const {
  if (t1 < t0) throw InvalidInterval("integration interval is reversed");
  return cumulative_weights(t1) - cumulative_weights(t0);
}

GraphSchedule default_schedule() {
  constexpr std::size_t n = 6;
  constexpr std::array<std::size_t, n> base = {0, 2, 1, 4, 3, 5};
  std::vector<Segment> segments;
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < n; ++k) {
      edges.push_back({(base[k] + r) % n, (base[(k + 1) % n] + r) % n, 1.0});
    }
    segments.push_back({0.01, WeightedDigraph::from_edges(n, edges)});
  }
  return GraphSchedule(std::move(segments), true);
}

ConnectivityVerdict check_delta_tc_connectivity(const GraphSchedule& schedule, double delta,
                                                double tc) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(tc > 0.0)) throw std::invalid_argument("tc must be positive");
  const double period = schedule.period();

  double last_start = period;
  if (!schedule.periodic()) {
    if (period < tc) {
      throw NonPeriodicHorizonTooShort("schedule ends at t = " + std::to_string(period) +
                                       " before the first window of length " +
                                       std::to_string(tc) + " closes");
    }
    last_start = period - tc;
  }

  std::vector<double> starts{0.0, last_start};
  double boundary = 0.0;
  for (const Segment& s : schedule.segments()) {
    for (double b : {boundary, boundary - tc}) {
      double candidate = b;
      if (schedule.periodic()) {
        candidate = b - std::floor(b / period) * period;
      }
      if (candidate >= 0.0 && candidate <= last_start) starts.push_back(candidate);
    }
    boundary += s.duration;
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  const std::size_t breakpoints = starts.size();
  for (std::size_t k = 0; k + 1 < breakpoints; ++k) {
    starts.push_back(0.5 * (starts[k] + starts[k + 1]));
  }

  const auto n = static_cast<Eigen::Index>(schedule.agents());
  MatrixXd smallest = MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
  for (double s : starts) {
    smallest = smallest.cwiseMin(schedule.integrated_weights(s, s + tc));
  }

  ConnectivityVerdict verdict;
  verdict.horizon_limited = !schedule.periodic();
  const double threshold = delta * (1.0 - 1e-12);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && smallest(i, j) >= threshold) {
        verdict.edges.push_back(
            {static_cast<std::size_t>(j), static_cast<std::size_t>(i), smallest(i, j)});
      }
    }
  }
  verdict.strongly_connected = is_strongly_connected(schedule.agents(), verdict.edges);
  return verdict;
}

MatrixXd transition_matrix(const GraphSchedule& schedule, double from, double to) {
  if (!(from >= 0.0)) throw InvalidInterval("transition interval must start at t >= 0");
  if (to < from) {
    throw InvalidInterval("transition interval [" + std::to_string(from) + ", " +
                          std::to_string(to) + "] is reversed");
  }
  const auto n = static_cast<Eigen::Index>(schedule.agents());
  MatrixXd phi = MatrixXd::Identity(n, n);
  const double snap = 1e-12 * schedule.period();
  double t = from;
  while (to - t > snap) {
    const auto loc = schedule.locate(t);
    const double stop = std::min(loc.end, to);
    const double dt = stop - t;
    const double duration = schedule.segments()[loc.index].duration;
    if (std::abs(dt - duration) <= snap) {
      phi = schedule.segment_propagator(loc.index) * phi;
    } else {
      phi = expm(-dt * schedule.segment_laplacian(loc.index)) * phi;
    }
    t = stop;
  }
  return phi;
}

std::vector<double> consensus_deviation(const GraphSchedule& schedule,
                                        std::span<const double> times) {
  const auto n = static_cast<Eigen::Index>(schedule.agents());
  const double average = 1.0 / static_cast<double>(n);
  std::vector<double> out;
  out.reserve(times.size());
  MatrixXd phi = MatrixXd::Identity(n, n);
  double previous = 0.0;
  for (double t : times) {
    if (t < previous) throw InvalidInterval("sample times must be ascending");
    phi = transition_matrix(schedule, previous, t) * phi;
    previous = t;
    out.push_back((phi.array() - average).abs().maxCoeff());
  }
  return out;
}

DecayConstants fit_decay_constants(const GraphSchedule& schedule, double horizon,
                                   std::size_t grid) {
  if (!(horizon > 0.0)) throw std::invalid_argument("decay fit horizon must be positive");
  if (grid < 3) throw std::invalid_argument("decay fit needs at least 3 grid points");

  std::vector<double> times(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    times[k] = horizon * static_cast<double>(k) / static_cast<double>(grid - 1);
  }
  const std::vector<double> deviation = consensus_deviation(schedule, times);

  std::vector<double> t_kept;
  std::vector<double> log_kept;
  for (std::size_t k = 0; k < grid; ++k) {
    if (deviation[k] > 1e-14) {
      t_kept.push_back(times[k]);
      log_kept.push_back(std::log(deviation[k]));
    }
  }
  if (t_kept.size() < 3) {
    throw DecayNotObserved("fewer than three samples above the 1e-14 floor");
  }

  const std::size_t mid = t_kept.size() / 2;
  if (log_kept.back() > log_kept[mid] + std::log(0.5)) {
    throw DecayNotObserved("deviation from the average did not halve over the second half of " +
                           std::to_string(t_kept.back()) + " s");
  }

  const double count = static_cast<double>(t_kept.size());
  const double t_mean = std::accumulate(t_kept.begin(), t_kept.end(), 0.0) / count;
  const double y_mean = std::accumulate(log_kept.begin(), log_kept.end(), 0.0) / count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < t_kept.size(); ++k) {
    sxx += (t_kept[k] - t_mean) * (t_kept[k] - t_mean);
    sxy += (t_kept[k] - t_mean) * (log_kept[k] - y_mean);
  }
  const double slope = sxy / sxx;
  if (!(slope < 0.0)) throw DecayNotObserved("fitted decay slope is not negative");

  DecayConstants out;
  out.lambda = std::exp(slope);
  out.c_least_squares = std::exp(y_mean - slope * t_mean);
  double log_c = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t_kept.size(); ++k) {
    log_c = std::max(log_c, log_kept[k] - slope * t_kept[k]);
  }
  out.c = std::exp(log_c);
  return out;
}

}  // namespace ctsgd
