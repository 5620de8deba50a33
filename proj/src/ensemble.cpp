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

#include "ctsgd/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "ctsgd/errors.hpp"
#include "ctsgd/quadrature.hpp"
#include "ctsgd/random.hpp"

namespace ctsgd {

using Eigen::VectorXd;

namespace {

// Paths simulated between merges. Fixed so the reduction tree never depends
// on the worker count.
constexpr std::size_t kChunk = 64;

/// Count, mean and sum of squared deviations for a flat array of statistics.
struct Moments {
  double count = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;
};

// Chan et al. pairwise update. Identical inputs give delta == 0, so a
// deterministic ensemble keeps exact means and zero spread.
Moments merge(Moments a, const Moments& b) {
  const double total = a.count + b.count;
  const double wb = b.count / total;
  const double cross = a.count * b.count / total;
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    const double delta = b.mean[k] - a.mean[k];
    a.mean[k] += delta * wb;
    a.m2[k] += b.m2[k] + delta * delta * cross;
  }
  a.count = total;
  return a;
}

/// Binary-counter accumulator: pushing leaves in index order yields the same
/// balanced tree as a one-shot pairwise reduction.
class TreeReducer {
 public:
  void push(Moments leaf) {
    std::size_t level = 0;
    while (!stack_.empty() && stack_.back().first == level) {
      leaf = merge(std::move(stack_.back().second), leaf);
      stack_.pop_back();
      ++level;
    }
    stack_.emplace_back(level, std::move(leaf));
  }

  std::optional<Moments> finish() {
    if (stack_.empty()) return std::nullopt;
    Moments acc = std::move(stack_.back().second);
    stack_.pop_back();
    while (!stack_.empty()) {
      acc = merge(std::move(stack_.back().second), acc);
      stack_.pop_back();
    }
    return acc;
  }

 private:
  std::vector<std::pair<std::size_t, Moments>> stack_;
};

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct PathSummary {
  std::optional<Moments> leaf;  // empty when the path diverged
  VectorXd lo;
  VectorXd hi;
};

}  // namespace

EnsembleStats run_ensemble(const SimConfig& cfg, std::size_t runs, std::size_t workers) {
  if (runs == 0) throw std::invalid_argument("ensemble needs at least one run");
  cfg.validate();

  const std::vector<double> times = sample_times(cfg);
  const std::size_t samples = times.size();
  const auto n = static_cast<Eigen::Index>(cfg.agents());
  const auto m = static_cast<Eigen::Index>(cfg.dim());
  // Per (sample, agent): m state coordinates, then gap, then consensus error.
  const std::size_t per_agent = static_cast<std::size_t>(m) + 2;
  const std::size_t width = samples * static_cast<std::size_t>(n) * per_agent;

  auto simulate_one = [&](std::uint64_t path) {
    PathSummary out;
    Moments leaf;
    leaf.count = 1.0;
    leaf.mean.assign(width, 0.0);
    leaf.m2.assign(width, 0.0);
    out.lo = VectorXd::Constant(m, std::numeric_limits<double>::infinity());
    out.hi = VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
    try {
      run_path(cfg, path, [&](std::size_t s, double, const StateMatrix& x) {
        const VectorXd avg = average_state(x);
        double* row = leaf.mean.data() + s * static_cast<std::size_t>(n) * per_agent;
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto xi = x.row(i).transpose();
          for (Eigen::Index d = 0; d < m; ++d) row[d] = xi(d);
          row[m] = optimality_gap(cfg.objectives, xi);
          row[m + 1] = (xi - avg).norm();
          row += per_agent;
          out.lo = out.lo.cwiseMin(xi);
          out.hi = out.hi.cwiseMax(xi);
        }
      });
      out.leaf = std::move(leaf);
    } catch (const NonFiniteState&) {
      out.leaf.reset();
    }
    return out;
  };

  TreeReducer reducer;
  EnsembleStats stats;
  stats.times = times;
  stats.agents = static_cast<std::size_t>(n);
  stats.dim = static_cast<std::size_t>(m);
  stats.state_min = VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  stats.state_max = VectorXd::Constant(m, -std::numeric_limits<double>::infinity());

  std::vector<PathSummary> chunk;
  for (std::size_t first = 0; first < runs; first += kChunk) {
    const std::size_t count = std::min(kChunk, runs - first);
    chunk.assign(count, PathSummary{});
    parallel_for(count, workers, [&](std::size_t j) { chunk[j] = simulate_one(first + j); });
    for (std::size_t j = 0; j < count; ++j) {
      PathSummary& p = chunk[j];
      if (!p.leaf) {
        stats.diverged_paths.push_back(first + j);
        continue;
      }
      stats.state_min = stats.state_min.cwiseMin(p.lo);
      stats.state_max = stats.state_max.cwiseMax(p.hi);
      reducer.push(std::move(*p.leaf));
    }
    if (stats.diverged_paths.size() * 100 > runs) {
      throw DivergenceCeilingExceeded(stats.diverged_paths.size(), runs);
    }
  }

  std::optional<Moments> total = reducer.finish();
  if (!total) throw DivergenceCeilingExceeded(runs, runs);
  stats.runs = static_cast<std::size_t>(total->count);

  const double r = total->count;
  auto standard_error = [r](double m2) {
    return r > 1.0 ? std::sqrt(std::max(m2, 0.0) / (r - 1.0)) / std::sqrt(r) : 0.0;
  };

  const auto s_count = static_cast<Eigen::Index>(samples);
  stats.mean_gap.resize(s_count, n);
  stats.se_gap.resize(s_count, n);
  stats.mean_consensus.resize(s_count, n);
  stats.se_consensus.resize(s_count, n);
  stats.mean_state.assign(samples, StateMatrix(n, m));
  stats.se_state.assign(samples, StateMatrix(n, m));
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t base = (s * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)) * per_agent;
      for (Eigen::Index d = 0; d < m; ++d) {
        stats.mean_state[s](i, d) = total->mean[base + static_cast<std::size_t>(d)];
        stats.se_state[s](i, d) = standard_error(total->m2[base + static_cast<std::size_t>(d)]);
      }
      const auto row = static_cast<Eigen::Index>(s);
      stats.mean_gap(row, i) = total->mean[base + static_cast<std::size_t>(m)];
      stats.se_gap(row, i) = standard_error(total->m2[base + static_cast<std::size_t>(m)]);
      stats.mean_consensus(row, i) = total->mean[base + static_cast<std::size_t>(m) + 1];
      stats.se_consensus(row, i) = standard_error(total->m2[base + static_cast<std::size_t>(m) + 1]);
    }
  }
  return stats;
}

IsometryResult ito_isometry_check(const std::function<VectorXd(double)>& g, double horizon,
                                  double h, std::size_t runs, std::uint64_t seed,
                                  std::size_t workers) {
  if (!(h > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("horizon and h must be positive");
  if (runs < 2) throw std::invalid_argument("isometry check needs at least 2 runs");
  const double ratio = horizon / h;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio) {
    throw std::invalid_argument("horizon must be a whole number of steps h");
  }

  // Intensity on the left endpoint of every step.
  const VectorXd g0 = g(0.0);
  const auto m = g0.size();
  Eigen::MatrixXd intensity(m, static_cast<Eigen::Index>(steps));
  for (std::size_t k = 0; k < steps; ++k) {
    const VectorXd gk = g(static_cast<double>(k) * h);
    if (gk.size() != m) throw DimensionMismatch("intensity changed dimension over time");
    intensity.col(static_cast<Eigen::Index>(k)) = gk;
  }
  const double sqrt_h = std::sqrt(h);

  std::vector<double> values(runs);
  parallel_for(runs, workers, [&](std::size_t path) {
    VectorXd integral = VectorXd::Zero(m);
    for (std::size_t k = 0; k < steps; ++k) {
      const double db = sqrt_h * counter_normal(seed, path, k, 0);
      integral += db * intensity.col(static_cast<Eigen::Index>(k));
    }
    values[path] = integral.squaredNorm();
  });

  TreeReducer reducer;
  for (double v : values) reducer.push(Moments{1.0, {v}, {0.0}});
  const Moments total = *reducer.finish();

  IsometryResult out;
  out.lhs = total.mean[0];
  out.lhs_standard_error = std::sqrt(total.m2[0] / (total.count - 1.0)) / std::sqrt(total.count);
  out.rhs = integrate([&](double s) { return g(s).squaredNorm(); }, 0.0, horizon, 1e-10).value;
  if (out.rhs == 0.0) {
    out.relative_error = out.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    out.relative_error = std::abs(out.lhs / out.rhs - 1.0);
  }
  return out;
}

}  // namespace ctsgd
