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

#include "ctsgd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctsgd/errors.hpp"
#include "ctsgd/random.hpp"

namespace ctsgd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Returns round(x / h) when x is an integer multiple of h (relative 1e-9).
std::optional<std::size_t> whole_steps(double x, double h) {
  const double ratio = x / h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

StepSchedule::StepSchedule(double beta, double a) : beta_(beta), a_(a) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("step schedule: beta must be positive");
  }
  if (!(a > 0.5 && a <= 1.0)) {
    throw OutOfRange("step schedule: exponent a must lie in (1/2, 1], got " + std::to_string(a));
  }
}

double StepSchedule::eta(double t) const { return beta_ / std::pow(t + 1.0, a_); }

double StepSchedule::phi(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("phi is defined for t >= 0");
  if (a_ == 1.0) return beta_ * std::log1p(t);
  // (t+1)^(1-a) - 1 = expm1((1-a) ln(1+t)), stable as a -> 1.
  return beta_ * std::expm1((1.0 - a_) * std::log1p(t)) / (1.0 - a_);
}

NoiseModel::NoiseModel(std::size_t agents, std::size_t dim, Intensity intensity,
                       std::optional<double> bound, bool zero, std::string description)
    : agents_(agents),
      dim_(dim),
      intensity_(std::move(intensity)),
      bound_(bound),
      zero_(zero),
      description_(std::move(description)) {
  if (bound_ && !(*bound_ >= 0.0)) throw std::invalid_argument("noise bound K must be >= 0");
}

NoiseModel NoiseModel::zero(std::size_t agents, std::size_t dim) {
  return NoiseModel(
      agents, dim, [](double, Eigen::Ref<StateMatrix> out) { out.setZero(); }, 0.0, true, "zero");
}

NoiseModel NoiseModel::constant(std::size_t agents, VectorXd value) {
  const double k = value.norm();
  const std::size_t dim = static_cast<std::size_t>(value.size());
  const bool zero = k == 0.0;
  return NoiseModel(
      agents, dim,
      [value = std::move(value)](double, Eigen::Ref<StateMatrix> out) {
        out.rowwise() = value.transpose();
      },
      k, zero, "constant");
}

NoiseModel NoiseModel::sin_cos(std::size_t agents, std::size_t dim, double scale) {
  // Norm is scale * sqrt(#sin^2 + #cos^2 terms) <= scale * sqrt(ceil(dim / 2)).
  const double k = std::abs(scale) * std::sqrt(static_cast<double>((dim + 1) / 2));
  return NoiseModel(
      agents, dim,
      [scale](double t, Eigen::Ref<StateMatrix> out) {
        const double s = scale * std::sin(t);
        const double c = scale * std::cos(t);
        for (Eigen::Index d = 0; d < out.cols(); ++d) out.col(d).setConstant(d % 2 == 0 ? s : c);
      },
      k, scale == 0.0, "sin_cos");
}

NoiseModel NoiseModel::custom(std::size_t agents, std::size_t dim, Intensity intensity,
                              std::optional<double> bound, std::string description) {
  if (!intensity) throw std::invalid_argument("custom noise model needs an intensity function");
  return NoiseModel(agents, dim, std::move(intensity), bound, false, std::move(description));
}

void NoiseModel::evaluate(double t, Eigen::Ref<StateMatrix> out) const {
  if (static_cast<std::size_t>(out.rows()) != agents_ ||
      static_cast<std::size_t>(out.cols()) != dim_) {
    throw DimensionMismatch("noise output must be agents x dim");
  }
  intensity_(t, out);
}

StateMatrix NoiseModel::evaluate(double t) const {
  StateMatrix out(static_cast<Eigen::Index>(agents_), static_cast<Eigen::Index>(dim_));
  evaluate(t, out);
  return out;
}

NoiseModel NoiseModel::scaled(double factor) const {
  std::optional<double> bound;
  if (bound_) bound = std::abs(factor) * *bound_;
  if (factor == 0.0) {
    NoiseModel z = zero(agents_, dim_);
    return z;
  }
  return NoiseModel(
      agents_, dim_,
      [inner = intensity_, factor](double t, Eigen::Ref<StateMatrix> out) {
        inner(t, out);
        out *= factor;
      },
      bound, zero_, description_);
}

bool NoiseModel::verify_bound(double horizon, std::size_t samples) const {
  if (!bound_) return false;
  if (samples < 2) throw std::invalid_argument("verify_bound needs at least 2 samples");
  StateMatrix g(static_cast<Eigen::Index>(agents_), static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(samples - 1);
    evaluate(t, g);
    if (g.rowwise().norm().maxCoeff() > *bound_ * (1.0 + 1e-12)) return false;
  }
  return true;
}

std::size_t SimConfig::steps() const {
  const auto n = whole_steps(horizon, h);
  if (!n) throw ConfigError("dynamics.horizon", "horizon must be a whole number of steps h");
  return *n;
}

void SimConfig::validate() const {
  const std::size_t n = schedule.agents();
  const std::size_t m = objectives.dim();
  if (objectives.agents() != n) {
    throw ConfigError("objectives", "expected " + std::to_string(n) + " objectives, got " +
                                        std::to_string(objectives.agents()));
  }
  if (noise.agents() != n || noise.dim() != m) {
    throw ConfigError("dynamics.noise", "noise model shape does not match agents x dim");
  }
  if (static_cast<std::size_t>(x0.rows()) != n || static_cast<std::size_t>(x0.cols()) != m) {
    throw ConfigError("dynamics.x0", "initial states must be " + std::to_string(n) + " x " +
                                         std::to_string(m));
  }
  if (!x0.allFinite()) throw ConfigError("dynamics.x0", "initial states must be finite");
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("dynamics.h", "h must be positive");
  if (h > schedule.min_duration() * (1.0 + 1e-12)) {
    throw ConfigError("dynamics.h", "h exceeds the shortest graph segment");
  }
  for (std::size_t k = 0; k < schedule.segments().size(); ++k) {
    if (!whole_steps(schedule.segments()[k].duration, h)) {
      throw ConfigError("graph.segments[" + std::to_string(k) + "].duration",
                        "segment duration is not a whole number of steps h");
    }
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("dynamics.horizon", "horizon must be positive");
  }
  (void)steps();
  if (sample_stride == 0) throw ConfigError("dynamics.sample_stride", "stride must be >= 1");
}

SimConfig six_agent_config(double horizon, std::uint64_t seed) {
  StateMatrix x0(6, 2);
  x0 << 0.3, 2.0,  //
      0.5, 1.3,    //
      0.7, 2.7,    //
      0.9, 1.0,    //
      1.1, 3.0,    //
      1.3, 1.6;
  SimConfig cfg{default_schedule(),
                six_agent_objectives(),
                StepSchedule(2.0, 1.0),
                NoiseModel::sin_cos(6, 2),
                1e-3,
                horizon,
                std::move(x0),
                seed,
                100};
  cfg.validate();
  return cfg;
}

StepPlan::StepPlan(const SimConfig& cfg) : periodic_(cfg.schedule.periodic()) {
  std::size_t total = 0;
  for (std::size_t k = 0; k < cfg.schedule.segments().size(); ++k) {
    const auto n = whole_steps(cfg.schedule.segments()[k].duration, cfg.h);
    if (!n) {
      throw ConfigError("graph.segments[" + std::to_string(k) + "].duration",
                        "segment duration is not a whole number of steps h");
    }
    total += *n;
    segment_ends_.push_back(total);
  }
  cycle_steps_ = total;
  steps_ = cfg.steps();
}

std::size_t StepPlan::segment_for_step(std::size_t k) const {
  if (periodic_) {
    k %= cycle_steps_;
  } else if (k >= cycle_steps_) {
    return segment_ends_.size() - 1;
  }
  const auto it = std::upper_bound(segment_ends_.begin(), segment_ends_.end(), k);
  return static_cast<std::size_t>(std::distance(segment_ends_.begin(), it));
}

BrownianSource::BrownianSource(std::uint64_t seed, std::uint64_t path, double h,
                               std::uint32_t refinement)
    : seed_(seed), path_(path), refinement_(refinement) {
  if (!(h > 0.0)) throw std::invalid_argument("Brownian step must be positive");
  if (refinement == 0) throw std::invalid_argument("Brownian refinement must be >= 1");
  fine_scale_ = std::sqrt(h / static_cast<double>(refinement));
}

double BrownianSource::increment(std::size_t step, std::size_t agent) const {
  double sum = 0.0;
  const std::uint64_t first = static_cast<std::uint64_t>(step) * refinement_;
  for (std::uint32_t j = 0; j < refinement_; ++j) {
    sum += counter_normal(seed_, path_, first + j, static_cast<std::uint32_t>(agent));
  }
  return fine_scale_ * sum;
}

Integrator::Integrator(const SimConfig& cfg) : cfg_(&cfg), plan_(cfg) {
  for (std::size_t k = 0; k < cfg.schedule.segments().size(); ++k) {
    laplacians_.push_back(cfg.schedule.segment_laplacian(k));
  }
}

void Integrator::step(const StateMatrix& x, std::size_t k, const BrownianSource& brownian,
                      StateMatrix& next, StepTerms& terms) const {
  const SimConfig& cfg = *cfg_;
  const auto n = x.rows();
  const auto m = x.cols();
  const double h = cfg.h;
  const double t = static_cast<double>(k) * h;

  terms.gradient.resize(n, m);
  terms.noise.resize(n, m);
  terms.eta = cfg.step.eta(t);

  for (Eigen::Index i = 0; i < n; ++i) {
    cfg.objectives[static_cast<std::size_t>(i)].gradient(x.row(i).transpose(),
                                                         terms.gradient.row(i).transpose());
  }
  if (cfg.noise.is_zero()) {
    terms.noise.setZero();
  } else {
    cfg.noise.evaluate(t, terms.noise);
    for (Eigen::Index i = 0; i < n; ++i) {
      terms.noise.row(i) *= brownian.increment(k, static_cast<std::size_t>(i));
    }
  }

  const MatrixXd& lap = laplacians_[plan_.segment_for_step(k)];
  next.resize(n, m);
  next.noalias() = -h * (lap * x);
  next += x;
  next -= terms.eta * (h * terms.gradient + terms.noise);

  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kDivergenceThreshold) {
    Eigen::Index agent = 0;
    double magnitude = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double row_max = next.row(i).cwiseAbs().maxCoeff();
      if (!std::isfinite(row_max) || row_max > kDivergenceThreshold) {
        agent = i;
        magnitude = row_max;
        break;
      }
    }
    throw NonFiniteState(k, static_cast<std::size_t>(agent), magnitude);
  }
}

StateMatrix euler_step(const StateMatrix& states, std::size_t k, const SimConfig& cfg,
                       const BrownianSource& brownian, StepTerms* terms) {
  const Integrator integrator(cfg);
  StepTerms scratch;
  StateMatrix next;
  integrator.step(states, k, brownian, next, terms ? *terms : scratch);
  return next;
}

void run_path(const SimConfig& cfg, std::uint64_t path, const SampleVisitor& visit,
              const PathOptions& options) {
  cfg.validate();
  const Integrator integrator(cfg);
  const BrownianSource brownian(cfg.seed, path, cfg.h, options.brownian_refinement);
  const std::size_t steps = integrator.plan().steps();

  StateMatrix x = cfg.x0;
  StateMatrix next;
  StepTerms terms;
  std::size_t sample = 0;
  if (visit) visit(sample++, 0.0, x);
  for (std::size_t k = 0; k < steps; ++k) {
    integrator.step(x, k, brownian, next, terms);
    if (options.on_step) options.on_step(k, x, next, terms);
    x.swap(next);
    if (visit && ((k + 1) % cfg.sample_stride == 0 || k + 1 == steps)) {
      visit(sample++, static_cast<double>(k + 1) * cfg.h, x);
    }
  }
}

Trajectory simulate_path(const SimConfig& cfg, std::uint64_t path, const PathOptions& options) {
  Trajectory out;
  out.seed = cfg.seed;
  out.path = path;
  run_path(
      cfg, path,
      [&out](std::size_t, double t, const StateMatrix& x) {
        out.times.push_back(t);
        out.states.push_back(x);
      },
      options);
  return out;
}

std::vector<double> sample_times(const SimConfig& cfg) {
  const std::size_t steps = cfg.steps();
  std::vector<double> times{0.0};
  for (std::size_t k = 0; k < steps; ++k) {
    if ((k + 1) % cfg.sample_stride == 0 || k + 1 == steps) {
      times.push_back(static_cast<double>(k + 1) * cfg.h);
    }
  }
  return times;
}

VectorXd average_state(const StateMatrix& states) {
  if (states.rows() == 0) throw std::invalid_argument("average of zero agents");
  return states.colwise().mean().transpose();
}

}  // namespace ctsgd
