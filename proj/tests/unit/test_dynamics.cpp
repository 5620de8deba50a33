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

#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "ctsgd/dynamics.hpp"
#include "ctsgd/errors.hpp"
#include "ctsgd/graph.hpp"
#include "ctsgd/objective.hpp"

using namespace ctsgd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ObjectiveSet flat_objectives(std::size_t n, std::size_t m) {
  std::vector<std::shared_ptr<const Objective>> list;
  const auto mm = static_cast<Eigen::Index>(m);
  for (std::size_t i = 0; i < n; ++i) {
    list.push_back(std::make_shared<QuadraticObjective>(MatrixXd::Zero(mm, mm), VectorXd::Zero(mm)));
  }
  return ObjectiveSet(list);
}

SimConfig pure_consensus(double horizon, double h) {
  SimConfig cfg = six_agent_config(horizon, 1);
  cfg.objectives = flat_objectives(6, 2);
  cfg.noise = NoiseModel::zero(6, 2);
  cfg.h = h;
  cfg.sample_stride = 1;
  return cfg;
}

SimConfig deterministic_example(double horizon, double h, std::size_t stride) {
  SimConfig cfg = six_agent_config(horizon, 1);
  cfg.noise = NoiseModel::zero(6, 2);
  cfg.h = h;
  cfg.sample_stride = stride;
  return cfg;
}

double max_difference(const Trajectory& a, const Trajectory& b) {
  REQUIRE(a.times.size() == b.times.size());
  double worst = 0.0;
  for (std::size_t s = 0; s < a.times.size(); ++s) {
    CHECK(a.times[s] == doctest::Approx(b.times[s]).epsilon(1e-12));
    worst = std::max(worst, (a.states[s] - b.states[s]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("step size schedule") {
    const StepSchedule s(2.0, 1.0);
    CHECK(s.eta(0.0) == 2.0);
    CHECK(s.eta(3.0) == doctest::Approx(0.5));
    CHECK(s.phi(0.0) == 0.0);
    CHECK(s.phi(std::exp(1.0) - 1.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(StepSchedule(1.0, 0.75).phi(15.0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK_THROWS_AS(StepSchedule(1.0, 0.5), OutOfRange);
    CHECK_THROWS_AS(StepSchedule(1.0, 1.01), OutOfRange);
    CHECK_THROWS(StepSchedule(0.0, 0.8));
    const StepSchedule t(1.5, 0.6);
    for (double x = 0.0; x < 50.0; x += 0.7) CHECK(t.eta(x + 0.7) <= t.eta(x));
  }

  TEST_CASE("noise models") {
    const NoiseModel g = NoiseModel::sin_cos(3, 2, 1.0);
    CHECK(g.bound().value() == doctest::Approx(1.0));
    CHECK(g.verify_bound(50.0, 5001));
    const StateMatrix at = g.evaluate(0.3);
    CHECK(at(2, 0) == doctest::Approx(std::sin(0.3)));
    CHECK(at(2, 1) == doctest::Approx(std::cos(0.3)));
    const NoiseModel odd = NoiseModel::sin_cos(1, 3, 2.0);
    CHECK(odd.verify_bound(20.0, 2001));
    CHECK(NoiseModel::zero(2, 2).is_zero());
    CHECK(NoiseModel::zero(2, 2).bound().value() == 0.0);
    CHECK(g.scaled(0.0).is_zero());
    CHECK(g.scaled(3.0).bound().value() == doctest::Approx(3.0));
    const NoiseModel unknown = NoiseModel::custom(
        1, 1, [](double, Eigen::Ref<StateMatrix> out) { out(0, 0) = 1.0; }, std::nullopt);
    CHECK_FALSE(unknown.bound().has_value());
    const NoiseModel lying = NoiseModel::custom(
        1, 1, [](double t, Eigen::Ref<StateMatrix> out) { out(0, 0) = t; }, 1.0);
    CHECK_FALSE(lying.verify_bound(5.0, 100));
  }

  TEST_CASE("config validation") {
    SimConfig cfg = six_agent_config(1.0, 1);
    CHECK_NOTHROW(cfg.validate());
    cfg.h = 0.003;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.h = 0.02;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = six_agent_config(1.0, 1);
    cfg.horizon = 1.0005;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = six_agent_config(1.0, 1);
    cfg.x0 = StateMatrix::Zero(5, 2);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(six_agent_config(30.0, 1).steps() == 30000);
  }

  TEST_CASE("scalar deterministic gradient step") {
    const GraphSchedule single({Segment{0.1, WeightedDigraph(MatrixXd::Zero(1, 1))}}, true);
    std::vector<std::shared_ptr<const Objective>> f{
        std::make_shared<QuadraticObjective>(MatrixXd::Identity(1, 1), VectorXd::Zero(1))};
    StateMatrix x0(1, 1);
    x0 << 1.0;
    const SimConfig cfg{single,     ObjectiveSet(f), StepSchedule(1.0, 1.0), NoiseModel::zero(1, 1),
                        0.1,        1.0,             x0,                     0,
                        1};
    const BrownianSource noise(0, 0, cfg.h);
    const StateMatrix x1 = euler_step(x0, 0, cfg, noise);
    CHECK(x1(0, 0) == doctest::Approx(0.9).epsilon(1e-15));
  }

  TEST_CASE("two-agent consensus step") {
    std::vector<Edge> edges{{0, 1, 1.0}, {1, 0, 1.0}};
    const GraphSchedule pair({Segment{0.1, WeightedDigraph::from_edges(2, edges)}}, true);
    StateMatrix x0(2, 1);
    x0 << 0.0, 1.0;
    const SimConfig cfg{pair, flat_objectives(2, 1), StepSchedule(1.0, 1.0), NoiseModel::zero(2, 1),
                        0.1,  1.0,                   x0,                     0,
                        1};
    const StateMatrix x1 = euler_step(x0, 0, cfg, BrownianSource(0, 0, cfg.h));
    CHECK(x1(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(x1(1, 0) == doctest::Approx(0.9).epsilon(1e-15));
  }

  TEST_CASE("balanced graph with zero gradient and noise keeps the sum") {
    const SimConfig cfg = pure_consensus(0.5, 1e-3);
    std::size_t checked = 0;
    PathOptions options;
    options.on_step = [&](std::size_t, const StateMatrix& x, const StateMatrix& next,
                          const StepTerms&) {
      CHECK((next.colwise().sum() - x.colwise().sum()).cwiseAbs().maxCoeff() <= 1e-13);
      ++checked;
    };
    run_path(cfg, 0, [](std::size_t, double, const StateMatrix&) {}, options);
    CHECK(checked == cfg.steps());
  }

  TEST_CASE("balanced-average identity along a noisy path") {
    const SimConfig cfg = six_agent_config(3.0, 5);
    const double n = static_cast<double>(cfg.agents());
    double worst = 0.0;
    PathOptions options;
    options.on_step = [&](std::size_t, const StateMatrix& x, const StateMatrix& next,
                          const StepTerms& terms) {
      const VectorXd predicted =
          average_state(x) -
          (terms.eta / n) * (cfg.h * terms.gradient.colwise().sum().transpose() +
                             terms.noise.colwise().sum().transpose());
      worst = std::max(worst, (average_state(next) - predicted).cwiseAbs().maxCoeff());
    };
    run_path(cfg, 3, [](std::size_t, double, const StateMatrix&) {}, options);
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("average state") {
    StateMatrix same(3, 2);
    same << 1.5, -2, 1.5, -2, 1.5, -2;
    CHECK(average_state(same)(0) == 1.5);
    CHECK(average_state(same)(1) == -2.0);
    StateMatrix two(2, 1);
    two << 0.0, 2.0;
    CHECK(average_state(two)(0) == 1.0);
    const VectorXd mean = average_state(six_agent_config().x0);
    CHECK(mean(0) == doctest::Approx(0.8));
    CHECK(mean(1) == doctest::Approx(11.6 / 6.0));
  }

  TEST_CASE("sample times") {
    const SimConfig cfg = six_agent_config(1.05, 1);
    const std::vector<double> t = sample_times(cfg);
    CHECK(t.front() == 0.0);
    CHECK(t[1] == doctest::Approx(0.1));
    CHECK(t.back() == doctest::Approx(1.05));
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] > t[k - 1]);
  }

  TEST_CASE("paths are bitwise reproducible and seeds matter") {
    const SimConfig cfg = six_agent_config(2.0, 9);
    const Trajectory a = simulate_path(cfg, 4);
    const Trajectory b = simulate_path(cfg, 4);
    const Trajectory c = simulate_path(cfg, 5);
    REQUIRE(a.states.size() == b.states.size());
    bool identical = true;
    for (std::size_t s = 0; s < a.states.size(); ++s) identical = identical && a.states[s] == b.states[s];
    CHECK(identical);
    CHECK(a.states.back() != c.states.back());
    for (const StateMatrix& x : a.states) CHECK(x.allFinite());
  }

  TEST_CASE("divergence is detected") {
    const GraphSchedule single({Segment{0.1, WeightedDigraph(MatrixXd::Zero(1, 1))}}, true);
    std::vector<std::shared_ptr<const Objective>> stiff{
        std::make_shared<QuadraticObjective>(1e6 * MatrixXd::Identity(1, 1), VectorXd::Zero(1))};
    StateMatrix x0(1, 1);
    x0 << 1.0;
    const SimConfig cfg{single, ObjectiveSet(stiff), StepSchedule(1.0, 1.0), NoiseModel::zero(1, 1),
                        0.1,    10.0,                x0,                     0,
                        1};
    try {
      (void)simulate_path(cfg, 0);
      FAIL("expected divergence");
    } catch (const NonFiniteState& e) {
      CHECK(e.agent() == 0);
      CHECK(e.step() <= 4);
      CHECK(e.magnitude() > kDivergenceThreshold);
    }
  }

  TEST_CASE("zero noise converges to the ODE at first order") {
    const double horizon = 5.0;
    const Trajectory reference = simulate_path(deterministic_example(horizon, 1e-3 / 16, 160), 0);
    const double e1 = max_difference(simulate_path(deterministic_example(horizon, 1e-3, 10), 0), reference);
    const double e2 = max_difference(simulate_path(deterministic_example(horizon, 5e-4, 20), 0), reference);
    CHECK(e1 <= 5e-3);
    CHECK(e1 / e2 >= 1.7);
    CHECK(e1 / e2 <= 2.3);
  }

  TEST_CASE("strong convergence on a shared Brownian path") {
    const double horizon = 2.0;
    const double fine = 1e-3 / 32;
    auto run = [&](double h, std::uint64_t path) {
      SimConfig cfg = six_agent_config(horizon, 17);
      cfg.h = h;
      cfg.sample_stride = static_cast<std::size_t>(std::llround(0.01 / h));
      PathOptions options;
      options.brownian_refinement = static_cast<std::uint32_t>(std::llround(h / fine));
      return simulate_path(cfg, path, options);
    };
    double e1 = 0.0;
    double e2 = 0.0;
    for (std::uint64_t path = 0; path < 8; ++path) {
      const Trajectory reference = run(fine, path);
      e1 += max_difference(run(1e-3, path), reference);
      e2 += max_difference(run(5e-4, path), reference);
    }
    // Additive noise makes Euler-Maruyama first order; anything below
    // order one half would show a ratio under sqrt(2).
    CHECK(e1 / e2 >= 1.5);
    CHECK(e1 / e2 <= 2.6);
  }

  TEST_CASE("consensus dynamics reach the initial average") {
    const GraphSchedule s = default_schedule();
    const DecayConstants d = fit_decay_constants(s, 20.0, 2001);
    const double horizon = std::ceil(20.0 / -std::log(d.lambda) / 0.01) * 0.01;
    const SimConfig cfg = pure_consensus(horizon, 1e-3);
    const Trajectory path = simulate_path(cfg, 0);
    const VectorXd target = average_state(cfg.x0);
    const StateMatrix& last = path.states.back();
    for (Eigen::Index i = 0; i < last.rows(); ++i) {
      CHECK((last.row(i).transpose() - target).norm() <= 1e-6);
    }
    // Contraction stays under the fitted envelope scaled by the spread of x0.
    const double spread = (cfg.x0.rowwise() - target.transpose()).cwiseAbs().maxCoeff();
    for (std::size_t s2 = 0; s2 < path.times.size(); s2 += 250) {
      const double dev = (path.states[s2].rowwise() - target.transpose()).cwiseAbs().maxCoeff();
      CHECK(dev <= 1.01 * 6.0 * 1.05 * d.c * std::pow(1.01 * d.lambda, path.times[s2]) * spread);
    }
  }
}
