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
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctsgd/errors.hpp"
#include "ctsgd/graph.hpp"

using namespace ctsgd;
using Eigen::MatrixXd;

namespace {

WeightedDigraph from(std::size_t n, std::vector<Edge> edges) {
  return WeightedDigraph::from_edges(n, edges);
}

GraphSchedule constant(const WeightedDigraph& g, double duration = 1.0) {
  return GraphSchedule({Segment{duration, g}}, true);
}

WeightedDigraph pair_graph() { return from(2, {{0, 1, 1.0}, {1, 0, 1.0}}); }

WeightedDigraph complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) edges.push_back({i, j, 1.0});
    }
  }
  return from(n, edges);
}

double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("laplacian of the bidirectional pair") {
    MatrixXd expected(2, 2);
    expected << 1, -1, -1, 1;
    CHECK(max_abs(laplacian(pair_graph()) - expected) == 0.0);
  }

  TEST_CASE("laplacian of an empty graph is zero") {
    CHECK(max_abs(laplacian(WeightedDigraph(MatrixXd::Zero(4, 4)))) == 0.0);
  }

  TEST_CASE("laplacian of the directed 3-cycle") {
    // 1 -> 2 -> 3 -> 1 with unit weights.
    const MatrixXd l = laplacian(from(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}}));
    MatrixXd expected(3, 3);
    expected << 1, 0, -1,  //
        -1, 1, 0,          //
        0, -1, 1;
    CHECK(max_abs(l - expected) == 0.0);
    CHECK(max_abs(l.rowwise().sum()) <= 1e-12);
  }

  TEST_CASE("invalid weight matrices are rejected") {
    MatrixXd w = MatrixXd::Zero(2, 2);
    w(0, 0) = 1.0;
    CHECK_THROWS(WeightedDigraph(w));
    w.setZero();
    w(0, 1) = -1.0;
    CHECK_THROWS(WeightedDigraph(w));
    CHECK_THROWS(WeightedDigraph(MatrixXd::Zero(2, 3)));
  }

  TEST_CASE("balance") {
    CHECK(is_balanced(from(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}})));
    CHECK_FALSE(is_balanced(from(2, {{0, 1, 1.0}})));
    // Two opposite directed 4-cycles with different weights.
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < 4; ++i) {
      edges.push_back({i, (i + 1) % 4, 2.0});
      edges.push_back({(i + 1) % 4, i, 0.5});
    }
    CHECK(is_balanced(from(4, edges)));
  }

  TEST_CASE("strong connectivity") {
    const std::vector<Edge> cycle{{0, 1, 1}, {1, 2, 1}, {2, 0, 1}};
    CHECK(is_strongly_connected(3, cycle));
    const std::vector<Edge> path{{0, 1, 1}, {1, 2, 1}};
    CHECK_FALSE(is_strongly_connected(3, path));
    CHECK(is_strongly_connected(1, {}));
  }

  TEST_CASE("schedule lookup wraps periodically and holds the last segment otherwise") {
    const WeightedDigraph a = from(2, {{0, 1, 1.0}});
    const WeightedDigraph b = from(2, {{1, 0, 1.0}});
    const GraphSchedule periodic({{0.5, a}, {0.25, b}}, true);
    CHECK(periodic.period() == doctest::Approx(0.75));
    CHECK(periodic.segment_index_at(0.1) == 0);
    CHECK(periodic.segment_index_at(0.6) == 1);
    CHECK(periodic.segment_index_at(0.8) == 0);
    const GraphSchedule held({{0.5, a}, {0.25, b}}, false);
    CHECK(held.segment_index_at(100.0) == 1);
    CHECK_THROWS(GraphSchedule({{0.0, a}}, true));
  }

  TEST_CASE("default schedule: four balanced unit-weight subgraphs held 0.01 s") {
    const GraphSchedule s = default_schedule();
    REQUIRE(s.segments().size() == 4);
    CHECK(s.agents() == 6);
    CHECK(s.periodic());
    CHECK(s.balanced());
    std::vector<Edge> all;
    for (const Segment& seg : s.segments()) {
      CHECK(seg.duration == 0.01);
      CHECK(is_balanced(seg.graph));
      for (const Edge& e : seg.graph.edges()) {
        CHECK(e.weight == 1.0);
        all.push_back(e);
      }
    }
    CHECK(is_strongly_connected(6, all));
  }

  TEST_CASE("(delta, tc) connectivity") {
    SUBCASE("static strongly connected graph") {
      const WeightedDigraph g = from(3, {{0, 1, 0.5}, {1, 2, 2.0}, {2, 0, 1.0}});
      const ConnectivityVerdict v = check_delta_tc_connectivity(constant(g), 0.5 * 0.3, 0.3);
      CHECK(v.strongly_connected);
      CHECK(v.edges.size() == 3);
    }
    SUBCASE("default schedule with tc = 0.04") {
      const ConnectivityVerdict v = check_delta_tc_connectivity(default_schedule(), 0.01, 0.04);
      CHECK(v.strongly_connected);
      CHECK_FALSE(v.horizon_limited);
    }
    SUBCASE("a window shorter than one rotation loses edges") {
      const ConnectivityVerdict v = check_delta_tc_connectivity(default_schedule(), 0.01, 0.02);
      CHECK_FALSE(v.strongly_connected);
    }
    SUBCASE("agent without in-edges") {
      const WeightedDigraph g = from(3, {{0, 1, 1.0}, {1, 0, 1.0}, {2, 0, 1.0}});
      CHECK_FALSE(check_delta_tc_connectivity(constant(g), 0.01, 0.1).strongly_connected);
    }
    SUBCASE("window integral is exact at interior starts") {
      // Edge 0->1 exists only for 0.3 s of every second; its worst window of
      // length 0.5 starting anywhere holds exactly 0 weight.
      const WeightedDigraph on = from(2, {{0, 1, 1.0}, {1, 0, 1.0}});
      const WeightedDigraph off = from(2, {{1, 0, 1.0}});
      const GraphSchedule s({{0.3, on}, {0.7, off}}, true);
      const ConnectivityVerdict v = check_delta_tc_connectivity(s, 1e-6, 0.5);
      CHECK_FALSE(v.strongly_connected);
      const ConnectivityVerdict w = check_delta_tc_connectivity(s, 0.3, 1.0);
      CHECK(w.strongly_connected);
    }
    SUBCASE("non-periodic schedule shorter than the window") {
      const GraphSchedule s({{0.01, pair_graph()}}, false);
      CHECK_THROWS_AS(check_delta_tc_connectivity(s, 0.001, 0.04), NonPeriodicHorizonTooShort);
      const GraphSchedule longer({{0.1, pair_graph()}}, false);
      CHECK(check_delta_tc_connectivity(longer, 0.001, 0.04).horizon_limited);
    }
  }

  TEST_CASE("transition matrix") {
    SUBCASE("empty interval gives the identity") {
      const MatrixXd phi = transition_matrix(default_schedule(), 0.37, 0.37);
      CHECK(max_abs(phi - MatrixXd::Identity(6, 6)) == 0.0);
    }
    SUBCASE("constant pair matches the closed form") {
      for (double tau : {0.01, 0.3, 1.0, 4.5}) {
        const MatrixXd phi = transition_matrix(constant(pair_graph(), 0.05), 0.2, 0.2 + tau);
        const double e = std::exp(-2.0 * tau);
        MatrixXd expected(2, 2);
        expected << (1 + e) / 2, (1 - e) / 2, (1 - e) / 2, (1 + e) / 2;
        CHECK(max_abs(phi - expected) <= 1e-13);
      }
    }
    SUBCASE("reversed interval") {
      CHECK_THROWS_AS(transition_matrix(default_schedule(), 1.0, 0.5), InvalidInterval);
    }
    SUBCASE("stochastic for an unbalanced schedule") {
      const GraphSchedule s({{0.2, from(3, {{0, 1, 1.0}, {1, 2, 3.0}})},
                             {0.1, from(3, {{2, 0, 0.5}})}},
                            true);
      const MatrixXd phi = transition_matrix(s, 0.05, 1.73);
      CHECK((phi.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
      CHECK(phi.minCoeff() >= -1e-12);
    }
  }

  TEST_CASE("transition matrix invariants on random triples") {
    const GraphSchedule s = default_schedule();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
      double t[3] = {unit(rng), unit(rng), unit(rng)};
      std::sort(t, t + 3);
      const MatrixXd full = transition_matrix(s, t[0], t[2]);
      const MatrixXd split = transition_matrix(s, t[1], t[2]) * transition_matrix(s, t[0], t[1]);
      CHECK(max_abs(full - split) <= 1e-8);
      CHECK((full.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
      CHECK((full.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
      CHECK(full.minCoeff() >= -1e-12);
    }
  }

  TEST_CASE("decay constants") {
    SUBCASE("constant pair: lambda = e^-2") {
      const DecayConstants d = fit_decay_constants(constant(pair_graph(), 0.1), 8.0, 401);
      CHECK(std::abs(d.lambda / std::exp(-2.0) - 1.0) <= 0.02);
      CHECK(d.c == doctest::Approx(0.5).epsilon(0.02));
    }
    SUBCASE("complete graph on 3 nodes: lambda = e^-3") {
      const DecayConstants d = fit_decay_constants(constant(complete(3), 0.1), 6.0, 301);
      CHECK(std::abs(d.lambda / std::exp(-3.0) - 1.0) <= 0.02);
    }
    SUBCASE("disconnected graph") {
      const WeightedDigraph g = from(4, {{0, 1, 1.0}, {1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}});
      CHECK_THROWS_AS(fit_decay_constants(constant(g), 10.0, 101), DecayNotObserved);
    }
    SUBCASE("fitted envelope holds on an offset grid of the default schedule") {
      const GraphSchedule s = default_schedule();
      const DecayConstants d = fit_decay_constants(s, 20.0, 2001);
      CHECK(d.lambda > 0.0);
      CHECK(d.lambda < 1.0);
      std::vector<double> times;
      for (int k = 0; k < 997; ++k) times.push_back(20.0 * (k + 0.37) / 997.0);
      const std::vector<double> dev = consensus_deviation(s, times);
      for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK(dev[k] <= 1.05 * d.c * std::pow(1.01 * d.lambda, times[k]));
      }
    }
  }

  TEST_CASE("consensus deviation matches the transition matrix") {
    const GraphSchedule s = default_schedule();
    const std::vector<double> times{0.0, 0.015, 0.4, 1.234};
    const std::vector<double> dev = consensus_deviation(s, times);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const MatrixXd phi = transition_matrix(s, 0.0, times[k]);
      CHECK(dev[k] == doctest::Approx((phi.array() - 1.0 / 6.0).abs().maxCoeff()).epsilon(1e-10));
    }
  }
}
