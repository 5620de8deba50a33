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
#include <optional>
#include <sstream>
#include <vector>

#include "ctsgd/analysis.hpp"
#include "ctsgd/errors.hpp"
#include "ctsgd/quadrature.hpp"

using namespace ctsgd;

namespace {

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1)));
  }
  out.back() = hi;
  return out;
}

// Plain least-squares slope of ln y on ln t.
double loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
  double su = 0, sv = 0, suu = 0, suv = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double u = std::log(t[k]);
    const double v = std::log(y[k]);
    su += u;
    sv += v;
    suu += u * u;
    suv += u * v;
  }
  return (n * suv - su * sv) / (n * suu - su * su);
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("integral bound on small grids") {
    const std::vector<double> grid{1.0, 5.0, 10.0, 20.0};
    const BoundReport r = integral_bound_check(1.0, 0.5, grid);
    CHECK(r.pass);
    CHECK(r.points.size() == 4);
    CHECK(r.max_violation < 0.0);
    const BoundReport fine = integral_bound_check(0.6, 0.9, log_spaced(0.1, 50.0, 50));
    CHECK(fine.pass);
  }

  TEST_CASE("integral bound near zero") {
    const IntegralBoundConstants k = integral_bound_constants(0.6, 0.5);
    const std::vector<double> tiny{1e-9};
    const BoundReport r = integral_bound_check(0.6, 0.5, tiny);
    CHECK(r.pass);
    CHECK(r.points[0].measured == doctest::Approx(1e-9).epsilon(1e-6));
    CHECK(r.points[0].bound == doctest::Approx(k.delta1 + k.delta2 + k.delta3).epsilon(1e-6));
  }

  TEST_CASE("integral bound constants") {
    // a = 2, lambda = 0.5: t0 = a / ln 2 - 1 + 1.
    const IntegralBoundConstants k = integral_bound_constants(2.0, 0.5);
    CHECK(k.t0 == doctest::Approx(2.0 / std::log(2.0)));
    CHECK(integral_bound_constants(0.5, 0.1).t0 == doctest::Approx(1.0));
    CHECK(k.delta1 > 0.0);
    CHECK(k.delta3 > 0.0);
  }

  TEST_CASE("integral bound across the parameter grid up to overflow") {
    for (double a : {0.6, 1.0, 2.0}) {
      for (double lambda : {0.3, 0.5, 0.9}) {
        const BoundReport r =
            integral_bound_check(a, lambda, log_spaced(0.1, overflow_limit(lambda), 40));
        CHECK_MESSAGE(r.pass, "a=" << a << " lambda=" << lambda);
        CHECK(r.skipped.empty());
      }
    }
  }

  TEST_CASE("overflowing points are skipped and reported") {
    const std::vector<double> grid{1.0, 2.0 * overflow_limit(0.5)};
    const BoundReport r = integral_bound_check(1.0, 0.5, grid);
    CHECK(r.points.size() == 1);
    CHECK(r.skipped.size() == 1);
    CHECK(r.skipped[0].find("beyond overflow limit") != std::string::npos);
    CHECK(r.pass);
    CHECK_THROWS(integral_bound_check(1.0, 1.5, grid));
  }

  TEST_CASE("phi integral") {
    CHECK(phi_integral(StepSchedule(2.0, 1.0), std::exp(1.0) - 1.0) == doctest::Approx(2.0));
    CHECK(phi_integral(StepSchedule(2.0, 0.7), 0.0) == 0.0);
    CHECK(phi_integral(StepSchedule(1.0, 0.75), 15.0) == doctest::Approx(4.0));
    for (double a : {0.55, 0.75, 0.9, 1.0}) {
      const StepSchedule s(1.7, a);
      for (double t : {0.5, 3.0, 40.0}) {
        const double q = integrate([&](double x) { return s.eta(x); }, 0.0, t, 1e-13).value;
        CHECK(std::abs(phi_integral(s, t) / q - 1.0) <= 1e-10);
      }
    }
    CHECK_THROWS(phi_integral(StepSchedule(1.0, 1.0), -1.0));
  }

  TEST_CASE("regime table") {
    CHECK(regime_table(0.6).model == RateModel::kPower);
    CHECK(regime_table(0.6).exponent == doctest::Approx(0.1));
    CHECK(regime_table(0.75).model == RateModel::kLogPower);
    CHECK(regime_table(0.75).exponent == 0.25);
    CHECK(regime_table(0.9).exponent == doctest::Approx(0.1));
    CHECK(regime_table(1.0).model == RateModel::kInverseLog);
    CHECK_THROWS_AS(regime_table(0.5), OutOfRange);
    CHECK_THROWS_AS(regime_table(1.0 + 1e-9), OutOfRange);
    // Adjacent cases meet at the boundary.
    const double below = regime_table(0.75 - 1e-9).exponent;
    const double above = regime_table(0.75 + 1e-9).exponent;
    CHECK(below == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(above == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(std::abs(below - above) <= 3e-9);
  }

  TEST_CASE("rate fit on exact power data") {
    const std::vector<double> t = log_spaced(1.0, 100.0, 60);
    std::vector<double> g;
    for (double x : t) g.push_back(3.0 * std::pow(x, -0.4));
    const RateFit fit = fit_rate(t, g, 0.9, FitWindow{1.0, 100.0});
    CHECK(std::abs(fit.exponent - 0.4) <= 1e-6);
    CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.residual <= 1e-9);
    CHECK_FALSE(fit.curved);
    CHECK(fit.at_least_as_fast());
    CHECK(fit.predicted.exponent == doctest::Approx(0.1));
  }

  TEST_CASE("rate fit on the logarithmic regime flags curvature") {
    const std::vector<double> t = log_spaced(10.0, 1e4, 200);
    std::vector<double> g;
    for (double x : t) g.push_back(std::sqrt(std::log(x)) / std::pow(x, 0.25));
    const RateFit fit = fit_rate(t, g, 0.75, FitWindow{10.0, 1e4});
    CHECK(fit.exponent == doctest::Approx(-loglog_slope(t, g)).epsilon(1e-10));
    // The sqrt(ln t) factor bends the log-log curve and slows the apparent
    // decay below 1/4 over this range.
    CHECK(fit.exponent < 0.25);
    CHECK(fit.exponent > 0.1);
    CHECK(fit.curved);
    CHECK(fit.curvature < 0.0);
  }

  TEST_CASE("fit window and nonpositive gaps") {
    std::vector<double> t;
    std::vector<double> g;
    for (int k = 0; k <= 100; ++k) {
      t.push_back(k);
      g.push_back(k == 0 ? 5.0 : 2.0 / k);
    }
    const RateFit window = fit_rate(t, g, 1.0, FitWindow::from_fraction(100.0));
    CHECK(window.window.start == doctest::Approx(20.0));
    CHECK(window.points == 81);
    CHECK(window.exponent == doctest::Approx(1.0).epsilon(1e-9));

    g[60] = 0.0;
    const RateFit shrunk = fit_rate(t, g, 1.0, FitWindow{20.0, 100.0});
    CHECK(shrunk.window.end == doctest::Approx(60.0));
    CHECK(shrunk.points == 40);
    CHECK_FALSE(shrunk.warnings.empty());

    g[21] = -1.0;
    CHECK_THROWS_AS(fit_rate(t, g, 1.0, FitWindow{20.0, 100.0}), NonPositiveGap);
  }

  TEST_CASE("decreasing trend") {
    std::vector<double> t;
    std::vector<double> down;
    std::vector<double> bump;
    for (int k = 0; k <= 100; ++k) {
      t.push_back(k);
      down.push_back(1.0 / (1.0 + k) + 0.001 * ((k % 2) ? 1 : -1));
      bump.push_back(k > 70 && k < 80 ? 1.0 : 1.0 / (1.0 + k));
    }
    CHECK(decreasing_trend(t, down, FitWindow{20.0, 100.0}));
    CHECK_FALSE(decreasing_trend(t, bump, FitWindow{20.0, 100.0}));
  }

  TEST_CASE("consensus bound") {
    SimConfig cfg = six_agent_config(2.0, 1);
    const DecayConstants decay{0.9, 0.4, 0.8};
    SUBCASE("reduces to the initial term without gradient or noise") {
      const ConsensusConstants w = consensus_constants(cfg, decay, 0.0, 0.0);
      CHECK(w.initial == doctest::Approx(std::sqrt(12.0) * 0.9 * cfg.x0.norm()));
      CHECK(consensus_bound(w, cfg.step, 0.4, 1.5) ==
            doctest::Approx(w.initial * std::pow(0.4, 1.5)));
    }
    SUBCASE("quadrature terms match closed forms for constant step size") {
      // With a = 1 and beta -> eta(s) = 2/(s+1); compare against direct quadrature.
      const ConsensusConstants w{0.0, 1.0, 0.0};
      const double t = 3.0;
      const double direct = integrate(
          [&](double s) { return std::pow(0.4, t - s) * 2.0 / (s + 1.0); }, 0.0, t, 1e-12).value;
      CHECK(consensus_bound(w, cfg.step, 0.4, t) == doctest::Approx(direct).epsilon(1e-8));
      const ConsensusConstants noise{0.0, 0.0, 1.0};
      const double diffusion = integrate(
          [&](double s) { return std::pow(0.4, 2 * (t - s)) * 4.0 / ((s + 1.0) * (s + 1.0)); }, 0.0,
          t, 1e-12).value;
      CHECK(consensus_bound(noise, cfg.step, 0.4, t) ==
            doctest::Approx(std::sqrt(diffusion)).epsilon(1e-8));
    }
    SUBCASE("missing certificates") {
      const EnsembleStats stats = run_ensemble(cfg, 2);
      CHECK_THROWS_AS(consensus_bound_check(stats, decay, cfg, std::nullopt), MissingCertificate);
      cfg.noise = NoiseModel::custom(
          6, 2, [](double, Eigen::Ref<StateMatrix> out) { out.setOnes(); }, std::nullopt);
      const SmoothnessCertificate cert{1.0, 1.0, Box{Eigen::Vector2d(-9, -9), Eigen::Vector2d(9, 9)}};
      CHECK_THROWS_AS(consensus_bound_check(stats, decay, cfg, cert), MissingCertificate);
    }
    SUBCASE("region escape fails the check") {
      const EnsembleStats stats = run_ensemble(cfg, 4);
      const DecayConstants fitted = fit_decay_constants(cfg.schedule, 20.0, 2001);
      const SmoothnessCertificate tight =
          certify_constants(cfg.objectives, Box{Eigen::Vector2d(0, 0), Eigen::Vector2d(0.1, 0.1)}, 100);
      const BoundReport r = consensus_bound_check(stats, fitted, cfg, tight);
      CHECK_FALSE(r.pass);
    }
  }

  TEST_CASE("report serialization") {
    BoundReport r;
    r.claim = "demo";
    r.add("agent=1", 0.5, 1.0, 2.0);
    r.add("agent=2", 1.5, 3.0, 2.5, 1.0);
    r.finalize();
    CHECK(r.pass);
    CHECK(r.max_violation == doctest::Approx(-0.5));
    std::ostringstream csv;
    write_csv_rows(csv, r);
    CHECK(csv.str() == "demo,agent=1 t=0.5,1,2,-1\ndemo,agent=2 t=1.5,3,2.5,0.5\n");
    std::ostringstream text;
    write_report(text, r);
    CHECK(text.str().find("verdict: PASS") != std::string::npos);
    r.add("agent=3", 2.0, 5.0, 1.0);
    r.finalize();
    CHECK_FALSE(r.pass);
    CHECK(r.max_violation == doctest::Approx(4.0));
  }
}
