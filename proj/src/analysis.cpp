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

#include "ctsgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ctsgd/errors.hpp"
#include "ctsgd/format.hpp"
#include "ctsgd/quadrature.hpp"

namespace ctsgd {

namespace {

constexpr double kQuadratureTolerance = 1e-8;
// ln(DBL_MAX) with a margin so the integrand and the bound stay finite.
constexpr double kLogOverflow = 700.0;

void require_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw OutOfRange("lambda must lie in (0, 1)");
}

// Writes a CSV field, quoting when it contains a separator or quote.
void csv_field(std::ostream& out, const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) {
    out << text;
    return;
  }
  out << '"';
  for (char c : text) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

void BoundReport::add(std::string label, double at, double measured, double bound, double slack) {
  points.push_back({std::move(label), at, measured, bound, slack, measured - bound});
}

void BoundReport::finalize() {
  max_violation = -std::numeric_limits<double>::infinity();
  bool finite = true;
  for (const Point& p : points) {
    const double excess = p.violation - p.slack;
    if (!std::isfinite(excess)) finite = false;
    max_violation = std::max(max_violation, excess);
  }
  if (points.empty()) max_violation = 0.0;
  pass = finite && !points.empty() && max_violation <= 0.0 && pass_guard;
}

double IntegralBoundConstants::rhs(double t, double a, double lambda) const {
  const double decay = std::exp(-a * std::log1p(t));
  const double grow = std::exp(-t * std::log(lambda));
  return delta1 * grow * decay + delta2 * decay + delta3;
}

IntegralBoundConstants integral_bound_constants(double a, double lambda) {
  require_lambda(lambda);
  if (!(a > 0.0)) throw OutOfRange("a must be positive");
  const double rate = -std::log(lambda);  // ln(1/lambda)
  IntegralBoundConstants k;
  k.t0 = std::max(a / rate - 1.0, 0.0) + 1.0;
  const double denom = rate * (k.t0 + 1.0) - a;
  const double lift = std::exp(k.t0 * rate);  // lambda^-t0
  k.delta1 = (k.t0 + 1.0) / denom;
  k.delta2 = lift * k.t0 * std::pow(k.t0 + 1.0, a);
  k.delta3 = a * lift * k.t0 * (k.t0 + 1.0) / denom;
  return k;
}

double overflow_limit(double lambda) {
  require_lambda(lambda);
  return kLogOverflow / -std::log(lambda);
}

std::optional<double> discounted_integral(double a, double lambda, double t) {
  require_lambda(lambda);
  if (t < 0.0) throw std::invalid_argument("t must be nonnegative");
  if (t > overflow_limit(lambda)) return std::nullopt;
  const double rate = -std::log(lambda);
  const QuadratureResult r = integrate(
      [=](double s) { return std::exp(s * rate - a * std::log1p(s)); }, 0.0, t,
      kQuadratureTolerance);
  if (!r.converged) return std::nullopt;
  return r.value;
}

BoundReport integral_bound_check(double a, double lambda, std::span<const double> t_grid) {
  const IntegralBoundConstants k = integral_bound_constants(a, lambda);
  BoundReport report;
  report.claim = "integral-bound";
  for (double t : t_grid) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("grid points must be positive");
    const std::string label = "a=" + format_double(a) + " lambda=" + format_double(lambda);
    const std::optional<double> lhs = discounted_integral(a, lambda, t);
    if (!lhs) {
      const bool overflow = t > overflow_limit(lambda);
      report.skipped.push_back(label + " t=" + format_double(t) +
                               (overflow ? ": beyond overflow limit" : ": quadrature failure"));
      continue;
    }
    report.add(label, t, *lhs, k.rhs(t, a, lambda));
  }
  report.finalize();
  return report;
}

ConsensusConstants consensus_constants(const SimConfig& cfg, const DecayConstants& decay,
                                       double gradient_bound, double noise_bound) {
  const double n = static_cast<double>(cfg.agents());
  const double m = static_cast<double>(cfg.dim());
  const double spread = std::sqrt(m) * std::pow(n, 1.5) * decay.c;
  ConsensusConstants w;
  w.initial = std::sqrt(n * m) * decay.c * cfg.x0.norm();
  w.drift = spread * gradient_bound;
  w.diffusion = spread * noise_bound;
  return w;
}

double consensus_bound(const ConsensusConstants& w, const StepSchedule& step, double lambda,
                       double t) {
  require_lambda(lambda);
  const double log_lambda = std::log(lambda);
  double bound = w.initial * std::exp(t * log_lambda);
  if (t <= 0.0) return bound;
  if (w.drift != 0.0) {
    const QuadratureResult drift = integrate(
        [&](double s) { return std::exp((t - s) * log_lambda) * step.eta(s); }, 0.0, t,
        kQuadratureTolerance);
    bound += w.drift * drift.value;
  }
  if (w.diffusion != 0.0) {
    const QuadratureResult diffusion = integrate(
        [&](double s) {
          const double e = step.eta(s);
          return std::exp(2.0 * (t - s) * log_lambda) * e * e;
        },
        0.0, t, kQuadratureTolerance);
    bound += w.diffusion * std::sqrt(diffusion.value);
  }
  return bound;
}

BoundReport consensus_bound_check(const EnsembleStats& stats, const DecayConstants& decay,
                                  const SimConfig& cfg,
                                  const std::optional<SmoothnessCertificate>& certificate) {
  if (!certificate) throw MissingCertificate("consensus bound needs a gradient bound M");
  const std::optional<double> noise_bound = cfg.noise.bound();
  if (!noise_bound) throw MissingCertificate("consensus bound needs a noise bound K");
  const ConsensusConstants w = consensus_constants(cfg, decay, certificate->gradient_bound,
                                                 *noise_bound);

  BoundReport report;
  report.claim = "consensus-error";
  report.notes.push_back("initial=" + format_double(w.initial) +
                         " drift=" + format_double(w.drift) +
                         " diffusion=" + format_double(w.diffusion) + " C=" + format_double(decay.c) +
                         " lambda=" + format_double(decay.lambda));
  bool inside = true;
  if (certificate->gradient_bound != 0.0) {
    inside = certificate->region.contains(stats.state_min, stats.state_max);
    if (!inside) report.notes.push_back("trajectories left the certified region");
  }
  for (std::size_t s = 0; s < stats.times.size(); ++s) {
    const double t = stats.times[s];
    const double bound = consensus_bound(w, cfg.step, decay.lambda, t);
    for (std::size_t i = 0; i < stats.agents; ++i) {
      const auto row = static_cast<Eigen::Index>(s);
      const auto col = static_cast<Eigen::Index>(i);
      report.add("agent=" + std::to_string(i + 1), t, stats.mean_consensus(row, col), bound,
                 2.0 * stats.se_consensus(row, col));
    }
  }
  report.pass_guard = inside;
  report.finalize();
  return report;
}

RateRegime regime_table(double a) {
  if (!(a > 0.5 && a <= 1.0)) throw OutOfRange("decay exponent a must lie in (1/2, 1]");
  constexpr double kTie = 1e-12;
  RateRegime r;
  if (std::abs(a - 0.75) <= kTie) {
    r.model = RateModel::kLogPower;
    r.exponent = 0.25;
    r.description = "sqrt(ln t) / t^(1/4)";
  } else if (std::abs(a - 1.0) <= kTie) {
    r.model = RateModel::kInverseLog;
    r.exponent = 0.0;
    r.description = "1 / ln t";
  } else if (a < 0.75) {
    r.model = RateModel::kPower;
    r.exponent = a - 0.5;
    r.description = "t^-" + format_double(r.exponent);
  } else {
    r.model = RateModel::kPower;
    r.exponent = 1.0 - a;
    r.description = "t^-" + format_double(r.exponent);
  }
  return r;
}

FitWindow FitWindow::from_fraction(double horizon, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("fraction must lie in [0, 1)");
  return {fraction * horizon, horizon};
}

bool RateFit::at_least_as_fast(double margin) const {
  return exponent >= predicted.exponent - margin;
}

RateFit fit_rate(std::span<const double> times, std::span<const double> gaps, double a,
                 FitWindow window) {
  if (times.size() != gaps.size()) throw DimensionMismatch("times and gaps differ in length");
  RateFit fit;
  fit.predicted = regime_table(a);

  std::vector<double> u;
  std::vector<double> v;
  double end = window.end;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    if (t <= 0.0 || t < window.start || t > end) continue;
    if (!(gaps[k] > 0.0)) {
      fit.warnings.push_back("nonpositive gap at t=" + format_double(t) +
                             "; window truncated before it");
      end = t;
      break;
    }
    u.push_back(std::log(t));
    v.push_back(std::log(gaps[k]));
  }
  if (u.size() < 3) throw NonPositiveGap("fewer than 3 positive gaps inside the fit window");
  fit.window = {window.start, end};
  fit.points = u.size();

  const auto count = static_cast<Eigen::Index>(u.size());
  const Eigen::Map<const Eigen::VectorXd> uu(u.data(), count);
  const Eigen::Map<const Eigen::VectorXd> vv(v.data(), count);
  // Centre the abscissa to keep the normal equations well conditioned.
  const double centre = uu.mean();
  const Eigen::VectorXd c = uu.array() - centre;

  Eigen::MatrixXd linear(count, 2);
  linear.col(0).setOnes();
  linear.col(1) = c;
  const Eigen::VectorXd line = linear.colPivHouseholderQr().solve(vv);
  const Eigen::VectorXd line_residual = vv - linear * line;
  fit.exponent = -line(1);
  fit.intercept = line(0) - line(1) * centre;
  fit.residual = std::sqrt(line_residual.squaredNorm() / static_cast<double>(count));

  Eigen::MatrixXd quadratic(count, 3);
  quadratic.leftCols(2) = linear;
  quadratic.col(2) = c.array().square();
  const Eigen::VectorXd parabola = quadratic.colPivHouseholderQr().solve(vv);
  const double parabola_residual =
      std::sqrt((vv - quadratic * parabola).squaredNorm() / static_cast<double>(count));
  fit.curvature = parabola(2);
  fit.curved = fit.residual > 1e-9 && parabola_residual < 0.5 * fit.residual;
  if (fit.curved) {
    fit.warnings.push_back("log-log curve is not straight (curvature " +
                           format_double(fit.curvature) + ")");
  }
  return fit;
}

RateFit fit_rate(const EnsembleStats& stats, std::size_t agent, double a, FitWindow window) {
  if (agent >= stats.agents) throw std::out_of_range("agent index out of range");
  std::vector<double> gaps(stats.times.size());
  for (std::size_t s = 0; s < gaps.size(); ++s) {
    gaps[s] = stats.mean_gap(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(agent));
  }
  return fit_rate(stats.times, gaps, a, window);
}

bool decreasing_trend(std::span<const double> times, std::span<const double> values,
                      FitWindow window, std::size_t blocks) {
  if (times.size() != values.size()) throw DimensionMismatch("times and values differ in length");
  if (blocks < 2) throw std::invalid_argument("need at least two blocks");
  if (!(window.end > window.start)) throw std::invalid_argument("empty window");
  const double width = (window.end - window.start) / static_cast<double>(blocks);
  std::vector<double> sum(blocks, 0.0);
  std::vector<std::size_t> count(blocks, 0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    if (t < window.start || t > window.end) continue;
    auto b = static_cast<std::size_t>((t - window.start) / width);
    b = std::min(b, blocks - 1);
    sum[b] += values[k];
    ++count[b];
  }
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < blocks; ++b) {
    if (count[b] == 0) return false;
    const double mean = sum[b] / static_cast<double>(count[b]);
    if (!(mean < previous)) return false;
    previous = mean;
  }
  return true;
}

double phi_integral(const StepSchedule& step, double t) {
  if (t < 0.0) throw std::invalid_argument("t must be nonnegative");
  return step.phi(t);
}

void write_report(std::ostream& out, const BoundReport& report) {
  out << "claim: " << report.claim << '\n'
      << "verdict: " << (report.pass ? "PASS" : "FAIL") << '\n'
      << "points: " << report.points.size() << '\n'
      << "max violation (after slack): " << format_double(report.max_violation) << '\n';
  for (const std::string& note : report.notes) out << "note: " << note << '\n';
  for (const std::string& skip : report.skipped) out << "skipped: " << skip << '\n';
}

void write_report(std::ostream& out, const RateFit& fit, const std::string& label) {
  out << "rate fit: " << label << '\n'
      << "  window: [" << format_double(fit.window.start) << ", " << format_double(fit.window.end)
      << "] with " << fit.points << " points\n"
      << "  fitted exponent: " << format_double(fit.exponent) << '\n'
      << "  predicted: " << fit.predicted.description << " (exponent "
      << format_double(fit.predicted.exponent) << ")\n"
      << "  residual: " << format_double(fit.residual) << '\n'
      << "  curvature: " << format_double(fit.curvature) << '\n'
      << "  at least as fast as predicted: " << (fit.at_least_as_fast() ? "yes" : "no") << '\n';
  for (const std::string& w : fit.warnings) out << "  warning: " << w << '\n';
}

void write_csv_rows(std::ostream& out, const BoundReport& report) {
  for (const BoundReport::Point& p : report.points) {
    csv_field(out, report.claim);
    out << ',';
    csv_field(out, p.label + " t=" + format_double(p.at));
    out << ',' << format_double(p.measured) << ','
        << format_double(p.bound) << ',' << format_double(p.violation) << '\n';
  }
}

}  // namespace ctsgd
