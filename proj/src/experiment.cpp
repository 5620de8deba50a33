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

#include "ctsgd/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include "ctsgd/ensemble.hpp"
#include "ctsgd/errors.hpp"
#include "ctsgd/export.hpp"
#include "ctsgd/format.hpp"
#include "ctsgd/graph.hpp"
#include "ctsgd/objective.hpp"

#ifndef CTSGD_VERSION
#define CTSGD_VERSION "unknown"
#endif

namespace ctsgd {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kKindNames = {"simulate", "sweep", "certify-bounds",
                                                        "consensus-only", "isometry"};

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string indexed(const std::string& path, std::size_t k) {
  return path + "[" + std::to_string(k) + "]";
}

// Section accessors that fill in defaults, so the resolved document lists
// every field that influenced the run.
json& section(json& doc, const std::string& key) {
  if (!doc.contains(key)) doc[key] = json::object();
  json& s = doc[key];
  if (!s.is_object()) throw ConfigError(key, "expected an object");
  return s;
}

double number(json& obj, const std::string& key, const std::string& path,
              std::optional<double> fallback) {
  if (!obj.contains(key)) {
    if (!fallback) throw ConfigError(join(path, key), "required field is missing");
    obj[key] = *fallback;
  }
  const json& v = obj[key];
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(join(path, key), "expected a finite number");
  return x;
}

std::uint64_t count(json& obj, const std::string& key, const std::string& path,
                    std::uint64_t fallback) {
  if (!obj.contains(key)) obj[key] = fallback;
  const json& v = obj[key];
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(join(path, key), "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(json& obj, const std::string& key, const std::string& path,
                 const std::string& fallback) {
  if (!obj.contains(key)) obj[key] = fallback;
  const json& v = obj[key];
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

bool flag(json& obj, const std::string& key, const std::string& path, bool fallback) {
  if (!obj.contains(key)) obj[key] = fallback;
  const json& v = obj[key];
  if (!v.is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return v.get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw ConfigError(indexed(path, k), "expected a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

Eigen::VectorXd vector_of(const json& v, const std::string& path) {
  const std::vector<double> x = numbers(v, path);
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

Eigen::MatrixXd matrix_of(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of rows");
  const std::vector<double> first = numbers(v[0], indexed(path, 0));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(first.size()));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::vector<double> row = numbers(v[r], indexed(path, r));
    if (row.size() != first.size()) throw ConfigError(indexed(path, r), "rows differ in length");
    for (std::size_t c = 0; c < row.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return out;
}

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

// Runs `fn`, turning validation failures of library constructors into
// ConfigErrors at `path`.
template <typename Fn>
auto guarded(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

GraphSchedule parse_graph(json& doc) {
  json& g = section(doc, "graph");
  if (g.contains("preset")) {
    const std::string preset = text(g, "preset", "graph", "default");
    if (preset != "default") throw ConfigError("graph.preset", "unknown preset '" + preset + "'");
    return default_schedule();
  }
  const std::uint64_t n = count(g, "agents", "graph", 0);
  if (n < 1) throw ConfigError("graph.agents", "at least one agent is required");
  const bool periodic = flag(g, "periodic", "graph", true);
  if (!g.contains("segments") || !g["segments"].is_array() || g["segments"].empty()) {
    throw ConfigError("graph.segments", "expected a nonempty array of segments");
  }
  std::vector<Segment> segments;
  json& list = g["segments"];
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string path = indexed("graph.segments", k);
    json& seg = list[k];
    if (!seg.is_object()) throw ConfigError(path, "expected an object");
    const double duration = number(seg, "duration", path, std::nullopt);
    if (!(duration > 0.0)) throw ConfigError(join(path, "duration"), "duration must be positive");
    if (!seg.contains("edges")) seg["edges"] = json::array();
    json& edges = seg["edges"];
    if (!edges.is_array()) throw ConfigError(join(path, "edges"), "expected an array");
    std::vector<Edge> parsed;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const std::string epath = indexed(join(path, "edges"), e);
      json& edge = edges[e];
      if (!edge.is_object()) throw ConfigError(epath, "expected an object");
      const std::uint64_t from = count(edge, "from", epath, 0);
      const std::uint64_t to = count(edge, "to", epath, 0);
      const double weight = number(edge, "weight", epath, 1.0);
      if (from < 1 || from > n) throw ConfigError(join(epath, "from"), "agent out of range");
      if (to < 1 || to > n) throw ConfigError(join(epath, "to"), "agent out of range");
      parsed.push_back({static_cast<std::size_t>(from - 1), static_cast<std::size_t>(to - 1), weight});
    }
    segments.push_back(guarded(path, [&] {
      return Segment{duration, WeightedDigraph::from_edges(static_cast<std::size_t>(n), parsed)};
    }));
  }
  return guarded("graph", [&] { return GraphSchedule(std::move(segments), periodic); });
}

std::optional<ConnectivityAssumption> parse_assumption(json& doc, const GraphSchedule& schedule) {
  json& g = section(doc, "graph");
  if (!g.contains("assumption") || g["assumption"].is_null()) return std::nullopt;
  json& a = g["assumption"];
  if (!a.is_object()) throw ConfigError("graph.assumption", "expected an object");
  ConnectivityAssumption out;
  out.delta = number(a, "delta", "graph.assumption", std::nullopt);
  out.tc = number(a, "tc", "graph.assumption", std::nullopt);
  if (!(out.delta > 0.0)) throw ConfigError("graph.assumption.delta", "delta must be positive");
  if (!(out.tc > 0.0)) throw ConfigError("graph.assumption.tc", "tc must be positive");
  if (!schedule.balanced()) {
    throw ConfigError("graph.assumption", "declared connectivity requires balanced graphs");
  }
  const ConnectivityVerdict verdict = guarded(
      "graph.assumption", [&] { return check_delta_tc_connectivity(schedule, out.delta, out.tc); });
  if (!verdict.strongly_connected) {
    throw ConfigError("graph.assumption",
                      "schedule is not (delta, tc)-strongly connected for the declared values");
  }
  return out;
}

ObjectiveSet parse_objectives(json& doc) {
  json& o = section(doc, "objectives");
  const std::string kind = text(o, "kind", "objectives", "scalar_pattern");
  if (kind == "six_agent") return six_agent_objectives();
  if (kind == "scalar_pattern") {
    if (!o.contains("a") || !o.contains("b")) {
      throw ConfigError("objectives", "scalar_pattern needs arrays a and b");
    }
    const std::vector<double> a = numbers(o["a"], "objectives.a");
    const std::vector<double> b = numbers(o["b"], "objectives.b");
    return guarded("objectives", [&] { return scalar_pattern_objectives(a, b); });
  }
  if (kind == "quadratic") {
    if (!o.contains("agents") || !o["agents"].is_array() || o["agents"].empty()) {
      throw ConfigError("objectives.agents", "expected a nonempty array");
    }
    std::vector<std::shared_ptr<const Objective>> list;
    json& agents = o["agents"];
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const std::string path = indexed("objectives.agents", i);
      json& entry = agents[i];
      if (!entry.is_object() || !entry.contains("P") || !entry.contains("q")) {
        throw ConfigError(path, "expected an object with P and q");
      }
      const Eigen::MatrixXd p = matrix_of(entry["P"], join(path, "P"));
      const Eigen::VectorXd q = vector_of(entry["q"], join(path, "q"));
      const double c = number(entry, "c", path, 0.0);
      list.push_back(guarded(path, [&] { return std::make_shared<QuadraticObjective>(p, q, c); }));
    }
    return guarded("objectives", [&] { return ObjectiveSet(std::move(list)); });
  }
  throw ConfigError("objectives.kind", "unknown objective kind '" + kind + "'");
}

NoiseModel parse_noise(json& dyn, std::size_t n, std::size_t m) {
  if (!dyn.contains("noise")) dyn["noise"] = json{{"kind", "sin_cos"}, {"scale", 1.0}};
  json& noise = dyn["noise"];
  if (!noise.is_object()) throw ConfigError("dynamics.noise", "expected an object");
  const std::string kind = text(noise, "kind", "dynamics.noise", "sin_cos");
  if (kind == "zero") return NoiseModel::zero(n, m);
  if (kind == "sin_cos") {
    const double scale = number(noise, "scale", "dynamics.noise", 1.0);
    return NoiseModel::sin_cos(n, m, scale);
  }
  if (kind == "constant") {
    if (!noise.contains("value")) throw ConfigError("dynamics.noise.value", "required field is missing");
    const Eigen::VectorXd value = vector_of(noise["value"], "dynamics.noise.value");
    if (static_cast<std::size_t>(value.size()) != m) {
      throw ConfigError("dynamics.noise.value", "length must equal the state dimension");
    }
    return NoiseModel::constant(n, value);
  }
  throw ConfigError("dynamics.noise.kind", "unknown noise kind '" + kind + "'");
}

StepSchedule parse_step(json& dyn, std::optional<double> a_override) {
  const double beta = number(dyn, "beta", "dynamics", 2.0);
  double a = number(dyn, "a", "dynamics", 1.0);
  if (a_override) a = *a_override;
  if (!(beta > 0.0)) throw ConfigError("dynamics.beta", "beta must be positive");
  if (!(a > 0.5 && a <= 1.0)) throw ConfigError("dynamics.a", "a must lie in (1/2, 1]");
  return StepSchedule(beta, a);
}

// Builds the simulation from a document whose defaults are already filled in
// (or fills them in when called during resolution).
SimConfig build_simulation(json& doc, std::optional<double> a_override) {
  GraphSchedule schedule = parse_graph(doc);
  (void)parse_assumption(doc, schedule);
  ObjectiveSet objectives = parse_objectives(doc);
  json& dyn = section(doc, "dynamics");
  StepSchedule step = parse_step(dyn, a_override);
  const std::size_t n = schedule.agents();
  const std::size_t m = objectives.dim();
  NoiseModel noise = parse_noise(dyn, n, m);
  const double noise_scale = number(dyn, "noise_scale", "dynamics", 1.0);
  if (noise_scale < 0.0) throw ConfigError("dynamics.noise_scale", "scale must be nonnegative");
  if (noise_scale != 1.0) noise = noise.scaled(noise_scale);
  const double h = number(dyn, "h", "dynamics", 1e-3);
  const double horizon = number(dyn, "horizon", "dynamics", std::nullopt);
  if (!dyn.contains("x0")) throw ConfigError("dynamics.x0", "required field is missing");
  const Eigen::MatrixXd x0 = matrix_of(dyn["x0"], "dynamics.x0");
  const std::uint64_t stride = count(dyn, "sample_stride", "dynamics", 1);
  json& ens = section(doc, "ensemble");
  const std::uint64_t seed = count(ens, "seed", "ensemble", 0);

  SimConfig cfg{std::move(schedule), std::move(objectives), step,   std::move(noise), h,
                horizon,             StateMatrix(x0),       seed,   stride};
  cfg.validate();
  return cfg;
}

void apply_overrides(json& doc, const Overrides& o) {
  if (o.seed) section(doc, "ensemble")["seed"] = *o.seed;
  if (o.runs) section(doc, "ensemble")["runs"] = *o.runs;
  if (o.workers) section(doc, "ensemble")["workers"] = *o.workers;
  if (o.h) section(doc, "dynamics")["h"] = *o.h;
  if (o.horizon) section(doc, "dynamics")["horizon"] = *o.horizon;
  if (o.a) section(doc, "dynamics")["a"] = *o.a;
  if (o.beta) section(doc, "dynamics")["beta"] = *o.beta;
  if (o.noise_scale) section(doc, "dynamics")["noise_scale"] = *o.noise_scale;
  if (o.output) section(doc, "experiment")["output"] = *o.output;
  if (o.experiment) section(doc, "experiment")["kind"] = *o.experiment;
}

// Short fixed-width numbers for the human-readable reports.
std::string brief(double x) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.6g", x);
  return buf.data();
}

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, ExperimentOutcome& outcome)
      : dir_(std::move(dir)), outcome_(outcome) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("experiment.output", "cannot create " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("experiment.output", "cannot write " + (dir_ / name).string());
    body(out);
    out.flush();
    if (!out) throw ConfigError("experiment.output", "failed writing " + (dir_ / name).string());
    outcome_.files.push_back(name);
  }

 private:
  std::filesystem::path dir_;
  ExperimentOutcome& outcome_;
};

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  std::vector<double> out(points);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t k = 0; k < points; ++k) {
    out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

// Envelope check of the fitted decay on a grid offset from the fitting grid.
BoundReport decay_envelope_check(const GraphSchedule& schedule, const DecayConstants& decay,
                                 double horizon, std::size_t grid) {
  std::vector<double> times(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    times[k] = horizon * (static_cast<double>(k) + 0.5) / static_cast<double>(grid);
  }
  const std::vector<double> d = consensus_deviation(schedule, times);
  BoundReport report;
  report.claim = "transition-decay";
  const double rate = std::log(1.01 * decay.lambda);
  for (std::size_t k = 0; k < grid; ++k) {
    report.add("", times[k], d[k], 1.05 * decay.c * std::exp(times[k] * rate));
  }
  report.notes.push_back("C=" + format_double(decay.c) + " lambda=" + format_double(decay.lambda));
  report.finalize();
  return report;
}

std::vector<BoundReport> integral_bound_reports(double a_run, std::optional<double> lambda_run) {
  std::vector<std::pair<double, double>> cases;
  for (double a : {0.6, 1.0, 2.0}) {
    for (double lambda : {0.3, 0.5, 0.9}) cases.emplace_back(a, lambda);
  }
  if (lambda_run) cases.emplace_back(a_run, *lambda_run);
  std::vector<BoundReport> out;
  for (const auto& [a, lambda] : cases) {
    const std::vector<double> grid = log_grid(0.1, overflow_limit(lambda), 50);
    out.push_back(integral_bound_check(a, lambda, grid));
  }
  return out;
}

void write_bounds(ArtifactWriter& writer, const std::vector<BoundReport>& reports) {
  writer.write("bounds.csv", [&](std::ostream& out) {
    out << kBoundCsvHeader << '\n';
    for (const BoundReport& r : reports) write_csv_rows(out, r);
  });
}

void write_summary(std::ostream& out, const SimConfig& cfg, const EnsembleStats& stats) {
  const std::size_t last = stats.times.size() - 1;
  const Eigen::VectorXd& target = cfg.objectives.minimizer().x;
  out << "runs: " << stats.runs << " (diverged " << stats.diverged_paths.size() << ")\n"
      << "final time: " << brief(stats.times[last]) << '\n'
      << "minimizer:";
  for (Eigen::Index d = 0; d < target.size(); ++d) out << ' ' << brief(target(d));
  out << '\n';
  for (std::size_t i = 0; i < stats.agents; ++i) {
    const auto row = static_cast<Eigen::Index>(last);
    const auto col = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd mean = stats.mean_state[last].row(col).transpose();
    out << "agent " << i + 1 << ": mean state";
    for (Eigen::Index d = 0; d < mean.size(); ++d) out << ' ' << brief(mean(d));
    out << ", distance " << brief((mean - target).norm()) << ", gap "
        << brief(stats.mean_gap(row, col)) << " +- " << brief(stats.se_gap(row, col))
        << ", consensus error " << brief(stats.mean_consensus(row, col)) << '\n';
  }
}

FitWindow fit_window_for(const ExperimentConfig& config, double horizon) {
  return config.fit_window ? *config.fit_window
                           : FitWindow::from_fraction(horizon, config.fit_fraction);
}

ExperimentOutcome run_simulate(const ExperimentConfig& config, std::ostream& log) {
  ExperimentOutcome outcome;
  ArtifactWriter writer(config.output, outcome);
  const SimConfig cfg = config.simulation();
  log << "simulate: " << config.runs << " runs on " << config.workers << " workers\n";
  const EnsembleStats stats = run_ensemble(cfg, config.runs, config.workers);
  writer.write("stats.csv", [&](std::ostream& out) { write_stats_csv(out, stats); });
  std::vector<std::string> notes;
  const std::size_t exported = std::min<std::size_t>(config.export_trajectories, config.runs);
  for (std::size_t p = 0; p < exported; ++p) {
    try {
      const Trajectory traj = simulate_path(cfg, p);
      writer.write("trajectory_path" + std::to_string(p) + ".csv",
                   [&](std::ostream& out) { write_trajectory_csv(out, traj); });
    } catch (const NonFiniteState& e) {
      notes.push_back("path " + std::to_string(p) + " not exported: " + e.what());
    }
  }
  writer.write("report.txt", [&](std::ostream& out) {
    out << "experiment: simulate\n";
    write_summary(out, cfg, stats);
    for (const std::string& n : notes) out << "note: " << n << '\n';
  });
  writer.write("manifest.json", [&](std::ostream& out) { out << manifest(config).dump(2) << '\n'; });
  return outcome;
}

ExperimentOutcome run_sweep(const ExperimentConfig& config, std::ostream& log) {
  ExperimentOutcome outcome;
  ArtifactWriter writer(config.output, outcome);
  std::vector<double> values = config.sweep_a;
  if (values.empty()) values.push_back(config.simulation().step.a());

  struct Row {
    double a;
    double final_gap;
    double fitted;
    double predicted;
  };
  std::vector<Row> rows;
  std::ostringstream details;
  for (double a : values) {
    const SimConfig cfg = config.simulation(a);
    log << "sweep: a=" << format_double(a) << ", " << config.runs << " runs\n";
    const EnsembleStats stats = run_ensemble(cfg, config.runs, config.workers);
    writer.write("stats_a" + format_double(a) + ".csv",
                 [&](std::ostream& out) { write_stats_csv(out, stats); });
    const FitWindow window = fit_window_for(config, cfg.horizon);
    const auto last = static_cast<Eigen::Index>(stats.times.size() - 1);
    Row row{a, 0.0, std::numeric_limits<double>::infinity(), regime_table(a).exponent};
    details << "a = " << format_double(a) << '\n';
    for (std::size_t i = 0; i < stats.agents; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      row.final_gap = std::max(row.final_gap, stats.mean_gap(last, col));
      const RateFit fit = fit_rate(stats, i, a, window);
      row.fitted = std::min(row.fitted, fit.exponent);
      std::vector<double> gaps(stats.times.size());
      for (std::size_t s = 0; s < gaps.size(); ++s) {
        gaps[s] = stats.mean_gap(static_cast<Eigen::Index>(s), col);
      }
      write_report(details, fit, "agent " + std::to_string(i + 1));
      details << "  decreasing across window: "
              << (decreasing_trend(stats.times, gaps, window) ? "yes" : "no") << '\n';
    }
    rows.push_back(row);
  }
  writer.write("comparison.csv", [&](std::ostream& out) {
    out << "a,final_gap,fitted_exponent,predicted_exponent\n";
    for (const Row& r : rows) {
      out << format_double(r.a) << ',' << format_double(r.final_gap) << ','
          << format_double(r.fitted) << ',' << format_double(r.predicted) << '\n';
    }
  });
  writer.write("report.txt", [&](std::ostream& out) {
    out << "experiment: sweep\n" << details.str();
  });
  writer.write("manifest.json", [&](std::ostream& out) { out << manifest(config).dump(2) << '\n'; });
  return outcome;
}

ExperimentOutcome run_certify(const ExperimentConfig& config, std::ostream& log) {
  ExperimentOutcome outcome;
  ArtifactWriter writer(config.output, outcome);
  const SimConfig cfg = config.simulation();
  log << "certify-bounds: " << config.runs << " runs on " << config.workers << " workers\n";
  const EnsembleStats stats = run_ensemble(cfg, config.runs, config.workers);
  writer.write("stats.csv", [&](std::ostream& out) { write_stats_csv(out, stats); });

  std::vector<BoundReport> reports;
  std::vector<std::string> failures;
  std::optional<DecayConstants> decay;
  try {
    decay = fit_decay_constants(cfg.schedule, config.decay_horizon, config.decay_grid);
  } catch (const DecayNotObserved& e) {
    failures.push_back(std::string("decay fit: ") + e.what());
  }
  if (decay) {
    reports.push_back(decay_envelope_check(cfg.schedule, *decay, config.decay_horizon,
                                           config.decay_grid));
    const Box region{stats.state_min.array() - config.region_margin,
                     stats.state_max.array() + config.region_margin};
    const SmoothnessCertificate cert = certify_constants(cfg.objectives, region, 1000);
    reports.push_back(consensus_bound_check(stats, *decay, cfg, cert));
    reports.back().notes.push_back("M=" + format_double(cert.gradient_bound) +
                                   " K=" + format_double(cfg.noise.bound().value_or(0.0)));
  }
  for (BoundReport& r :
       integral_bound_reports(cfg.step.a(), decay ? std::optional(decay->lambda) : std::nullopt)) {
    reports.push_back(std::move(r));
  }
  write_bounds(writer, reports);
  bool pass = failures.empty();
  for (const BoundReport& r : reports) pass = pass && r.pass;
  writer.write("report.txt", [&](std::ostream& out) {
    out << "experiment: certify-bounds\n";
    write_summary(out, cfg, stats);
    for (const std::string& f : failures) out << "failure: " << f << '\n';
    for (const BoundReport& r : reports) {
      out << '\n';
      write_report(out, r);
    }
    out << "\noverall: " << (pass ? "PASS" : "FAIL") << '\n';
  });
  writer.write("manifest.json", [&](std::ostream& out) { out << manifest(config).dump(2) << '\n'; });
  outcome.exit_code = pass ? kExitSuccess : kExitCheckFailed;
  return outcome;
}

ExperimentOutcome run_consensus_only(const ExperimentConfig& config, std::ostream& log) {
  ExperimentOutcome outcome;
  ArtifactWriter writer(config.output, outcome);
  SimConfig cfg = config.simulation();
  const auto m = static_cast<Eigen::Index>(cfg.dim());
  std::vector<std::shared_ptr<const Objective>> flat;
  for (std::size_t i = 0; i < cfg.agents(); ++i) {
    flat.push_back(std::make_shared<QuadraticObjective>(Eigen::MatrixXd::Zero(m, m),
                                                        Eigen::VectorXd::Zero(m)));
  }
  cfg.objectives = ObjectiveSet(std::move(flat));
  cfg.noise = NoiseModel::zero(cfg.agents(), cfg.dim());
  log << "consensus-only: deterministic single path\n";
  const EnsembleStats stats = run_ensemble(cfg, 1, 1);
  writer.write("stats.csv", [&](std::ostream& out) { write_stats_csv(out, stats); });

  std::vector<BoundReport> reports;
  std::string failure;
  try {
    const DecayConstants decay =
        fit_decay_constants(cfg.schedule, config.decay_horizon, config.decay_grid);
    const SmoothnessCertificate none{0.0, 0.0, Box{stats.state_min, stats.state_max}};
    reports.push_back(consensus_bound_check(stats, decay, cfg, none));
  } catch (const DecayNotObserved& e) {
    failure = e.what();
  }
  write_bounds(writer, reports);
  const bool pass = failure.empty() && !reports.empty() && reports.front().pass;
  writer.write("report.txt", [&](std::ostream& out) {
    out << "experiment: consensus-only\n";
    if (!failure.empty()) out << "failure: " << failure << '\n';
    for (const BoundReport& r : reports) write_report(out, r);
  });
  writer.write("manifest.json", [&](std::ostream& out) { out << manifest(config).dump(2) << '\n'; });
  outcome.exit_code = pass ? kExitSuccess : kExitCheckFailed;
  return outcome;
}

ExperimentOutcome run_isometry(const ExperimentConfig& config, std::ostream& log) {
  ExperimentOutcome outcome;
  ArtifactWriter writer(config.output, outcome);
  const SimConfig cfg = config.simulation();
  log << "isometry: " << config.runs << " runs\n";
  const auto g = [&](double s) -> Eigen::VectorXd { return cfg.noise.evaluate(s).row(0).transpose(); };
  const IsometryResult r =
      ito_isometry_check(g, cfg.horizon, cfg.h, config.runs, config.seed, config.workers);
  writer.write("isometry.csv", [&](std::ostream& out) {
    out << "lhs,lhs_se,rhs,relative_error\n"
        << format_double(r.lhs) << ',' << format_double(r.lhs_standard_error) << ','
        << format_double(r.rhs) << ',' << format_double(r.relative_error) << '\n';
  });
  const bool pass = r.relative_error <= config.isometry_tolerance;
  writer.write("report.txt", [&](std::ostream& out) {
    out << "experiment: isometry\n"
        << "E||int g dB||^2 = " << brief(r.lhs) << " +- " << brief(r.lhs_standard_error) << '\n'
        << "int ||g||^2 ds = " << brief(r.rhs) << '\n'
        << "relative error = " << brief(r.relative_error) << " (tolerance "
        << brief(config.isometry_tolerance) << ")\n"
        << "verdict: " << (pass ? "PASS" : "FAIL") << '\n';
  });
  writer.write("manifest.json", [&](std::ostream& out) { out << manifest(config).dump(2) << '\n'; });
  outcome.exit_code = pass ? kExitSuccess : kExitCheckFailed;
  return outcome;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (std::size_t k = 0; k < kKindNames.size(); ++k) {
    if (kKindNames[k] == name) return static_cast<ExperimentKind>(k);
  }
  throw ConfigError("experiment.kind", "unknown experiment '" + std::string(name) + "'");
}

SimConfig ExperimentConfig::simulation(std::optional<double> a) const {
  json doc = document;
  return build_simulation(doc, a);
}

ExperimentConfig load_config(const json& input, const Overrides& overrides) {
  if (!input.is_object()) throw ConfigError("", "config must be a JSON object");
  json doc = input;
  doc.erase("manifest");
  apply_overrides(doc, overrides);

  ExperimentConfig config;
  {
    // Resolving the simulation fills in its defaults.
    const SimConfig sim = build_simulation(doc, std::nullopt);
    config.assumption = parse_assumption(doc, sim.schedule);
    config.seed = sim.seed;
  }

  json& ens = section(doc, "ensemble");
  config.runs = count(ens, "runs", "ensemble", 1);
  config.workers = count(ens, "workers", "ensemble", 1);
  if (config.runs < 1) throw ConfigError("ensemble.runs", "at least one run is required");
  if (config.workers < 1) throw ConfigError("ensemble.workers", "at least one worker is required");

  json& exp = section(doc, "experiment");
  config.kind = parse_experiment_kind(text(exp, "kind", "experiment", "simulate"));
  config.output = text(exp, "output", "experiment", "out");
  if (!exp.contains("sweep_a")) exp["sweep_a"] = json::array();
  config.sweep_a = numbers(exp["sweep_a"], "experiment.sweep_a");
  for (std::size_t k = 0; k < config.sweep_a.size(); ++k) {
    guarded(indexed("experiment.sweep_a", k), [&] { return regime_table(config.sweep_a[k]); });
  }
  config.fit_fraction = number(exp, "fit_fraction", "experiment", 0.2);
  if (!(config.fit_fraction >= 0.0 && config.fit_fraction < 1.0)) {
    throw ConfigError("experiment.fit_fraction", "fraction must lie in [0, 1)");
  }
  if (exp.contains("fit_window") && !exp["fit_window"].is_null()) {
    const std::vector<double> w = numbers(exp["fit_window"], "experiment.fit_window");
    if (w.size() != 2 || !(w[0] > 0.0 && w[1] > w[0])) {
      throw ConfigError("experiment.fit_window", "expected [start, end] with 0 < start < end");
    }
    config.fit_window = FitWindow{w[0], w[1]};
  }
  config.export_trajectories = count(exp, "export_trajectories", "experiment", 0);
  config.region_margin = number(exp, "region_margin", "experiment", 0.5);
  if (config.region_margin < 0.0) {
    throw ConfigError("experiment.region_margin", "margin must be nonnegative");
  }
  config.decay_horizon = number(exp, "decay_horizon", "experiment", 20.0);
  config.decay_grid = count(exp, "decay_grid", "experiment", 2001);
  if (!(config.decay_horizon > 0.0)) {
    throw ConfigError("experiment.decay_horizon", "horizon must be positive");
  }
  if (config.decay_grid < 3) throw ConfigError("experiment.decay_grid", "need at least 3 points");
  config.isometry_tolerance = number(exp, "isometry_tolerance", "experiment", 0.05);
  if (config.kind == ExperimentKind::kIsometry && config.runs < 2) {
    throw ConfigError("ensemble.runs", "the isometry check needs at least 2 runs");
  }

  config.document = std::move(doc);
  return config;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  return load_config(doc, overrides);
}

json six_agent_document() {
  const SimConfig reference = six_agent_config();
  return json{
      {"graph", {{"preset", "default"}, {"assumption", {{"delta", 0.01}, {"tc", 0.04}}}}},
      {"objectives",
       {{"kind", "scalar_pattern"},
        {"a", {0.3, 0.15, 0.15, 0.1, 0.2, 0.1}},
        {"b", {0.5, 0.8, 0.5, 0.8, 0.2, 0.2}}}},
      {"dynamics",
       {{"beta", 2.0},
        {"a", 1.0},
        {"h", 1e-3},
        {"horizon", 30.0},
        {"sample_stride", 100},
        {"noise", {{"kind", "sin_cos"}, {"scale", 1.0}}},
        {"noise_scale", 1.0},
        {"x0", matrix_json(reference.x0)}}},
      {"ensemble", {{"runs", 200}, {"workers", 1}, {"seed", 1}}},
      {"experiment",
       {{"kind", "simulate"},
        {"output", "out/six_agent"},
        {"sweep_a", {0.6, 0.75, 0.95}},
        {"fit_fraction", 0.2},
        {"export_trajectories", 1}}},
  };
}

std::uint64_t config_hash(const json& document) {
  const std::string canonical = document.dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

json manifest(const ExperimentConfig& config) {
  json out = config.document;
  std::array<char, 17> hex{};
  std::snprintf(hex.data(), hex.size(), "%016llx",
                static_cast<unsigned long long>(config_hash(config.document)));
  out["manifest"] = {{"config_hash", hex.data()},
                     {"seed", config.seed},
                     {"version", CTSGD_VERSION},
                     {"compiler", __VERSION__}};
  return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, std::ostream& log) {
  switch (config.kind) {
    case ExperimentKind::kSimulate:
      return run_simulate(config, log);
    case ExperimentKind::kSweep:
      return run_sweep(config, log);
    case ExperimentKind::kCertifyBounds:
      return run_certify(config, log);
    case ExperimentKind::kConsensusOnly:
      return run_consensus_only(config, log);
    case ExperimentKind::kIsometry:
      return run_isometry(config, log);
  }
  throw ConfigError("experiment.kind", "unhandled experiment kind");
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const DivergenceCeilingExceeded*>(&error)) return kExitDivergence;
  if (dynamic_cast<const NonFiniteState*>(&error)) return kExitDivergence;
  if (dynamic_cast<const MissingCertificate*>(&error) ||
      dynamic_cast<const NonPositiveGap*>(&error) ||
      dynamic_cast<const DecayNotObserved*>(&error) ||
      dynamic_cast<const UnboundedRegion*>(&error)) {
    return kExitCheckFailed;
  }
  return kExitConfigError;
}

}  // namespace ctsgd
