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

// Python bindings. Config documents cross the boundary as JSON text; the
// package's __init__ converts from and to dicts.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctsgd/analysis.hpp"
#include "ctsgd/dynamics.hpp"
#include "ctsgd/ensemble.hpp"
#include "ctsgd/errors.hpp"
#include "ctsgd/experiment.hpp"
#include "ctsgd/graph.hpp"
#include "ctsgd/objective.hpp"

namespace py = pybind11;
using namespace ctsgd;

namespace {

ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  return load_config(doc);
}

// (samples, agents, dim) array from a list of state matrices.
py::array_t<double> stack(const std::vector<StateMatrix>& states) {
  const std::size_t s = states.size();
  const std::size_t n = s ? static_cast<std::size_t>(states[0].rows()) : 0;
  const std::size_t m = s ? static_cast<std::size_t>(states[0].cols()) : 0;
  py::array_t<double> out({s, n, m});
  auto view = out.mutable_unchecked<3>();
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < m; ++d) {
        view(k, i, d) = states[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
      }
    }
  }
  return out;
}

py::dict stats_dict(const EnsembleStats& st) {
  py::dict d;
  d["times"] = st.times;
  d["runs"] = st.runs;
  d["diverged_paths"] = st.diverged_paths;
  d["mean_state"] = stack(st.mean_state);
  d["se_state"] = stack(st.se_state);
  d["mean_gap"] = st.mean_gap;
  d["se_gap"] = st.se_gap;
  d["mean_consensus"] = st.mean_consensus;
  d["se_consensus"] = st.se_consensus;
  d["state_min"] = st.state_min;
  d["state_max"] = st.state_max;
  return d;
}

py::dict report_dict(const BoundReport& r) {
  py::list points;
  for (const BoundReport::Point& p : r.points) {
    py::dict q;
    q["label"] = p.label;
    q["at"] = p.at;
    q["measured"] = p.measured;
    q["bound"] = p.bound;
    q["slack"] = p.slack;
    q["violation"] = p.violation;
    points.append(q);
  }
  py::dict d;
  d["claim"] = r.claim;
  d["points"] = points;
  d["skipped"] = r.skipped;
  d["notes"] = r.notes;
  d["max_violation"] = r.max_violation;
  d["passed"] = r.pass;
  return d;
}

const char* model_name(RateModel m) {
  switch (m) {
    case RateModel::kPower:
      return "power";
    case RateModel::kLogPower:
      return "log-power";
    case RateModel::kInverseLog:
      return "inverse-log";
  }
  return "unknown";
}

GraphSchedule schedule_from(const std::vector<std::pair<double, Eigen::MatrixXd>>& segments,
                            bool periodic) {
  std::vector<Segment> list;
  for (const auto& [duration, weights] : segments) list.push_back({duration, WeightedDigraph(weights)});
  return GraphSchedule(std::move(list), periodic);
}

}  // namespace

PYBIND11_MODULE(_ctsgd, m) {
  m.doc() = "Distributed stochastic gradient flow simulator (native core)";
  m.attr("__version__") = CTSGD_VERSION;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<OutOfRange>(m, "OutOfRange", base.ptr());
  py::register_exception<DecayNotObserved>(m, "DecayNotObserved", base.ptr());
  py::register_exception<NonPositiveGap>(m, "NonPositiveGap", base.ptr());
  py::register_exception<MissingCertificate>(m, "MissingCertificate", base.ptr());
  py::register_exception<DivergenceCeilingExceeded>(m, "DivergenceCeilingExceeded", base.ptr());
  py::register_exception<NonFiniteState>(m, "NonFiniteState", base.ptr());

  py::class_<GraphSchedule>(m, "GraphSchedule")
      .def(py::init(&schedule_from), py::arg("segments"), py::arg("periodic") = true,
           "segments: list of (duration, weights) with weights[i, j] the weight of edge j -> i")
      .def_property_readonly("agents", &GraphSchedule::agents)
      .def_property_readonly("period", &GraphSchedule::period)
      .def_property_readonly("periodic", &GraphSchedule::periodic)
      .def("balanced", &GraphSchedule::balanced, py::arg("tol") = kBalanceTolerance)
      .def("weights_at", [](const GraphSchedule& s, double t) { return s.graph_at(t).weights(); })
      .def("transition_matrix",
           [](const GraphSchedule& s, double from, double to) { return transition_matrix(s, from, to); },
           py::arg("start"), py::arg("end"))
      .def("consensus_deviation",
           [](const GraphSchedule& s, const std::vector<double>& t) { return consensus_deviation(s, t); })
      .def("fit_decay",
           [](const GraphSchedule& s, double horizon, std::size_t grid) {
             const DecayConstants d = fit_decay_constants(s, horizon, grid);
             return py::make_tuple(d.c, d.lambda);
           },
           py::arg("horizon") = 20.0, py::arg("grid") = 2001, "Returns (C, lambda).")
      .def("delta_tc_connected",
           [](const GraphSchedule& s, double delta, double tc) {
             return check_delta_tc_connectivity(s, delta, tc).strongly_connected;
           },
           py::arg("delta"), py::arg("tc"));

  m.def("default_schedule", &default_schedule);
  m.def("laplacian", [](const Eigen::MatrixXd& w) { return laplacian(WeightedDigraph(w)); },
        py::arg("weights"));

  m.def("step_size", [](double beta, double a, double t) { return StepSchedule(beta, a).eta(t); },
        py::arg("beta"), py::arg("a"), py::arg("t"));
  m.def("phi", [](double beta, double a, double t) { return StepSchedule(beta, a).phi(t); },
        py::arg("beta"), py::arg("a"), py::arg("t"));

  m.def("_resolve_config", [](const std::string& text) { return parse_config(text).document.dump(); });
  m.def("_manifest", [](const std::string& text) { return manifest(parse_config(text)).dump(); });
  m.def("_six_agent_document", [] { return six_agent_document().dump(); });
  m.def("_minimizer", [](const std::string& text) {
    return Eigen::VectorXd(parse_config(text).simulation().objectives.minimizer().x);
  });

  m.def("_simulate_path",
        [](const std::string& text, std::uint64_t path) {
          const ExperimentConfig config = parse_config(text);
          const SimConfig cfg = config.simulation();
          Trajectory t;
          {
            py::gil_scoped_release release;
            t = simulate_path(cfg, path);
          }
          return py::make_tuple(t.times, stack(t.states));
        });
  m.def("_run_ensemble",
        [](const std::string& text) {
          const ExperimentConfig config = parse_config(text);
          const SimConfig cfg = config.simulation();
          EnsembleStats st;
          {
            py::gil_scoped_release release;
            st = run_ensemble(cfg, config.runs, config.workers);
          }
          return stats_dict(st);
        });
  m.def("_run_experiment",
        [](const std::string& text) {
          const ExperimentConfig config = parse_config(text);
          std::ostringstream log;
          ExperimentOutcome outcome;
          {
            py::gil_scoped_release release;
            outcome = run_experiment(config, log);
          }
          return py::make_tuple(outcome.exit_code, outcome.files, config.output.string(), log.str());
        });

  m.def("ito_isometry_check",
        [](double horizon, double h, std::size_t runs, std::uint64_t seed, std::size_t workers,
           double scale) {
          const auto g = [scale](double s) {
            Eigen::VectorXd v(2);
            v << scale * std::sin(s), scale * std::cos(s);
            return v;
          };
          IsometryResult r;
          {
            py::gil_scoped_release release;
            r = ito_isometry_check(g, horizon, h, runs, seed, workers);
          }
          py::dict d;
          d["lhs"] = r.lhs;
          d["lhs_se"] = r.lhs_standard_error;
          d["rhs"] = r.rhs;
          d["relative_error"] = r.relative_error;
          return d;
        },
        py::arg("horizon") = 5.0, py::arg("h") = 1e-3, py::arg("runs") = 10000,
        py::arg("seed") = 0, py::arg("workers") = 1, py::arg("scale") = 1.0,
        "Isometry check for the intensity scale * [sin s, cos s].");

  m.def("integral_bound_check",
        [](double a, double lambda, const std::vector<double>& grid) {
          return report_dict(integral_bound_check(a, lambda, grid));
        },
        py::arg("a"), py::arg("lam"), py::arg("grid"));
  m.def("overflow_limit", &overflow_limit, py::arg("lam"));
  m.def("discounted_integral", &discounted_integral, py::arg("a"), py::arg("lam"), py::arg("t"));

  m.def("regime",
        [](double a) {
          const RateRegime r = regime_table(a);
          py::dict d;
          d["model"] = model_name(r.model);
          d["exponent"] = r.exponent;
          d["description"] = r.description;
          return d;
        },
        py::arg("a"));
  m.def("fit_rate",
        [](const std::vector<double>& times, const std::vector<double>& gaps, double a,
           double start, double end) {
          const RateFit f = fit_rate(times, gaps, a, FitWindow{start, end});
          py::dict d;
          d["exponent"] = f.exponent;
          d["predicted_exponent"] = f.predicted.exponent;
          d["model"] = model_name(f.predicted.model);
          d["residual"] = f.residual;
          d["curvature"] = f.curvature;
          d["curved"] = f.curved;
          d["points"] = f.points;
          d["at_least_as_fast"] = f.at_least_as_fast();
          d["warnings"] = f.warnings;
          return d;
        },
        py::arg("times"), py::arg("gaps"), py::arg("a"), py::arg("start"), py::arg("end"));
}
