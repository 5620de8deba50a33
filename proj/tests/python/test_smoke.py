# Copyright 2026 The ctsgd Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math
import os

import numpy as np
import pytest

import ctsgd


def small_config(tmp_path=None, **dynamics):
    cfg = ctsgd.example_config()
    cfg["dynamics"].update({"horizon": 2.0, **dynamics})
    cfg["ensemble"].update({"runs": 8, "workers": 2})
    if tmp_path is not None:
        cfg["experiment"]["output"] = str(tmp_path)
    return cfg


def test_version():
    assert ctsgd.__version__.count(".") == 2


def test_example_config_resolves():
    cfg = ctsgd.load_config(ctsgd.example_config())
    assert cfg["dynamics"]["h"] == 1e-3
    np.testing.assert_allclose(ctsgd.minimizer(cfg), [1.5, 27 / 14], atol=1e-12)


def test_config_file_in_repo_loads():
    root = os.environ.get("CTSGD_SOURCE_DIR", os.path.join(os.path.dirname(__file__), "..", ".."))
    cfg = ctsgd.load_config(os.path.join(root, "configs", "six_agent.json"))
    assert cfg["ensemble"]["runs"] == 200


def test_bad_exponent_is_a_config_error():
    cfg = ctsgd.example_config()
    cfg["dynamics"]["a"] = 0.5
    with pytest.raises(ctsgd.ConfigError):
        ctsgd.load_config(cfg)


def test_graph_tools():
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(ctsgd.laplacian(w), [[1.0, -1.0], [-1.0, 1.0]])
    pair = ctsgd.GraphSchedule([(0.1, w)])
    phi = pair.transition_matrix(0.0, 1.0)
    np.testing.assert_allclose(phi.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(phi[0, 1], (1 - math.exp(-2.0)) / 2, rtol=1e-12)
    c, lam = pair.fit_decay(8.0, 401)
    assert abs(lam / math.exp(-2.0) - 1) < 0.02

    s = ctsgd.default_schedule()
    assert s.agents == 6 and s.balanced()
    assert s.delta_tc_connected(0.01, 0.04)


def test_step_size():
    assert ctsgd.step_size(2.0, 1.0, 1.0) == pytest.approx(1.0)
    assert ctsgd.phi(1.0, 0.75, 15.0) == pytest.approx(4.0)


def test_path_shapes_and_determinism():
    cfg = small_config()
    t1, x1 = ctsgd.simulate_path(cfg, 3)
    t2, x2 = ctsgd.simulate_path(cfg, 3)
    assert x1.shape == (len(t1), 6, 2)
    np.testing.assert_array_equal(x1, x2)


def test_ensemble_is_independent_of_worker_count():
    a = ctsgd.run_ensemble(small_config())
    cfg = small_config()
    cfg["ensemble"]["workers"] = 1
    b = ctsgd.run_ensemble(cfg)
    assert a["runs"] == 8
    np.testing.assert_array_equal(a["mean_gap"], b["mean_gap"])
    np.testing.assert_array_equal(a["mean_state"], b["mean_state"])


def test_run_experiment_writes_artifacts(tmp_path):
    out = ctsgd.run_experiment(small_config(tmp_path))
    assert out["exit_code"] == 0
    names = {os.path.basename(f) for f in out["files"]}
    assert {"stats.csv", "report.txt", "manifest.json"} <= names
    header = (tmp_path / "stats.csv").read_text().splitlines()[0]
    assert header.startswith("t,agent,mean_coord_1")


def test_analysis_helpers():
    report = ctsgd.integral_bound_check(1.0, 0.5, [1.0, 5.0, 10.0])
    assert report["passed"] and len(report["points"]) == 3
    assert ctsgd.discounted_integral(1.0, 0.5, 2 * ctsgd.overflow_limit(0.5)) is None
    assert ctsgd.regime(0.75)["exponent"] == pytest.approx(0.25)
    with pytest.raises(ctsgd.OutOfRange):
        ctsgd.regime(0.4)
    t = np.linspace(1.0, 100.0, 200)
    fit = ctsgd.fit_rate(t, 3.0 * t**-0.8, 0.9, 10.0, 100.0)
    assert fit["exponent"] == pytest.approx(0.8, abs=1e-6)


def test_isometry_small():
    r = ctsgd.ito_isometry_check(horizon=1.0, runs=2000, seed=4, workers=2)
    assert r["relative_error"] < 0.1
