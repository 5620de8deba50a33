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

"""Distributed stochastic gradient flow simulator.

Configs are plain dicts using the same schema as the ``ctsgd`` command line
tool; :func:`example_config` returns the six-agent example.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping

from ._ctsgd import (
    ConfigError,
    DecayNotObserved,
    DivergenceCeilingExceeded,
    Error,
    GraphSchedule,
    MissingCertificate,
    NonFiniteState,
    NonPositiveGap,
    OutOfRange,
    __version__,
    _manifest,
    _minimizer,
    _resolve_config,
    _run_ensemble,
    _run_experiment,
    _six_agent_document,
    _simulate_path,
    default_schedule,
    discounted_integral,
    fit_rate,
    integral_bound_check,
    ito_isometry_check,
    laplacian,
    overflow_limit,
    phi,
    regime,
    step_size,
)

__all__ = [
    "ConfigError",
    "DecayNotObserved",
    "DivergenceCeilingExceeded",
    "Error",
    "GraphSchedule",
    "MissingCertificate",
    "NonFiniteState",
    "NonPositiveGap",
    "OutOfRange",
    "__version__",
    "default_schedule",
    "discounted_integral",
    "example_config",
    "fit_rate",
    "integral_bound_check",
    "ito_isometry_check",
    "laplacian",
    "load_config",
    "manifest",
    "minimizer",
    "overflow_limit",
    "phi",
    "regime",
    "run_ensemble",
    "run_experiment",
    "simulate_path",
    "step_size",
]

Config = Mapping[str, Any]


def _text(config: Config | str | os.PathLike) -> str:
    if isinstance(config, Mapping):
        return json.dumps(config)
    with open(config, encoding="utf-8") as fh:
        return fh.read()


def example_config() -> dict:
    """Six-agent example with every field spelled out."""
    return json.loads(_six_agent_document())


def load_config(config: Config | str | os.PathLike) -> dict:
    """Validates a config (dict or path) and returns it with defaults filled in."""
    return json.loads(_resolve_config(_text(config)))


def manifest(config: Config | str | os.PathLike) -> dict:
    """Resolved config plus the reproducibility manifest entry."""
    return json.loads(_manifest(_text(config)))


def minimizer(config: Config | str | os.PathLike):
    """Minimizer of the summed objectives."""
    return _minimizer(_text(config))


def simulate_path(config: Config | str | os.PathLike, path: int = 0):
    """One sample path: (times, states) with states shaped (samples, agents, dim)."""
    return _simulate_path(_text(config), path)


def run_ensemble(config: Config | str | os.PathLike) -> dict:
    """Monte Carlo statistics over ``ensemble.runs`` paths as numpy arrays."""
    return _run_ensemble(_text(config))


def run_experiment(config: Config | str | os.PathLike) -> dict:
    """Runs ``experiment.kind`` and writes its artifacts to ``experiment.output``."""
    code, files, output, log = _run_experiment(_text(config))
    return {
        "exit_code": code,
        "files": [os.path.join(output, f) for f in files],
        "log": log,
    }
