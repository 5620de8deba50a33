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

#pragma once

#include <iosfwd>

#include "ctsgd/dynamics.hpp"
#include "ctsgd/ensemble.hpp"

namespace ctsgd {

// Agents are numbered from 1 in every exported file.

/// Columns: t, agent, coord_1..coord_m.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

/// Columns: t, agent, mean_coord_1..m, se_coord_1..m, mean_gap, se_gap,
/// mean_consensus_err.
void write_stats_csv(std::ostream& out, const EnsembleStats& stats);

}  // namespace ctsgd
