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

#include "ctsgd/export.hpp"

#include <ostream>

#include "ctsgd/format.hpp"

namespace ctsgd {

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,agent";
  const Eigen::Index m = trajectory.states.empty() ? 0 : trajectory.states.front().cols();
  for (Eigen::Index d = 0; d < m; ++d) out << ",coord_" << d + 1;
  out << '\n';
  for (std::size_t s = 0; s < trajectory.times.size(); ++s) {
    const StateMatrix& x = trajectory.states[s];
    const std::string t = format_double(trajectory.times[s]);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out << t << ',' << i + 1;
      for (Eigen::Index d = 0; d < m; ++d) out << ',' << format_double(x(i, d));
      out << '\n';
    }
  }
}

void write_stats_csv(std::ostream& out, const EnsembleStats& stats) {
  const auto m = static_cast<Eigen::Index>(stats.dim);
  out << "t,agent";
  for (Eigen::Index d = 0; d < m; ++d) out << ",mean_coord_" << d + 1;
  for (Eigen::Index d = 0; d < m; ++d) out << ",se_coord_" << d + 1;
  out << ",mean_gap,se_gap,mean_consensus_err\n";
  for (std::size_t s = 0; s < stats.times.size(); ++s) {
    const std::string t = format_double(stats.times[s]);
    const auto row = static_cast<Eigen::Index>(s);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(stats.agents); ++i) {
      out << t << ',' << i + 1;
      for (Eigen::Index d = 0; d < m; ++d) out << ',' << format_double(stats.mean_state[s](i, d));
      for (Eigen::Index d = 0; d < m; ++d) out << ',' << format_double(stats.se_state[s](i, d));
      out << ',' << format_double(stats.mean_gap(row, i)) << ','
          << format_double(stats.se_gap(row, i)) << ','
          << format_double(stats.mean_consensus(row, i)) << '\n';
    }
  }
}

}  // namespace ctsgd
