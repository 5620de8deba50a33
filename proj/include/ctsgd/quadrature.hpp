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

#include <functional>

namespace ctsgd {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = false;
};

/// Globally adaptive 15-point Gauss-Kronrod integration of f over [a, b]:
/// the interval with the largest error estimate is bisected until the total
/// error is below relative_tolerance times the integral of abs(f).
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double relative_tolerance = 1e-8);

}  // namespace ctsgd
