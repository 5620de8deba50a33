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

#include "ctsgd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ctsgd {

namespace {

constexpr std::size_t kMaxIntervals = 4096;

struct Piece {
  double lo = 0.0;
  double hi = 0.0;
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;

  friend bool operator<(const Piece& x, const Piece& y) { return x.error < y.error; }
};

// One non-adaptive Gauss-Kronrod rule, applied on [0, 1] after an affine
// change of variable so the returned error is in the units of the integral.
Piece rule(const std::function<double(double)>& f, double lo, double hi) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  const double width = hi - lo;
  Piece p{lo, hi};
  p.value = Rule::integrate([&](double u) { return width * f(lo + width * u); }, 0.0, 1.0, 0, 0.0,
                            &p.error, &p.l1);
  return p;
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double relative_tolerance) {
  if (!(b >= a)) throw std::invalid_argument("integration bounds are reversed");
  if (a == b) return {0.0, 0.0, true};

  std::priority_queue<Piece> pieces;
  pieces.push(rule(f, a, b));
  double value = pieces.top().value;
  double error = pieces.top().error;
  double l1 = pieces.top().l1;
  auto done = [&] { return error <= relative_tolerance * l1; };
  while (!done() && pieces.size() < kMaxIntervals && std::isfinite(value)) {
    const Piece worst = pieces.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) break;
    pieces.pop();
    const Piece left = rule(f, worst.lo, mid);
    const Piece right = rule(f, mid, worst.hi);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    pieces.push(left);
    pieces.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  QuadratureResult out;
  std::vector<double> values;
  error = 0.0;
  l1 = 0.0;
  while (!pieces.empty()) {
    values.push_back(pieces.top().value);
    error += pieces.top().error;
    l1 += pieces.top().l1;
    pieces.pop();
  }
  std::sort(values.begin(), values.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
  for (double v : values) out.value += v;
  out.error_estimate = error;
  out.converged = std::isfinite(out.value) && done();
  return out;
}

}  // namespace ctsgd
