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

#include "ctsgd/matrix_exponential.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace ctsgd {
namespace {

using Eigen::MatrixXd;

// Padé coefficients b_0..b_m for m = 3, 5, 7, 9, 13.
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                           302702400.0,   30270240.0,   2162160.0,
                                           110880.0,      3960.0,       90.0,
                                           1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// Largest 1-norm for which each degree meets unit roundoff in double precision.
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
MatrixXd low_degree_pade(const MatrixXd& a, const std::array<double, N>& b) {
  const auto n = a.rows();
  const MatrixXd identity = MatrixXd::Identity(n, n);
  const MatrixXd a2 = a * a;
  MatrixXd even = b[0] * identity;
  MatrixXd odd = b[1] * identity;
  MatrixXd power = identity;
  // N = m + 1 with m odd, so k + 1 <= m on every pass.
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    even += b[k] * power;
    odd += b[k + 1] * power;
  }
  const MatrixXd u = a * odd;
  return (even - u).partialPivLu().solve(even + u);
}

MatrixXd pade13(const MatrixXd& a) {
  const auto& b = kPade13;
  const auto n = a.rows();
  const MatrixXd identity = MatrixXd::Identity(n, n);
  const MatrixXd a2 = a * a;
  const MatrixXd a4 = a2 * a2;
  const MatrixXd a6 = a4 * a2;
  const MatrixXd u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
  const MatrixXd u =
      a * (u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * identity);
  const MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                     b[2] * a2 + b[0] * identity;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

MatrixXd expm(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  if (a.size() == 0) return a;
  if (!a.allFinite()) throw std::invalid_argument("expm: matrix has non-finite entries");

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 <= kTheta3) return low_degree_pade(a, kPade3);
  if (norm1 <= kTheta5) return low_degree_pade(a, kPade5);
  if (norm1 <= kTheta7) return low_degree_pade(a, kPade7);
  if (norm1 <= kTheta9) return low_degree_pade(a, kPade9);

  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
  MatrixXd result = pade13(std::ldexp(1.0, -squarings) * a);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

}  // namespace ctsgd
