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

#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctsgd/matrix_exponential.hpp"

using ctsgd::expm;
using Eigen::MatrixXd;

TEST_SUITE("matrix_exponential") {
  TEST_CASE("zero matrix") {
    CHECK((expm(MatrixXd::Zero(5, 5)) - MatrixXd::Identity(5, 5)).norm() == 0.0);
  }

  TEST_CASE("diagonal matrix") {
    Eigen::VectorXd d(4);
    d << -3.0, 0.5, 2.0, -40.0;
    const MatrixXd e = expm(d.asDiagonal().toDenseMatrix());
    for (int i = 0; i < 4; ++i) CHECK(e(i, i) == doctest::Approx(std::exp(d(i))).epsilon(1e-13));
  }

  TEST_CASE("nilpotent matrix has a finite series") {
    MatrixXd n = MatrixXd::Zero(3, 3);
    n(0, 1) = 2.0;
    n(1, 2) = 3.0;
    MatrixXd expected = MatrixXd::Identity(3, 3) + n + 0.5 * n * n;
    CHECK((expm(n) - expected).norm() <= 1e-14);
  }

  TEST_CASE("pair Laplacian") {
    MatrixXd l(2, 2);
    l << 1, -1, -1, 1;
    for (double tau : {1e-4, 0.3, 7.0}) {
      const double e = std::exp(-2.0 * tau);
      MatrixXd expected(2, 2);
      expected << (1 + e) / 2, (1 - e) / 2, (1 - e) / 2, (1 + e) / 2;
      CHECK((expm(-tau * l) - expected).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }

  TEST_CASE("agrees with Eigen's implementation across norms") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    for (double scale : {1e-4, 1e-2, 0.1, 0.5, 1.0, 3.0, 10.0, 60.0}) {
      for (int n : {1, 2, 6, 12}) {
        MatrixXd a(n, n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
        }
        a *= scale / a.norm();
        const MatrixXd ours = expm(a);
        const MatrixXd reference = a.exp();
        CHECK((ours - reference).norm() <= 1e-12 * std::max(1.0, reference.norm()));
      }
    }
  }

  TEST_CASE("rejects non-square input") { CHECK_THROWS(expm(MatrixXd::Zero(2, 3))); }
}
