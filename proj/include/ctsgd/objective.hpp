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

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ctsgd {

/// Smooth convex local cost f_i : R^m -> R. Implementations must be pure;
/// they are called concurrently from ensemble workers.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual void gradient(const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::Ref<Eigen::VectorXd> out) const = 0;
  virtual Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// f(x) = 1/2 x'Px + q'x + c with P symmetric positive semidefinite.
class QuadraticObjective final : public Objective {
 public:
  /// Throws std::invalid_argument when P is not square and symmetric (1e-12),
  /// has an eigenvalue below -1e-10, or q has the wrong length.
  QuadraticObjective(Eigen::MatrixXd p, Eigen::VectorXd q, double c = 0.0);

  std::size_t dim() const override { return static_cast<std::size_t>(q_.size()); }
  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  void gradient(const Eigen::Ref<const Eigen::VectorXd>& x,
                Eigen::Ref<Eigen::VectorXd> out) const override;
  Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>&) const override { return p_; }
  using Objective::gradient;

  const Eigen::MatrixXd& p() const noexcept { return p_; }
  const Eigen::VectorXd& q() const noexcept { return q_; }
  double c() const noexcept { return c_; }

 private:
  Eigen::MatrixXd p_;
  Eigen::VectorXd q_;
  double c_;
};

struct MinimizerResult {
  Eigen::VectorXd x;
  /// False when the summed Hessian is singular; `x` is then the least-norm
  /// stationary point.
  bool unique = true;
};

/// Axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& lo,
                const Eigen::Ref<const Eigen::VectorXd>& hi) const;
};

struct SmoothnessCertificate {
  /// Bound on every ||grad f_i|| over the region.
  double gradient_bound = 0.0;
  /// Lipschitz constant of every grad f_i over the region.
  double lipschitz = 0.0;
  Box region;
};

/// n local objectives over a common dimension, with the minimizer of their sum
/// solved once at construction.
class ObjectiveSet {
 public:
  explicit ObjectiveSet(std::vector<std::shared_ptr<const Objective>> objectives);

  std::size_t agents() const noexcept { return objectives_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const Objective& operator[](std::size_t i) const { return *objectives_[i]; }
  const std::vector<std::shared_ptr<const Objective>>& objectives() const noexcept {
    return objectives_;
  }

  /// f(x) = sum_i f_i(x).
  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const MinimizerResult& minimizer() const noexcept { return minimizer_; }
  double optimal_value() const noexcept { return optimal_value_; }

  /// True when every objective is a QuadraticObjective.
  bool all_quadratic() const;

 private:
  std::vector<std::shared_ptr<const Objective>> objectives_;
  std::size_t dim_ = 0;
  MinimizerResult minimizer_;
  double optimal_value_ = 0.0;
};

/// grad f_i(x); throws DimensionMismatch.
Eigen::VectorXd grad(const Objective& objective, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Solves sum_i grad f_i(x) = 0. Quadratic sets use a rank-revealing solve;
/// other sets use damped Newton iterations from the origin.
MinimizerResult global_minimizer(const ObjectiveSet& set);

/// Gradient bound and Lipschitz constant over `region`, each multiplied by
/// 1.01. Quadratics are exact (corner maximum of ||Px + q||, spectral norm of
/// P); other objectives are sampled on a grid of about `samples` points.
SmoothnessCertificate certify_constants(const ObjectiveSet& set, const Box& region,
                                        std::size_t samples);

/// f(x) - f(x*), with |value| <= 1e-14 reported as exactly 0.
double optimality_gap(const ObjectiveSet& set, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Six two-dimensional costs f_i(x) = a_i x1^2 - b_i x1 + (i/6) x2^2 - ((i+1)/2) x2.
ObjectiveSet six_agent_objectives();

/// Same family with caller-supplied a_i, b_i (agent i is 1-based in the
/// i-indexed terms).
ObjectiveSet scalar_pattern_objectives(std::span<const double> a, std::span<const double> b);

}  // namespace ctsgd
