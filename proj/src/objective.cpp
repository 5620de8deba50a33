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

#include "ctsgd/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "ctsgd/errors.hpp"

namespace ctsgd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kSafetyFactor = 1.01;

double spectral_norm(const MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(0.5 * (symmetric + symmetric.transpose()),
                                                 Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

void require_dim(std::size_t expected, Eigen::Index got) {
  if (static_cast<std::size_t>(got) != expected) {
    throw DimensionMismatch("expected a vector of length " + std::to_string(expected) + ", got " +
                            std::to_string(got));
  }
}

}  // namespace

VectorXd Objective::gradient(const Eigen::Ref<const VectorXd>& x) const {
  VectorXd out(static_cast<Eigen::Index>(dim()));
  gradient(x, out);
  return out;
}

QuadraticObjective::QuadraticObjective(MatrixXd p, VectorXd q, double c)
    : p_(std::move(p)), q_(std::move(q)), c_(c) {
  if (p_.rows() != p_.cols() || p_.rows() != q_.size()) {
    throw std::invalid_argument("quadratic objective: P must be m x m and q of length m");
  }
  if (!p_.allFinite() || !q_.allFinite() || !std::isfinite(c_)) {
    throw std::invalid_argument("quadratic objective: coefficients must be finite");
  }
  if (p_.size() > 0 && (p_ - p_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("quadratic objective: P must be symmetric");
  }
  if (p_.size() > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(p_, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-10) {
      throw std::invalid_argument("quadratic objective: P must be positive semidefinite");
    }
  }
}

double QuadraticObjective::value(const Eigen::Ref<const VectorXd>& x) const {
  require_dim(dim(), x.size());
  return 0.5 * x.dot(p_ * x) + q_.dot(x) + c_;
}

void QuadraticObjective::gradient(const Eigen::Ref<const VectorXd>& x,
                                  Eigen::Ref<VectorXd> out) const {
  require_dim(dim(), x.size());
  out.noalias() = p_ * x;
  out += q_;
}

bool Box::contains(const Eigen::Ref<const VectorXd>& lo, const Eigen::Ref<const VectorXd>& hi) const {
  if (lo.size() != lower.size() || hi.size() != upper.size()) return false;
  return (lo.array() >= lower.array()).all() && (hi.array() <= upper.array()).all();
}

ObjectiveSet::ObjectiveSet(std::vector<std::shared_ptr<const Objective>> objectives)
    : objectives_(std::move(objectives)) {
  if (objectives_.empty()) throw std::invalid_argument("objective set is empty");
  for (const auto& o : objectives_) {
    if (!o) throw std::invalid_argument("objective set contains a null objective");
  }
  dim_ = objectives_.front()->dim();
  for (std::size_t i = 1; i < objectives_.size(); ++i) {
    if (objectives_[i]->dim() != dim_) {
      throw DimensionMismatch("objective " + std::to_string(i) + " has dimension " +
                              std::to_string(objectives_[i]->dim()) + ", expected " +
                              std::to_string(dim_));
    }
  }
  minimizer_ = global_minimizer(*this);
  optimal_value_ = value(minimizer_.x);
}

double ObjectiveSet::value(const Eigen::Ref<const VectorXd>& x) const {
  require_dim(dim_, x.size());
  double total = 0.0;
  for (const auto& o : objectives_) total += o->value(x);
  return total;
}

VectorXd ObjectiveSet::gradient(const Eigen::Ref<const VectorXd>& x) const {
  require_dim(dim_, x.size());
  VectorXd total = VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  VectorXd g(static_cast<Eigen::Index>(dim_));
  for (const auto& o : objectives_) {
    o->gradient(x, g);
    total += g;
  }
  return total;
}

bool ObjectiveSet::all_quadratic() const {
  return std::all_of(objectives_.begin(), objectives_.end(), [](const auto& o) {
    return dynamic_cast<const QuadraticObjective*>(o.get()) != nullptr;
  });
}

VectorXd grad(const Objective& objective, const Eigen::Ref<const VectorXd>& x) {
  require_dim(objective.dim(), x.size());
  return objective.gradient(x);
}

MinimizerResult global_minimizer(const ObjectiveSet& set) {
  const auto m = static_cast<Eigen::Index>(set.dim());
  MinimizerResult result;

  if (set.all_quadratic()) {
    MatrixXd p = MatrixXd::Zero(m, m);
    VectorXd q = VectorXd::Zero(m);
    for (const auto& o : set.objectives()) {
      const auto& quad = static_cast<const QuadraticObjective&>(*o);
      p += quad.p();
      q += quad.q();
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(p);
    cod.setThreshold(1e-12);
    result.x = cod.solve(-q);
    result.unique = cod.rank() == m;
    return result;
  }

  // Damped Newton on the summed objective.
  VectorXd x = VectorXd::Zero(m);
  MatrixXd hessian = MatrixXd::Zero(m, m);
  for (int iter = 0; iter < 200; ++iter) {
    const VectorXd g = set.gradient(x);
    hessian.setZero();
    for (const auto& o : set.objectives()) hessian += o->hessian(x);
    if (g.norm() <= 1e-13 * (1.0 + std::abs(set.value(x)))) break;
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(hessian);
    const VectorXd step = cod.solve(-g);
    const double f0 = set.value(x);
    double alpha = 1.0;
    while (alpha > 1e-12 && set.value(x + alpha * step) > f0 + 1e-4 * alpha * g.dot(step)) {
      alpha *= 0.5;
    }
    x += alpha * step;
    if ((alpha * step).norm() <= 1e-15 * (1.0 + x.norm())) break;
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(hessian);
  cod.setThreshold(1e-12);
  result.x = x;
  result.unique = cod.rank() == m;
  return result;
}

SmoothnessCertificate certify_constants(const ObjectiveSet& set, const Box& region,
                                        std::size_t samples) {
  const auto m = static_cast<Eigen::Index>(set.dim());
  if (region.lower.size() != m || region.upper.size() != m) {
    throw DimensionMismatch("certificate region has the wrong dimension");
  }
  if (!region.lower.allFinite() || !region.upper.allFinite() ||
      (region.lower.array() > region.upper.array()).any()) {
    throw UnboundedRegion("certificate region must be a bounded, nonempty box");
  }
  if (samples < 100) throw std::invalid_argument("certify_constants needs at least 100 samples");

  double gradient_bound = 0.0;
  double lipschitz = 0.0;
  VectorXd g(m);

  if (set.all_quadratic()) {
    // ||Px + q|| is convex, so its maximum over the box sits at a corner.
    if (m >= 31) throw std::invalid_argument("corner enumeration limited to dimension 30");
    const std::uint64_t corners = std::uint64_t{1} << m;
    VectorXd corner(m);
    for (const auto& o : set.objectives()) {
      const auto& quad = static_cast<const QuadraticObjective&>(*o);
      lipschitz = std::max(lipschitz, spectral_norm(quad.p()));
      for (std::uint64_t mask = 0; mask < corners; ++mask) {
        for (Eigen::Index d = 0; d < m; ++d) {
          corner(d) = ((mask >> d) & 1U) ? region.upper(d) : region.lower(d);
        }
        quad.gradient(corner, g);
        gradient_bound = std::max(gradient_bound, g.norm());
      }
    }
  } else {
    const auto per_axis = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(samples),
                                                       1.0 / static_cast<double>(m)))));
    std::vector<std::size_t> index(static_cast<std::size_t>(m), 0);
    VectorXd point(m);
    bool done = false;
    while (!done) {
      for (Eigen::Index d = 0; d < m; ++d) {
        const double frac =
            static_cast<double>(index[static_cast<std::size_t>(d)]) / static_cast<double>(per_axis - 1);
        point(d) = region.lower(d) + frac * (region.upper(d) - region.lower(d));
      }
      for (const auto& o : set.objectives()) {
        o->gradient(point, g);
        gradient_bound = std::max(gradient_bound, g.norm());
        lipschitz = std::max(lipschitz, spectral_norm(o->hessian(point)));
      }
      done = true;
      for (std::size_t d = 0; d < index.size(); ++d) {
        if (++index[d] < per_axis) {
          done = false;
          break;
        }
        index[d] = 0;
      }
    }
  }

  return {kSafetyFactor * gradient_bound, kSafetyFactor * lipschitz, region};
}

double optimality_gap(const ObjectiveSet& set, const Eigen::Ref<const VectorXd>& x) {
  const double gap = set.value(x) - set.optimal_value();
  return std::abs(gap) <= 1e-14 ? 0.0 : gap;
}

ObjectiveSet scalar_pattern_objectives(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("scalar pattern needs equally many a_i and b_i");
  }
  std::vector<std::shared_ptr<const Objective>> objectives;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double i = static_cast<double>(k + 1);
    MatrixXd p = MatrixXd::Zero(2, 2);
    p(0, 0) = 2.0 * a[k];
    p(1, 1) = i / 3.0;
    VectorXd q(2);
    q << -b[k], -(i + 1.0) / 2.0;
    objectives.push_back(std::make_shared<QuadraticObjective>(std::move(p), std::move(q)));
  }
  return ObjectiveSet(std::move(objectives));
}

ObjectiveSet six_agent_objectives() {
  constexpr std::array<double, 6> a = {0.3, 0.15, 0.15, 0.1, 0.2, 0.1};
  constexpr std::array<double, 6> b = {0.5, 0.8, 0.5, 0.8, 0.2, 0.2};
  return scalar_pattern_objectives(a, b);
}

}  // namespace ctsgd
