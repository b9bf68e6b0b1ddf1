// Copyright 2026 The bostop Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "bostop/error.hpp"

namespace bostop::detail {

struct BfgsOptions {
  int max_iters = 200;
  double grad_tol = 1e-6;
  /// Relative decrease below which an accepted step counts as converged.
  double f_tol = 1e-12;
  /// Largest per-coordinate move of a single step.
  double max_step = 2.0;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Objective returning f(x) and writing grad f(x). May throw bostop::Error to
/// signal an infeasible point; such points are treated as +inf.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Box-constrained quasi-Newton minimization: BFGS on the free variables with
/// projection onto [lower, upper] and Armijo backtracking.
inline BfgsResult minimize_bfgs_box(const Objective& f, Eigen::VectorXd x0,
                                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                    const BfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  auto project = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(v.cwiseMax(lower).cwiseMin(upper));
  };
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    try {
      const double v = f(x, g);
      return std::isfinite(v) && g.allFinite() ? v : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  BfgsResult res;
  Eigen::VectorXd x = project(x0);
  Eigen::VectorXd g(n);
  double fx = eval(x, g);
  if (!std::isfinite(fx)) {
    res.x = x;
    return res;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);

  for (int it = 0; it < opt.max_iters; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd pg = g;
    std::vector<bool> active(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((x[i] <= lower[i] && g[i] > 0) || (x[i] >= upper[i] && g[i] < 0)) {
        pg[i] = 0.0;
        active[static_cast<std::size_t>(i)] = true;
      }
    }
    if (pg.norm() < opt.grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = -H * pg;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) d[i] = 0.0;
    }
    if (d.dot(pg) >= 0.0) {
      H.setIdentity();
      d = -pg;
    }
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > opt.max_step) d *= opt.max_step / dmax;

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn, gn(n);
    double fn = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      xn = project(x + step * d);
      fn = eval(xn, gn);
      if (fn <= fx + 1e-4 * g.dot(xn - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd yv = gn - g;
    const double sy = s.dot(yv);
    x = xn;
    g = gn;
    const double improvement = fx - fn;
    fx = fn;
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    }
    if (improvement <= opt.f_tol * (1.0 + std::abs(fx))) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  return res;
}

}  // namespace bostop::detail
