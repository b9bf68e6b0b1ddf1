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

#include <algorithm>
#include <functional>
#include <utility>

#include <Eigen/Core>

namespace bostop::detail {

/// Derivative-free coordinate pattern search minimizing `f` inside the unit
/// cube. Only strict improvements are accepted; the step halves whenever a
/// full sweep over the coordinates fails.
inline std::pair<Eigen::VectorXd, double> pattern_search_unit_cube(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, double fx, int steps,
    double initial_step = 0.05, double min_step = 1e-7) {
  double step = initial_step;
  for (int s = 0; s < steps && step >= min_step; ++s) {
    bool improved = false;
    for (Eigen::Index k = 0; k < x.size() && !improved; ++k) {
      for (double dir : {1.0, -1.0}) {
        Eigen::VectorXd trial = x;
        trial[k] = std::clamp(trial[k] + dir * step, 0.0, 1.0);
        if (trial[k] == x[k]) continue;
        const double ft = f(trial);
        if (ft < fx) {
          x = std::move(trial);
          fx = ft;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {std::move(x), fx};
}

}  // namespace bostop::detail
