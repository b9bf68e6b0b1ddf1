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
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "bostop/detail/pattern_search.hpp"
#include "bostop/error.hpp"
#include "bostop/gp.hpp"
#include "bostop/space.hpp"

namespace bostop {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

/// erfc form keeps full relative accuracy in the lower tail.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

enum class AcqKind { kExpectedImprovement, kProbabilityOfImprovement };

/// Acquisition for minimization; incumbent_value is the best observed y.
struct AcquisitionSpec {
  AcqKind kind = AcqKind::kExpectedImprovement;
  double incumbent_value = 0.0;
};

inline double acq_value(const AcquisitionSpec& spec, double mean, double variance) {
  if (!(variance >= 0.0)) throw NegativeVariance(variance);
  if (!std::isfinite(spec.incumbent_value)) throw InvalidArgument("incumbent_value must be finite");
  const double improvement = spec.incumbent_value - mean;
  const double sigma = std::sqrt(variance);
  if (sigma == 0.0) {
    if (spec.kind == AcqKind::kExpectedImprovement) return std::max(improvement, 0.0);
    return mean < spec.incumbent_value ? 1.0 : 0.0;
  }
  const double z = improvement / sigma;
  if (spec.kind == AcqKind::kProbabilityOfImprovement) return normal_cdf(z);
  return std::max(improvement * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

struct InnerSearchOptions {
  std::size_t budget = 2048;
  std::size_t polish_starts = 5;
  int polish_steps = 50;
};

struct Proposal {
  Candidate candidate;
  double acq = 0.0;
};

/// Maximizes the acquisition over an explicit pool, then polishes the best
/// `polish_starts` entries with a pattern search. Ties keep the earliest index.
inline Proposal propose_from(const GPPosterior& gp, const AcquisitionSpec& spec,
                             std::span<const Candidate> pool, std::size_t polish_starts = 0,
                             int polish_steps = 0) {
  if (pool.empty()) throw InvalidArgument("propose: empty candidate pool");
  auto value_at = [&](const Eigen::VectorXd& x) {
    auto [m, v] = gp.predict_raw(x);
    return acq_value(spec, m, std::max(v, 0.0));
  };
  std::vector<double> values(pool.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].size() != gp.dims()) throw DimensionMismatch(gp.dims(), pool[i].size());
    values[i] = value_at(pool[i].coords());
    if (values[i] > values[best]) best = i;
  }
  Proposal out{pool[best], values[best]};
  if (polish_starts == 0 || polish_steps <= 0) return out;

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min(polish_starts, pool.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });
  for (std::size_t s = 0; s < top; ++s) {
    const std::size_t i = order[s];
    auto [x, neg] = detail::pattern_search_unit_cube([&](const Eigen::VectorXd& p) { return -value_at(p); },
                                                     pool[i].coords(), -values[i], polish_steps);
    if (-neg > out.acq) out = Proposal{Candidate(std::move(x)), -neg};
  }
  return out;
}

/// Candidate sweep of `budget` uniform points plus local polish from the top 5.
inline Proposal propose(const GPPosterior& gp, const SearchSpace& space, const AcquisitionSpec& spec,
                        std::size_t budget, Rng& rng, const InnerSearchOptions& opt = {}) {
  if (budget == 0) throw InvalidArgument("propose: budget must be >= 1");
  const auto pool = sample_candidates(space, budget, rng);
  return propose_from(gp, spec, pool, opt.polish_starts, opt.polish_steps);
}

/// Largest acquisition value found by the same search as propose().
inline double max_acq_over_space(const GPPosterior& gp, const SearchSpace& space, const AcquisitionSpec& spec,
                                 std::size_t budget, Rng& rng, const InnerSearchOptions& opt = {}) {
  return propose(gp, space, spec, budget, rng, opt).acq;
}

}  // namespace bostop
