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

// k-fold cross-validation bookkeeping and the corrected variance of the
// cross-validation mean, used as the termination threshold.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bostop/error.hpp"
#include "bostop/random.hpp"

namespace bostop {

struct FoldSpec {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // fold id per index

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto f : assignment) ++sizes[f];
    return sizes;
  }
};

/// Shuffles {0..n-1} and cuts it into k contiguous blocks; the first n % k
/// blocks get one extra element.
inline FoldSpec make_folds(std::size_t n, std::size_t k, Rng& rng) {
  if (k < 2 || k > n) throw BadFoldCount(n, k);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  FoldSpec spec{n, k, std::vector<std::size_t>(n)};
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t s = 0; s < size; ++s) spec.assignment[perm[pos++]] = f;
  }
  return spec;
}

/// 1/k + |D_i| / |D_{-i}| as a reduced fraction (numerator, denominator).
inline std::pair<std::uint64_t, std::uint64_t> correction_factor_rational(std::size_t k, std::size_t fold_size,
                                                                          std::size_t rest_size) {
  if (k < 2 || fold_size < 1 || rest_size < 1) {
    throw InvalidArgument("correction_factor: need k >= 2 and positive set sizes");
  }
  const std::uint64_t num = rest_size + static_cast<std::uint64_t>(k) * fold_size;
  const std::uint64_t den = static_cast<std::uint64_t>(k) * rest_size;
  const std::uint64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

inline double correction_factor(std::size_t k, std::size_t fold_size, std::size_t rest_size) {
  const auto [num, den] = correction_factor_rational(k, fold_size, rest_size);
  return static_cast<double>(num) / static_cast<double>(den);
}

struct CVOptions {
  /// Use 1/(k-1) instead of the default 1/k sample variance.
  bool unbiased_sample_variance = false;
  /// Replaces the fold-size correction by a fixed constant (e.g. 0.5).
  std::optional<double> fixed_factor;
};

struct CVStats {
  std::vector<double> fold_values;
  double mean = 0.0;
  double sample_variance = 0.0;
  double corrected_variance = 0.0;
  double correction_factor = 0.0;
};

inline CVStats cv_stats(std::span<const double> fold_values, std::size_t k, std::size_t fold_size,
                        std::size_t rest_size, const CVOptions& opt = {}) {
  if (fold_values.size() != k) throw LengthMismatch(k, fold_values.size());
  CVStats s;
  s.fold_values.assign(fold_values.begin(), fold_values.end());
  // sorted accumulation keeps the result independent of fold order
  std::vector<double> sorted = s.fold_values;
  std::sort(sorted.begin(), sorted.end());
  const double kd = static_cast<double>(k);
  s.mean = sorted.front() == sorted.back() ? sorted.front()
                                           : std::accumulate(sorted.begin(), sorted.end(), 0.0) / kd;
  double ss = 0.0;
  for (double v : sorted) ss += (s.mean - v) * (s.mean - v);
  s.sample_variance = ss / (opt.unbiased_sample_variance ? kd - 1.0 : kd);
  s.correction_factor = opt.fixed_factor ? *opt.fixed_factor : correction_factor(k, fold_size, rest_size);
  s.corrected_variance = s.correction_factor * s.sample_variance;
  return s;
}

}  // namespace bostop
