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
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "bostop/error.hpp"
#include "bostop/random.hpp"

namespace bostop {

enum class Scale { kLinear, kLog };

inline const char* to_string(Scale s) { return s == Scale::kLog ? "log" : "linear"; }

struct DimensionSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::kLinear;
};

/// A point of the search domain in internal unit-cube coordinates.
class Candidate {
 public:
  Candidate() = default;
  explicit Candidate(Eigen::VectorXd coords) : coords_(std::move(coords)) {
    for (Eigen::Index i = 0; i < coords_.size(); ++i) {
      if (!(coords_[i] >= 0.0 && coords_[i] <= 1.0)) {
        throw OutOfBounds(static_cast<std::size_t>(i), "internal coordinate " +
                                                          std::to_string(coords_[i]) +
                                                          " outside [0, 1]");
      }
    }
  }
  Candidate(std::initializer_list<double> coords)
      : Candidate(Eigen::Map<const Eigen::VectorXd>(coords.begin(),
                                                    static_cast<Eigen::Index>(coords.size()))) {}

  const Eigen::VectorXd& coords() const { return coords_; }
  std::size_t size() const { return static_cast<std::size_t>(coords_.size()); }
  double operator[](std::size_t i) const { return coords_[static_cast<Eigen::Index>(i)]; }

  friend bool operator==(const Candidate& a, const Candidate& b) {
    return a.coords_.size() == b.coords_.size() && a.coords_ == b.coords_;
  }

 private:
  Eigen::VectorXd coords_;
};

class SearchSpace {
 public:
  SearchSpace(std::vector<DimensionSpec> dims, std::uint64_t seed_salt = 0)
      : dims_(std::move(dims)), seed_salt_(seed_salt) {
    if (dims_.empty()) throw InvalidArgument("search space needs at least one dimension");
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      const auto& d = dims_[i];
      if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
        throw InvalidArgument("dimension '" + d.name + "' needs finite lower < upper");
      }
      if (d.scale == Scale::kLog && !(d.lower > 0.0)) {
        throw InvalidArgument("log-scaled dimension '" + d.name + "' needs lower > 0");
      }
    }
  }

  /// Unit cube with `d` linear dimensions named x0, x1, ...
  static SearchSpace unit_cube(std::size_t d, std::uint64_t seed_salt = 0) {
    std::vector<DimensionSpec> dims;
    for (std::size_t i = 0; i < d; ++i) dims.push_back({"x" + std::to_string(i), 0.0, 1.0});
    return SearchSpace(std::move(dims), seed_salt);
  }

  const std::vector<DimensionSpec>& dims() const { return dims_; }
  std::size_t size() const { return dims_.size(); }
  std::uint64_t seed_salt() const { return seed_salt_; }

 private:
  std::vector<DimensionSpec> dims_;
  std::uint64_t seed_salt_;
};

namespace detail {

inline double warp(const DimensionSpec& d, double v) {
  return d.scale == Scale::kLog ? std::log(v) : v;
}

}  // namespace detail

inline Candidate to_internal(const SearchSpace& space, std::span<const double> external) {
  if (external.size() != space.size()) throw LengthMismatch(space.size(), external.size());
  Eigen::VectorXd c(static_cast<Eigen::Index>(space.size()));
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& d = space.dims()[i];
    const double v = external[i];
    if (!(v >= d.lower && v <= d.upper)) {
      throw OutOfBounds(i, d.name + "=" + std::to_string(v));
    }
    const double lo = detail::warp(d, d.lower);
    const double hi = detail::warp(d, d.upper);
    c[static_cast<Eigen::Index>(i)] = std::clamp((detail::warp(d, v) - lo) / (hi - lo), 0.0, 1.0);
  }
  return Candidate(std::move(c));
}

inline std::vector<double> from_internal(const SearchSpace& space, const Candidate& c) {
  if (c.size() != space.size()) throw LengthMismatch(space.size(), c.size());
  std::vector<double> out(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& d = space.dims()[i];
    const double u = c[i];
    double v;
    if (u == 0.0) {
      v = d.lower;
    } else if (u == 1.0) {
      v = d.upper;
    } else if (d.scale == Scale::kLog) {
      const double lo = std::log(d.lower);
      v = std::exp(lo + u * (std::log(d.upper) - lo));
    } else {
      v = d.lower + u * (d.upper - d.lower);
    }
    out[i] = std::clamp(v, d.lower, d.upper);
  }
  return out;
}

/// Draws `n` candidates with coordinates uniform on [0, 1].
inline std::vector<Candidate> sample_candidates(const SearchSpace& space, std::size_t n, Rng& rng) {
  if (n == 0) throw InvalidArgument("sample_candidates: n must be >= 1");
  std::vector<Candidate> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::VectorXd c(static_cast<Eigen::Index>(space.size()));
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = uniform01(rng);
    out.emplace_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Declarative space files:
//   {"seed_salt": 7, "dims": [{"name": "eta", "lower": 1e-6, "upper": 1, "scale": "log"}]}

inline SearchSpace space_from_json(const nlohmann::json& j) {
  if (!j.contains("dims") || !j["dims"].is_array()) {
    throw ConfigError("search space: missing 'dims' array");
  }
  std::vector<DimensionSpec> dims;
  for (const auto& jd : j["dims"]) {
    DimensionSpec d;
    try {
      d.name = jd.at("name").get<std::string>();
      d.lower = jd.at("lower").get<double>();
      d.upper = jd.at("upper").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("search space dimension: ") + e.what());
    }
    const std::string scale = jd.value("scale", "linear");
    if (scale == "log") {
      d.scale = Scale::kLog;
    } else if (scale == "linear") {
      d.scale = Scale::kLinear;
    } else {
      throw ConfigError("search space dimension '" + d.name + "': unknown scale '" + scale + "'");
    }
    dims.push_back(std::move(d));
  }
  try {
    return SearchSpace(std::move(dims), j.value("seed_salt", std::uint64_t{0}));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

inline nlohmann::json space_to_json(const SearchSpace& space) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : space.dims()) {
    dims.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}, {"scale", to_string(d.scale)}});
  }
  return {{"seed_salt", space.seed_salt()}, {"dims", dims}};
}

inline SearchSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open search space file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("search space file '" + path + "': " + e.what());
  }
  return space_from_json(j);
}

/// Name -> value map for one point, in dimension order.
inline nlohmann::ordered_json external_map(const SearchSpace& space, const Candidate& c) {
  const auto ext = from_internal(space, c);
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < space.size(); ++i) m[space.dims()[i].name] = ext[i];
  return m;
}

}  // namespace bostop
