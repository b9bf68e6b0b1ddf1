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

// Objective adapters: closed-form synthetic functions, an external command
// speaking a one-line JSON protocol, and replay of recorded traces.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bostop/detail/pattern_search.hpp"
#include "bostop/detail/subprocess.hpp"
#include "bostop/error.hpp"
#include "bostop/gp.hpp"
#include "bostop/random.hpp"
#include "bostop/space.hpp"

namespace bostop {

struct EvalResult {
  double y = 0.0;
  std::optional<std::vector<double>> fold_values;
  double eval_seconds = 0.0;
  std::optional<double> test_metric;
};

struct EvalContext {
  std::size_t iteration = 1;
  std::uint64_t seed = 0;
};

class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string kind() const = 0;
  /// Task label used when grouping results.
  virtual std::string name() const { return kind(); }
  virtual const SearchSpace& space() const = 0;
  virtual EvalResult evaluate(const Candidate& c, const EvalContext& ctx) = 0;

  virtual bool has_true_regret() const { return false; }
  /// f(c) - f(c*) for objectives with a registered optimum.
  virtual double true_regret(const Candidate&) const {
    throw NotAvailable(kind() + " objective has no registered optimum");
  }

  /// Replay objectives dictate the candidate sequence.
  virtual bool scripted() const { return false; }
  virtual std::optional<Candidate> scripted_candidate(std::size_t /*t*/) const { return std::nullopt; }
  virtual std::optional<std::size_t> length() const { return std::nullopt; }
};

// ---------------------------------------------------------------------------
// Synthetic functions, defined on external coordinates.

struct SyntheticFunction {
  std::string name;
  SearchSpace space;
  std::function<double(std::span<const double>)> f;
  double f_min = 0.0;
  std::vector<double> argmin;
};

/// sum x_i^2 on [-1, 1]^d.
inline SyntheticFunction sphere(std::size_t dims) {
  std::vector<DimensionSpec> d;
  for (std::size_t i = 0; i < dims; ++i) d.push_back({"x" + std::to_string(i), -1.0, 1.0});
  return {"sphere", SearchSpace(std::move(d)),
          [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
          },
          0.0, std::vector<double>(dims, 0.0)};
}

/// Branin on [-5, 10] x [0, 15], shifted to a zero minimum and divided by 51.95.
inline SyntheticFunction branin_rescaled() {
  std::vector<DimensionSpec> d{{"x0", -5.0, 10.0}, {"x1", 0.0, 15.0}};
  return {"branin", SearchSpace(std::move(d)),
          [](std::span<const double> x) {
            const double b = 5.1 / (4.0 * M_PI * M_PI), c = 5.0 / M_PI, t = 1.0 / (8.0 * M_PI);
            const double u = x[1] - b * x[0] * x[0] + c * x[0] - 6.0;
            const double raw = u * u + 10.0 * (1.0 - t) * std::cos(x[0]) + 10.0;
            return (raw - 5.0 / (4.0 * M_PI)) / 51.95;
          },
          0.0, {M_PI, 2.275}};
}

namespace detail {

/// Dense grid scan followed by pattern-search polish of the best grid points.
inline std::pair<std::vector<double>, double> minimize_dense(const std::function<double(const Eigen::VectorXd&)>& f,
                                                             std::size_t dims, std::size_t per_dim,
                                                             std::size_t polish = 10) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < dims; ++i) total *= per_dim;
  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(total);
  Eigen::VectorXd x(static_cast<Eigen::Index>(dims));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t r = idx;
    for (std::size_t k = 0; k < dims; ++k) {
      x[static_cast<Eigen::Index>(k)] = static_cast<double>(r % per_dim) / static_cast<double>(per_dim - 1);
      r /= per_dim;
    }
    vals.emplace_back(f(x), idx);
  }
  const std::size_t top = std::min(polish, total);
  std::partial_sort(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(top), vals.end());
  std::vector<double> best_x;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < top; ++s) {
    std::size_t r = vals[s].second;
    for (std::size_t k = 0; k < dims; ++k) {
      x[static_cast<Eigen::Index>(k)] = static_cast<double>(r % per_dim) / static_cast<double>(per_dim - 1);
      r /= per_dim;
    }
    auto [px, pv] = pattern_search_unit_cube(f, x, vals[s].first, 2000, 1.0 / static_cast<double>(per_dim), 1e-13);
    if (pv < best) {
      best = pv;
      best_x.assign(px.data(), px.data() + px.size());
    }
  }
  return {best_x, best};
}

}  // namespace detail

/// A fixed draw of a smooth random surface on [0, 1]^d: a weighted sum of
/// Matern bumps, shifted so that its numerically located minimum is zero.
inline SyntheticFunction gp_sample(std::size_t dims, std::uint64_t seed, std::size_t centers = 25,
                                   double lengthscale = 0.2) {
  if (dims < 1 || dims > 3) throw InvalidArgument("gp_sample: dims must be 1, 2 or 3");
  Rng rng(mix_seed(seed, 0x6770u));
  Eigen::MatrixXd z(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(centers));
  Eigen::VectorXd w(static_cast<Eigen::Index>(centers));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = uniform01(rng);
    w[j] = standard_normal(rng);
  }
  auto raw = [z, w, lengthscale](const Eigen::VectorXd& x) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) s += w[j] * detail::matern52((x - z.col(j)).norm() / lengthscale);
    return s;
  };
  const std::size_t per_dim = dims == 1 ? 20001 : dims == 2 ? 401 : 81;
  auto [argmin, fmin] = detail::minimize_dense(raw, dims, per_dim);
  return {"gp_sample", SearchSpace::unit_cube(dims),
          [raw, fmin](std::span<const double> x) {
            return raw(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))) - fmin;
          },
          0.0, argmin};
}

/// Looks up a synthetic function by name: sphere, branin, gp_sample.
inline SyntheticFunction make_synthetic(const std::string& name, std::size_t dims, std::uint64_t seed) {
  if (name == "sphere") return sphere(dims);
  if (name == "branin") return branin_rescaled();
  if (name == "gp_sample") return gp_sample(dims, seed);
  throw ConfigError("objective.name", "unknown synthetic function '" + name + "'");
}

struct SyntheticOptions {
  double noise_sd = 0.0;
  /// k >= 2 produces k noisy fold values whose mean is y.
  std::size_t folds = 0;
  double eval_seconds = 1.0;
};

class SyntheticObjective : public Objective {
 public:
  SyntheticObjective(SyntheticFunction fn, SyntheticOptions opt = {}) : fn_(std::move(fn)), opt_(opt) {
    if (!(opt_.noise_sd >= 0.0)) throw InvalidArgument("synthetic objective: noise_sd must be >= 0");
    if (opt_.folds == 1) throw InvalidArgument("synthetic objective: folds must be 0 or >= 2");
    if (!(opt_.eval_seconds >= 0.0)) throw InvalidArgument("synthetic objective: eval_seconds must be >= 0");
  }

  std::string kind() const override { return "synthetic"; }
  std::string name() const override { return fn_.name; }
  const SearchSpace& space() const override { return fn_.space; }
  const SyntheticFunction& function() const { return fn_; }

  double value(const Candidate& c) const {
    const auto x = from_internal(fn_.space, c);
    return fn_.f(x);
  }

  EvalResult evaluate(const Candidate& c, const EvalContext& ctx) override {
    const double fx = value(c);
    Rng rng(mix_seed(ctx.seed, 0x5e00u + ctx.iteration));
    EvalResult r;
    r.eval_seconds = opt_.eval_seconds;
    r.test_metric = fx;
    if (opt_.folds >= 2) {
      std::vector<double> folds(opt_.folds);
      for (auto& v : folds) v = fx + opt_.noise_sd * standard_normal(rng);
      r.y = std::accumulate(folds.begin(), folds.end(), 0.0) / static_cast<double>(folds.size());
      if (opt_.noise_sd == 0.0) r.y = fx;
      r.fold_values = std::move(folds);
    } else {
      r.y = fx + opt_.noise_sd * standard_normal(rng);
    }
    return r;
  }

  bool has_true_regret() const override { return true; }
  double true_regret(const Candidate& c) const override { return std::max(value(c) - fn_.f_min, 0.0); }

 private:
  SyntheticFunction fn_;
  SyntheticOptions opt_;
};

// ---------------------------------------------------------------------------
// External command. Request (one line on stdin):
//   {"candidate": {name: value, ...}, "seed": s, "folds": k, "iteration": t}
// Response (first non-empty line on stdout):
//   {"y": v, "fold_values": [...], "eval_seconds": s, "test_metric": m}

struct SubprocessOptions {
  std::string command;
  std::size_t folds = 0;
  double timeout_seconds = 0.0;
};

namespace detail {

inline std::string excerpt(const std::string& s, std::size_t limit = 512) {
  return s.size() <= limit ? s : s.substr(0, limit) + "...";
}

inline std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw InvalidArgument(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

inline std::optional<std::vector<double>> optional_numbers(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_array()) throw InvalidArgument(std::string("field '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) throw InvalidArgument(std::string("field '") + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

/// Parses one response line; throws InvalidArgument on malformed content.
inline EvalResult parse_eval_response(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("response must be a JSON object");
  EvalResult r;
  const auto y = detail::optional_number(j, "y");
  if (!y || !std::isfinite(*y)) throw InvalidArgument("response needs a finite 'y'");
  r.y = *y;
  r.fold_values = detail::optional_numbers(j, "fold_values");
  if (const auto s = detail::optional_number(j, "eval_seconds")) {
    if (!(*s >= 0.0)) throw InvalidArgument("'eval_seconds' must be >= 0");
    r.eval_seconds = *s;
  } else {
    r.eval_seconds = -1.0;  // caller substitutes the measured time
  }
  r.test_metric = detail::optional_number(j, "test_metric");
  return r;
}

class SubprocessObjective : public Objective {
 public:
  SubprocessObjective(SearchSpace space, SubprocessOptions opt) : space_(std::move(space)), opt_(std::move(opt)) {
    if (opt_.command.empty()) throw ConfigError("objective.command", "must not be empty");
  }

  std::string kind() const override { return "subprocess"; }
  const SearchSpace& space() const override { return space_; }

  static std::string request_line(const SearchSpace& space, const Candidate& c, const EvalContext& ctx,
                                  std::size_t folds) {
    const nlohmann::ordered_json req{{"candidate", external_map(space, c)},
                             {"seed", ctx.seed},
                             {"folds", folds},
                             {"iteration", ctx.iteration}};
    return req.dump() + "\n";
  }

  EvalResult evaluate(const Candidate& c, const EvalContext& ctx) override {
    const auto start = std::chrono::steady_clock::now();
    const auto res = detail::run_shell(opt_.command, request_line(space_, c, ctx, opt_.folds), opt_.timeout_seconds);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (res.timed_out) {
      throw SubprocessError(res.exit_code, detail::excerpt(res.err), "objective command timed out");
    }
    if (res.exit_code != 0) {
      throw SubprocessError(res.exit_code, detail::excerpt(res.err),
                            "objective command exited with status " + std::to_string(res.exit_code));
    }
    std::istringstream lines(res.out);
    std::string line;
    while (std::getline(lines, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
    }
    try {
      auto r = parse_eval_response(line);
      if (r.eval_seconds < 0.0) r.eval_seconds = elapsed;
      if (r.fold_values && opt_.folds >= 2 && r.fold_values->size() != opt_.folds) {
        throw InvalidArgument("expected " + std::to_string(opt_.folds) + " fold values, got " +
                              std::to_string(r.fold_values->size()));
      }
      return r;
    } catch (const InvalidArgument& e) {
      throw SubprocessError(0, detail::excerpt(res.err), std::string("malformed objective response: ") + e.what());
    }
  }

 private:
  SearchSpace space_;
  SubprocessOptions opt_;
};

// ---------------------------------------------------------------------------
// Trace replay. One JSON object per line:
//   {"iteration": t, "y": v, "test_metric": m, "fold_metrics": [...],
//    "eval_seconds": s, "candidate": {name: value}}

struct TraceRow {
  std::size_t iteration = 0;
  double y = 0.0;
  std::optional<double> test_metric;
  std::optional<std::vector<double>> fold_metrics;
  double eval_seconds = 0.0;
  std::optional<std::map<std::string, double>> candidate;
};

inline TraceRow parse_trace_row(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("trace row must be an object");
  TraceRow r;
  if (!j.contains("iteration") || !j["iteration"].is_number_integer() || j["iteration"].get<long long>() < 1) {
    throw InvalidArgument("trace row needs a positive integer 'iteration'");
  }
  r.iteration = j["iteration"].get<std::size_t>();
  const auto y = detail::optional_number(j, "y");
  if (!y || !std::isfinite(*y)) throw InvalidArgument("trace row needs a finite 'y'");
  r.y = *y;
  r.test_metric = detail::optional_number(j, "test_metric");
  r.fold_metrics = detail::optional_numbers(j, "fold_metrics");
  r.eval_seconds = detail::optional_number(j, "eval_seconds").value_or(0.0);
  if (!(r.eval_seconds >= 0.0)) throw InvalidArgument("'eval_seconds' must be >= 0");
  if (j.contains("candidate") && !j["candidate"].is_null()) {
    if (!j["candidate"].is_object()) throw InvalidArgument("'candidate' must be an object");
    std::map<std::string, double> m;
    for (const auto& [k, v] : j["candidate"].items()) {
      if (!v.is_number()) throw InvalidArgument("candidate value '" + k + "' must be a number");
      m[k] = v.get<double>();
    }
    r.candidate = std::move(m);
  }
  return r;
}

inline std::vector<TraceRow> parse_trace(std::istream& in, const std::string& origin = "trace") {
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(parse_trace_row(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno), e.what());
    }
    if (rows.back().iteration != rows.size()) {
      throw ConfigError(origin + ":" + std::to_string(lineno),
                        "iterations must run 1, 2, ... (expected " + std::to_string(rows.size()) + ")");
    }
  }
  if (rows.empty()) throw ConfigError(origin, "trace is empty");
  return rows;
}

inline std::vector<TraceRow> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("objective.trace", "cannot open '" + path + "'");
  return parse_trace(in, path);
}

class ReplayObjective : public Objective {
 public:
  ReplayObjective(SearchSpace space, std::vector<TraceRow> rows) : space_(std::move(space)), rows_(std::move(rows)) {
    for (const auto& r : rows_) {
      if (!r.candidate) continue;
      for (const auto& d : space_.dims()) {
        if (!r.candidate->count(d.name)) {
          throw ConfigError("trace", "row " + std::to_string(r.iteration) + " lacks dimension '" + d.name + "'");
        }
      }
    }
  }

  std::string kind() const override { return "replay"; }
  const SearchSpace& space() const override { return space_; }
  const std::vector<TraceRow>& rows() const { return rows_; }
  std::size_t cursor() const { return cursor_; }

  bool has_candidates() const {
    return std::all_of(rows_.begin(), rows_.end(), [](const TraceRow& r) { return r.candidate.has_value(); });
  }

  bool scripted() const override { return true; }
  std::optional<std::size_t> length() const override { return rows_.size(); }

  /// The trace's candidate for iteration t, or the domain centre when the
  /// trace does not record candidates.
  std::optional<Candidate> scripted_candidate(std::size_t t) const override {
    if (t < 1 || t > rows_.size()) throw ReplayExhausted("trace has " + std::to_string(rows_.size()) + " rows");
    const auto& row = rows_[t - 1];
    if (!row.candidate) return Candidate(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(space_.size()), 0.5));
    std::vector<double> ext;
    for (const auto& d : space_.dims()) ext.push_back(row.candidate->at(d.name));
    return to_internal(space_, ext);
  }

  EvalResult evaluate(const Candidate& c, const EvalContext&) override {
    if (cursor_ >= rows_.size()) throw ReplayExhausted("trace has " + std::to_string(rows_.size()) + " rows");
    const auto& row = rows_[cursor_];
    if (row.candidate) {
      const auto ext = from_internal(space_, c);
      for (std::size_t i = 0; i < space_.size(); ++i) {
        const double want = row.candidate->at(space_.dims()[i].name);
        if (std::abs(ext[i] - want) > 1e-9 * std::max(1.0, std::abs(want))) {
          throw ReplayMismatch("iteration " + std::to_string(row.iteration) + ": dimension '" +
                               space_.dims()[i].name + "' is " + std::to_string(ext[i]) + ", trace has " +
                               std::to_string(want));
        }
      }
    }
    ++cursor_;
    return {row.y, row.fold_metrics, row.eval_seconds, row.test_metric};
  }

 private:
  SearchSpace space_;
  std::vector<TraceRow> rows_;
  std::size_t cursor_ = 0;
};

}  // namespace bostop
