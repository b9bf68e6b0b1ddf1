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

// Regret upper bound and the termination criteria built on it, plus the
// convergence / acquisition-threshold baselines.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bostop/cv.hpp"
#include "bostop/detail/pattern_search.hpp"
#include "bostop/error.hpp"
#include "bostop/gp.hpp"
#include "bostop/observation.hpp"
#include "bostop/space.hpp"

namespace bostop {

struct BetaSchedule {
  double delta = 0.1;
  std::size_t gamma_cardinality = 1;
  double scale_down = 5.0;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("beta schedule: delta must lie in (0, 1)");
    if (gamma_cardinality < 1) throw InvalidArgument("beta schedule: gamma_cardinality must be >= 1");
    if (!(scale_down > 0.0)) throw InvalidArgument("beta schedule: scale_down must be > 0");
  }
};

/// beta_t = 2 log(|G| t^2 pi^2 / (6 delta)) / scale_down
inline double beta(const BetaSchedule& s, std::size_t t) {
  if (t < 1) throw InvalidArgument("beta: t must be >= 1");
  s.validate();
  const double td = static_cast<double>(t);
  const double arg = static_cast<double>(s.gamma_cardinality) * td * td * M_PI * M_PI / (6.0 * s.delta);
  return 2.0 * std::log(arg) / s.scale_down;
}

/// Keeps the ceil(q t) smallest-y records (ties go to the earlier one), in
/// their original order.
inline ObservationLog filter_top_q(const ObservationLog& log, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw InvalidArgument("filter_top_q: q must lie in (0, 1]");
  if (log.empty()) throw InvalidArgument("filter_top_q: empty log");
  const std::size_t t = log.size();
  // the epsilon absorbs products like 0.2 * 10 = 2.0000000000000004
  auto keep = static_cast<std::size_t>(std::ceil(q * static_cast<double>(t) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, t);

  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return log[a].y < log[b].y; });
  order.resize(keep);
  std::sort(order.begin(), order.end());

  std::vector<Observation> kept;
  kept.reserve(keep);
  for (auto i : order) kept.push_back(log[i]);
  return ObservationLog::subset(std::move(kept));
}

struct RegretBound {
  double beta_t = 0.0;
  double min_ucb = 0.0;
  double min_lcb = 0.0;
  double r_bar = 0.0;
  Candidate argmin_ucb;
  Candidate argmin_lcb;
};

namespace detail {

inline double confidence_bound(const GPPosterior& gp, const Eigen::VectorXd& x, double sqrt_beta, double sign) {
  auto [m, v] = gp.predict_raw(x);
  return m + sign * sqrt_beta * std::sqrt(std::max(v, 0.0));
}

}  // namespace detail

/// Bound with min lcb taken over `pool` plus the evaluated points. Polishing
/// is applied to the `polish_starts` lowest entries when requested.
inline RegretBound regret_bound_on_pool(const GPPosterior& gp, std::span<const Candidate> evaluated, double beta_t,
                                        std::span<const Candidate> pool, std::size_t polish_starts = 0,
                                        int polish_steps = 0) {
  if (evaluated.empty()) throw InvalidArgument("regret bound: no evaluated points");
  if (!(beta_t >= 0.0)) throw InvalidArgument("regret bound: beta_t must be >= 0");
  const double sb = std::sqrt(beta_t);

  RegretBound rb;
  rb.beta_t = beta_t;
  std::size_t best_u = 0;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    if (evaluated[i].size() != gp.dims()) throw DimensionMismatch(gp.dims(), evaluated[i].size());
    const double u = detail::confidence_bound(gp, evaluated[i].coords(), sb, 1.0);
    if (i == 0 || u < rb.min_ucb) {
      rb.min_ucb = u;
      best_u = i;
    }
  }
  rb.argmin_ucb = evaluated[best_u];

  std::vector<const Candidate*> all;
  all.reserve(pool.size() + evaluated.size());
  for (const auto& c : pool) all.push_back(&c);
  for (const auto& c : evaluated) all.push_back(&c);
  std::vector<double> lcb(all.size());
  std::size_t best_l = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i]->size() != gp.dims()) throw DimensionMismatch(gp.dims(), all[i]->size());
    lcb[i] = detail::confidence_bound(gp, all[i]->coords(), sb, -1.0);
    if (lcb[i] < lcb[best_l]) best_l = i;
  }
  rb.min_lcb = lcb[best_l];
  rb.argmin_lcb = *all[best_l];

  if (polish_starts > 0 && polish_steps > 0) {
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t top = std::min(polish_starts, all.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                      [&](std::size_t a, std::size_t b) { return lcb[a] < lcb[b] || (lcb[a] == lcb[b] && a < b); });
    for (std::size_t s = 0; s < top; ++s) {
      const std::size_t i = order[s];
      auto [x, v] = detail::pattern_search_unit_cube(
          [&](const Eigen::VectorXd& p) { return detail::confidence_bound(gp, p, sb, -1.0); }, all[i]->coords(),
          lcb[i], polish_steps);
      if (v < rb.min_lcb) {
        rb.min_lcb = v;
        rb.argmin_lcb = Candidate(std::move(x));
      }
    }
  }
  rb.r_bar = rb.min_ucb - rb.min_lcb;
  return rb;
}

/// r_bar_t = min over evaluated of ucb_t minus (approximate) min over the
/// space of lcb_t.
inline RegretBound regret_upper_bound(const GPPosterior& gp, const SearchSpace& space,
                                      std::span<const Candidate> evaluated, std::size_t t,
                                      const BetaSchedule& schedule, std::size_t search_budget, Rng& rng,
                                      std::size_t polish_starts = 5, int polish_steps = 50) {
  std::vector<Candidate> pool;
  if (search_budget > 0) pool = sample_candidates(space, search_budget, rng);
  return regret_bound_on_pool(gp, evaluated, beta(schedule, t), pool, polish_starts, polish_steps);
}

// ---------------------------------------------------------------------------
// Criteria

/// kNever runs the full budget; useful as a reference arm.
enum class CriterionKind { kRegretCV, kRegretFixed, kConvI, kEIThreshold, kPIThreshold, kNever };

inline const char* criterion_name(CriterionKind k) {
  switch (k) {
    case CriterionKind::kRegretCV: return "regret_cv";
    case CriterionKind::kRegretFixed: return "regret_fixed";
    case CriterionKind::kConvI: return "conv";
    case CriterionKind::kEIThreshold: return "ei";
    case CriterionKind::kPIThreshold: return "pi";
    case CriterionKind::kNever: return "none";
  }
  return "?";
}

struct CriterionConfig {
  CriterionKind kind = CriterionKind::kRegretCV;
  double threshold = 0.0;  // RegretFixed, EI, PI
  std::size_t i = 10;      // ConvI
  std::size_t warmup_iters = 20;
  double top_fraction = 0.5;
  double delta = 0.1;
  double scale_down = 5.0;
  /// Compare with "<" (default) or "<=".
  bool strict = true;
  CVOptions cv;

  void validate() const {
    const bool thresholded = kind == CriterionKind::kRegretFixed || kind == CriterionKind::kEIThreshold ||
                             kind == CriterionKind::kPIThreshold;
    if (thresholded && !(threshold > 0.0)) throw ConfigError("criterion.threshold", "must be > 0");
    if (kind == CriterionKind::kConvI && i < 1) throw ConfigError("criterion.i", "must be >= 1");
    if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ConfigError("criterion.top_fraction", "must lie in (0, 1]");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("criterion.delta", "must lie in (0, 1)");
    if (!(scale_down > 0.0)) throw ConfigError("criterion.scale_down", "must be > 0");
    if (cv.fixed_factor && !(*cv.fixed_factor > 0.0)) throw ConfigError("criterion.cv_factor", "must be > 0");
  }

  /// Whether the criterion consumes the regret bound.
  bool needs_bound() const { return kind == CriterionKind::kRegretCV || kind == CriterionKind::kRegretFixed; }
  bool needs_max_acq() const { return kind == CriterionKind::kEIThreshold || kind == CriterionKind::kPIThreshold; }

  /// Short filesystem-safe identifier, e.g. "regret_fixed_0.01" or "conv_10".
  std::string label() const {
    std::ostringstream os;
    os << criterion_name(kind);
    if (kind == CriterionKind::kConvI) os << '_' << i;
    if (kind == CriterionKind::kRegretFixed || kind == CriterionKind::kEIThreshold ||
        kind == CriterionKind::kPIThreshold) {
      os << '_' << threshold;
    }
    return os.str();
  }
};

inline CriterionConfig never_stop() {
  CriterionConfig c;
  c.kind = CriterionKind::kNever;
  return c;
}

struct StopDecision {
  bool should_stop = false;
  std::string criterion;
  double statistic = 0.0;
  double threshold = 0.0;
  std::size_t iteration = 0;
};

struct StopInputs {
  std::size_t t = 0;
  std::optional<double> r_bar;
  std::optional<double> cv_var_at_incumbent;
  std::optional<double> incumbent_value;  // best y after iteration t
  std::optional<double> max_acq;
};

/// Running state owned by one run.
class StopChecker {
 public:
  explicit StopChecker(CriterionConfig config) : config_(std::move(config)) { config_.validate(); }

  const CriterionConfig& config() const { return config_; }
  std::size_t stale_count() const { return stale_; }

  /// Called with increasing t; the conv criterion expects every iteration.
  StopDecision check(const StopInputs& in) {
    if (in.t < 1) throw InvalidArgument("stop check: t must be >= 1");
    if (in.t <= last_t_) {
      throw InvalidArgument("stop check: t must increase (last " + std::to_string(last_t_) + ", got " +
                            std::to_string(in.t) + ")");
    }
    last_t_ = in.t;
    const std::string name = criterion_name(config_.kind);
    StopDecision d{false, name, 0.0, 0.0, in.t};
    if (config_.kind == CriterionKind::kNever) return d;

    if (config_.kind == CriterionKind::kConvI) {
      if (!in.incumbent_value) throw MissingInput(name, "incumbent_value");
      if (!best_ || *in.incumbent_value < *best_) {
        best_ = in.incumbent_value;
        stale_ = 0;
      } else {
        ++stale_;
      }
      d.statistic = static_cast<double>(stale_);
      d.threshold = static_cast<double>(config_.i);
      d.should_stop = stale_ >= config_.i;
      return d;
    }

    const bool past_warmup = in.t > config_.warmup_iters;
    switch (config_.kind) {
      case CriterionKind::kRegretCV:
        if (!past_warmup) return d;
        if (!in.r_bar) throw MissingInput(name, "r_bar");
        if (!in.cv_var_at_incumbent) throw MissingInput(name, "cv_var_at_incumbent");
        d.statistic = *in.r_bar;
        d.threshold = std::sqrt(std::max(*in.cv_var_at_incumbent, 0.0));
        break;
      case CriterionKind::kRegretFixed:
        if (!past_warmup) return d;
        if (!in.r_bar) throw MissingInput(name, "r_bar");
        d.statistic = *in.r_bar;
        d.threshold = config_.threshold;
        break;
      default:
        if (!past_warmup) return d;
        if (!in.max_acq) throw MissingInput(name, "max_acq");
        d.statistic = *in.max_acq;
        d.threshold = config_.threshold;
        break;
    }
    d.should_stop = config_.strict ? d.statistic < d.threshold : d.statistic <= d.threshold;
    return d;
  }

 private:
  CriterionConfig config_;
  std::size_t last_t_ = 0;
  std::size_t stale_ = 0;
  std::optional<double> best_;
};

namespace detail {

inline double parse_real(const std::string& field, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not a number: '" + text + "'");
  }
}

inline std::size_t parse_count(const std::string& field, const std::string& text) {
  const double v = parse_real(field, text);
  if (v < 0 || v != std::floor(v)) throw ConfigError(field, "not a non-negative integer: '" + text + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Parses "NAME" or "NAME:key=val,key=val". Names: regret_cv, regret_fixed,
/// conv, ei, pi, none.
inline CriterionConfig parse_criterion(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  CriterionConfig c;
  if (name == "regret_cv") {
    c.kind = CriterionKind::kRegretCV;
  } else if (name == "regret_fixed") {
    c.kind = CriterionKind::kRegretFixed;
  } else if (name == "conv") {
    c.kind = CriterionKind::kConvI;
  } else if (name == "ei") {
    c.kind = CriterionKind::kEIThreshold;
  } else if (name == "pi") {
    c.kind = CriterionKind::kPIThreshold;
  } else if (name == "none") {
    c.kind = CriterionKind::kNever;
  } else {
    throw ConfigError("criterion", "unknown criterion '" + name + "'");
  }
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("criterion", "expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
      const std::string field = "criterion." + key;
      if (key == "threshold") {
        c.threshold = detail::parse_real(field, val);
      } else if (key == "i") {
        c.i = detail::parse_count(field, val);
      } else if (key == "warmup") {
        c.warmup_iters = detail::parse_count(field, val);
      } else if (key == "top_fraction") {
        c.top_fraction = detail::parse_real(field, val);
      } else if (key == "delta") {
        c.delta = detail::parse_real(field, val);
      } else if (key == "scale_down") {
        c.scale_down = detail::parse_real(field, val);
      } else if (key == "strict") {
        if (val != "true" && val != "false") throw ConfigError(field, "expected true or false");
        c.strict = val == "true";
      } else if (key == "cv_factor") {
        c.cv.fixed_factor = detail::parse_real(field, val);
      } else if (key == "unbiased") {
        if (val != "true" && val != "false") throw ConfigError(field, "expected true or false");
        c.cv.unbiased_sample_variance = val == "true";
      } else {
        throw ConfigError(field, "unknown key");
      }
    }
  }
  c.validate();
  return c;
}

}  // namespace bostop
