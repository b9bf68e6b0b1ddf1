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

// Early-stopping scores (RYC, RTC), cross-seed aggregation and bound-gap
// diagnostics, with CSV emission.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "bostop/engine.hpp"
#include "bostop/error.hpp"

namespace bostop {

struct RycValue {
  double value = 0.0;
  /// max(y_T, y_es) <= 0; value is reported as 0.
  bool degenerate = false;
};

/// (y_T - y_es) / max(y_T, y_es)
inline RycValue ryc_checked(double y_T, double y_es) {
  if (!std::isfinite(y_T) || !std::isfinite(y_es)) throw InvalidArgument("ryc: values must be finite");
  const double den = std::max(y_T, y_es);
  if (!(den > 0.0)) return {0.0, true};
  return {(y_T - y_es) / den, false};
}

inline double ryc(double y_T, double y_es) { return ryc_checked(y_T, y_es).value; }

/// (t_T - t_es) / t_T
inline double rtc(double t_T, double t_es) {
  if (!(t_T > 0.0)) throw BadTimes("rtc: t_T must be > 0");
  if (!(t_es >= 0.0) || t_es > t_T) throw BadTimes("rtc: need 0 <= t_es <= t_T");
  return (t_T - t_es) / t_T;
}

struct MetricsRow {
  std::string run_id;
  std::string task;
  std::string criterion;
  std::uint64_t seed = 0;
  std::optional<std::size_t> stop_iteration;
  double y_T = 0.0;
  double y_es = 0.0;
  double t_T = 0.0;
  double t_es = 0.0;
  double ryc = 0.0;
  double rtc = 0.0;
  /// Test metrics were missing and validation values were used instead.
  bool validation_fallback = false;
  bool degenerate = false;
  std::string config_hash;
};

/// Scores one record at budget T (clamped to its length). y values are the
/// incumbent's stored test metric at the stop row and at row T.
inline MetricsRow metrics_from_record(const RunRecord& rec, std::size_t budget, const std::string& run_id = "") {
  if (rec.rows.empty()) throw InvalidArgument("metrics: record has no rows");
  if (budget < 1) throw InvalidArgument("metrics: budget must be >= 1");
  const std::size_t T = std::min(budget, rec.rows.size());
  MetricsRow m;
  m.run_id = run_id;
  m.task = rec.task;
  m.criterion = rec.criterion;
  m.seed = rec.seed;
  m.config_hash = rec.config_hash;
  if (rec.summary.stop_iteration && *rec.summary.stop_iteration <= T) m.stop_iteration = rec.summary.stop_iteration;

  const bool have_test = std::all_of(rec.rows.begin(), rec.rows.begin() + static_cast<std::ptrdiff_t>(T),
                                     [](const RunRow& r) { return r.incumbent_test.has_value(); });
  m.validation_fallback = !have_test;
  auto loss_at = [&](std::size_t t) {
    const auto& r = rec.rows[t - 1];
    return have_test ? *r.incumbent_test : r.incumbent_value;
  };
  m.y_T = loss_at(T);
  m.t_T = rec.rows[T - 1].cum_seconds;
  if (m.stop_iteration) {
    m.y_es = loss_at(*m.stop_iteration);
    m.t_es = rec.rows[*m.stop_iteration - 1].cum_seconds;
    const auto r = ryc_checked(m.y_T, m.y_es);
    m.ryc = r.value;
    m.degenerate = r.degenerate;
    m.rtc = rtc(m.t_T, m.t_es);
  } else {
    m.y_es = m.y_T;
    m.t_es = m.t_T;
    m.degenerate = !(std::max(m.y_T, m.y_es) > 0.0);
  }
  return m;
}

struct AggregateRow {
  std::string task;
  std::string criterion;
  std::size_t n = 0;
  double ryc_mean = 0.0;
  double ryc_std = 0.0;
  double rtc_mean = 0.0;
  double rtc_std = 0.0;
  std::size_t positive_ryc = 0;
  std::size_t stopped = 0;
};

namespace detail {

/// Mean and n-1 standard deviation over values summed in sorted order.
inline std::pair<double, double> mean_std(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  std::vector<double> sq;
  sq.reserve(v.size());
  for (double x : v) sq.push_back((x - mean) * (x - mean));
  std::sort(sq.begin(), sq.end());
  return {mean, std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / (n - 1.0))};
}

}  // namespace detail

/// Groups by (task, criterion); output sorted by that key.
inline std::vector<AggregateRow> aggregate(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw InvalidArgument("aggregate: no rows");
  std::map<std::pair<std::string, std::string>, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) groups[{r.task, r.criterion}].push_back(&r);
  std::vector<AggregateRow> out;
  for (const auto& [key, members] : groups) {
    AggregateRow a;
    a.task = key.first;
    a.criterion = key.second;
    a.n = members.size();
    std::vector<double> ry, rt;
    for (const auto* m : members) {
      ry.push_back(m->ryc);
      rt.push_back(m->rtc);
      a.positive_ryc += m->ryc > 0.0 ? 1 : 0;
      a.stopped += m->stop_iteration ? 1 : 0;
    }
    std::tie(a.ryc_mean, a.ryc_std) = detail::mean_std(ry);
    std::tie(a.rtc_mean, a.rtc_std) = detail::mean_std(rt);
    out.push_back(std::move(a));
  }
  return out;
}

struct GapPoint {
  std::size_t t = 0;
  double r_bar = 0.0;
  double true_regret = 0.0;
  double diff = 0.0;
  bool negative = false;
};

struct GapSeries {
  std::vector<GapPoint> points;
  std::size_t negatives = 0;
  double q20 = 0.0, q50 = 0.0, q80 = 0.0;
};

/// Linear-interpolation quantile (p in [0, 1]) of a non-empty sample.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw InvalidArgument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  if (v[lo] == v[hi]) return v[lo];
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// r_bar - true regret per iteration; rows without a bound are skipped.
inline GapSeries bound_gap_series(const RunRecord& rec) {
  if (rec.rows.empty() || !std::all_of(rec.rows.begin(), rec.rows.end(),
                                       [](const RunRow& r) { return r.true_regret.has_value(); })) {
    throw NotAvailable("bound gap: record has no true-regret column");
  }
  GapSeries g;
  std::vector<double> diffs;
  for (const auto& r : rec.rows) {
    if (!r.r_bar) continue;
    GapPoint p{r.t, *r.r_bar, *r.true_regret, *r.r_bar - *r.true_regret, false};
    p.negative = p.diff < 0.0;
    g.negatives += p.negative ? 1 : 0;
    diffs.push_back(p.diff);
    g.points.push_back(p);
  }
  if (!diffs.empty()) {
    g.q20 = quantile(diffs, 0.2);
    g.q50 = quantile(diffs, 0.5);
    g.q80 = quantile(diffs, 0.8);
  }
  return g;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline constexpr const char* kMetricsHeader =
    "run_id,task,criterion,seed,stop_iteration,y_T,y_es,t_T,t_es,ryc,rtc,validation_fallback,degenerate,config_hash";

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& m : rows) {
    out << csv_field(m.run_id) << ',' << csv_field(m.task) << ',' << csv_field(m.criterion) << ',' << m.seed << ','
        << (m.stop_iteration ? std::to_string(*m.stop_iteration) : "") << ',' << fmt17(m.y_T) << ','
        << fmt17(m.y_es) << ',' << fmt17(m.t_T) << ',' << fmt17(m.t_es) << ',' << fmt17(m.ryc) << ','
        << fmt17(m.rtc) << ',' << (m.validation_fallback ? 1 : 0) << ',' << (m.degenerate ? 1 : 0) << ','
        << csv_field(m.config_hash) << '\n';
  }
}

inline constexpr const char* kAggregateHeader =
    "task,criterion,n,ryc_mean,ryc_std,rtc_mean,rtc_std,positive_ryc,stopped";

inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const auto& a : rows) {
    out << csv_field(a.task) << ',' << csv_field(a.criterion) << ',' << a.n << ',' << fmt17(a.ryc_mean) << ','
        << fmt17(a.ryc_std) << ',' << fmt17(a.rtc_mean) << ',' << fmt17(a.rtc_std) << ',' << a.positive_ryc << ','
        << a.stopped << '\n';
  }
}

inline constexpr const char* kGapHeader = "run_id,t,r_bar,true_regret,diff,negative";

inline void write_gap_rows(std::ostream& out, const std::string& run_id, const GapSeries& g) {
  for (const auto& p : g.points) {
    out << csv_field(run_id) << ',' << p.t << ',' << fmt17(p.r_bar) << ',' << fmt17(p.true_regret) << ','
        << fmt17(p.diff) << ',' << (p.negative ? 1 : 0) << '\n';
  }
}

}  // namespace bostop
