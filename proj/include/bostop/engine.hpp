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

// The optimization loop with cross-validated automatic termination, and the
// run record it produces.

#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bostop/acquisition.hpp"
#include "bostop/cv.hpp"
#include "bostop/error.hpp"
#include "bostop/gp.hpp"
#include "bostop/objective.hpp"
#include "bostop/observation.hpp"
#include "bostop/random.hpp"
#include "bostop/space.hpp"
#include "bostop/stopping.hpp"

namespace bostop {

enum class ProposerKind { kGPBO, kRandomSearch };

struct Proposer {
  ProposerKind kind = ProposerKind::kGPBO;
  AcqKind acq = AcqKind::kExpectedImprovement;

  static Proposer gpbo(AcqKind a = AcqKind::kExpectedImprovement) { return {ProposerKind::kGPBO, a}; }
  static Proposer random_search() { return {ProposerKind::kRandomSearch, AcqKind::kExpectedImprovement}; }
};

inline std::string proposer_name(const Proposer& p) {
  if (p.kind == ProposerKind::kRandomSearch) return "random";
  return p.acq == AcqKind::kExpectedImprovement ? "gp_ei" : "gp_pi";
}

inline Proposer parse_proposer(const std::string& name) {
  if (name == "gp_ei" || name == "gpbo") return Proposer::gpbo(AcqKind::kExpectedImprovement);
  if (name == "gp_pi") return Proposer::gpbo(AcqKind::kProbabilityOfImprovement);
  if (name == "random") return Proposer::random_search();
  throw ConfigError("proposer", "unknown proposer '" + name + "'");
}

struct RunOptions {
  std::size_t init_points = 3;
  InnerSearchOptions inner;
  /// Random pool size for the min-lcb search, before polishing.
  std::size_t bound_budget = 1024;
  std::size_t bound_polish_starts = 5;
  int bound_polish_steps = 50;
  std::size_t fit_restarts = 3;
  bool warm_start = true;
  /// Stop the loop at the first stop decision. When false the run continues
  /// to max_iters and only the first stop is marked.
  bool halt_on_stop = true;
  /// Compute the bound / max acquisition during warmup as well (diagnostics).
  bool stats_during_warmup = true;
};

struct RunRow {
  std::size_t t = 0;
  Candidate candidate;
  std::vector<double> external;
  double y = 0.0;
  std::optional<double> test_metric;
  double incumbent_value = 0.0;
  std::size_t incumbent_iteration = 0;
  std::optional<double> incumbent_test;
  std::optional<double> cv_variance;  // at the incumbent
  std::optional<double> r_bar;
  std::optional<double> beta_t;
  std::optional<double> max_acq;
  std::optional<double> stop_statistic;
  std::optional<double> stop_threshold;
  bool stopped = false;
  double cum_seconds = 0.0;
  std::optional<double> true_regret;  // of the incumbent
};

struct RunSummary {
  std::optional<std::size_t> stop_iteration;
  std::size_t iterations = 0;
  std::vector<double> final_incumbent;
  double final_incumbent_value = 0.0;
  std::string reason;  // "criterion", "max_iters", "trace_end", "objective_failure"
};

struct RunRecord {
  std::string criterion;
  std::string proposer;
  std::string objective;
  std::string task;
  std::uint64_t seed = 0;
  std::vector<std::string> dim_names;
  std::vector<RunRow> rows;
  RunSummary summary;
  /// Set when read back from a file written with a hash.
  std::string config_hash;
};

/// Raised when an objective evaluation fails; carries the rows completed so far.
class ObjectiveFailure : public Error {
 public:
  ObjectiveFailure(std::size_t iteration, RunRecord partial, const std::string& cause)
      : Error("objective failed at iteration " + std::to_string(iteration) + ": " + cause),
        iteration_(iteration),
        partial_(std::move(partial)) {}
  std::size_t iteration() const { return iteration_; }
  const RunRecord& partial() const { return partial_; }

 private:
  std::size_t iteration_;
  RunRecord partial_;
};

namespace detail {

inline std::optional<KernelParams> warm(const std::optional<GPPosterior>& gp) {
  if (!gp || gp->degenerate()) return std::nullopt;
  return gp->params();
}

inline GPPosterior refit(const SearchSpace& space, const ObservationLog& log, const std::optional<KernelParams>& ws,
                         const RunOptions& opt, Rng& rng) {
  FitOptions fo;
  fo.restarts = opt.fit_restarts;
  if (opt.warm_start) fo.warm_start = ws;
  return fit(space, log.candidates(), log.values(), fo, rng);
}

}  // namespace detail

/// Runs one optimization. Deterministic given `seed`.
inline RunRecord run(Objective& objective, const Proposer& proposer, const CriterionConfig& criterion,
                     std::size_t max_iters, std::uint64_t seed, const RunOptions& opt = {}) {
  if (max_iters < 1) throw InvalidArgument("run: max_iters must be >= 1");
  const SearchSpace& space = objective.space();
  const bool scripted = objective.scripted();
  std::size_t budget = max_iters;
  if (auto len = objective.length()) budget = std::min(budget, *len);

  const bool needs_gp = criterion.needs_bound() || criterion.needs_max_acq();
  if (scripted && needs_gp) {
    if (auto* replay = dynamic_cast<ReplayObjective*>(&objective); replay && !replay->has_candidates()) {
      throw NotAvailable("criterion '" + criterion.label() + "' needs candidates, which the trace does not record");
    }
  }

  const std::uint64_t base = mix_seed(seed, space.seed_salt());
  Rng rng_init(mix_seed(base, 1)), rng_prop(mix_seed(base, 2)), rng_fit(mix_seed(base, 3)),
      rng_bound(mix_seed(base, 4)), rng_acq(mix_seed(base, 5));

  RunRecord rec;
  rec.criterion = criterion.label();
  rec.proposer = scripted ? "replay" : proposer_name(proposer);
  rec.objective = objective.kind();
  rec.task = objective.name();
  rec.seed = seed;
  for (const auto& d : space.dims()) rec.dim_names.push_back(d.name);

  const bool gpbo = proposer.kind == ProposerKind::kGPBO && !scripted;
  const std::size_t n_init = std::max<std::size_t>(1, std::min(opt.init_points, budget));
  std::vector<Candidate> init;
  if (!scripted) init = sample_candidates(space, n_init, rng_init);

  StopChecker checker(criterion);
  const BetaSchedule schedule{criterion.delta, space.size(), criterion.scale_down};
  const AcqKind stop_acq =
      criterion.kind == CriterionKind::kPIThreshold ? AcqKind::kProbabilityOfImprovement : AcqKind::kExpectedImprovement;

  ObservationLog log;
  std::optional<Incumbent> inc;
  std::optional<GPPosterior> gp_full, gp_bound;
  std::optional<Proposal> pending;  // next GP proposal, computed at the end of the previous iteration
  double cum_seconds = 0.0;

  for (std::size_t t = 1; t <= budget; ++t) {
    Candidate cand;
    if (scripted) {
      cand = *objective.scripted_candidate(t);
    } else if (!gpbo) {
      cand = sample_candidates(space, 1, rng_prop)[0];
    } else if (t <= n_init || !pending) {
      cand = t <= n_init ? init[t - 1] : sample_candidates(space, 1, rng_prop)[0];
    } else {
      cand = pending->candidate;
    }
    pending.reset();

    EvalResult ev;
    try {
      ev = objective.evaluate(cand, {t, seed});
    } catch (const std::exception& e) {
      rec.summary.iterations = rec.rows.size();
      rec.summary.reason = "objective_failure";
      if (inc) {
        rec.summary.final_incumbent = from_internal(space, inc->candidate);
        rec.summary.final_incumbent_value = inc->value;
      }
      throw ObjectiveFailure(t, std::move(rec), e.what());
    }
    cum_seconds += ev.eval_seconds;
    log.append({t, cand, ev.y, ev.fold_values, ev.eval_seconds, ev.test_metric});

    if (!inc || ev.y < inc->value) {
      Incumbent next{cand, ev.y, t, std::nullopt, ev.test_metric};
      if (ev.fold_values && ev.fold_values->size() >= 2) {
        const std::size_t k = ev.fold_values->size();
        next.cv_corrected_variance = cv_stats(*ev.fold_values, k, 1, k - 1, criterion.cv).corrected_variance;
      }
      inc = std::move(next);
    }

    const bool want_stats = opt.stats_during_warmup || t > criterion.warmup_iters;
    const bool more = t < budget;
    const bool need_full = (gpbo && more && t >= n_init) || (criterion.needs_max_acq() && want_stats);

    StopInputs in;
    in.t = t;
    in.incumbent_value = inc->value;
    in.cv_var_at_incumbent = inc->cv_corrected_variance;
    RunRow row;

    if (log.size() >= 2) {
      if (need_full) gp_full = detail::refit(space, log, detail::warm(gp_full), opt, rng_fit);
      if (criterion.needs_bound() && want_stats) {
        ObservationLog top = filter_top_q(log, criterion.top_fraction);
        const ObservationLog& fit_log = top.size() >= 2 ? top : log;
        gp_bound = detail::refit(space, fit_log, detail::warm(gp_bound), opt, rng_fit);
        const auto evaluated = log.candidates();
        const auto rb = regret_upper_bound(*gp_bound, space, evaluated, t, schedule, opt.bound_budget, rng_bound,
                                           opt.bound_polish_starts, opt.bound_polish_steps);
        in.r_bar = rb.r_bar;
        row.beta_t = rb.beta_t;
      }
      if (gpbo && more && t >= n_init) {
        pending = propose(*gp_full, space, {proposer.acq, inc->value}, opt.inner.budget, rng_prop, opt.inner);
      }
      if (criterion.needs_max_acq() && want_stats) {
        if (pending && proposer.acq == stop_acq) {
          in.max_acq = pending->acq;
        } else {
          in.max_acq = max_acq_over_space(*gp_full, space, {stop_acq, inc->value}, opt.inner.budget, rng_acq,
                                          opt.inner);
        }
      }
    }

    // The statistic cannot exist before two observations; such iterations
    // are never stop points.
    const bool computable = !((criterion.needs_bound() && !in.r_bar && t > criterion.warmup_iters) ||
                              (criterion.needs_max_acq() && !in.max_acq && t > criterion.warmup_iters));
    StopDecision d;
    if (computable) d = checker.check(in);

    row.t = t;
    row.candidate = cand;
    row.external = from_internal(space, cand);
    row.y = ev.y;
    row.test_metric = ev.test_metric;
    row.incumbent_value = inc->value;
    row.incumbent_iteration = inc->iteration_found;
    row.incumbent_test = inc->test_metric;
    row.cv_variance = inc->cv_corrected_variance;
    row.r_bar = in.r_bar;
    row.max_acq = in.max_acq;
    const bool compared = criterion.kind == CriterionKind::kConvI ||
                          (criterion.kind != CriterionKind::kNever && t > criterion.warmup_iters);
    if (computable && compared) {
      row.stop_statistic = d.statistic;
      row.stop_threshold = d.threshold;
    }
    row.cum_seconds = cum_seconds;
    if (objective.has_true_regret()) row.true_regret = objective.true_regret(inc->candidate);

    const bool first_stop = d.should_stop && !rec.summary.stop_iteration;
    if (first_stop) {
      row.stopped = true;
      rec.summary.stop_iteration = t;
    }
    rec.rows.push_back(std::move(row));
    if (first_stop && opt.halt_on_stop) break;
  }

  rec.summary.iterations = rec.rows.size();
  rec.summary.final_incumbent = from_internal(space, inc->candidate);
  rec.summary.final_incumbent_value = inc->value;
  if (rec.summary.stop_iteration && opt.halt_on_stop) {
    rec.summary.reason = "criterion";
  } else if (scripted && budget < max_iters) {
    rec.summary.reason = "trace_end";
  } else {
    rec.summary.reason = "max_iters";
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Record serialization: one JSON object per row, then {"summary": {...}}.

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(); }

inline std::optional<double> json_opt(const ojson& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json row_to_json(const RunRecord& rec, const RunRow& r) {
  nlohmann::ordered_json cand = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.external.size() && i < rec.dim_names.size(); ++i) cand[rec.dim_names[i]] = r.external[i];
  return {{"t", r.t},
          {"candidate", cand},
          {"y", r.y},
          {"test_metric", detail::opt_json(r.test_metric)},
          {"incumbent_value", r.incumbent_value},
          {"incumbent_iteration", r.incumbent_iteration},
          {"incumbent_test", detail::opt_json(r.incumbent_test)},
          {"cv_variance", detail::opt_json(r.cv_variance)},
          {"r_bar", detail::opt_json(r.r_bar)},
          {"beta_t", detail::opt_json(r.beta_t)},
          {"max_acq", detail::opt_json(r.max_acq)},
          {"stop_statistic", detail::opt_json(r.stop_statistic)},
          {"stop_threshold", detail::opt_json(r.stop_threshold)},
          {"stopped", r.stopped},
          {"cum_seconds", r.cum_seconds},
          {"true_regret", detail::opt_json(r.true_regret)}};
}

inline nlohmann::ordered_json summary_to_json(const RunRecord& rec, const std::string& config_hash = "") {
  using detail::ojson;
  ojson inc = ojson::object();
  for (std::size_t i = 0; i < rec.summary.final_incumbent.size() && i < rec.dim_names.size(); ++i) {
    inc[rec.dim_names[i]] = rec.summary.final_incumbent[i];
  }
  ojson s{{"criterion", rec.criterion},
                   {"proposer", rec.proposer},
                   {"objective", rec.objective},
                   {"task", rec.task},
                   {"seed", rec.seed},
                   {"dims", rec.dim_names},
                   {"iterations", rec.summary.iterations},
                   {"stop_iteration", rec.summary.stop_iteration ? ojson(*rec.summary.stop_iteration) : ojson()},
                   {"final_incumbent", inc},
                   {"final_incumbent_value", rec.summary.final_incumbent_value},
                   {"reason", rec.summary.reason}};
  if (!config_hash.empty()) s["config_hash"] = config_hash;
  return {{"summary", s}};
}

inline void write_record(std::ostream& out, const RunRecord& rec, const std::string& config_hash = "") {
  for (const auto& r : rec.rows) out << row_to_json(rec, r).dump() << '\n';
  out << summary_to_json(rec, config_hash).dump() << '\n';
}

inline std::string record_to_string(const RunRecord& rec, const std::string& config_hash = "") {
  std::ostringstream os;
  write_record(os, rec, config_hash);
  return os.str();
}

/// Reads a record written by write_record. Candidates are kept in external
/// form only. Throws ConfigError on malformed input.
inline RunRecord read_record(std::istream& in, const std::string& origin = "record") {
  RunRecord rec;
  std::string line;
  std::size_t lineno = 0;
  bool have_summary = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (have_summary) throw ConfigError(where, "content after the summary line");
    try {
      const auto j = detail::ojson::parse(line);
      if (j.contains("summary")) {
        const auto& s = j["summary"];
        rec.criterion = s.at("criterion").get<std::string>();
        rec.proposer = s.value("proposer", "");
        rec.objective = s.value("objective", "");
        rec.task = s.value("task", rec.objective);
        rec.seed = s.at("seed").get<std::uint64_t>();
        rec.dim_names = s.at("dims").get<std::vector<std::string>>();
        rec.summary.iterations = s.at("iterations").get<std::size_t>();
        if (!s.at("stop_iteration").is_null()) rec.summary.stop_iteration = s["stop_iteration"].get<std::size_t>();
        for (const auto& n : rec.dim_names) rec.summary.final_incumbent.push_back(s.at("final_incumbent").at(n));
        rec.summary.final_incumbent_value = s.at("final_incumbent_value").get<double>();
        rec.summary.reason = s.at("reason").get<std::string>();
        rec.config_hash = s.value("config_hash", "");
        have_summary = true;
        continue;
      }
      RunRow r;
      r.t = j.at("t").get<std::size_t>();
      for (const auto& [k, v] : j.at("candidate").items()) {
        (void)k;
        r.external.push_back(v.get<double>());
      }
      r.y = j.at("y").get<double>();
      r.test_metric = detail::json_opt(j, "test_metric");
      r.incumbent_value = j.at("incumbent_value").get<double>();
      r.incumbent_iteration = j.value("incumbent_iteration", std::size_t{0});
      r.incumbent_test = detail::json_opt(j, "incumbent_test");
      r.cv_variance = detail::json_opt(j, "cv_variance");
      r.r_bar = detail::json_opt(j, "r_bar");
      r.beta_t = detail::json_opt(j, "beta_t");
      r.max_acq = detail::json_opt(j, "max_acq");
      r.stop_statistic = detail::json_opt(j, "stop_statistic");
      r.stop_threshold = detail::json_opt(j, "stop_threshold");
      r.stopped = j.at("stopped").get<bool>();
      r.cum_seconds = j.at("cum_seconds").get<double>();
      r.true_regret = detail::json_opt(j, "true_regret");
      if (r.t != rec.rows.size() + 1) throw ConfigError(where, "rows must be numbered 1, 2, ...");
      rec.rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where, e.what());
    }
  }
  if (!have_summary) throw ConfigError(origin, "missing summary line");
  if (rec.rows.size() != rec.summary.iterations) throw ConfigError(origin, "row count disagrees with summary");
  std::size_t stops = 0;
  for (const auto& r : rec.rows) stops += r.stopped ? 1 : 0;
  if (stops > 1) throw ConfigError(origin, "more than one stopped row");
  return rec;
}

// ---------------------------------------------------------------------------

struct GapCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// For a finite domain with population values f and estimates fhat, checks
/// f(g*_t) - min f <= 2 max|fhat - f| + (fhat(g*_t) - min fhat), where g*_t
/// minimizes fhat over the first t_index entries.
inline GapCheck estimation_gap_check(std::span<const double> f, std::span<const double> fhat, std::size_t t_index) {
  if (f.size() != fhat.size()) throw LengthMismatch(f.size(), fhat.size());
  if (f.empty() || t_index < 1 || t_index > f.size()) throw InvalidArgument("gap check: need 1 <= t_index <= |f|");
  std::size_t star = 0;
  for (std::size_t i = 1; i < t_index; ++i) {
    if (fhat[i] < fhat[star]) star = i;
  }
  double min_f = f[0], min_fhat = fhat[0], eps = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    min_f = std::min(min_f, f[i]);
    min_fhat = std::min(min_fhat, fhat[i]);
    eps = std::max(eps, std::abs(fhat[i] - f[i]));
  }
  GapCheck g;
  g.lhs = f[star] - min_f;
  g.rhs = 2.0 * eps + (fhat[star] - min_fhat);
  g.holds = g.lhs <= g.rhs + 1e-12;
  return g;
}

}  // namespace bostop
