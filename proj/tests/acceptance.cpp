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

// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit code
// is the number of failures.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bostop/bostop.hpp"
#include "oracles.hpp"

using namespace bostop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

oracle::Params to_oracle(const KernelParams& p) {
  oracle::Params o;
  o.signal = p.signal_variance;
  for (Eigen::Index i = 0; i < p.lengthscales.size(); ++i) o.lengthscales.push_back(p.lengthscales[i]);
  o.noise = p.noise_variance;
  o.mean = p.mean_const;
  return o;
}

std::vector<oracle::Point> to_points(const std::vector<Candidate>& xs) {
  std::vector<oracle::Point> out;
  for (const auto& c : xs) out.emplace_back(c.coords().data(), c.coords().data() + c.size());
  return out;
}

struct Instance {
  KernelParams params;
  std::vector<Candidate> X;
  Eigen::VectorXd y;
};

Instance random_instance(Rng& rng, std::size_t max_n, std::size_t max_d) {
  const std::size_t d = 1 + rng() % max_d;
  const std::size_t n = 1 + rng() % max_n;
  Instance inst;
  inst.params.lengthscales.resize(static_cast<Eigen::Index>(d));
  for (auto& l : inst.params.lengthscales) l = 0.1 + uniform01(rng);
  inst.params.signal_variance = 0.2 + 2.0 * uniform01(rng);
  inst.params.noise_variance = std::exp(std::log(1e-3) + uniform01(rng) * std::log(100.0));
  inst.params.mean_const = standard_normal(rng);
  inst.X = sample_candidates(SearchSpace::unit_cube(d), n, rng);
  inst.y.resize(static_cast<Eigen::Index>(n));
  for (auto& v : inst.y) v = standard_normal(rng);
  return inst;
}

// ---------------------------------------------------------------------------

Outcome cv_constant() {
  const auto [num, den] = correction_factor_rational(10, 1, 9);
  const double v = correction_factor(10, 1, 9);
  const bool ok = num == 19 && den == 90 && v == 19.0 / 90.0 && std::round(v * 100.0) / 100.0 == 0.21;
  return {ok, std::to_string(num) + "/" + std::to_string(den) + " = " + fmt("%.6f", v)};
}

Outcome gp_oracle() {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng, 8, 4);
    const auto gp = GPPosterior::condition(inst.params, inst.X, inst.y);
    const std::vector<double> yv(inst.y.data(), inst.y.data() + inst.y.size());
    const auto op = to_oracle(inst.params);
    const auto pts = to_points(inst.X);
    for (const auto& q : sample_candidates(SearchSpace::unit_cube(inst.params.dims()), 5, rng)) {
      const auto [m, v] = gp.predict_raw(q.coords());
      const auto [om, ov] = oracle::dense_predict(op, pts, yv, to_points({q})[0]);
      worst = std::max({worst, std::abs(m - static_cast<double>(om)), std::abs(v - static_cast<double>(ov))});
    }
    const double lml = log_marginal_likelihood(inst.params, inst.X, inst.y);
    worst = std::max(worst, std::abs(lml - static_cast<double>(oracle::dense_lml(op, pts, yv))));
  }
  return {worst <= 1e-8, "max abs error " + fmt("%.3g", worst)};
}

Outcome mle_gradient() {
  Rng rng(103);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, 8, 4);
    inst.params.noise_variance = std::max(inst.params.noise_variance, 1e-2);
    const auto g = log_marginal_likelihood_with_gradient(inst.params, inst.X, inst.y).gradient;
    const Eigen::VectorXd theta = pack_log_params(inst.params);
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      const double fd = (log_marginal_likelihood(unpack_log_params(tp), inst.X, inst.y) -
                         log_marginal_likelihood(unpack_log_params(tm), inst.X, inst.y)) /
                        (2.0 * h);
      worst = std::max(worst, std::abs(g[k] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return {worst <= 1e-4, "max relative error " + fmt("%.3g", worst)};
}

Outcome bound_validity() {
  constexpr std::size_t kGrid = 100, kFunctions = 50, kIters = 30;
  std::vector<Candidate> grid;
  std::vector<oracle::Point> gpts;
  for (std::size_t i = 0; i < kGrid; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(kGrid - 1);
    grid.push_back(Candidate{x});
    gpts.push_back({x});
  }
  const KernelParams params = KernelParams::isotropic(1, 0.1, 1.0, 1e-4);
  const auto op = to_oracle(params);
  Eigen::MatrixXd K(kGrid, kGrid);
  for (std::size_t i = 0; i < kGrid; ++i) {
    for (std::size_t j = 0; j < kGrid; ++j) K(i, j) = static_cast<double>(oracle::matern52(op, gpts[i], gpts[j]));
  }
  K.diagonal().array() += 1e-9;
  const Eigen::MatrixXd L = K.llt().matrixL();
  const BetaSchedule schedule{0.1, kGrid, 5.0};

  Rng rng(107);
  std::size_t pairs = 0, valid = 0;
  for (std::size_t fn = 0; fn < kFunctions; ++fn) {
    Eigen::VectorXd z(kGrid);
    for (auto& v : z) v = standard_normal(rng);
    const Eigen::VectorXd f = L * z;
    const double f_min = f.minCoeff();
    std::vector<Candidate> X;
    std::vector<double> y;
    double best_f = std::numeric_limits<double>::infinity();
    std::size_t next = rng() % kGrid;
    for (std::size_t t = 1; t <= kIters; ++t) {
      X.push_back(grid[next]);
      y.push_back(f[static_cast<Eigen::Index>(next)] + std::sqrt(params.noise_variance) * standard_normal(rng));
      best_f = std::min(best_f, f[static_cast<Eigen::Index>(next)]);
      const auto gp = GPPosterior::condition(params, X, Eigen::Map<const Eigen::VectorXd>(y.data(), y.size()));
      const auto rb = regret_bound_on_pool(gp, X, beta(schedule, t), grid);
      const double r_hat = best_f - f_min;
      ++pairs;
      valid += rb.r_bar >= r_hat ? 1 : 0;
      const double incumbent = *std::min_element(y.begin(), y.end());
      const auto prop = propose_from(gp, {AcqKind::kExpectedImprovement, incumbent}, grid);
      next = static_cast<std::size_t>(std::lround(prop.candidate[0] * static_cast<double>(kGrid - 1)));
    }
  }
  const double rate = static_cast<double>(valid) / static_cast<double>(pairs);
  return {rate >= 0.95, std::to_string(valid) + "/" + std::to_string(pairs) + " valid (" + fmt("%.4f", rate) + ")"};
}

Outcome bound_enumeration() {
  Rng rng(109);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 3;
    const std::size_t m = 20 + rng() % 181;
    const auto grid = sample_candidates(SearchSpace::unit_cube(d), m, rng);
    const std::size_t n = 2 + rng() % 10;
    std::vector<Candidate> X;
    for (std::size_t i = 0; i < n; ++i) X.push_back(grid[rng() % m]);
    std::vector<double> yv(n);
    for (auto& v : yv) v = standard_normal(rng);
    KernelParams params = KernelParams::isotropic(d, 0.1 + 0.5 * uniform01(rng), 0.5 + uniform01(rng), 1e-3);
    params.mean_const = 0.3 * standard_normal(rng);
    const auto gp = GPPosterior::condition(params, X, Eigen::Map<const Eigen::VectorXd>(yv.data(), n));
    const std::size_t t = 1 + rng() % 50;
    const double b = beta(BetaSchedule{0.1, m, 5.0}, t);
    const auto rb = regret_bound_on_pool(gp, X, b, grid);
    const auto expected =
        oracle::grid_regret_bound(to_oracle(params), to_points(X), yv, to_points(X), to_points(grid), b);
    worst = std::max(worst, std::abs(rb.r_bar - static_cast<double>(expected)));
  }
  return {worst <= 1e-10, "max abs error " + fmt("%.3g", worst)};
}

Outcome termination_success() {
  const std::vector<SyntheticFunction> fns{sphere(2), branin_rescaled(), gp_sample(1, 1), gp_sample(2, 2),
                                           gp_sample(3, 3)};
  std::size_t terminated = 0, success = 0, runs = 0;
  std::ostringstream per;
  for (const auto& fn : fns) {
    std::size_t fn_term = 0, fn_succ = 0;
    for (double threshold : {0.01, 0.001}) {
      CriterionConfig c;
      c.kind = CriterionKind::kRegretFixed;
      c.threshold = threshold;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SyntheticObjective obj(fn);
        const auto rec = run(obj, Proposer::gpbo(), c, 80, seed);
        ++runs;
        if (!rec.summary.stop_iteration) continue;
        ++fn_term;
        fn_succ += *rec.rows.back().true_regret <= threshold ? 1 : 0;
      }
    }
    terminated += fn_term;
    success += fn_succ;
    per << ' ' << fn.name << '_' << fn.space.size() << "d " << fn_succ << '/' << fn_term;
  }
  const double rate = terminated ? static_cast<double>(success) / static_cast<double>(terminated) : 0.0;
  return {terminated > 0 && rate >= 0.75,
          std::to_string(success) + "/" + std::to_string(terminated) + " terminated runs within threshold (" +
              fmt("%.3f", rate) + "), " + std::to_string(terminated) + "/" + std::to_string(runs) +
              " terminated;" + per.str()};
}

std::optional<std::size_t> replay_stop(const std::string& trace, std::size_t i) {
  ReplayObjective obj(SearchSpace::unit_cube(1), load_trace(std::string(BOSTOP_FIXTURE_DIR) + "/" + trace));
  CriterionConfig c;
  c.kind = CriterionKind::kConvI;
  c.i = i;
  return run(obj, Proposer::random_search(), c, 100, 0).summary.stop_iteration;
}

std::optional<std::size_t> acq_stop(CriterionKind kind, double threshold, std::size_t warmup, bool strict,
                                    const std::vector<double>& series) {
  CriterionConfig c;
  c.kind = kind;
  c.threshold = threshold;
  c.warmup_iters = warmup;
  c.strict = strict;
  StopChecker checker(c);
  for (std::size_t t = 1; t <= series.size(); ++t) {
    StopInputs in;
    in.t = t;
    in.max_acq = series[t - 1];
    if (checker.check(in).should_stop) return t;
  }
  return std::nullopt;
}

Outcome baseline_determinism() {
  std::size_t bad = 0;
  std::string detail;
  auto expect = [&](const std::string& what, std::optional<std::size_t> got, std::size_t want) {
    bad += (!got || *got != want) ? 1 : 0;
    detail += (detail.empty() ? "" : " ") + what + "@" + (got ? std::to_string(*got) : "none") + " (want " +
              std::to_string(want) + ")";
  };
  // stale run 0.72, 0.66, 0.66 after 0.65
  expect("conv3", replay_stop("trace_plain.jsonl", 3), 7);
  // nine stale rows end in an improvement at 18, then ten stale rows
  expect("conv10", replay_stop("trace_conv10.jsonl", 10), 28);
  // 0.005 falls in warmup; 0.01 equals the threshold
  expect("ei", acq_stop(CriterionKind::kEIThreshold, 0.01, 5, true, {0.5, 0.2, 0.005, 0.1, 0.02, 0.03, 0.01, 0.008}),
         8);
  // non-strict comparison fires on equality
  expect("pi", acq_stop(CriterionKind::kPIThreshold, 0.05, 3, false, {0.9, 0.04, 0.3, 0.2, 0.05, 0.01}), 5);
  return {bad == 0, detail};
}

Outcome gap_property() {
  Rng rng(113);
  std::size_t holds = 0, agree = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 50;
    std::vector<double> f(n), fhat(n);
    const double scale = uniform01(rng) * 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = standard_normal(rng);
      fhat[i] = f[i] + scale * standard_normal(rng);
    }
    const std::size_t t = 1 + rng() % n;
    std::size_t star = 0;
    for (std::size_t i = 0; i < t; ++i) star = fhat[i] < fhat[star] ? i : star;
    double eps = 0.0;
    for (std::size_t i = 0; i < n; ++i) eps = std::max(eps, std::abs(f[i] - fhat[i]));
    const double lhs = f[star] - *std::min_element(f.begin(), f.end());
    const double rhs = 2.0 * eps + fhat[star] - *std::min_element(fhat.begin(), fhat.end());
    holds += lhs <= rhs + 1e-12 ? 1 : 0;
    min_slack = std::min(min_slack, rhs - lhs);
    const auto g = estimation_gap_check(f, fhat, t);
    agree += (g.holds && std::abs(g.lhs - lhs) <= 1e-15 && std::abs(g.rhs - rhs) <= 1e-12) ? 1 : 0;
  }
  return {holds == 1000 && agree == 1000,
          std::to_string(holds) + "/1000 hold, library agrees on " + std::to_string(agree) + ", min slack " +
              fmt("%.3g", min_slack)};
}

Outcome metrics_oracle() {
  struct R {
    double y_T, y_es;
    double num, den;
  };
  // dyadic inputs keep the subtraction exact
  const std::vector<R> ryc_cases{
      {1.0, 0.5, 0.5, 1.0},     {0.5, 1.0, -0.5, 1.0},   {0.75, 0.5, 1.0, 3.0},   {0.5, 0.75, -1.0, 3.0},
      {0.25, 0.25, 0.0, 1.0},   {2.0, 0.5, 3.0, 4.0},    {0.125, 0.375, -2.0, 3.0}, {3.0, 1.0, 2.0, 3.0},
      {0.625, 0.5, 1.0, 5.0},   {0.5, 0.625, -1.0, 5.0}};
  struct T {
    double t_T, t_es, num, den;
  };
  const std::vector<T> rtc_cases{{200, 150, 1, 4}, {200, 200, 0, 1}, {10, 0, 1, 1},   {3, 1, 2, 3},
                                 {7, 2, 5, 7},     {100, 1, 99, 100}, {8, 6, 1, 4},  {9, 3, 2, 3},
                                 {5.5, 0.5, 10, 11}, {1.5, 1, 1, 3}};
  std::size_t exact = 0;
  for (const auto& c : ryc_cases) exact += ryc(c.y_T, c.y_es) == c.num / c.den ? 1 : 0;
  for (const auto& c : rtc_cases) exact += rtc(c.t_T, c.t_es) == c.num / c.den ? 1 : 0;

  Rng rng(127);
  std::size_t violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = uniform01(rng) * 100.0, b = uniform01(rng) * 100.0;
    const double r = ryc(a, b);
    violations += (r < -1.0 || r > 1.0 || (a > b) != (r > 0.0) || (ryc(b, a) > 0.0) != (r < 0.0)) ? 1 : 0;
    const double t_T = 1e-6 + uniform01(rng) * 1e4;
    const double t_es = uniform01(rng) * t_T;
    const double q = rtc(t_T, t_es);
    violations += (q < 0.0 || q > 1.0) ? 1 : 0;
  }
  return {exact == 20 && violations == 0,
          std::to_string(exact) + "/20 fixtures exact, " + std::to_string(violations) + " range violations"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BOSTOP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / ("bostop_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "exp.json") << R"({
    "objective": {"type": "synthetic", "name": "branin"},
    "proposer": "gp_ei",
    "criteria": ["regret_fixed:threshold=0.01,warmup=10", "conv:i=5", "ei:threshold=0.001,warmup=10"],
    "seeds": [7],
    "max_iters": 25,
    "out": "unused"
  })";
  const int a = run_cli("run --config " + (dir / "exp.json").string() + " --out " + (dir / "a").string());
  const int b = run_cli("run --config " + (dir / "exp.json").string() + " --out " + (dir / "b").string());
  std::size_t files = 0, same = 0;
  if (a == 0 && b == 0) {
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      ++files;
      same += slurp(e.path()) == slurp(dir / "b" / e.path().filename()) ? 1 : 0;
    }
  }
  fs::remove_all(dir);
  return {a == 0 && b == 0 && files == 4 && same == files,
          "exit " + std::to_string(a) + "/" + std::to_string(b) + ", " + std::to_string(same) + "/" +
              std::to_string(files) + " files identical"};
}

Outcome acquisition_forms() {
  Rng rng(131);
  std::normal_distribution<double> n01;
  double worst_ei = 0.0, worst_pi = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double mu = -1.0 + 2.0 * uniform01(rng);
    const double sd = 0.1 + 0.9 * uniform01(rng);
    const double best = -1.0 + 2.0 * uniform01(rng);
    // antithetic pairs, 10^7 samples in total
    double sum = 0.0;
    for (int s = 0; s < 5'000'000; ++s) {
      const double z = n01(rng);
      sum += std::max(best - (mu + sd * z), 0.0) + std::max(best - (mu - sd * z), 0.0);
    }
    const double mc = sum / 1e7;
    worst_ei = std::max(worst_ei, std::abs(acq_value({AcqKind::kExpectedImprovement, best}, mu, sd * sd) - mc));
    worst_pi = std::max(worst_pi, std::abs(acq_value({AcqKind::kProbabilityOfImprovement, best}, mu, sd * sd) -
                                           oracle::normal_cdf((best - mu) / sd)));
  }
  return {worst_ei <= 1e-3 && worst_pi <= 1e-10,
          "EI max |err| " + fmt("%.3g", worst_ei) + ", PI max |err| " + fmt("%.3g", worst_pi)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"cv correction constant", cv_constant},
      {"gp posterior oracle equivalence", gp_oracle},
      {"mle gradient check", mle_gradient},
      {"bound validity rate", bound_validity},
      {"regret bound enumeration equivalence", bound_enumeration},
      {"termination success rate", termination_success},
      {"baseline determinism", baseline_determinism},
      {"gap inequality property", gap_property},
      {"metrics oracle", metrics_oracle},
      {"end-to-end reproducibility", reproducibility},
      {"acquisition closed forms", acquisition_forms},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << checks[i].first << ": " << o.detail << " ("
              << fmt("%.2f", secs) << " s)" << std::endl;
  }
  std::cout << (checks.size() - static_cast<std::size_t>(failures)) << "/" << checks.size() << " criteria passed"
            << std::endl;
  return failures;
}
