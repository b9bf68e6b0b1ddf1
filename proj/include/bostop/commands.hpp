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

// Batch commands behind the bostop executable: run, score, diagnose.
//
// Experiment config (JSON):
//   {
//     "task": "branin",                         optional, defaults to the objective's name
//     "space": "space.json",                    required for subprocess and trace objectives
//     "objective": {"type": "synthetic", "name": "branin", "dims": 2, "seed": 0,
//                   "noise_sd": 0, "folds": 0, "eval_seconds": 1}
//                | {"type": "subprocess", "command": "...", "folds": 5, "timeout_seconds": 0}
//                | {"type": "trace", "path": "trace.jsonl"},
//     "proposer": "gp_ei",
//     "criteria": ["regret_cv", "conv:i=10", "regret_fixed:threshold=0.01"],
//     "seeds": [0, 1, 2],
//     "max_iters": 50,
//     "out": "runs",
//     "options": {"init_points": 3, "acq_budget": 2048, "bound_budget": 1024}
//   }
// Relative paths resolve against the config file's directory.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bostop/engine.hpp"
#include "bostop/error.hpp"
#include "bostop/metrics.hpp"
#include "bostop/objective.hpp"
#include "bostop/random.hpp"
#include "bostop/space.hpp"
#include "bostop/stopping.hpp"

namespace bostop {

namespace fs = std::filesystem;

struct ObjectiveSpec {
  std::string type;  // synthetic | subprocess | trace
  std::string name;
  std::size_t dims = 2;
  std::uint64_t seed = 0;
  SyntheticOptions synthetic;
  SubprocessOptions subprocess;
  std::string trace_path;
};

struct ExperimentConfig {
  std::string task;
  std::string space_path;
  ObjectiveSpec objective;
  std::string proposer = "gp_ei";
  std::vector<std::string> criteria;
  std::vector<std::uint64_t> seeds;
  std::size_t max_iters = 0;
  std::string out;
  std::size_t init_points = 3;
  std::size_t acq_budget = 2048;
  std::size_t bound_budget = 1024;
};

namespace detail {

inline std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

template <typename T>
T config_get(const nlohmann::json& j, const char* key, const std::string& field, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

}  // namespace detail

/// Parses and validates a config object. `base` is the directory relative
/// paths resolve against.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base = ".") {
  using detail::config_get;
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  ExperimentConfig c;
  c.task = config_get<std::string>(j, "task", "task", "");
  c.space_path = detail::resolve(base, config_get<std::string>(j, "space", "space", ""));
  c.proposer = config_get<std::string>(j, "proposer", "proposer", c.proposer);
  parse_proposer(c.proposer);

  if (!j.contains("objective") || !j["objective"].is_object()) throw ConfigError("objective", "missing");
  const auto& jo = j["objective"];
  auto& o = c.objective;
  o.type = config_get<std::string>(jo, "type", "objective.type", "");
  if (o.type == "synthetic") {
    o.name = config_get<std::string>(jo, "name", "objective.name", "");
    o.dims = config_get<std::size_t>(jo, "dims", "objective.dims", o.dims);
    o.seed = config_get<std::uint64_t>(jo, "seed", "objective.seed", o.seed);
    o.synthetic.noise_sd = config_get<double>(jo, "noise_sd", "objective.noise_sd", 0.0);
    o.synthetic.folds = config_get<std::size_t>(jo, "folds", "objective.folds", 0);
    o.synthetic.eval_seconds = config_get<double>(jo, "eval_seconds", "objective.eval_seconds", 1.0);
    if (o.name.empty()) throw ConfigError("objective.name", "missing");
  } else if (o.type == "subprocess") {
    o.subprocess.command = config_get<std::string>(jo, "command", "objective.command", "");
    o.subprocess.folds = config_get<std::size_t>(jo, "folds", "objective.folds", 0);
    o.subprocess.timeout_seconds = config_get<double>(jo, "timeout_seconds", "objective.timeout_seconds", 0.0);
    if (o.subprocess.command.empty()) throw ConfigError("objective.command", "missing");
    if (c.space_path.empty()) throw ConfigError("space", "required for subprocess objectives");
  } else if (o.type == "trace") {
    o.trace_path = detail::resolve(base, config_get<std::string>(jo, "path", "objective.path", ""));
    if (o.trace_path.empty()) throw ConfigError("objective.path", "missing");
    if (c.space_path.empty()) throw ConfigError("space", "required for trace objectives");
  } else {
    throw ConfigError("objective.type", "unknown objective type '" + o.type + "'");
  }

  if (j.contains("criteria")) {
    if (!j["criteria"].is_array()) throw ConfigError("criteria", "must be a list of strings");
    for (const auto& x : j["criteria"]) {
      if (!x.is_string()) throw ConfigError("criteria", "must be a list of strings");
      c.criteria.push_back(x.get<std::string>());
    }
  }
  c.seeds = config_get<std::vector<std::uint64_t>>(j, "seeds", "seeds", {});
  c.max_iters = config_get<std::size_t>(j, "max_iters", "max_iters", 0);
  c.out = detail::resolve(base, config_get<std::string>(j, "out", "out", ""));
  if (j.contains("options")) {
    const auto& op = j["options"];
    c.init_points = config_get<std::size_t>(op, "init_points", "options.init_points", c.init_points);
    c.acq_budget = config_get<std::size_t>(op, "acq_budget", "options.acq_budget", c.acq_budget);
    c.bound_budget = config_get<std::size_t>(op, "bound_budget", "options.bound_budget", c.bound_budget);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", e.what());
  }
  return config_from_json(j, fs::path(path).parent_path());
}

/// Checks the launch-time invariants: files exist, seeds and criteria are
/// non-empty, every criterion parses and labels are unique.
inline std::vector<CriterionConfig> validate_config(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError("seeds", "must not be empty");
  if (c.max_iters < 1) throw ConfigError("max_iters", "must be >= 1");
  if (c.out.empty()) throw ConfigError("out", "missing");
  if (c.criteria.empty()) throw ConfigError("criteria", "must not be empty");
  if (!c.space_path.empty() && !fs::exists(c.space_path)) {
    throw ConfigError("space", "file '" + c.space_path + "' does not exist");
  }
  if (c.objective.type == "trace" && !fs::exists(c.objective.trace_path)) {
    throw ConfigError("objective.path", "file '" + c.objective.trace_path + "' does not exist");
  }
  if (c.init_points < 1) throw ConfigError("options.init_points", "must be >= 1");
  if (c.acq_budget < 1) throw ConfigError("options.acq_budget", "must be >= 1");
  if (c.bound_budget < 1) throw ConfigError("options.bound_budget", "must be >= 1");
  std::vector<CriterionConfig> out;
  std::vector<std::string> labels;
  for (const auto& s : c.criteria) {
    auto cfg = parse_criterion(s);
    const auto label = cfg.label();
    if (std::find(labels.begin(), labels.end(), label) != labels.end()) {
      throw ConfigError("criteria", "duplicate criterion '" + label + "'");
    }
    labels.push_back(label);
    out.push_back(cfg);
  }
  return out;
}

/// Canonical form used for the provenance hash; the output directory is
/// excluded so the same experiment hashes equally wherever it is written.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json o;
  const auto& ob = c.objective;
  o["type"] = ob.type;
  if (ob.type == "synthetic") {
    o["name"] = ob.name;
    o["dims"] = ob.dims;
    o["seed"] = ob.seed;
    o["noise_sd"] = ob.synthetic.noise_sd;
    o["folds"] = ob.synthetic.folds;
    o["eval_seconds"] = ob.synthetic.eval_seconds;
  } else if (ob.type == "subprocess") {
    o["command"] = ob.subprocess.command;
    o["folds"] = ob.subprocess.folds;
    o["timeout_seconds"] = ob.subprocess.timeout_seconds;
  } else {
    o["path"] = fs::path(ob.trace_path).filename().string();
  }
  nlohmann::ordered_json j;
  j["task"] = c.task;
  j["space"] = c.space_path.empty() ? "" : fs::path(c.space_path).filename().string();
  j["objective"] = o;
  j["proposer"] = c.proposer;
  j["criteria"] = c.criteria;
  j["seeds"] = c.seeds;
  j["max_iters"] = c.max_iters;
  j["options"] = {{"init_points", c.init_points}, {"acq_budget", c.acq_budget}, {"bound_budget", c.bound_budget}};
  return j;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of the canonical config plus the contents of referenced files.
inline std::string config_hash(const ExperimentConfig& c) {
  std::string bytes = config_to_json(c).dump();
  auto slurp = [&](const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    bytes += '\n' + os.str();
  };
  slurp(c.space_path);
  slurp(c.objective.trace_path);
  return hex64(fnv1a64(bytes));
}

inline std::unique_ptr<Objective> make_objective(const ExperimentConfig& c) {
  const auto& o = c.objective;
  if (o.type == "synthetic") {
    try {
      return std::make_unique<SyntheticObjective>(make_synthetic(o.name, o.dims, o.seed), o.synthetic);
    } catch (const InvalidArgument& e) {
      throw ConfigError("objective", e.what());
    }
  }
  const auto space = load_space(c.space_path);
  if (o.type == "subprocess") return std::make_unique<SubprocessObjective>(space, o.subprocess);
  return std::make_unique<ReplayObjective>(space, load_trace(o.trace_path));
}

/// Writes `content` to `path` through a sibling temporary and a rename.
inline void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string record_file_name(const std::string& criterion_label, std::uint64_t seed) {
  return criterion_label + "__seed" + std::to_string(seed) + ".jsonl";
}

/// BOSTOP_WORKERS, default 1.
inline std::size_t worker_count() {
  const char* env = std::getenv("BOSTOP_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("BOSTOP_WORKERS", "must be a positive integer");
  return static_cast<std::size_t>(v);
}

struct CommandStreams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

// ---------------------------------------------------------------------------
// run

inline int cmd_run(const ExperimentConfig& config, CommandStreams io = {}) {
  std::vector<CriterionConfig> criteria;
  Proposer proposer;
  std::string hash;
  try {
    criteria = validate_config(config);
    proposer = parse_proposer(config.proposer);
    make_objective(config);  // surfaces unknown names and unreadable files up front
    hash = config_hash(config);
    fs::create_directories(config.out);
  } catch (const Error& e) {
    io.err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    io.err << "config error: " << e.what() << '\n';
    return 1;
  }

  RunOptions opt;
  opt.init_points = config.init_points;
  opt.inner.budget = config.acq_budget;
  opt.bound_budget = config.bound_budget;
  opt.halt_on_stop = false;

  struct Job {
    const CriterionConfig* criterion;
    std::uint64_t seed;
    std::string file;
    std::optional<RunRecord> record;
    std::string failure;
    bool config_failure = false;
  };
  std::vector<Job> jobs;
  for (const auto& cr : criteria) {
    for (auto seed : config.seeds) jobs.push_back({&cr, seed, record_file_name(cr.label(), seed), {}, {}});
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
      auto& job = jobs[k];
      try {
        auto objective = make_objective(config);
        auto rec = run(*objective, proposer, *job.criterion, config.max_iters, job.seed, opt);
        if (!config.task.empty()) rec.task = config.task;
        write_atomic(fs::path(config.out) / job.file, record_to_string(rec, hash));
        job.record = std::move(rec);
      } catch (const ObjectiveFailure& e) {
        auto partial = e.partial();
        if (!config.task.empty()) partial.task = config.task;
        job.failure = e.what();
        write_atomic(fs::path(config.out) / (job.file + ".failed"), record_to_string(partial, hash));
      } catch (const ConfigError& e) {
        job.failure = e.what();
        job.config_failure = true;
      } catch (const NotAvailable& e) {
        job.failure = e.what();
        job.config_failure = true;
      } catch (const std::exception& e) {
        job.failure = e.what();
      }
      std::lock_guard<std::mutex> lock(log_mu);
      if (job.failure.empty()) {
        io.out << "wrote " << job.file << '\n';
      } else {
        io.err << job.file << ": " << job.failure << '\n';
      }
    }
  };
  std::size_t workers = 1;
  try {
    workers = std::min(worker_count(), jobs.size());
  } catch (const ConfigError& e) {
    io.err << "config error: " << e.what() << '\n';
    return 1;
  }
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  nlohmann::ordered_json manifest;
  manifest["config_hash"] = hash;
  manifest["config"] = config_to_json(config);
  manifest["records"] = nlohmann::ordered_json::array();
  int code = 0;
  for (const auto& job : jobs) {
    nlohmann::ordered_json e{{"file", job.file}, {"criterion", job.criterion->label()}, {"seed", job.seed}};
    if (job.record) {
      const auto& s = job.record->summary;
      e["iterations"] = s.iterations;
      e["stop_iteration"] = s.stop_iteration ? nlohmann::ordered_json(*s.stop_iteration) : nlohmann::ordered_json();
      e["reason"] = s.reason;
    } else {
      e["error"] = job.failure;
      code = std::max(code, job.config_failure ? 1 : 2);
    }
    manifest["records"].push_back(e);
  }
  write_atomic(fs::path(config.out) / "manifest.json", manifest.dump(2) + "\n");
  return code;
}

// ---------------------------------------------------------------------------
// score / diagnose

/// Record files (*.jsonl) in a directory, sorted by name.
inline std::vector<fs::path> record_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("records", "'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("records", "no record files in '" + dir.string() + "'");
  return out;
}

inline RunRecord load_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("records", "cannot open '" + path.string() + "'");
  return read_record(in, path.filename().string());
}

/// Writes metrics.csv and aggregate.csv into `out_dir` (default: the records
/// directory). budget 0 scores each record at its full length.
inline int cmd_score(const std::string& records_dir, std::size_t budget, const std::string& out_dir = "",
                     CommandStreams io = {}) {
  try {
    std::vector<MetricsRow> rows;
    for (const auto& p : record_files(records_dir)) {
      const auto rec = load_record(p);
      if (rec.rows.empty()) throw ConfigError(p.filename().string(), "record has no rows");
      const std::size_t T = budget == 0 ? rec.rows.size() : budget;
      try {
        rows.push_back(metrics_from_record(rec, T, p.stem().string()));
      } catch (const BadTimes& e) {
        throw ConfigError(p.filename().string(), e.what());
      }
    }
    const fs::path dest = out_dir.empty() ? fs::path(records_dir) : fs::path(out_dir);
    fs::create_directories(dest);
    std::ostringstream m, a;
    write_metrics_csv(m, rows);
    write_aggregate_csv(a, aggregate(rows));
    write_atomic(dest / "metrics.csv", m.str());
    write_atomic(dest / "aggregate.csv", a.str());
    io.out << "scored " << rows.size() << " records\n";
    return 0;
  } catch (const Error& e) {
    io.err << "score: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    io.err << "score: " << e.what() << '\n';
    return 1;
  }
}

inline constexpr const char* kGapSummaryHeader = "run_id,points,negatives,q20,q50,q80,config_hash";

/// Writes bound_gap.csv (per iteration) and bound_gap_summary.csv (per run).
inline int cmd_diagnose(const std::string& records_dir, const std::string& out_dir = "", CommandStreams io = {}) {
  try {
    std::ostringstream series, summary;
    series << kGapHeader << '\n';
    summary << kGapSummaryHeader << '\n';
    std::size_t total_neg = 0, total_points = 0;
    for (const auto& p : record_files(records_dir)) {
      const auto rec = load_record(p);
      GapSeries g;
      try {
        g = bound_gap_series(rec);
      } catch (const NotAvailable&) {
        throw ConfigError(p.filename().string(), "record has no true-regret column");
      }
      const auto id = p.stem().string();
      write_gap_rows(series, id, g);
      summary << csv_field(id) << ',' << g.points.size() << ',' << g.negatives << ',' << fmt17(g.q20) << ','
              << fmt17(g.q50) << ',' << fmt17(g.q80) << ',' << csv_field(rec.config_hash) << '\n';
      total_neg += g.negatives;
      total_points += g.points.size();
    }
    const fs::path dest = out_dir.empty() ? fs::path(records_dir) : fs::path(out_dir);
    fs::create_directories(dest);
    write_atomic(dest / "bound_gap.csv", series.str());
    write_atomic(dest / "bound_gap_summary.csv", summary.str());
    io.out << "negative differences: " << total_neg << " of " << total_points << '\n';
    return 0;
  } catch (const Error& e) {
    io.err << "diagnose: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    io.err << "diagnose: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace bostop
