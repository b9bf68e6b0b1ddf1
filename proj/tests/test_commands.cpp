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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "bostop/commands.hpp"

using namespace bostop;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = BOSTOP_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bostop_cmd_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig synthetic_config(const fs::path& out) {
  ExperimentConfig c;
  c.objective.type = "synthetic";
  c.objective.name = "sphere";
  c.objective.dims = 2;
  c.criteria = {"conv:i=3"};
  c.seeds = {4};
  c.max_iters = 8;
  c.out = out.string();
  c.acq_budget = 256;
  c.bound_budget = 128;
  return c;
}

ExperimentConfig trace_config(const fs::path& out) {
  ExperimentConfig c;
  c.space_path = kFixtures + "/space_2d.json";
  c.objective.type = "trace";
  c.objective.trace_path = kFixtures + "/trace_plain.jsonl";
  c.criteria = {"conv:i=3"};
  c.seeds = {0};
  c.max_iters = 50;
  c.out = out.string();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BOSTOP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t jsonl_count(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".jsonl" ? 1 : 0;
  return n;
}

}  // namespace

TEST(ConfigParse, ReadsAllFields) {
  const auto j = nlohmann::json::parse(R"({
    "task": "t", "space": "s.json",
    "objective": {"type": "subprocess", "command": "./obj", "folds": 5, "timeout_seconds": 3},
    "proposer": "gp_pi", "criteria": ["conv"], "seeds": [1, 2], "max_iters": 7, "out": "o",
    "options": {"init_points": 4, "acq_budget": 100, "bound_budget": 50}})");
  const auto c = config_from_json(j, "/base");
  EXPECT_EQ(c.space_path, "/base/s.json");
  EXPECT_EQ(c.out, "/base/o");
  EXPECT_EQ(c.objective.subprocess.command, "./obj");
  EXPECT_EQ(c.objective.subprocess.folds, 5u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(c.init_points, 4u);
  EXPECT_EQ(c.bound_budget, 50u);
}

TEST(ConfigParse, ErrorsNameTheField) {
  auto field_of = [](const char* text) {
    try {
      config_from_json(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of(R"({"objective": {"type": "magic"}})"), "objective.type");
  EXPECT_EQ(field_of(R"({"objective": {"type": "synthetic"}})"), "objective.name");
  EXPECT_EQ(field_of(R"({"objective": {"type": "synthetic", "name": "sphere"}, "seeds": "x"})"), "seeds");
  EXPECT_EQ(field_of(R"({"objective": {"type": "trace", "path": "t"}})"), "space");
  EXPECT_EQ(field_of(R"({"proposer": "annealing", "objective": {}})"), "proposer");
}

TEST(CmdRun, MinimalSyntheticOneSeed) {
  const auto dir = scratch("min");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(synthetic_config(dir), {out, err}), 0) << err.str();
  EXPECT_TRUE(fs::exists(dir / "conv_3__seed4.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(jsonl_count(dir), 1u);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["records"].size(), 1u);
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);

  std::ifstream in(dir / "conv_3__seed4.jsonl");
  const auto rec = read_record(in);
  EXPECT_EQ(rec.rows.size(), 8u);  // runs continue past the stop
  EXPECT_EQ(rec.config_hash, manifest["config_hash"].get<std::string>());
  fs::remove_all(dir);
}

TEST(CmdRun, UnknownCriterionIsConfigError) {
  const auto dir = scratch("badcrit");
  auto c = synthetic_config(dir);
  c.criteria = {"telepathy:threshold=1"};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(c, {out, err}), 1);
  EXPECT_NE(err.str().find("criterion"), std::string::npos);
  EXPECT_EQ(jsonl_count(dir), 0u);
  fs::remove_all(dir);
}

TEST(CmdRun, CartesianProduct) {
  const auto dir = scratch("cart");
  auto c = synthetic_config(dir);
  c.criteria = {"conv:i=3", "regret_fixed:threshold=0.1,warmup=2", "none"};
  c.seeds = {0, 1};
  c.max_iters = 5;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(c, {out, err}), 0) << err.str();
  EXPECT_EQ(jsonl_count(dir), 6u);
  fs::remove_all(dir);
}

TEST(CmdRun, DuplicateLabelsRejected) {
  const auto dir = scratch("dup");
  auto c = synthetic_config(dir);
  c.criteria = {"conv:i=3", "conv:i=3"};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(c, {out, err}), 1);
  fs::remove_all(dir);
}

TEST(CmdRun, MissingTraceFileIsConfigError) {
  const auto dir = scratch("missing");
  auto c = trace_config(dir);
  c.objective.trace_path = kFixtures + "/no_such_trace.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(c, {out, err}), 1);
  EXPECT_NE(err.str().find("objective.path"), std::string::npos);
  fs::remove_all(dir);
}

TEST(CmdRun, ObjectiveFailureExitsTwo) {
  const auto dir = scratch("fail");
  ExperimentConfig c;
  c.space_path = kFixtures + "/space_2d.json";
  c.objective.type = "subprocess";
  c.objective.subprocess.command = "sh " + kFixtures + "/flaky_stub.sh";
  c.proposer = "random";
  c.criteria = {"conv:i=5"};
  c.seeds = {0};
  c.max_iters = 5;
  c.out = dir.string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(c, {out, err}), 2);
  EXPECT_NE(err.str().find("out of memory"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "conv_5__seed0.jsonl.failed"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_TRUE(manifest["records"][0].contains("error"));
  fs::remove_all(dir);
}

TEST(CmdRun, ByteIdenticalAcrossRunsAndWorkerCounts) {
  const auto a = scratch("repA"), b = scratch("repB");
  auto ca = synthetic_config(a), cb = synthetic_config(b);
  ca.criteria = cb.criteria = {"conv:i=3", "regret_fixed:threshold=0.05,warmup=3"};
  ca.seeds = cb.seeds = {0, 9};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(ca, {out, err}), 0);
  ::setenv("BOSTOP_WORKERS", "2", 1);
  const int code = cmd_run(cb, {out, err});
  ::unsetenv("BOSTOP_WORKERS");
  ASSERT_EQ(code, 0);
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CmdScore, TraceRunMatchesHandComputation) {
  const auto dir = scratch("score");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(trace_config(dir), {out, err}), 0) << err.str();
  ASSERT_EQ(cmd_score(dir.string(), 0, "", {out, err}), 0) << err.str();
  std::ifstream in(dir / "metrics.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, kMetricsHeader);
  // stale streak 0.72, 0.66, 0.66 after 0.65 at t=4 -> stop at t=7
  std::ifstream rin(dir / "conv_3__seed0.jsonl");
  const auto rec = read_record(rin);
  const auto m = metrics_from_record(rec, 12);
  ASSERT_TRUE(m.stop_iteration.has_value());
  EXPECT_EQ(*m.stop_iteration, 7u);
  EXPECT_DOUBLE_EQ(m.y_es, 0.67);
  EXPECT_DOUBLE_EQ(m.y_T, 0.66);
  EXPECT_DOUBLE_EQ(m.t_es, 98.0);
  EXPECT_DOUBLE_EQ(m.t_T, 198.0);
  EXPECT_DOUBLE_EQ(m.ryc, (0.66 - 0.67) / 0.67);
  EXPECT_DOUBLE_EQ(m.rtc, 100.0 / 198.0);
  EXPECT_EQ(row.substr(0, row.find(',')), "conv_3__seed0");

  const auto first = slurp(dir / "metrics.csv") + slurp(dir / "aggregate.csv");
  ASSERT_EQ(cmd_score(dir.string(), 0, "", {out, err}), 0);
  EXPECT_EQ(first, slurp(dir / "metrics.csv") + slurp(dir / "aggregate.csv"));
  fs::remove_all(dir);
}

TEST(CmdScore, MalformedRecordExitsOne) {
  const auto dir = scratch("malformed");
  std::ofstream(dir / "broken.jsonl") << "{\"t\": 1}\n";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_score(dir.string(), 0, "", {out, err}), 1);
  EXPECT_EQ(cmd_score((dir / "nope").string(), 0, "", {out, err}), 1);
  fs::remove_all(dir);
}

TEST(CmdDiagnose, NeedsTrueRegret) {
  const auto dir = scratch("diag_trace");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(trace_config(dir), {out, err}), 0);
  EXPECT_EQ(cmd_diagnose(dir.string(), "", {out, err}), 1);
  fs::remove_all(dir);

  const auto syn = scratch("diag_syn");
  auto c = synthetic_config(syn);
  c.criteria = {"regret_fixed:threshold=0.01,warmup=2"};
  ASSERT_EQ(cmd_run(c, {out, err}), 0);
  ASSERT_EQ(cmd_diagnose(syn.string(), "", {out, err}), 0) << err.str();
  std::ifstream in(syn / "bound_gap.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kGapHeader);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 7u);  // every row after the first carries a bound
  fs::remove_all(syn);
}

TEST(Cli, FlagsOverrideConfig) {
  const auto dir = scratch("cli");
  const auto cfg = dir / "exp.json";
  std::ofstream(cfg) << R"({"objective": {"type": "synthetic", "name": "sphere", "dims": 1},
    "criteria": ["none"], "seeds": [1], "max_iters": 3, "out": "ignored",
    "options": {"acq_budget": 64, "bound_budget": 64}})";
  const auto out = dir / "runs";
  EXPECT_EQ(run_cli("run --config " + cfg.string() + " --out " + out.string() +
                    " --seeds 5,6 --max-iters 4 --criterion conv:i=2 --criterion none"),
            0);
  EXPECT_EQ(jsonl_count(out), 4u);
  std::ifstream in(out / "conv_2__seed6.jsonl");
  EXPECT_EQ(read_record(in).rows.size(), 4u);
  EXPECT_FALSE(fs::exists(dir / "ignored"));

  EXPECT_EQ(run_cli("score --records " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "aggregate.csv"));
  EXPECT_EQ(run_cli("run --config " + cfg.string() + " --out " + out.string() + " --criterion bogus"), 1);
  EXPECT_EQ(run_cli("run --config " + (dir / "absent.json").string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  fs::remove_all(dir);
}
