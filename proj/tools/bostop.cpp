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

// bostop run      --config exp.json [--out DIR] [--seeds 0,1,2] [--max-iters N] [--criterion SPEC]...
// bostop score    --records DIR [--budget T] [--out DIR]
// bostop diagnose --records DIR [--out DIR]
//
// Worker threads for `run`: BOSTOP_WORKERS (default 1).

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bostop/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization with early stopping: experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir, records_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> criteria;
  std::size_t max_iters = 0, budget = 0;

  auto* run = app.add_subcommand("run", "Execute every (criterion, seed) pair and write records");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--seeds", seeds, "Comma-separated seeds (overrides the config)")->delimiter(',');
  run->add_option("--max-iters", max_iters, "Iteration budget (overrides the config)");
  run->add_option("--criterion", criteria, "NAME:key=val,... (repeatable; overrides the config)");

  auto* score = app.add_subcommand("score", "Compute RYC/RTC per record and aggregates");
  score->add_option("--records", records_dir, "Directory of record files")->required();
  score->add_option("--budget", budget, "Budget T (default: full record length)");
  score->add_option("--out", out_dir, "Output directory (default: the records directory)");

  auto* diagnose = app.add_subcommand("diagnose", "Bound minus true regret per iteration");
  diagnose->add_option("--records", records_dir, "Directory of record files")->required();
  diagnose->add_option("--out", out_dir, "Output directory (default: the records directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (run->parsed()) {
    bostop::ExperimentConfig config;
    try {
      config = bostop::load_config(config_path);
    } catch (const bostop::Error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 1;
    }
    if (!out_dir.empty()) config.out = out_dir;
    if (!seeds.empty()) config.seeds = seeds;
    if (max_iters > 0) config.max_iters = max_iters;
    if (!criteria.empty()) config.criteria = criteria;
    return bostop::cmd_run(config);
  }
  if (score->parsed()) return bostop::cmd_score(records_dir, budget, out_dir);
  return bostop::cmd_diagnose(records_dir, out_dir);
}
