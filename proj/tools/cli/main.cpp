// Copyright 2026 The gbasim Authors.
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

// gbasim: simulate contrastive pretraining under conventional, grouped and
// grouped-with-accumulation ITC aggregation.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("gbasim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("GBA_SIM_LOG");
  const std::string value = level ? level : "quiet";
  if (value == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (value == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    if (value != "quiet") std::cerr << "warning: GBA_SIM_LOG='" << value << "' not recognized\n";
    spdlog::set_level(spdlog::level::warn);
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace gbasim::cli;
  configure_logging();

  CLI::App app{"Desk-scale simulator for grouped contrastive aggregation strategies"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  double threshold = gbasim::kDefaultScoreThreshold;
  std::string input_path;

  const auto add_training_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat key = value experiment file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides out_dir)");
    sub->add_option("--seed", seed, "Seed (overrides seed)");
  };
  CLI::App* run = app.add_subcommand("run", "Train one strategy and write metrics.csv");
  add_training_flags(run);
  CLI::App* compare = app.add_subcommand("compare", "Train every listed strategy on identical data");
  add_training_flags(compare);
  CLI::App* sweep = app.add_subcommand("sweep", "Train once per value of sweep_key");
  add_training_flags(sweep);
  CLI::App* clean = app.add_subcommand("clean", "Apply the caption/aspect/score cleaning rules");
  clean->add_option("input", input_path, "Line-delimited JSON records")->required();
  clean->add_option("--out", out_dir, "Output directory")->required();
  clean->add_option("--threshold", threshold, "Keep records with sim_score >= threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  Overrides overrides;
  if (!out_dir.empty()) overrides.out_dir = out_dir;
  if (app.got_subcommand(run) || app.got_subcommand(compare) || app.got_subcommand(sweep)) {
    CLI::App* active = app.get_subcommands().front();
    if (active->count("--seed") > 0) overrides.seed = seed;
  }

  if (app.got_subcommand(run)) return cmd_run(config_path, overrides, std::cout, std::cerr);
  if (app.got_subcommand(compare)) return cmd_compare(config_path, overrides, std::cout, std::cerr);
  if (app.got_subcommand(sweep)) return cmd_sweep(config_path, overrides, std::cout, std::cerr);
  return cmd_clean(input_path, out_dir, threshold, std::cout, std::cerr);
}
