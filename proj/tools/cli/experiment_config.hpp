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

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbasim/costmodel.hpp"
#include "gbasim/datapipe.hpp"
#include "gbasim/topology.hpp"
#include "gbasim/trainer.hpp"

namespace gbasim::cli {

/// Bad or unknown configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : "config key '" + key + "': " + message),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat key = value document. '#' starts a comment; blank lines are ignored.
/// Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(std::istream& in);

/// Every experiment setting. Keys and defaults are listed in the README.
struct ExperimentConfig {
  TrainConfig train;
  SyntheticTask task;
  std::filesystem::path out_dir = "out";
  /// compare: strategies as kind:batch_per_worker:group_size:accumulation_steps
  std::vector<StrategyConfig> strategies;
  /// sweep: one key and the values it takes.
  std::string sweep_key;
  std::vector<std::string> sweep_values;

  std::uint64_t seed() const { return train.seed; }
  /// Sets the seed for both data and training streams.
  void set_seed(std::uint64_t seed);
};

/// Names accepted by apply_setting / the config file.
const std::vector<std::string>& known_keys();

/// Applies one key. Throws ConfigError naming the key on unknown keys or
/// unparseable values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Defaults, then each key in the document, then cross-field checks.
ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Cross-field checks (strategy invariants, hardware, task). Throws ConfigError.
void check(const ExperimentConfig& config);

StrategyConfig parse_strategy_spec(const std::string& spec);
std::string format_strategy_spec(const StrategyConfig& strategy);

}  // namespace gbasim::cli
