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

#include "experiment_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace gbasim::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const std::uint64_t v = to_u64(key, value);
  if (v == 0) throw ConfigError(key, "must be >= 1");
  return static_cast<std::size_t>(v);
}

double to_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a finite number, got '" + value + "'");
  }
  return out;
}

double to_positive(const std::string& key, const std::string& value) {
  const double v = to_real(key, value);
  if (!(v > 0.0)) throw ConfigError(key, "must be positive");
  return v;
}

double to_non_negative(const std::string& key, const std::string& value) {
  const double v = to_real(key, value);
  if (v < 0.0) throw ConfigError(key, "must be non-negative");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + value + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](auto& c, auto& k, auto& v) { c.set_seed(to_u64(k, v)); }},
      {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"strategy",
       [](auto& c, auto& k, auto& v) {
         try {
           c.train.strategy.kind = parse_strategy_kind(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"world_size", [](auto& c, auto& k, auto& v) { c.train.world_size = to_count(k, v); }},
      {"batch_per_worker",
       [](auto& c, auto& k, auto& v) { c.train.strategy.batch_per_worker = to_count(k, v); }},
      {"group_size", [](auto& c, auto& k, auto& v) { c.train.strategy.group_size = to_count(k, v); }},
      {"accumulation_steps",
       [](auto& c, auto& k, auto& v) { c.train.strategy.accumulation_steps = to_count(k, v); }},
      {"steps", [](auto& c, auto& k, auto& v) { c.train.steps = to_count(k, v); }},
      {"learning_rate",
       [](auto& c, auto& k, auto& v) { c.train.optimizer.learning_rate = to_non_negative(k, v); }},
      {"optimizer",
       [](auto& c, auto& k, auto& v) {
         if (v == "sgd" || v == "SGD") {
           c.train.optimizer.kind = OptimizerKind::kSgd;
         } else if (v == "lamb" || v == "LAMB") {
           c.train.optimizer.kind = OptimizerKind::kLamb;
         } else {
           throw ConfigError(k, "expected sgd or lamb, got '" + v + "'");
         }
       }},
      {"lamb_beta1",
       [](auto& c, auto& k, auto& v) { c.train.optimizer.beta1 = to_non_negative(k, v); }},
      {"lamb_beta2",
       [](auto& c, auto& k, auto& v) { c.train.optimizer.beta2 = to_non_negative(k, v); }},
      {"lamb_eps", [](auto& c, auto& k, auto& v) { c.train.optimizer.eps = to_positive(k, v); }},
      {"weight_decay",
       [](auto& c, auto& k, auto& v) { c.train.optimizer.weight_decay = to_non_negative(k, v); }},
      {"embed_dim", [](auto& c, auto& k, auto& v) { c.train.embed_dim = to_count(k, v); }},
      {"init_tau", [](auto& c, auto& k, auto& v) { c.train.init_tau = to_positive(k, v); }},
      {"learn_temperature",
       [](auto& c, auto& k, auto& v) { c.train.learn_temperature = to_bool(k, v); }},
      {"full_objective", [](auto& c, auto& k, auto& v) { c.train.masked.enabled = to_bool(k, v); }},
      {"alpha",
       [](auto& c, auto& k, auto& v) { c.train.masked.weights.alpha = to_non_negative(k, v); }},
      {"beta",
       [](auto& c, auto& k, auto& v) { c.train.masked.weights.beta = to_non_negative(k, v); }},
      {"image_mask_ratio",
       [](auto& c, auto& k, auto& v) { c.train.masked.image_mask_ratio = to_positive(k, v); }},
      {"text_mask_ratio",
       [](auto& c, auto& k, auto& v) { c.train.masked.text_mask_ratio = to_positive(k, v); }},
      {"patch_size", [](auto& c, auto& k, auto& v) { c.train.masked.patch_size = to_count(k, v); }},
      {"vocab_size", [](auto& c, auto& k, auto& v) { c.train.masked.vocab_size = to_count(k, v); }},
      {"n_pairs", [](auto& c, auto& k, auto& v) { c.task.n_pairs = to_count(k, v); }},
      {"d_in", [](auto& c, auto& k, auto& v) { c.task.d_in = to_count(k, v); }},
      {"noise_std", [](auto& c, auto& k, auto& v) { c.task.noise_std = to_non_negative(k, v); }},
      {"bandwidth", [](auto& c, auto& k, auto& v) { c.train.hardware.bandwidth = to_positive(k, v); }},
      {"latency", [](auto& c, auto& k, auto& v) { c.train.hardware.latency = to_positive(k, v); }},
      {"compute_rate",
       [](auto& c, auto& k, auto& v) { c.train.hardware.compute_rate = to_positive(k, v); }},
      {"strategies",
       [](auto& c, auto& k, auto& v) {
         c.strategies.clear();
         for (const std::string& spec : split(v, ',')) {
           try {
             c.strategies.push_back(parse_strategy_spec(spec));
           } catch (const std::invalid_argument& e) {
             throw ConfigError(k, e.what());
           }
         }
       }},
      {"sweep_key", [](auto& c, auto&, auto& v) { c.sweep_key = v; }},
      {"sweep_values", [](auto& c, auto&, auto& v) { c.sweep_values = split(v, ','); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  task.seed = mix_seed(seed, 0x64617461ULL);
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_number) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError(key, "given more than once");
  }
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  it->second(config, key, value);
}

StrategyConfig parse_strategy_spec(const std::string& spec) {
  const std::vector<std::string> parts = split(spec, ':');
  if (parts.size() != 4) {
    throw std::invalid_argument("strategy '" + spec +
                                "' must be kind:batch_per_worker:group_size:accumulation_steps");
  }
  StrategyConfig s;
  s.kind = parse_strategy_kind(parts[0]);
  s.batch_per_worker = to_count("strategies", parts[1]);
  s.group_size = to_count("strategies", parts[2]);
  s.accumulation_steps = to_count("strategies", parts[3]);
  return s;
}

std::string format_strategy_spec(const StrategyConfig& s) {
  return std::string(to_string(s.kind)) + ":" + std::to_string(s.batch_per_worker) + ":" +
         std::to_string(s.group_size) + ":" + std::to_string(s.accumulation_steps);
}

void check(const ExperimentConfig& config) {
  const TrainConfig& t = config.train;
  try {
    validate(t.strategy, t.world_size);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("strategy", e.what());
  }
  for (const StrategyConfig& s : config.strategies) {
    try {
      validate(s, t.world_size);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("strategies", e.what());
    }
  }
  if (t.optimizer.beta1 >= 1.0) throw ConfigError("lamb_beta1", "must be < 1");
  if (t.optimizer.beta2 >= 1.0) throw ConfigError("lamb_beta2", "must be < 1");
  if (config.task.n_pairs < 2) throw ConfigError("n_pairs", "must be >= 2");
  if (t.masked.enabled) {
    if (config.task.d_in % t.masked.patch_size != 0) {
      throw ConfigError("patch_size", "must divide d_in " + std::to_string(config.task.d_in));
    }
    if (t.masked.vocab_size < 2) throw ConfigError("vocab_size", "must be >= 2");
    if (t.masked.image_mask_ratio > 1.0) throw ConfigError("image_mask_ratio", "must be <= 1");
    if (t.masked.text_mask_ratio > 1.0) throw ConfigError("text_mask_ratio", "must be <= 1");
  }
  if (!config.sweep_key.empty()) {
    static const std::set<std::string> kNotSweepable = {"sweep_key", "sweep_values", "strategies",
                                                        "out_dir"};
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), config.sweep_key) == keys.end() ||
        kNotSweepable.count(config.sweep_key) != 0) {
      throw ConfigError("sweep_key", "cannot sweep '" + config.sweep_key + "'");
    }
  }
}

ExperimentConfig load_config(std::istream& in) {
  const auto doc = parse_key_values(in);
  ExperimentConfig config;
  config.set_seed(0);
  config.train.strategy = StrategyConfig{StrategyKind::kConventionalITC, 8, 8, 1};
  for (const auto& [key, value] : doc) apply_setting(config, key, value);
  if (doc.count("group_size") == 0) config.train.strategy.group_size = config.train.world_size;
  check(config);
  return config;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  return load_config(in);
}

}  // namespace gbasim::cli
