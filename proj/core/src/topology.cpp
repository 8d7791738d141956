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

#include "gbasim/topology.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace gbasim {

Topology make_topology(std::size_t world_size, std::size_t group_size) {
  if (world_size == 0 || group_size == 0 || world_size % group_size != 0) {
    throw std::invalid_argument("make_topology: group_size " + std::to_string(group_size) +
                                " must be >= 1 and divide world_size " +
                                std::to_string(world_size));
  }
  Topology topo;
  topo.world_size_ = world_size;
  topo.group_size_ = group_size;
  for (std::size_t first = 0; first < world_size; first += group_size) {
    std::vector<std::size_t> members(group_size);
    for (std::size_t i = 0; i < group_size; ++i) members[i] = first + i;
    topo.groups_.push_back(std::move(members));
  }
  return topo;
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kConventionalITC:
      return "conventional";
    case StrategyKind::kGroupedITC:
      return "grouped";
    case StrategyKind::kGBAITC:
      return "gba";
  }
  return "unknown";
}

StrategyKind parse_strategy_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "conventional" || lower == "itc") return StrategyKind::kConventionalITC;
  if (lower == "grouped" || lower == "grouped-itc") return StrategyKind::kGroupedITC;
  if (lower == "gba" || lower == "gba-itc") return StrategyKind::kGBAITC;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

void validate(const StrategyConfig& s, std::size_t world_size) {
  const std::string name(to_string(s.kind));
  if (s.batch_per_worker == 0) throw std::invalid_argument(name + ": batch_per_worker must be >= 1");
  if (s.accumulation_steps == 0) {
    throw std::invalid_argument(name + ": accumulation_steps must be >= 1");
  }
  if (s.group_size == 0 || world_size % s.group_size != 0) {
    throw std::invalid_argument(name + ": group_size " + std::to_string(s.group_size) +
                                " must divide world_size " + std::to_string(world_size));
  }
  switch (s.kind) {
    case StrategyKind::kConventionalITC:
      if (s.group_size != world_size || s.accumulation_steps != 1) {
        throw std::invalid_argument(
            "conventional: requires group_size = world_size and accumulation_steps = 1");
      }
      break;
    case StrategyKind::kGroupedITC:
      if (s.accumulation_steps != 1) {
        throw std::invalid_argument("grouped: requires accumulation_steps = 1");
      }
      break;
    case StrategyKind::kGBAITC:
      break;
  }
}

}  // namespace gbasim
