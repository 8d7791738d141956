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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gbasim {

/// Logical workers split into equal, contiguous rank groups.
class Topology {
 public:
  std::size_t world_size() const { return world_size_; }
  std::size_t group_size() const { return group_size_; }
  std::size_t num_groups() const { return groups_.size(); }
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
  const std::vector<std::size_t>& group(std::size_t index) const { return groups_.at(index); }

  std::size_t group_of(std::size_t rank) const { return rank / group_size_; }
  /// Position of `rank` inside its group.
  std::size_t local_rank(std::size_t rank) const { return rank % group_size_; }

 private:
  friend Topology make_topology(std::size_t world_size, std::size_t group_size);

  std::size_t world_size_ = 0;
  std::size_t group_size_ = 0;
  std::vector<std::vector<std::size_t>> groups_;
};

/// Throws std::invalid_argument naming both values unless group_size >= 1
/// divides world_size.
Topology make_topology(std::size_t world_size, std::size_t group_size);

enum class StrategyKind { kConventionalITC, kGroupedITC, kGBAITC };

std::string_view to_string(StrategyKind kind);
/// Accepts "conventional"/"itc", "grouped", "gba" (case-insensitive).
StrategyKind parse_strategy_kind(std::string_view text);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kConventionalITC;
  std::size_t batch_per_worker = 1;
  std::size_t group_size = 1;
  std::size_t accumulation_steps = 1;

  /// Pairs that enter one group's contrastive losses per optimizer step.
  std::size_t effective_batch() const { return group_size * batch_per_worker * accumulation_steps; }
  /// Pairs consumed by the whole world per optimizer step.
  std::size_t samples_per_step(std::size_t world_size) const {
    return world_size * batch_per_worker * accumulation_steps;
  }

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

/// Checks the kind-specific invariants against `world_size`.
void validate(const StrategyConfig& strategy, std::size_t world_size);

}  // namespace gbasim
