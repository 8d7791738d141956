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
#include <cstdint>
#include <span>
#include <vector>

#include "gbasim/topology.hpp"

namespace gbasim {

/// Communication and memory accounting for one or more steps.
struct CostLedger {
  std::uint64_t bytes_all_gather = 0;
  std::uint64_t bytes_all_reduce = 0;
  std::uint64_t all_gather_calls = 0;
  /// One per group member per all-gather call.
  std::uint64_t all_gather_participations = 0;
  std::uint64_t all_reduce_calls = 0;
  /// Most embedding rows (image and text counted separately) held by any
  /// worker at any instant.
  std::uint64_t peak_resident_rows = 0;
  double simulated_time = 0.0;

  void note_resident_rows(std::uint64_t rows);

  friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

/// Counters and time add; peaks take the max. Associative and commutative.
CostLedger ledger_merge(const CostLedger& a, const CostLedger& b);

struct HardwareModel {
  double bandwidth = 25e9;     // bytes/second received per worker
  double latency = 20e-6;      // seconds per collective
  double compute_rate = 2e4;   // pairs encoded per second per worker
};

void validate(const HardwareModel& hw);

// Naive full-exchange accounting: every member sends its payload to every
// other member. Swap these two functions to model ring or tree variants.

/// Total bytes moved by one all-gather among `members` workers.
std::uint64_t all_gather_bytes(std::size_t members, std::uint64_t payload_bytes);
/// Total bytes moved by one all-reduce among `members` workers.
std::uint64_t all_reduce_bytes(std::size_t members, std::uint64_t gradient_bytes);

/// Bytes of one worker's gathered payload: image and text rows of width
/// `embed_dim` in doubles.
std::uint64_t embedding_payload_bytes(std::size_t batch_rows, std::size_t embed_dim);

/// Image plus text rows resident on each worker after its group's gather.
std::uint64_t peak_gathered_rows(const StrategyConfig& strategy);

/// Simulated wall time of one optimizer step:
///   k * B / compute_rate
///   + k * (m - 1) * payload / bandwidth        (gather traffic received per worker)
///   + (W - 1) * gradient_bytes / bandwidth     (all-reduce traffic per worker)
///   + latency * (number of collectives that move data)
double step_time(const StrategyConfig& strategy, const Topology& topology, const HardwareModel& hw,
                 std::size_t embed_dim, std::uint64_t gradient_bytes = 0);

/// step_time divided by the pairs the world consumes in that step.
double time_per_sample(const StrategyConfig& strategy, const Topology& topology,
                       const HardwareModel& hw, std::size_t embed_dim,
                       std::uint64_t gradient_bytes = 0);

/// Ledger the cluster is expected to produce for one step.
CostLedger predicted_step_ledger(const StrategyConfig& strategy, const Topology& topology,
                                 std::size_t embed_dim, std::uint64_t gradient_bytes,
                                 const HardwareModel& hw);

struct CalibrationTarget {
  StrategyConfig strategy;
  /// Measured throughput relative to the baseline strategy.
  double throughput_ratio = 1.0;
};

struct CalibrationResult {
  HardwareModel hardware;
  std::vector<double> predicted_ratios;
  std::vector<double> residuals;  // predicted - target
  double objective = 0.0;         // sum of squared log-ratio errors
};

/// Fits bandwidth and latency (compute_rate held at `base.compute_rate`) so
/// that modelled throughput ratios against `baseline` approach the targets.
/// Searches a log-spaced grid with successive refinement.
CalibrationResult calibrate(const StrategyConfig& baseline, std::span<const CalibrationTarget> targets,
                            std::size_t world_size, std::size_t embed_dim,
                            std::uint64_t gradient_bytes, const HardwareModel& base);

}  // namespace gbasim
