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

#include "gbasim/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gbasim {

void CostLedger::note_resident_rows(std::uint64_t rows) {
  peak_resident_rows = std::max(peak_resident_rows, rows);
}

CostLedger ledger_merge(const CostLedger& a, const CostLedger& b) {
  CostLedger out;
  out.bytes_all_gather = a.bytes_all_gather + b.bytes_all_gather;
  out.bytes_all_reduce = a.bytes_all_reduce + b.bytes_all_reduce;
  out.all_gather_calls = a.all_gather_calls + b.all_gather_calls;
  out.all_gather_participations = a.all_gather_participations + b.all_gather_participations;
  out.all_reduce_calls = a.all_reduce_calls + b.all_reduce_calls;
  out.peak_resident_rows = std::max(a.peak_resident_rows, b.peak_resident_rows);
  out.simulated_time = a.simulated_time + b.simulated_time;
  return out;
}

void validate(const HardwareModel& hw) {
  const auto positive = [](double v) { return v > 0.0 && !std::isnan(v); };
  if (!positive(hw.bandwidth) || !positive(hw.latency) || !positive(hw.compute_rate)) {
    throw std::invalid_argument(
        "HardwareModel: bandwidth, latency and compute_rate must be positive");
  }
}

std::uint64_t all_gather_bytes(std::size_t members, std::uint64_t payload_bytes) {
  if (members == 0) return 0;
  return static_cast<std::uint64_t>(members) * (members - 1) * payload_bytes;
}

std::uint64_t all_reduce_bytes(std::size_t members, std::uint64_t gradient_bytes) {
  if (members == 0) return 0;
  return static_cast<std::uint64_t>(members) * (members - 1) * gradient_bytes;
}

std::uint64_t embedding_payload_bytes(std::size_t batch_rows, std::size_t embed_dim) {
  return static_cast<std::uint64_t>(batch_rows) * embed_dim * 2 * sizeof(double);
}

std::uint64_t peak_gathered_rows(const StrategyConfig& strategy) {
  return 2ULL * strategy.group_size * strategy.batch_per_worker;
}

double step_time(const StrategyConfig& strategy, const Topology& topology, const HardwareModel& hw,
                 std::size_t embed_dim, std::uint64_t gradient_bytes) {
  validate(hw);
  const auto k = static_cast<double>(strategy.accumulation_steps);
  const auto batch = static_cast<double>(strategy.batch_per_worker);
  const std::size_t m = strategy.group_size;
  const std::size_t world = topology.world_size();

  const double compute = k * batch / hw.compute_rate;
  const double gather_bytes =
      k * static_cast<double>(m - 1) *
      static_cast<double>(embedding_payload_bytes(strategy.batch_per_worker, embed_dim));
  const double reduce_bytes = static_cast<double>(world - 1) * static_cast<double>(gradient_bytes);

  double collectives = 0.0;
  if (m > 1) collectives += k;
  if (world > 1) collectives += 1.0;

  return compute + gather_bytes / hw.bandwidth + reduce_bytes / hw.bandwidth +
         hw.latency * collectives;
}

double time_per_sample(const StrategyConfig& strategy, const Topology& topology,
                       const HardwareModel& hw, std::size_t embed_dim,
                       std::uint64_t gradient_bytes) {
  return step_time(strategy, topology, hw, embed_dim, gradient_bytes) /
         static_cast<double>(strategy.samples_per_step(topology.world_size()));
}

CostLedger predicted_step_ledger(const StrategyConfig& strategy, const Topology& topology,
                                 std::size_t embed_dim, std::uint64_t gradient_bytes,
                                 const HardwareModel& hw) {
  const std::uint64_t k = strategy.accumulation_steps;
  const std::uint64_t groups = topology.num_groups();
  const std::uint64_t m = topology.group_size();
  CostLedger ledger;
  ledger.bytes_all_gather =
      k * groups *
      all_gather_bytes(m, embedding_payload_bytes(strategy.batch_per_worker, embed_dim));
  ledger.all_gather_calls = k * groups;
  ledger.all_gather_participations = k * groups * m;
  ledger.bytes_all_reduce = all_reduce_bytes(topology.world_size(), gradient_bytes);
  ledger.all_reduce_calls = 1;
  ledger.peak_resident_rows = peak_gathered_rows(strategy);
  ledger.simulated_time = step_time(strategy, topology, hw, embed_dim, gradient_bytes);
  return ledger;
}

namespace {

struct FitPoint {
  double objective;
  std::vector<double> ratios;
};

FitPoint evaluate_fit(const StrategyConfig& baseline, std::span<const CalibrationTarget> targets,
                      const Topology& topology, std::size_t embed_dim,
                      std::uint64_t gradient_bytes, const HardwareModel& hw) {
  const double base = time_per_sample(baseline, topology, hw, embed_dim, gradient_bytes);
  FitPoint point{0.0, {}};
  for (const CalibrationTarget& target : targets) {
    const double t = time_per_sample(target.strategy, topology, hw, embed_dim, gradient_bytes);
    const double ratio = base / t;
    const double err = std::log(ratio / target.throughput_ratio);
    point.objective += err * err;
    point.ratios.push_back(ratio);
  }
  return point;
}

}  // namespace

CalibrationResult calibrate(const StrategyConfig& baseline, std::span<const CalibrationTarget> targets,
                            std::size_t world_size, std::size_t embed_dim,
                            std::uint64_t gradient_bytes, const HardwareModel& base) {
  validate(base);
  const Topology topology = make_topology(world_size, 1);
  validate(baseline, world_size);
  for (const CalibrationTarget& t : targets) validate(t.strategy, world_size);

  constexpr int kGrid = 41;
  constexpr int kRounds = 8;
  double bw_center = 9.0, bw_span = 8.0;    // log10 bytes/s
  double lat_center = -4.0, lat_span = 6.0;  // log10 seconds

  HardwareModel best = base;
  FitPoint best_fit{std::numeric_limits<double>::infinity(), {}};
  for (int round = 0; round < kRounds; ++round) {
    const double bw_lo = bw_center - bw_span, lat_lo = lat_center - lat_span;
    for (int i = 0; i < kGrid; ++i) {
      for (int j = 0; j < kGrid; ++j) {
        HardwareModel hw = base;
        hw.bandwidth = std::pow(10.0, bw_lo + 2.0 * bw_span * i / (kGrid - 1));
        hw.latency = std::pow(10.0, lat_lo + 2.0 * lat_span * j / (kGrid - 1));
        FitPoint fit = evaluate_fit(baseline, targets, topology, embed_dim, gradient_bytes, hw);
        if (fit.objective < best_fit.objective) {
          best_fit = std::move(fit);
          best = hw;
        }
      }
    }
    bw_center = std::log10(best.bandwidth);
    lat_center = std::log10(best.latency);
    bw_span /= 4.0;
    lat_span /= 4.0;
  }

  CalibrationResult result;
  result.hardware = best;
  result.predicted_ratios = best_fit.ratios;
  result.objective = best_fit.objective;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    result.residuals.push_back(best_fit.ratios[i] - targets[i].throughput_ratio);
  }
  return result;
}

}  // namespace gbasim
