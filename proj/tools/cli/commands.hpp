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
#include <optional>
#include <ostream>
#include <string>

#include "experiment_config.hpp"

namespace gbasim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Command-line overrides shared by the training subcommands.
struct Overrides {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};

/// Measured peak-memory ratio for halving the group at fixed per-worker
/// batch (27.46 GB / 50.42 GB), reported next to the model's prediction.
inline constexpr double kReferencePeakRatio = 27.46 / 50.42;
/// Measured throughput gains over conventional ITC.
inline constexpr double kReferenceGroupedThroughput = 1.07;
inline constexpr double kReferenceGbaThroughput = 1.59;

inline constexpr const char* kMetricsHeader = "step,loss,ag_bytes,ar_bytes,peak_rows,sim_time";
inline constexpr const char* kCompareHeader =
    "strategy,batch_per_worker,group_size,accumulation_steps,samples_per_step,final_loss,"
    "last_step_loss,r1_i2t,r1_t2i,mean_recall,ag_bytes,ar_bytes,peak_rows,sim_time,"
    "time_per_sample,throughput_vs_baseline,throughput_vs_previous,peak_ratio_vs_previous,"
    "reference_peak_ratio,reference_throughput_vs_baseline";
inline constexpr const char* kSweepHeader =
    "key,value,strategy,batch_per_worker,group_size,accumulation_steps,final_loss,r1_i2t,"
    "r1_t2i,mean_recall,ag_bytes,ar_bytes,peak_rows,sim_time,time_per_sample";

void write_metrics_csv(std::ostream& out, const MetricsHistory& history);

/// Each returns a process exit code. Results go to `out`, failures to `err`.
int cmd_run(const std::filesystem::path& config_path, const Overrides& overrides,
            std::ostream& out, std::ostream& err);
int cmd_compare(const std::filesystem::path& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err);
int cmd_sweep(const std::filesystem::path& config_path, const Overrides& overrides,
              std::ostream& out, std::ostream& err);
int cmd_clean(const std::filesystem::path& input_path, const std::filesystem::path& output_dir,
              double threshold, std::ostream& out, std::ostream& err);

}  // namespace gbasim::cli
