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

#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <spdlog/spdlog.h>

namespace gbasim::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

ExperimentConfig load_with_overrides(const fs::path& config_path, const Overrides& overrides) {
  ExperimentConfig config = load_config_file(config_path);
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.seed) config.set_seed(*overrides.seed);
  return config;
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

struct RunOutcome {
  StrategyConfig strategy;
  MetricsHistory history;

  double time_per_sample() const {
    return history.totals.simulated_time / static_cast<double>(history.samples_seen);
  }
};

RunOutcome run_training(const ExperimentConfig& config, const PairedRows& data) {
  spdlog::info("training {} for {} steps on {} workers", format_strategy_spec(config.train.strategy),
               config.train.steps, config.train.world_size);
  RunOutcome outcome{config.train.strategy, train(config.train, data)};
  for (const StepRecord& r : outcome.history.records) {
    spdlog::debug("step {} loss {:.6f} tau {:.4f}", r.step, r.loss, r.tau);
  }
  return outcome;
}

std::string summary_line(const RunOutcome& run) {
  const MetricsHistory& h = run.history;
  std::ostringstream os;
  os << "summary strategy=" << format_strategy_spec(run.strategy) << " steps=" << h.records.size()
     << " last_step_loss=" << num(h.records.back().loss) << " final_loss=" << num(h.final_eval_loss)
     << " r1_i2t=" << num(h.final_retrieval.image_to_text.front())
     << " r1_t2i=" << num(h.final_retrieval.text_to_image.front())
     << " mean_recall=" << num(h.final_retrieval.mean_recall)
     << " ag_bytes=" << h.totals.bytes_all_gather << " ar_bytes=" << h.totals.bytes_all_reduce
     << " peak_rows=" << h.totals.peak_resident_rows << " sim_time=" << num(h.totals.simulated_time);
  return os.str();
}

void write_metrics_file(const fs::path& path, const MetricsHistory& history) {
  std::ofstream out = open_output(path);
  write_metrics_csv(out, history);
}

/// Fits bandwidth and latency so the model reproduces the measured
/// throughput gains, when the compared set has the matching shape.
void report_calibration(const ExperimentConfig& config, const std::vector<RunOutcome>& runs,
                        std::ostream& out) {
  if (runs.front().strategy.kind != StrategyKind::kConventionalITC) return;
  std::vector<CalibrationTarget> targets;
  std::vector<std::string> names;
  for (const RunOutcome& run : runs) {
    if (run.strategy.kind == StrategyKind::kGroupedITC) {
      targets.push_back({run.strategy, kReferenceGroupedThroughput});
    } else if (run.strategy.kind == StrategyKind::kGBAITC) {
      targets.push_back({run.strategy, kReferenceGbaThroughput});
    } else {
      continue;
    }
    names.push_back(format_strategy_spec(run.strategy));
  }
  if (targets.empty()) return;

  const std::size_t world = config.train.world_size;
  const MetricsHistory& base = runs.front().history;
  const std::uint64_t grad_bytes =
      world > 1 ? base.totals.bytes_all_reduce / base.records.size() / (world * (world - 1)) : 0;
  const CalibrationResult fit = calibrate(runs.front().strategy, targets, world,
                                          config.train.embed_dim, grad_bytes, config.train.hardware);
  out << "calibration: bandwidth=" << num(fit.hardware.bandwidth)
      << " latency=" << num(fit.hardware.latency)
      << " compute_rate=" << num(fit.hardware.compute_rate) << " objective=" << num(fit.objective)
      << '\n';
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out << "calibration: " << names[i] << " model " << num(fit.predicted_ratios[i]) << "x target "
        << num(targets[i].throughput_ratio) << "x residual " << num(fit.residuals[i]) << '\n';
  }
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsHistory& history) {
  out << kMetricsHeader << '\n';
  for (const StepRecord& r : history.records) {
    out << r.step << ',' << num(r.loss) << ',' << r.ledger.bytes_all_gather << ','
        << r.ledger.bytes_all_reduce << ',' << r.ledger.peak_resident_rows << ','
        << num(r.ledger.simulated_time) << '\n';
  }
}

int cmd_run(const fs::path& config_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_with_overrides(config_path, overrides);
    const PairedRows data = synth_pairs(config.task);
    const RunOutcome run = run_training(config, data);
    write_metrics_file(config.out_dir / "metrics.csv", run.history);
    out << summary_line(run) << '\n';
    return kExitOk;
  });
}

int cmd_compare(const fs::path& config_path, const Overrides& overrides, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_with_overrides(config_path, overrides);
    if (config.strategies.size() < 2) {
      throw ConfigError("strategies", "compare needs at least two strategies");
    }
    const std::size_t effective = config.strategies.front().effective_batch();
    for (const StrategyConfig& s : config.strategies) {
      if (s.effective_batch() != effective) {
        throw ConfigError("strategies", "effective batch (group_size * batch_per_worker * "
                                        "accumulation_steps) of " + format_strategy_spec(s) +
                                            " is " + std::to_string(s.effective_batch()) +
                                            ", expected " + std::to_string(effective));
      }
    }

    const PairedRows data = synth_pairs(config.task);
    std::vector<RunOutcome> runs;
    for (std::size_t i = 0; i < config.strategies.size(); ++i) {
      ExperimentConfig variant = config;
      variant.train.strategy = config.strategies[i];
      runs.push_back(run_training(variant, data));
      write_metrics_file(config.out_dir / ("metrics_" + std::to_string(i) + "_" +
                                           std::string(to_string(config.strategies[i].kind)) +
                                           ".csv"),
                         runs.back().history);
      out << summary_line(runs.back()) << '\n';
    }

    std::ofstream csv = open_output(config.out_dir / "compare.csv");
    csv << kCompareHeader << '\n';
    const RunOutcome& baseline = runs.front();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const RunOutcome& run = runs[i];
      const RunOutcome& previous = runs[i == 0 ? 0 : i - 1];
      const StrategyConfig& s = run.strategy;
      const MetricsHistory& h = run.history;
      const double peak_ratio = static_cast<double>(h.totals.peak_resident_rows) /
                                static_cast<double>(previous.history.totals.peak_resident_rows);
      const bool group_halved = i > 0 && previous.strategy.batch_per_worker == s.batch_per_worker &&
                                previous.strategy.group_size == 2 * s.group_size;
      std::string reference_throughput;
      if (baseline.strategy.kind == StrategyKind::kConventionalITC) {
        if (s.kind == StrategyKind::kGroupedITC) reference_throughput = num(kReferenceGroupedThroughput);
        if (s.kind == StrategyKind::kGBAITC) reference_throughput = num(kReferenceGbaThroughput);
      }

      csv << to_string(s.kind) << ',' << s.batch_per_worker << ',' << s.group_size << ','
          << s.accumulation_steps << ',' << s.samples_per_step(config.train.world_size) << ','
          << num(h.final_eval_loss) << ',' << num(h.records.back().loss) << ','
          << num(h.final_retrieval.image_to_text.front()) << ','
          << num(h.final_retrieval.text_to_image.front()) << ','
          << num(h.final_retrieval.mean_recall) << ',' << h.totals.bytes_all_gather << ','
          << h.totals.bytes_all_reduce << ',' << h.totals.peak_resident_rows << ','
          << num(h.totals.simulated_time) << ',' << num(run.time_per_sample()) << ','
          << num(baseline.time_per_sample() / run.time_per_sample()) << ','
          << num(previous.time_per_sample() / run.time_per_sample()) << ',' << num(peak_ratio)
          << ',' << (group_halved ? num(kReferencePeakRatio) : std::string()) << ','
          << reference_throughput << '\n';

      if (group_halved) {
        out << "memory: " << format_strategy_spec(s) << " holds " << h.totals.peak_resident_rows
            << " gathered rows vs " << previous.history.totals.peak_resident_rows
            << "; model ratio " << num(peak_ratio) << ", measured reference ratio "
            << num(kReferencePeakRatio) << " (27.46 GB / 50.42 GB)\n";
      }
      if (i > 0) {
        out << "throughput: " << format_strategy_spec(s) << " vs baseline "
            << num(baseline.time_per_sample() / run.time_per_sample()) << "x"
            << (reference_throughput.empty() ? "" : " (measured reference " + reference_throughput + "x)")
            << '\n';
      }
    }
    report_calibration(config, runs, out);
    return kExitOk;
  });
}

int cmd_sweep(const fs::path& config_path, const Overrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_with_overrides(config_path, overrides);
    if (config.sweep_key.empty()) throw ConfigError("sweep_key", "sweep needs a key to vary");
    if (config.sweep_values.empty()) throw ConfigError("sweep_values", "sweep needs values");

    std::vector<ExperimentConfig> points;
    for (const std::string& value : config.sweep_values) {
      ExperimentConfig point = config;
      try {
        apply_setting(point, config.sweep_key, value);
        check(point);
      } catch (const ConfigError& e) {
        throw ConfigError("sweep_values", "value '" + value + "': " + e.what());
      }
      points.push_back(std::move(point));
    }

    std::ofstream csv = open_output(config.out_dir / "sweep.csv");
    csv << kSweepHeader << '\n';
    for (std::size_t i = 0; i < points.size(); ++i) {
      const PairedRows point_data = synth_pairs(points[i].task);
      const RunOutcome run = run_training(points[i], point_data);
      const StrategyConfig& s = run.strategy;
      const MetricsHistory& h = run.history;
      csv << config.sweep_key << ',' << config.sweep_values[i] << ',' << to_string(s.kind) << ','
          << s.batch_per_worker << ',' << s.group_size << ',' << s.accumulation_steps << ','
          << num(h.final_eval_loss) << ',' << num(h.final_retrieval.image_to_text.front()) << ','
          << num(h.final_retrieval.text_to_image.front()) << ','
          << num(h.final_retrieval.mean_recall) << ',' << h.totals.bytes_all_gather << ','
          << h.totals.bytes_all_reduce << ',' << h.totals.peak_resident_rows << ','
          << num(h.totals.simulated_time) << ',' << num(run.time_per_sample()) << '\n';
      out << config.sweep_key << "=" << config.sweep_values[i] << " " << summary_line(run) << '\n';
    }
    return kExitOk;
  });
}

int cmd_clean(const fs::path& input_path, const fs::path& output_dir, double threshold,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!std::isfinite(threshold)) throw ConfigError("threshold", "must be finite");
    std::ifstream in(input_path);
    if (!in) throw std::runtime_error("cannot read '" + input_path.string() + "'");
    const std::vector<PairRecord> records = read_records(in);
    const CleanReport report = clean(records, threshold);

    std::ofstream kept = open_output(output_dir / "kept.jsonl");
    write_records(kept, report.kept);
    std::ofstream queue = open_output(output_dir / "rewrite_queue.jsonl");
    write_records(queue, report.rewrite_queue);
    std::ofstream csv = open_output(output_dir / "report.csv");
    write_clean_report_csv(csv, report);

    out << "clean: input=" << records.size() << " kept=" << report.kept.size()
        << " rewrite_queue=" << report.rewrite_queue.size()
        << " dropped_short_text=" << report.dropped_short_text
        << " dropped_aspect=" << report.dropped_aspect << " threshold=" << num(threshold) << '\n';
    return kExitOk;
  });
}

}  // namespace gbasim::cli
