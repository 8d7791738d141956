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
#include <optional>
#include <span>
#include <vector>

#include "gbasim/costmodel.hpp"
#include "gbasim/losses.hpp"
#include "gbasim/numerics.hpp"
#include "gbasim/topology.hpp"

namespace gbasim {

/// One worker's parameter gradients, tensor by tensor.
using GradientSet = std::vector<Matrix>;

std::uint64_t gradient_bytes(const GradientSet& grads);

/// Collectives over a topology. Each call moves data between logical
/// workers and records its cost in the ledger.
class Communicator {
 public:
  explicit Communicator(Topology topology) : topology_(std::move(topology)) {}

  const Topology& topology() const { return topology_; }
  const CostLedger& ledger() const { return ledger_; }
  CostLedger& ledger() { return ledger_; }

  /// Every member of `group_index` ends with the rank-ordered vertical
  /// concatenation of all members' payloads; the returned vector holds one
  /// copy per member. `rows_per_payload_row` says how many embedding rows
  /// one payload row carries (2 for packed image+text rows).
  std::vector<Matrix> all_gather(std::size_t group_index, std::span<const Matrix> payloads,
                                 std::size_t rows_per_payload_row = 1);

  /// Packs image and text rows side by side, gathers once, and unpacks.
  std::vector<EmbeddingBatch> all_gather_embeddings(std::size_t group_index,
                                                    std::span<const EmbeddingBatch> members);

  /// Every worker ends with the element-wise sum over all workers, added in
  /// rank order.
  std::vector<GradientSet> all_reduce_sum(std::span<const GradientSet> per_worker);

 private:
  Topology topology_;
  CostLedger ledger_;
};

/// Differentiable pair encoder driven by the cluster. Implementations hold
/// replicated parameters; the cluster never mutates them.
class ContrastiveModel {
 public:
  virtual ~ContrastiveModel() = default;

  virtual EmbeddingBatch encode(const PairedRows& raw) const = 0;
  virtual Temperature temperature() const = 0;
  /// Zero gradients in the model's tensor layout.
  virtual GradientSet zero_gradients() const = 0;
  /// Parameter gradients given gradients with respect to the embeddings
  /// that `encode(raw)` produced.
  virtual GradientSet backward(const PairedRows& raw, const EmbeddingBatch& embeddings,
                               const Matrix& grad_image, const Matrix& grad_text,
                               double grad_log_tau) const = 0;

  /// Optional per-worker objective added next to the contrastive loss. It
  /// never crosses workers. `stream` identifies (step, micro-step, rank) for
  /// any randomness such as masking.
  struct LocalObjective {
    double value = 0.0;
    Matrix grad_image;  // d value / d embeddings
    Matrix grad_text;
    GradientSet param_grads;  // direct parameter gradients (e.g. decoder heads)
  };
  virtual std::optional<LocalObjective> local_objective(const PairedRows& /*raw*/,
                                                        const EmbeddingBatch& /*embeddings*/,
                                                        std::uint64_t /*stream*/) const {
    return std::nullopt;
  }
};

struct StepResult {
  /// Mean over every group's contrastive loss in every micro-step, plus the
  /// mean local objective when the model defines one.
  double loss_value = 0.0;
  double contrastive_loss = 0.0;
  double local_loss = 0.0;
  /// Per-worker gradients after the global all-reduce (identical).
  std::vector<GradientSet> accumulated_grads;
  CostLedger ledger;
  /// Largest similarity matrix side any worker built.
  std::size_t max_similarity_rows = 0;
};

struct StepOptions {
  HardwareModel hardware;
  std::uint64_t stream_base = 0;
};

/// Runs one optimizer step of the strategy.
///
/// `micro_batches[s][rank]` is the raw batch worker `rank` consumes in
/// accumulation step `s`. For every micro-step each group gathers its
/// members' embeddings, every member evaluates the contrastive loss over
/// the gathered batch and backpropagates through its own rows. Worker
/// gradients are scaled so that the summed result is the gradient of the
/// mean group loss, accumulated over micro-steps, then summed with one
/// global all-reduce.
StepResult run_step(const StrategyConfig& strategy, const Topology& topology,
                    const ContrastiveModel& model,
                    std::span<const std::vector<PairedRows>> micro_batches,
                    const StepOptions& options = {});

}  // namespace gbasim
