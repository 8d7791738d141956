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

#include "gbasim/cluster.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gbasim {

namespace {

PairedRows split_columns(const Matrix& packed, std::size_t left_cols) {
  PairedRows out{Matrix(packed.rows(), left_cols), Matrix(packed.rows(), packed.cols() - left_cols)};
  for (std::size_t r = 0; r < packed.rows(); ++r) {
    const auto src = packed.row(r);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(left_cols),
              out.image.row(r).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(left_cols), src.end(),
              out.text.row(r).begin());
  }
  return out;
}

void add_into(GradientSet& acc, const GradientSet& delta) {
  if (acc.size() != delta.size()) {
    throw std::invalid_argument("gradient sets hold " + std::to_string(acc.size()) + " and " +
                                std::to_string(delta.size()) + " tensors");
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += delta[i];
}

void validate_micro_batches(const StrategyConfig& strategy, const Topology& topology,
                            std::span<const std::vector<PairedRows>> micro_batches) {
  if (micro_batches.size() != strategy.accumulation_steps) {
    throw std::invalid_argument("run_step: expected " +
                                std::to_string(strategy.accumulation_steps) +
                                " micro-steps, got " + std::to_string(micro_batches.size()));
  }
  for (std::size_t s = 0; s < micro_batches.size(); ++s) {
    if (micro_batches[s].size() != topology.world_size()) {
      throw std::invalid_argument("run_step: micro-step " + std::to_string(s) + " has " +
                                  std::to_string(micro_batches[s].size()) +
                                  " worker batches for world_size " +
                                  std::to_string(topology.world_size()));
    }
    for (std::size_t r = 0; r < micro_batches[s].size(); ++r) {
      const PairedRows& b = micro_batches[s][r];
      if (b.image.rows() != strategy.batch_per_worker || b.text.rows() != strategy.batch_per_worker) {
        throw std::invalid_argument("run_step: worker " + std::to_string(r) + " micro-step " +
                                    std::to_string(s) + " has " + std::to_string(b.image.rows()) +
                                    "/" + std::to_string(b.text.rows()) +
                                    " rows, batch_per_worker is " +
                                    std::to_string(strategy.batch_per_worker));
      }
    }
  }
}

}  // namespace

std::uint64_t gradient_bytes(const GradientSet& grads) {
  std::uint64_t total = 0;
  for (const Matrix& g : grads) total += g.bytes();
  return total;
}

std::vector<Matrix> Communicator::all_gather(std::size_t group_index,
                                             std::span<const Matrix> payloads,
                                             std::size_t rows_per_payload_row) {
  const auto& members = topology_.group(group_index);
  if (payloads.size() != members.size()) {
    throw std::invalid_argument("all_gather: group " + std::to_string(group_index) + " has " +
                                std::to_string(members.size()) + " members but " +
                                std::to_string(payloads.size()) + " payloads");
  }
  for (const Matrix& p : payloads) {
    if (!p.same_shape(payloads.front())) {
      throw ShapeError("all_gather", payloads.front().rows(), payloads.front().cols(), p.rows(),
                       p.cols());
    }
  }
  const std::size_t m = members.size();
  const Matrix gathered = vstack(payloads);

  ledger_.bytes_all_gather += all_gather_bytes(m, payloads.front().bytes());
  ledger_.all_gather_calls += 1;
  ledger_.all_gather_participations += m;
  ledger_.note_resident_rows(static_cast<std::uint64_t>(gathered.rows()) * rows_per_payload_row);

  return std::vector<Matrix>(m, gathered);
}

std::vector<EmbeddingBatch> Communicator::all_gather_embeddings(
    std::size_t group_index, std::span<const EmbeddingBatch> members) {
  std::vector<Matrix> packed;
  packed.reserve(members.size());
  for (const EmbeddingBatch& b : members) {
    if (!b.image.same_shape(b.text)) {
      throw ShapeError("all_gather_embeddings", b.image.rows(), b.image.cols(), b.text.rows(),
                       b.text.cols());
    }
    packed.push_back(hstack(b.image, b.text));
  }
  const std::size_t width = members.empty() ? 0 : members.front().image.cols();
  std::vector<EmbeddingBatch> out;
  for (const Matrix& g : all_gather(group_index, packed, 2)) out.push_back(split_columns(g, width));
  return out;
}

std::vector<GradientSet> Communicator::all_reduce_sum(std::span<const GradientSet> per_worker) {
  if (per_worker.size() != topology_.world_size()) {
    throw std::invalid_argument("all_reduce_sum: " + std::to_string(per_worker.size()) +
                                " inputs for world_size " +
                                std::to_string(topology_.world_size()));
  }
  const GradientSet& first = per_worker.front();
  for (const GradientSet& g : per_worker) {
    if (g.size() != first.size()) {
      throw std::invalid_argument("all_reduce_sum: workers hold different tensor counts");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].same_shape(first[i])) {
        throw ShapeError("all_reduce_sum", first[i].rows(), first[i].cols(), g[i].rows(),
                         g[i].cols());
      }
    }
  }

  GradientSet total = first;
  for (std::size_t w = 1; w < per_worker.size(); ++w) add_into(total, per_worker[w]);

  ledger_.bytes_all_reduce += all_reduce_bytes(per_worker.size(), gradient_bytes(first));
  ledger_.all_reduce_calls += 1;

  return std::vector<GradientSet>(per_worker.size(), total);
}

StepResult run_step(const StrategyConfig& strategy, const Topology& topology,
                    const ContrastiveModel& model,
                    std::span<const std::vector<PairedRows>> micro_batches,
                    const StepOptions& options) {
  validate(strategy, topology.world_size());
  if (strategy.group_size != topology.group_size()) {
    throw std::invalid_argument("run_step: strategy group_size " +
                                std::to_string(strategy.group_size) +
                                " differs from topology group_size " +
                                std::to_string(topology.group_size()));
  }
  validate_micro_batches(strategy, topology, micro_batches);

  const std::size_t world = topology.world_size();
  const std::size_t groups = topology.num_groups();
  const std::size_t m = topology.group_size();
  const std::size_t batch = strategy.batch_per_worker;
  const std::size_t steps = strategy.accumulation_steps;
  const double contrastive_scale = 1.0 / static_cast<double>(steps * groups);
  const double local_scale = 1.0 / static_cast<double>(steps * world);
  const Temperature temp = model.temperature();

  Communicator comm(topology);
  std::vector<GradientSet> accumulated(world, model.zero_gradients());
  StepResult result;
  double contrastive_sum = 0.0;
  double local_sum = 0.0;
  bool has_local = false;
  std::size_t embed_dim = 0;

  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<EmbeddingBatch> embeddings;
    embeddings.reserve(world);
    for (std::size_t r = 0; r < world; ++r) embeddings.push_back(model.encode(micro_batches[s][r]));
    embed_dim = embeddings.front().image.cols();

    for (std::size_t g = 0; g < groups; ++g) {
      const auto& members = topology.group(g);
      std::vector<EmbeddingBatch> local(members.size());
      for (std::size_t j = 0; j < members.size(); ++j) local[j] = embeddings[members[j]];
      const std::vector<EmbeddingBatch> gathered = comm.all_gather_embeddings(g, local);

      for (std::size_t j = 0; j < members.size(); ++j) {
        const std::size_t rank = members[j];
        const LossResult loss = itc_loss(gathered[j], temp, /*normalize=*/false);
        result.max_similarity_rows = std::max(result.max_similarity_rows, gathered[j].size());
        if (j == 0) contrastive_sum += loss.value;

        Matrix grad_image = loss.grads[grad_index::kImage].slice_rows(j * batch, batch);
        Matrix grad_text = loss.grads[grad_index::kText].slice_rows(j * batch, batch);
        grad_image *= contrastive_scale;
        grad_text *= contrastive_scale;
        const double grad_log_tau = loss.grad_log_tau * contrastive_scale / static_cast<double>(m);

        add_into(accumulated[rank], model.backward(micro_batches[s][rank], embeddings[rank],
                                                   grad_image, grad_text, grad_log_tau));
      }
    }

    for (std::size_t r = 0; r < world; ++r) {
      const std::uint64_t stream = (options.stream_base * steps + s) * world + r;
      auto objective = model.local_objective(micro_batches[s][r], embeddings[r], stream);
      if (!objective) continue;
      has_local = true;
      local_sum += objective->value;
      GradientSet grads = model.backward(micro_batches[s][r], embeddings[r],
                                         objective->grad_image * local_scale,
                                         objective->grad_text * local_scale, 0.0);
      for (std::size_t i = 0; i < grads.size() && i < objective->param_grads.size(); ++i) {
        if (!objective->param_grads[i].empty()) grads[i] += objective->param_grads[i] * local_scale;
      }
      add_into(accumulated[r], grads);
    }
  }

  result.accumulated_grads = comm.all_reduce_sum(accumulated);
  result.contrastive_loss = contrastive_sum * contrastive_scale;
  result.local_loss = has_local ? local_sum * local_scale : 0.0;
  result.loss_value = result.contrastive_loss + result.local_loss;

  CostLedger ledger = comm.ledger();
  ledger.simulated_time = step_time(strategy, topology, options.hardware, embed_dim,
                                    gradient_bytes(result.accumulated_grads.front()));
  result.ledger = ledger;
  return result;
}

}  // namespace gbasim
