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

#include "gbasim/cluster.hpp"
#include "gbasim/costmodel.hpp"
#include "gbasim/losses.hpp"
#include "gbasim/numerics.hpp"
#include "gbasim/topology.hpp"

namespace gbasim {

/// Toy masked-modeling heads that add the CMIM and CMLM terms on top of
/// the contrastive loss. Image features are cut into patches of
/// `patch_size` values; text features are quantized into `vocab_size`
/// token classes, one token per feature.
struct MaskedModelingConfig {
  bool enabled = false;
  double image_mask_ratio = 0.75;
  double text_mask_ratio = 0.50;
  std::size_t patch_size = 4;
  std::size_t vocab_size = 8;
  LossWeights weights;
};

/// Token class of one text feature value: uniform bins over [-2, 2], with
/// the outer bins open-ended.
std::size_t quantize_token(double value, std::size_t vocab_size);

/// Linear image and text projections followed by L2 normalization, plus the
/// optional masked-modeling heads.
class DualEncoder final : public ContrastiveModel {
 public:
  /// Parameter tensor order.
  enum Slot : std::size_t { kImageProj = 0, kTextProj = 1, kLogTau = 2, kPixelHead = 3, kTokenHead = 4 };

  DualEncoder(Matrix image_proj, Matrix text_proj, Temperature temp,
              MaskedModelingConfig masked = {}, std::optional<Matrix> pixel_head = std::nullopt,
              std::optional<Matrix> token_head = std::nullopt);

  /// Gaussian-initialized encoder with std 1/sqrt(input_dim).
  static DualEncoder random(Rng& rng, std::size_t input_dim, std::size_t embed_dim,
                            Temperature temp, MaskedModelingConfig masked = {});

  std::size_t input_dim() const { return params_[kImageProj].rows(); }
  std::size_t embed_dim() const { return params_[kImageProj].cols(); }
  const MaskedModelingConfig& masked() const { return masked_; }

  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }
  /// Weight decay applies to every tensor except the temperature.
  std::vector<bool> decay_mask() const;
  /// Re-applies the temperature clamp after an update.
  void clamp_temperature();

  EmbeddingBatch encode(const PairedRows& raw) const override;
  Temperature temperature() const override { return Temperature{params_[kLogTau](0, 0)}; }
  GradientSet zero_gradients() const override;
  GradientSet backward(const PairedRows& raw, const EmbeddingBatch& embeddings,
                       const Matrix& grad_image, const Matrix& grad_text,
                       double grad_log_tau) const override;
  std::optional<LocalObjective> local_objective(const PairedRows& raw,
                                                const EmbeddingBatch& embeddings,
                                                std::uint64_t stream) const override;

 private:
  std::vector<Matrix> params_;
  MaskedModelingConfig masked_;
};

enum class OptimizerKind { kSgd, kLamb };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kLamb;
  double learning_rate = 1.5e-2;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 0.05;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

/// In-place update of every tensor.
///
/// SGD:  p <- p - lr * (g + wd * p)
/// LAMB: Adam moments with bias correction, u = m_hat / (sqrt(v_hat) + eps)
///       + wd * p, then p <- p - lr * (|p| / |u|) * u per tensor. The trust
///       ratio falls back to 1 when either norm is zero.
///
/// `apply_decay` (empty means all) selects the tensors that get weight decay.
/// Throws std::domain_error on non-finite gradients, leaving params intact.
void optimizer_step(std::span<Matrix> params, std::span<const Matrix> grads,
                    const OptimizerConfig& config, OptimizerState& state,
                    const std::vector<bool>& apply_decay = {});

struct TrainConfig {
  StrategyConfig strategy;
  std::size_t world_size = 8;
  std::size_t steps = 200;
  std::size_t embed_dim = 16;
  double init_tau = Temperature::kDefaultTau;
  bool learn_temperature = true;
  OptimizerConfig optimizer;
  MaskedModelingConfig masked;
  HardwareModel hardware;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct RetrievalMetrics {
  std::vector<std::size_t> ks;        // cut-offs actually evaluated
  std::vector<double> image_to_text;  // recall per cut-off, in [0, 1]
  std::vector<double> text_to_image;
  double mean_recall = 0.0;           // mean of all recalls above

  double recall_at(std::size_t k, bool image_query) const;
};

/// Mean of recall values, in whatever unit they are given.
double mean_recall(std::span<const double> recalls);

/// Recall@{1,5,10} in both directions by inner-product ranking. Cut-offs
/// larger than the item count are dropped. Ties rank the lower index first.
RetrievalMetrics evaluate_retrieval(const Matrix& image, const Matrix& text);

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double contrastive_loss = 0.0;
  double tau = 0.0;
  CostLedger ledger;  // this step only
};

struct MetricsHistory {
  std::vector<StepRecord> records;
  CostLedger totals;
  /// Contrastive loss of the final parameters over the whole corpus.
  double final_eval_loss = 0.0;
  RetrievalMetrics final_retrieval;
  std::size_t samples_seen = 0;
};

/// Draws worker batches from a corpus, one shuffled epoch at a time.
class BatchSampler {
 public:
  BatchSampler(const PairedRows& corpus, Rng rng);
  PairedRows next(std::size_t rows);

 private:
  const PairedRows* corpus_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Runs `steps` optimizer steps of the configured strategy over `data`.
/// Deterministic in `config.seed`. When `final_model` is set it receives the
/// trained encoder.
MetricsHistory train(const TrainConfig& config, const PairedRows& data,
                     std::optional<DualEncoder>* final_model = nullptr);

}  // namespace gbasim
