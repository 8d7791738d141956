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

#include "gbasim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gbasim {

namespace {

std::size_t mask_count(double ratio, std::size_t total) {
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
  return std::clamp<std::size_t>(count, 1, total);
}

/// Sorted indices of the masked positions.
std::vector<std::size_t> choose_mask(Rng& rng, std::size_t total, std::size_t count) {
  std::vector<std::size_t> perm = rng.permutation(total);
  perm.resize(count);
  std::sort(perm.begin(), perm.end());
  return perm;
}

void validate_masked(const MaskedModelingConfig& masked, std::size_t input_dim) {
  if (!masked.enabled) return;
  if (masked.patch_size == 0 || input_dim % masked.patch_size != 0) {
    throw std::invalid_argument("patch_size " + std::to_string(masked.patch_size) +
                                " must divide input width " + std::to_string(input_dim));
  }
  if (masked.vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  const auto ratio_ok = [](double r) { return r > 0.0 && r <= 1.0; };
  if (!ratio_ok(masked.image_mask_ratio) || !ratio_ok(masked.text_mask_ratio)) {
    throw std::invalid_argument("mask ratios must lie in (0, 1]");
  }
  if (masked.weights.alpha < 0.0 || masked.weights.beta < 0.0) {
    throw std::invalid_argument("alpha and beta must be non-negative");
  }
}

}  // namespace

std::size_t quantize_token(double value, std::size_t vocab_size) {
  const double scaled = (value + 2.0) / 4.0 * static_cast<double>(vocab_size);
  if (!(scaled > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(scaled), vocab_size - 1);
}

DualEncoder::DualEncoder(Matrix image_proj, Matrix text_proj, Temperature temp,
                         MaskedModelingConfig masked, std::optional<Matrix> pixel_head,
                         std::optional<Matrix> token_head)
    : masked_(masked) {
  if (!image_proj.same_shape(text_proj)) {
    throw ShapeError("DualEncoder", image_proj.rows(), image_proj.cols(), text_proj.rows(),
                     text_proj.cols());
  }
  const std::size_t in = image_proj.rows();
  const std::size_t d = image_proj.cols();
  validate_masked(masked_, in);
  params_.push_back(std::move(image_proj));
  params_.push_back(std::move(text_proj));
  params_.push_back(Matrix(1, 1, temp.log_tau));
  if (masked_.enabled) {
    Matrix pixel = pixel_head.value_or(Matrix(d, in));
    Matrix token = token_head.value_or(Matrix(d, in * masked_.vocab_size));
    if (pixel.rows() != d || pixel.cols() != in) {
      throw ShapeError("DualEncoder pixel head", pixel.rows(), pixel.cols(), d, in);
    }
    if (token.rows() != d || token.cols() != in * masked_.vocab_size) {
      throw ShapeError("DualEncoder token head", token.rows(), token.cols(), d,
                       in * masked_.vocab_size);
    }
    params_.push_back(std::move(pixel));
    params_.push_back(std::move(token));
  }
}

DualEncoder DualEncoder::random(Rng& rng, std::size_t input_dim, std::size_t embed_dim,
                                Temperature temp, MaskedModelingConfig masked) {
  const double std = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Matrix image = gaussian(rng, input_dim, embed_dim, std);
  Matrix text = gaussian(rng, input_dim, embed_dim, std);
  if (!masked.enabled) return DualEncoder(std::move(image), std::move(text), temp, masked);
  const double head_std = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  Matrix pixel = gaussian(rng, embed_dim, input_dim, head_std);
  Matrix token = gaussian(rng, embed_dim, input_dim * masked.vocab_size, head_std);
  return DualEncoder(std::move(image), std::move(text), temp, masked, std::move(pixel),
                     std::move(token));
}

std::vector<bool> DualEncoder::decay_mask() const {
  std::vector<bool> mask(params_.size(), true);
  mask[kLogTau] = false;
  return mask;
}

void DualEncoder::clamp_temperature() {
  Temperature t{params_[kLogTau](0, 0)};
  t.clamp();
  params_[kLogTau](0, 0) = t.log_tau;
}

EmbeddingBatch DualEncoder::encode(const PairedRows& raw) const {
  if (raw.image.cols() != input_dim() || raw.text.cols() != input_dim()) {
    throw ShapeError("DualEncoder::encode", raw.image.rows(), raw.image.cols(), input_dim(),
                     embed_dim());
  }
  return EmbeddingBatch{l2_normalize_rows(matmul(raw.image, params_[kImageProj])),
                        l2_normalize_rows(matmul(raw.text, params_[kTextProj]))};
}

GradientSet DualEncoder::zero_gradients() const {
  GradientSet zeros;
  for (const Matrix& p : params_) zeros.emplace_back(p.rows(), p.cols());
  return zeros;
}

GradientSet DualEncoder::backward(const PairedRows& raw, const EmbeddingBatch& embeddings,
                                  const Matrix& grad_image, const Matrix& grad_text,
                                  double grad_log_tau) const {
  GradientSet grads = zero_gradients();
  const Matrix image_pre = matmul(raw.image, params_[kImageProj]);
  const Matrix text_pre = matmul(raw.text, params_[kTextProj]);
  const Matrix d_image = l2_normalize_backward(image_pre, embeddings.image, grad_image);
  const Matrix d_text = l2_normalize_backward(text_pre, embeddings.text, grad_text);
  grads[kImageProj] = matmul(raw.image.transpose(), d_image);
  grads[kTextProj] = matmul(raw.text.transpose(), d_text);
  grads[kLogTau](0, 0) = grad_log_tau;
  return grads;
}

std::optional<ContrastiveModel::LocalObjective> DualEncoder::local_objective(
    const PairedRows& raw, const EmbeddingBatch& embeddings, std::uint64_t stream) const {
  if (!masked_.enabled) return std::nullopt;

  const std::size_t rows = raw.image.rows();
  const std::size_t in = input_dim();
  const std::size_t patch = masked_.patch_size;
  const std::size_t vocab = masked_.vocab_size;
  Rng rng(mix_seed(stream, 0x6d61736bULL));

  // Image patches reconstructed from the text [CLS] row.
  const std::vector<std::size_t> patches =
      choose_mask(rng, in / patch, mask_count(masked_.image_mask_ratio, in / patch));
  const Matrix reconstruction = matmul(embeddings.text, params_[kPixelHead]);
  MaskedImageTarget image_target{Matrix(rows * patches.size(), patch),
                                 Matrix(rows * patches.size(), patch)};
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t p = 0; p < patches.size(); ++p) {
      for (std::size_t c = 0; c < patch; ++c) {
        const std::size_t col = patches[p] * patch + c;
        image_target.pixels(b * patches.size() + p, c) = raw.image(b, col);
        image_target.reconstructed(b * patches.size() + p, c) = reconstruction(b, col);
      }
    }
  }

  // Text tokens classified from the image [CLS] row.
  const std::vector<std::size_t> tokens =
      choose_mask(rng, in, mask_count(masked_.text_mask_ratio, in));
  const Matrix token_logits = matmul(embeddings.image, params_[kTokenHead]);
  MaskedTextTarget text_target{Matrix(rows * tokens.size(), vocab), {}};
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      for (std::size_t q = 0; q < vocab; ++q) {
        text_target.logits(b * tokens.size() + t, q) = token_logits(b, tokens[t] * vocab + q);
      }
      text_target.labels.push_back(quantize_token(raw.text(b, tokens[t]), vocab));
    }
  }

  const LossResult combined =
      overall_loss(LossResult{}, cmim_loss(image_target), cmlm_loss(text_target), masked_.weights);
  const Matrix& grad_patches = combined.grads[0];
  const Matrix& grad_token_logits = combined.grads[1];

  Matrix grad_reconstruction(rows, in);
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t p = 0; p < patches.size(); ++p)
      for (std::size_t c = 0; c < patch; ++c)
        grad_reconstruction(b, patches[p] * patch + c) = grad_patches(b * patches.size() + p, c);

  Matrix grad_logits_full(rows, in * vocab);
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t t = 0; t < tokens.size(); ++t)
      for (std::size_t q = 0; q < vocab; ++q)
        grad_logits_full(b, tokens[t] * vocab + q) = grad_token_logits(b * tokens.size() + t, q);

  LocalObjective out;
  out.value = combined.value;
  out.grad_text = matmul_transposed(grad_reconstruction, params_[kPixelHead]);
  out.grad_image = matmul_transposed(grad_logits_full, params_[kTokenHead]);
  out.param_grads = zero_gradients();
  out.param_grads[kPixelHead] = matmul(embeddings.text.transpose(), grad_reconstruction);
  out.param_grads[kTokenHead] = matmul(embeddings.image.transpose(), grad_logits_full);
  return out;
}

void optimizer_step(std::span<Matrix> params, std::span<const Matrix> grads,
                    const OptimizerConfig& config, OptimizerState& state,
                    const std::vector<bool>& apply_decay) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer_step: " + std::to_string(params.size()) +
                                " parameter tensors but " + std::to_string(grads.size()) +
                                " gradients");
  }
  if (!apply_decay.empty() && apply_decay.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: decay mask length mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i])) {
      throw ShapeError("optimizer_step", params[i].rows(), params[i].cols(), grads[i].rows(),
                       grads[i].cols());
    }
    if (!grads[i].all_finite()) {
      throw std::domain_error("optimizer_step: non-finite gradient in tensor " + std::to_string(i));
    }
  }
  const auto decay_for = [&](std::size_t i) {
    return apply_decay.empty() || apply_decay[i] ? config.weight_decay : 0.0;
  };
  const double lr = config.learning_rate;

  if (config.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double wd = decay_for(i);
      auto p = params[i].data();
      const auto g = grads[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * (g[j] + wd * p[j]);
    }
    ++state.step;
    return;
  }

  if (state.first_moment.empty()) {
    for (const Matrix& p : params) {
      state.first_moment.emplace_back(p.rows(), p.cols());
      state.second_moment.emplace_back(p.rows(), p.cols());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double wd = decay_for(i);
    auto p = params[i].data();
    const auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();

    std::vector<double> update(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      update[j] = m_hat / (std::sqrt(v_hat) + config.eps) + wd * p[j];
    }
    const double param_norm = std::sqrt(dot(p, p));
    const double update_norm = std::sqrt(dot(update, update));
    const double trust = param_norm > 0.0 && update_norm > 0.0 ? param_norm / update_norm : 1.0;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * trust * update[j];
  }
}

void validate(const TrainConfig& config) {
  validate(config.strategy, config.world_size);
  validate(config.hardware);
  if (config.steps == 0) throw std::invalid_argument("steps must be positive");
  if (!(config.optimizer.learning_rate >= 0.0)) {
    throw std::invalid_argument("learning_rate must be non-negative");
  }
  if (config.embed_dim == 0) throw std::invalid_argument("embed_dim must be positive");
  if (!(config.init_tau > 0.0)) throw std::invalid_argument("init_tau must be positive");
  if (config.optimizer.weight_decay < 0.0) {
    throw std::invalid_argument("weight_decay must be non-negative");
  }
}

double RetrievalMetrics::recall_at(std::size_t k, bool image_query) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return image_query ? image_to_text[i] : text_to_image[i];
  }
  throw std::out_of_range("recall_at: K=" + std::to_string(k) + " was not evaluated");
}

double mean_recall(std::span<const double> recalls) {
  if (recalls.empty()) throw std::invalid_argument("mean_recall: no recalls");
  return sum(recalls) / static_cast<double>(recalls.size());
}

RetrievalMetrics evaluate_retrieval(const Matrix& image, const Matrix& text) {
  if (image.rows() == 0 || text.rows() == 0) {
    throw std::invalid_argument("evaluate_retrieval: empty input");
  }
  if (!image.same_shape(text)) {
    throw ShapeError("evaluate_retrieval", image.rows(), image.cols(), text.rows(), text.cols());
  }
  const std::size_t n = image.rows();
  const Matrix sim = matmul_transposed(image, text);

  // Rank of the matched item among all candidates (0 = first).
  std::vector<std::size_t> image_rank(n), text_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = sim(i, i);
    std::size_t ahead_i2t = 0, ahead_t2i = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (sim(i, j) > pos || (sim(i, j) == pos && j < i)) ++ahead_i2t;
      if (sim(j, i) > pos || (sim(j, i) == pos && j < i)) ++ahead_t2i;
    }
    image_rank[i] = ahead_i2t;
    text_rank[i] = ahead_t2i;
  }

  RetrievalMetrics metrics;
  std::vector<double> all;
  for (std::size_t k : {1, 5, 10}) {
    if (k > n) continue;
    const auto hits = [&](const std::vector<std::size_t>& ranks) {
      return static_cast<double>(std::count_if(ranks.begin(), ranks.end(),
                                               [k](std::size_t r) { return r < k; })) /
             static_cast<double>(n);
    };
    metrics.ks.push_back(k);
    metrics.image_to_text.push_back(hits(image_rank));
    metrics.text_to_image.push_back(hits(text_rank));
  }
  all.insert(all.end(), metrics.image_to_text.begin(), metrics.image_to_text.end());
  all.insert(all.end(), metrics.text_to_image.begin(), metrics.text_to_image.end());
  metrics.mean_recall = mean_recall(all);
  return metrics;
}

BatchSampler::BatchSampler(const PairedRows& corpus, Rng rng)
    : corpus_(&corpus), rng_(std::move(rng)) {
  if (corpus.image.rows() == 0 || !corpus.image.same_shape(corpus.text)) {
    throw std::invalid_argument("BatchSampler: corpus must be non-empty with matching sides");
  }
  order_ = rng_.permutation(corpus.size());
}

PairedRows BatchSampler::next(std::size_t rows) {
  PairedRows out{Matrix(rows, corpus_->image.cols()), Matrix(rows, corpus_->text.cols())};
  for (std::size_t r = 0; r < rows; ++r) {
    if (cursor_ == order_.size()) {
      order_ = rng_.permutation(corpus_->size());
      cursor_ = 0;
    }
    const std::size_t src = order_[cursor_++];
    std::copy(corpus_->image.row(src).begin(), corpus_->image.row(src).end(), out.image.row(r).begin());
    std::copy(corpus_->text.row(src).begin(), corpus_->text.row(src).end(), out.text.row(r).begin());
  }
  return out;
}

MetricsHistory train(const TrainConfig& config, const PairedRows& data,
                     std::optional<DualEncoder>* final_model) {
  validate(config);
  if (data.image.cols() != data.text.cols()) {
    throw ShapeError("train", data.image.rows(), data.image.cols(), data.text.rows(),
                     data.text.cols());
  }
  const StrategyConfig& strategy = config.strategy;
  const Topology topology = make_topology(config.world_size, strategy.group_size);

  Rng model_rng(mix_seed(config.seed, 1));
  BatchSampler sampler(data, Rng(mix_seed(config.seed, 2)));
  DualEncoder model = DualEncoder::random(model_rng, data.image.cols(), config.embed_dim,
                                          Temperature::from_tau(config.init_tau), config.masked);
  model.clamp_temperature();
  OptimizerState opt_state;
  const std::vector<bool> decay = model.decay_mask();

  MetricsHistory history;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<std::vector<PairedRows>> micro(strategy.accumulation_steps);
    for (auto& per_worker : micro) {
      per_worker.reserve(config.world_size);
      for (std::size_t r = 0; r < config.world_size; ++r) {
        per_worker.push_back(sampler.next(strategy.batch_per_worker));
      }
    }

    StepOptions options{config.hardware, mix_seed(config.seed, 3 + step)};
    StepResult result = run_step(strategy, topology, model, micro, options);

    history.records.push_back(StepRecord{step, result.loss_value, result.contrastive_loss,
                                         model.temperature().tau(), result.ledger});
    history.totals = ledger_merge(history.totals, result.ledger);
    history.samples_seen += strategy.samples_per_step(config.world_size);

    GradientSet grads = std::move(result.accumulated_grads.front());
    if (!config.learn_temperature) grads[DualEncoder::kLogTau](0, 0) = 0.0;
    optimizer_step(model.parameters(), grads, config.optimizer, opt_state, decay);
    model.clamp_temperature();
  }

  const EmbeddingBatch embedded = model.encode(data);
  history.final_eval_loss = itc_loss(embedded, model.temperature(), false).value;
  history.final_retrieval = evaluate_retrieval(embedded.image, embedded.text);
  if (final_model != nullptr) final_model->emplace(std::move(model));
  return history;
}

}  // namespace gbasim
