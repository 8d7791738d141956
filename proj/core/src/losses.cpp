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

#include "gbasim/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gbasim {

Temperature Temperature::from_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("Temperature: tau must be positive and finite");
  }
  return Temperature{std::log(tau)};
}

double Temperature::tau() const { return std::exp(log_tau); }

void Temperature::clamp() {
  log_tau = std::clamp(log_tau, std::log(kMinTau), std::log(kMaxTau));
}

Matrix l2_normalize_backward(const Matrix& raw, const Matrix& normalized,
                             const Matrix& grad_normalized) {
  if (!raw.same_shape(grad_normalized) || !raw.same_shape(normalized)) {
    throw ShapeError("l2_normalize_backward", raw.rows(), raw.cols(), grad_normalized.rows(),
                     grad_normalized.cols());
  }
  Matrix grad(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const double norm = std::sqrt(dot(raw.row(r), raw.row(r)));
    const auto n = normalized.row(r);
    const auto g = grad_normalized.row(r);
    const double radial = dot(n, g);
    auto out = grad.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (g[c] - n[c] * radial) / norm;
  }
  return grad;
}

LossResult itc_loss(const EmbeddingBatch& batch, const Temperature& temp, bool normalize) {
  const Matrix& image = batch.image;
  const Matrix& text = batch.text;
  if (!image.same_shape(text)) {
    throw ShapeError("itc_loss", image.rows(), image.cols(), text.rows(), text.cols());
  }
  const std::size_t n = image.rows();
  if (n == 0) throw std::invalid_argument("itc_loss: empty batch");
  if (!image.all_finite() || !text.all_finite()) {
    throw std::domain_error("itc_loss: non-finite embeddings");
  }

  const Matrix v = normalize ? l2_normalize_rows(image) : image;
  const Matrix t = normalize ? l2_normalize_rows(text) : text;
  const double tau = temp.tau();

  Matrix logits = matmul_transposed(v, t);
  for (double& x : logits.data()) x /= tau;

  const Matrix image_to_text = log_softmax_rows(logits);
  const Matrix text_to_image = log_softmax_rows(logits.transpose());  // [j][i]: column-normalized

  double diag_i2t = 0.0;
  double diag_t2i = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_i2t += image_to_text(i, i);
  for (std::size_t i = 0; i < n; ++i) diag_t2i += text_to_image(i, i);

  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  LossResult result;
  result.value = -scale * (diag_i2t + diag_t2i);

  // d value / d logits
  Matrix grad_logits(n, n);
  double grad_log_tau = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      const double g = scale * ((std::exp(image_to_text(i, j)) - delta) +
                                (std::exp(text_to_image(j, i)) - delta));
      grad_logits(i, j) = g;
      grad_log_tau -= g * logits(i, j);
    }
  }

  Matrix grad_sim = grad_logits;
  for (double& x : grad_sim.data()) x /= tau;

  Matrix grad_v = matmul(grad_sim, t);
  Matrix grad_t = matmul(grad_sim.transpose(), v);
  if (normalize) {
    grad_v = l2_normalize_backward(image, v, grad_v);
    grad_t = l2_normalize_backward(text, t, grad_t);
  }

  result.grads.push_back(std::move(grad_v));
  result.grads.push_back(std::move(grad_t));
  result.grad_log_tau = grad_log_tau;
  return result;
}

LossResult cmim_loss(const MaskedImageTarget& target) {
  const Matrix& x = target.pixels;
  const Matrix& x_hat = target.reconstructed;
  if (!x.same_shape(x_hat)) throw ShapeError("cmim_loss", x.rows(), x.cols(), x_hat.rows(), x_hat.cols());
  if (x.rows() == 0) throw std::invalid_argument("cmim_loss: no masked patches");
  if (!x.all_finite() || !x_hat.all_finite()) throw std::domain_error("cmim_loss: non-finite input");

  const double masked = static_cast<double>(x.rows());
  Matrix grad(x.rows(), x.cols());
  double total = 0.0;
  for (std::size_t p = 0; p < x.rows(); ++p) {
    double patch = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double err = x_hat(p, c) - x(p, c);
      patch += err * err;
      grad(p, c) = 2.0 * err / masked;
    }
    total += patch;
  }

  LossResult result;
  result.value = total / masked;
  result.grads.push_back(std::move(grad));
  return result;
}

LossResult cmlm_loss(const MaskedTextTarget& target) {
  const Matrix& logits = target.logits;
  const std::size_t tokens = logits.rows();
  const std::size_t vocab = logits.cols();
  if (tokens == 0 || target.labels.empty()) {
    throw std::invalid_argument("cmlm_loss: no masked tokens");
  }
  if (target.labels.size() != tokens) {
    throw ShapeError("cmlm_loss", tokens, vocab, target.labels.size(), 1);
  }
  for (std::size_t i = 0; i < tokens; ++i) {
    if (target.labels[i] >= vocab) {
      throw std::out_of_range("cmlm_loss: label " + std::to_string(target.labels[i]) +
                              " at token " + std::to_string(i) + " outside vocabulary of " +
                              std::to_string(vocab));
    }
  }

  const Matrix log_probs = log_softmax_rows(logits);
  const double inv = 1.0 / static_cast<double>(tokens);
  Matrix grad(tokens, vocab);
  double nll = 0.0;
  for (std::size_t i = 0; i < tokens; ++i) {
    nll -= log_probs(i, target.labels[i]);
    for (std::size_t q = 0; q < vocab; ++q) {
      const double onehot = q == target.labels[i] ? 1.0 : 0.0;
      grad(i, q) = inv * (std::exp(log_probs(i, q)) - onehot);
    }
  }

  LossResult result;
  result.value = nll * inv;
  result.grads.push_back(std::move(grad));
  return result;
}

LossResult overall_loss(const LossResult& itc, const LossResult& cmim, const LossResult& cmlm,
                        const LossWeights& weights) {
  if (!(weights.alpha >= 0.0) || !(weights.beta >= 0.0) || !std::isfinite(weights.alpha) ||
      !std::isfinite(weights.beta)) {
    throw std::invalid_argument("overall_loss: alpha and beta must be finite and non-negative");
  }
  LossResult result;
  result.value = itc.value + weights.alpha * cmim.value + weights.beta * cmlm.value;
  result.grad_log_tau = itc.grad_log_tau;
  for (const Matrix& g : itc.grads) result.grads.push_back(g);
  for (const Matrix& g : cmim.grads) result.grads.push_back(g * weights.alpha);
  for (const Matrix& g : cmlm.grads) result.grads.push_back(g * weights.beta);
  return result;
}

}  // namespace gbasim
