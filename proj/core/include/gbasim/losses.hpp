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
#include <vector>

#include "gbasim/numerics.hpp"

namespace gbasim {

/// Image and text [CLS] rows; row i of each side belongs to pair i.
using EmbeddingBatch = PairedRows;

/// Contrastive temperature stored as log(tau) so updates keep it positive.
struct Temperature {
  static constexpr double kMinTau = 1e-3;
  static constexpr double kMaxTau = 1e2;
  static constexpr double kDefaultTau = 0.07;

  double log_tau;

  static Temperature from_tau(double tau);
  double tau() const;
  /// Pulls tau back into [kMinTau, kMaxTau].
  void clamp();
};

struct MaskedImageTarget {
  Matrix pixels;         // M x P originals of the masked patches
  Matrix reconstructed;  // M x P decoder output
};

struct MaskedTextTarget {
  Matrix logits;                    // N_tok x Q
  std::vector<std::size_t> labels;  // true class per masked token
};

/// A scalar objective and its gradient for every differentiable input, in
/// the order documented by each loss. `grad_log_tau` is zero for losses
/// without a temperature.
struct LossResult {
  double value = 0.0;
  std::vector<Matrix> grads;
  double grad_log_tau = 0.0;
};

/// Relative weights of the auxiliary masked-modeling losses.
struct LossWeights {
  static constexpr double kProxyBalance = 0.3;

  double alpha = kProxyBalance;  // CMIM
  double beta = kProxyBalance;   // CMLM
};

namespace grad_index {
inline constexpr std::size_t kImage = 0;  // itc_loss: d/d image rows
inline constexpr std::size_t kText = 1;   // itc_loss: d/d text rows
inline constexpr std::size_t kReconstructed = 0;  // cmim_loss
inline constexpr std::size_t kLogits = 0;          // cmlm_loss
}  // namespace grad_index

/// Symmetric InfoNCE over the batch.
///
/// Logits are S / tau with S_ij = <v_i, t_j> (rows optionally L2-normalized
/// first). The value is the mean of the image->text and text->image
/// cross-entropies of the matched pairs:
///
///   -1/(2N) * [ sum_i log softmax_row(L)_ii + sum_i log softmax_col(L)_ii ]
///
/// The second term normalizes over image rows, unlike the formula in the
/// original write-up, which repeats the first term and drops the sign.
/// Gradients are with respect to the raw (pre-normalization) rows and
/// log(tau).
LossResult itc_loss(const EmbeddingBatch& batch, const Temperature& temp, bool normalize = true);

/// (1/M) * sum over masked patches of the per-patch squared pixel error.
/// Gradient is with respect to the reconstruction.
LossResult cmim_loss(const MaskedImageTarget& target);

/// Mean token cross-entropy of the masked positions. Gradient is with
/// respect to the logits.
LossResult cmlm_loss(const MaskedTextTarget& target);

/// itc + alpha * cmim + beta * cmlm. Gradients are concatenated in the order
/// itc, cmim, cmlm, each scaled by its coefficient.
LossResult overall_loss(const LossResult& itc, const LossResult& cmim, const LossResult& cmlm,
                        const LossWeights& weights);

/// Backpropagates through row-wise L2 normalization. `normalized` is the
/// forward output and `raw` its input.
Matrix l2_normalize_backward(const Matrix& raw, const Matrix& normalized,
                             const Matrix& grad_normalized);

}  // namespace gbasim
