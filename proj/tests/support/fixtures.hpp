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

// Shared builders for cluster-level tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gbasim/numerics.hpp"
#include "gbasim/trainer.hpp"

namespace gbasim::testing {

/// micro[s][rank] raw batches of `batch` rows and width `d_in`.
inline std::vector<std::vector<PairedRows>> random_micro_batches(Rng& rng, std::size_t steps,
                                                                 std::size_t world,
                                                                 std::size_t batch,
                                                                 std::size_t d_in) {
  std::vector<std::vector<PairedRows>> out(steps);
  for (auto& step : out) {
    for (std::size_t r = 0; r < world; ++r) {
      step.push_back({gaussian(rng, batch, d_in, 1.0), gaussian(rng, batch, d_in, 1.0)});
    }
  }
  return out;
}

/// All workers' rows of one micro-step, stacked in rank order.
inline PairedRows concat_workers(const std::vector<PairedRows>& workers) {
  std::vector<Matrix> images, texts;
  for (const PairedRows& w : workers) {
    images.push_back(w.image);
    texts.push_back(w.text);
  }
  return {vstack(images), vstack(texts)};
}

inline double max_grad_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      worst = std::max(worst, std::abs(a[t].data()[i] - b[t].data()[i]));
    }
  }
  return worst;
}

}  // namespace gbasim::testing
