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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace gbasim {
namespace {

constexpr double kStep = 1e-5;
// Relative-error denominator floor. Central differences at h = 1e-5 carry
// ~1e-9 absolute truncation/round-off error at tau = 0.1, so entries below
// this are effectively held to an absolute bound of tolerance * floor.
constexpr double kGradFloor = 1e-3;

EmbeddingBatch random_batch(Rng& rng, std::size_t n, std::size_t d) {
  return {gaussian(rng, n, d, 1.0), gaussian(rng, n, d, 1.0)};
}

double itc_fd_error(const EmbeddingBatch& batch, const Temperature& temp, bool normalize) {
  const LossResult analytic = itc_loss(batch, temp, normalize);
  const Matrix num_image = testing::central_difference(
      [&](const Matrix& v) { return itc_loss({v, batch.text}, temp, normalize).value; }, batch.image, kStep);
  const Matrix num_text = testing::central_difference(
      [&](const Matrix& t) { return itc_loss({batch.image, t}, temp, normalize).value; }, batch.text, kStep);
  const double num_tau = testing::central_difference(
      [&](double lt) { return itc_loss(batch, Temperature{lt}, normalize).value; }, temp.log_tau, kStep);
  return std::max({testing::max_relative_error(analytic.grads[grad_index::kImage], num_image, kGradFloor),
                   testing::max_relative_error(analytic.grads[grad_index::kText], num_text, kGradFloor),
                   testing::relative_error(analytic.grad_log_tau, num_tau, kGradFloor)});
}

TEST(ItcLossTest, SingleCandidateIsZero) {
  Rng rng(1);
  const EmbeddingBatch batch = random_batch(rng, 1, 5);
  const LossResult r = itc_loss(batch, Temperature::from_tau(0.07));
  EXPECT_EQ(r.value, 0.0);
  for (const Matrix& g : r.grads)
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.grad_log_tau, 0.0);
}

TEST(ItcLossTest, TwoByTwoIdentityByHand) {
  const EmbeddingBatch batch{Matrix::identity(2), Matrix::identity(2)};
  const LossResult r = itc_loss(batch, Temperature::from_tau(1.0), /*normalize=*/false);
  // Each direction: logits [1, 0] for the matched row.
  const double expected = -std::log(std::numbers::e / (std::numbers::e + 1.0));
  EXPECT_NEAR(r.value, expected, 1e-15);
  EXPECT_NEAR(r.value, 0.3133, 1e-4);
}

TEST(ItcLossTest, MatchesExtendedPrecisionReference) {
  Rng rng(2);
  for (bool normalize : {false, true}) {
    for (int trial = 0; trial < 10; ++trial) {
      const EmbeddingBatch batch = random_batch(rng, 6, 4);
      const double tau = 0.2 + 0.1 * trial;
      const double value = itc_loss(batch, Temperature::from_tau(tau), normalize).value;
      const long double ref = testing::itc_reference(batch.image, batch.text, tau, normalize);
      EXPECT_NEAR(value, static_cast<double>(ref), 1e-11);
    }
  }
}

TEST(ItcLossTest, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  const EmbeddingBatch batch = random_batch(rng, 4, 8);
  EXPECT_LT(itc_fd_error(batch, Temperature::from_tau(0.5), false), 1e-5);
  EXPECT_LT(itc_fd_error(batch, Temperature::from_tau(0.5), true), 1e-5);
}

TEST(ItcLossTest, GradientPropertyOverRandomInstances) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    const std::size_t d = 1 + rng.uniform_index(16);
    const bool normalize = trial % 2 == 0;
    const double tau = 0.1 + rng.uniform();
    const EmbeddingBatch batch = random_batch(rng, n, d);
    EXPECT_LT(itc_fd_error(batch, Temperature::from_tau(tau), normalize), 1e-5)
        << "N=" << n << " d=" << d << " normalize=" << normalize;
  }
}

TEST(ItcLossTest, NonNegativeAndPermutationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    const EmbeddingBatch batch = random_batch(rng, n, 3);
    const Temperature temp = Temperature::from_tau(0.05 + rng.uniform());
    const double value = itc_loss(batch, temp).value;
    EXPECT_GE(value, 0.0);

    const std::vector<std::size_t> perm = rng.permutation(n);
    EmbeddingBatch shuffled{Matrix(n, 3), Matrix(n, 3)};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        shuffled.image(i, c) = batch.image(perm[i], c);
        shuffled.text(i, c) = batch.text(perm[i], c);
      }
    }
    EXPECT_NEAR(itc_loss(shuffled, temp).value, value, 1e-12);
  }
}

TEST(ItcLossTest, NormalizedLossIgnoresRowScale) {
  Rng rng(6);
  const EmbeddingBatch batch = random_batch(rng, 5, 4);
  EmbeddingBatch scaled = batch;
  for (std::size_t r = 0; r < 5; ++r) {
    const double si = 0.1 + 3.0 * rng.uniform();
    const double st = 0.1 + 3.0 * rng.uniform();
    for (double& v : scaled.image.row(r)) v *= si;
    for (double& v : scaled.text.row(r)) v *= st;
  }
  const Temperature temp = Temperature::from_tau(0.07);
  EXPECT_NEAR(itc_loss(scaled, temp).value, itc_loss(batch, temp).value, 1e-12);
}

TEST(ItcLossTest, DominantPositivesDriveLossToZero) {
  const EmbeddingBatch batch{Matrix::identity(3), Matrix::identity(3)};
  EXPECT_LT(itc_loss(batch, Temperature::from_tau(1e-3), false).value, 1e-300);
}

TEST(ItcLossTest, Errors) {
  const Temperature temp = Temperature::from_tau(0.07);
  EXPECT_THROW(itc_loss({Matrix(0, 3), Matrix(0, 3)}, temp), std::invalid_argument);
  EXPECT_THROW(itc_loss({Matrix(2, 3), Matrix(2, 4)}, temp), ShapeError);
  EXPECT_THROW(itc_loss({Matrix{{NAN, 1.0}}, Matrix{{1.0, 1.0}}}, temp), std::domain_error);
  EXPECT_THROW(itc_loss({Matrix{{0.0, 0.0}}, Matrix{{1.0, 1.0}}}, temp, true), std::domain_error);
}

TEST(TemperatureTest, ClampKeepsRange) {
  Temperature low{std::log(1e-6)};
  low.clamp();
  EXPECT_NEAR(low.tau(), Temperature::kMinTau, 1e-15);
  Temperature high{std::log(1e6)};
  high.clamp();
  EXPECT_NEAR(high.tau(), Temperature::kMaxTau, 1e-10);
  Temperature mid = Temperature::from_tau(0.07);
  mid.clamp();
  EXPECT_NEAR(mid.tau(), 0.07, 1e-15);
  EXPECT_THROW(Temperature::from_tau(0.0), std::invalid_argument);
}

TEST(CmimLossTest, PerfectReconstructionIsZero) {
  Rng rng(7);
  const Matrix x = gaussian(rng, 3, 5, 1.0);
  EXPECT_EQ(cmim_loss({x, x}).value, 0.0);
}

TEST(CmimLossTest, UniformErrorByHand) {
  const Matrix x(1, 4, 0.0);
  const Matrix x_hat(1, 4, 0.5);
  const LossResult r = cmim_loss({x, x_hat});
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  for (double g : r.grads[grad_index::kReconstructed].data()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(CmimLossTest, ZeroOnlyWhenReconstructionExact) {
  const Matrix x{{1.0, 2.0}};
  EXPECT_GT(cmim_loss({x, Matrix{{1.0, 2.0 + 1e-9}}}).value, 0.0);
}

TEST(CmimLossTest, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(4);
    const std::size_t p = 1 + rng.uniform_index(8);
    const Matrix x = gaussian(rng, m, p, 1.0);
    const Matrix x_hat = gaussian(rng, m, p, 1.0);
    const Matrix numeric = testing::central_difference(
        [&](const Matrix& xh) { return cmim_loss({x, xh}).value; }, x_hat, kStep);
    EXPECT_LT(testing::max_relative_error(cmim_loss({x, x_hat}).grads[0], numeric, kGradFloor), 1e-5);
  }
}

TEST(CmimLossTest, Errors) {
  EXPECT_THROW(cmim_loss({Matrix(0, 4), Matrix(0, 4)}), std::invalid_argument);
  EXPECT_THROW(cmim_loss({Matrix(2, 4), Matrix(2, 3)}), ShapeError);
}

TEST(CmlmLossTest, UniformLogitsGiveLogQ) {
  for (std::size_t q : {2u, 4u, 100u}) {
    const MaskedTextTarget target{Matrix(3, q, 0.7), {0, q - 1, q / 2}};
    EXPECT_NEAR(cmlm_loss(target).value, std::log(static_cast<double>(q)), 1e-12);
  }
  EXPECT_NEAR(cmlm_loss({Matrix(1, 4, 0.0), {2}}).value, 1.3863, 1e-4);
}

TEST(CmlmLossTest, GrowingMarginApproachesZero) {
  double previous = INFINITY;
  for (double margin : {1.0, 5.0, 20.0, 100.0}) {
    Matrix logits(1, 5, 0.0);
    logits(0, 3) = margin;
    const double value = cmlm_loss({logits, {3}}).value;
    EXPECT_LT(value, previous);
    previous = value;
  }
  EXPECT_LT(previous, 1e-40);
}

TEST(CmlmLossTest, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t tokens = 1 + rng.uniform_index(8);
    const std::size_t vocab = 2 + rng.uniform_index(31);
    MaskedTextTarget target{gaussian(rng, tokens, vocab, 2.0), {}};
    for (std::size_t i = 0; i < tokens; ++i) target.labels.push_back(rng.uniform_index(vocab));
    const Matrix numeric = testing::central_difference(
        [&](const Matrix& l) { return cmlm_loss({l, target.labels}).value; }, target.logits, kStep);
    EXPECT_LT(testing::max_relative_error(cmlm_loss(target).grads[0], numeric, kGradFloor), 1e-5);
  }
}

TEST(CmimLossTest, FixedShapeGradientIsTight) {
  Rng rng(11);
  const Matrix x = gaussian(rng, 3, 6, 1.0);
  const Matrix x_hat = gaussian(rng, 3, 6, 1.0);
  const Matrix numeric = testing::central_difference(
      [&](const Matrix& xh) { return cmim_loss({x, xh}).value; }, x_hat, kStep);
  EXPECT_LT(testing::max_relative_error(cmim_loss({x, x_hat}).grads[0], numeric, kGradFloor), 1e-6);
}

TEST(CmlmLossTest, FixedShapeGradientIsTight) {
  Rng rng(12);
  MaskedTextTarget target{gaussian(rng, 5, 11, 1.0), {0, 3, 10, 7, 3}};
  const Matrix numeric = testing::central_difference(
      [&](const Matrix& l) { return cmlm_loss({l, target.labels}).value; }, target.logits, kStep);
  EXPECT_LT(testing::max_relative_error(cmlm_loss(target).grads[0], numeric, kGradFloor), 1e-6);
}

TEST(CmlmLossTest, Errors) {
  EXPECT_THROW(cmlm_loss({Matrix(0, 4), {}}), std::invalid_argument);
  EXPECT_THROW(cmlm_loss({Matrix(2, 4), {1}}), ShapeError);
  EXPECT_THROW(cmlm_loss({Matrix(1, 4), {4}}), std::out_of_range);
}

LossResult scalar_loss(double value, double grad) {
  return LossResult{value, {Matrix(1, 1, grad)}, 0.0};
}

TEST(OverallLossTest, ZeroWeightsReduceToItc) {
  Rng rng(10);
  const LossResult itc = itc_loss(random_batch(rng, 4, 3), Temperature::from_tau(0.1));
  const LossResult overall =
      overall_loss(itc, scalar_loss(5.0, 1.0), scalar_loss(7.0, 1.0), LossWeights{0.0, 0.0});
  EXPECT_EQ(overall.value, itc.value);
  EXPECT_EQ(overall.grads[0], itc.grads[0]);
  EXPECT_EQ(overall.grads[1], itc.grads[1]);
  EXPECT_EQ(overall.grad_log_tau, itc.grad_log_tau);
}

TEST(OverallLossTest, ProxyBalanceWeights) {
  const LossWeights w;
  EXPECT_EQ(w.alpha, 0.3);
  EXPECT_EQ(w.beta, 0.3);
  const LossResult r = overall_loss(scalar_loss(1.0, 1.0), scalar_loss(2.0, 1.0), scalar_loss(3.0, 1.0), w);
  EXPECT_NEAR(r.value, 2.5, 1e-12);
  ASSERT_EQ(r.grads.size(), 3u);
  EXPECT_DOUBLE_EQ(r.grads[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.grads[1](0, 0), 0.3);
  EXPECT_DOUBLE_EQ(r.grads[2](0, 0), 0.3);
}

TEST(OverallLossTest, LinearInAlpha) {
  const LossResult itc = scalar_loss(1.0, 0.0), cmim = scalar_loss(2.0, 0.0), cmlm = scalar_loss(3.0, 0.0);
  const double base = overall_loss(itc, cmim, cmlm, {0.0, 0.3}).value;
  const double once = overall_loss(itc, cmim, cmlm, {0.4, 0.3}).value - base;
  const double twice = overall_loss(itc, cmim, cmlm, {0.8, 0.3}).value - base;
  EXPECT_NEAR(twice, 2.0 * once, 1e-12);
}

TEST(OverallLossTest, NegativeWeightsRejected) {
  const LossResult x = scalar_loss(1.0, 0.0);
  EXPECT_THROW(overall_loss(x, x, x, {-0.1, 0.3}), std::invalid_argument);
  EXPECT_THROW(overall_loss(x, x, x, {0.3, -0.1}), std::invalid_argument);
}

}  // namespace
}  // namespace gbasim
