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

#include "gbasim/numerics.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace gbasim {
namespace {

TEST(MatmulTest, IdentityLeavesMatrixUnchanged) {
  const Matrix m{{1.5, -2.0}, {0.25, 4.0}};
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
  EXPECT_EQ(matmul(m, Matrix::identity(2)), m);
}

TEST(MatmulTest, HandArithmetic) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{1}, {1}};
  EXPECT_EQ(matmul(a, b), (Matrix{{3}, {7}}));
}

TEST(MatmulTest, MatchesTripleLoopExactly) {
  Rng rng(11);
  const Matrix a = gaussian(rng, 5, 3, 1.0);
  const Matrix b = gaussian(rng, 3, 4, 1.0);
  EXPECT_EQ(matmul(a, b), testing::naive_matmul(a, b));
}

TEST(MatmulTest, TransposedVariantAgrees) {
  Rng rng(12);
  const Matrix a = gaussian(rng, 4, 6, 1.0);
  const Matrix b = gaussian(rng, 3, 6, 1.0);
  EXPECT_EQ(matmul_transposed(a, b), matmul(a, b.transpose()));
}

TEST(MatmulTest, DimensionMismatchNamesBothShapes) {
  const Matrix a(2, 3);
  const Matrix b(4, 5);
  try {
    (void)matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.lhs_rows(), 2u);
    EXPECT_EQ(e.lhs_cols(), 3u);
    EXPECT_EQ(e.rhs_rows(), 4u);
    EXPECT_EQ(e.rhs_cols(), 5u);
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("4x5"), std::string::npos);
  }
}

TEST(LogSoftmaxTest, SymmetricRow) {
  const Matrix out = log_softmax_rows(Matrix{{0.0, 0.0}});
  EXPECT_DOUBLE_EQ(out(0, 0), -std::log(2.0));
  EXPECT_DOUBLE_EQ(out(0, 1), -std::log(2.0));
}

TEST(LogSoftmaxTest, LargeEntriesDoNotOverflow) {
  const Matrix out = log_softmax_rows(Matrix{{1000.0, 0.0}});
  EXPECT_TRUE(out.all_finite());
  EXPECT_NEAR(out(0, 0), 0.0, 1e-300);
  EXPECT_NEAR(out(0, 1), -1000.0, 1e-9);
}

TEST(LogSoftmaxTest, MatchesExtendedPrecision) {
  Rng rng(3);
  const Matrix m = gaussian(rng, 4, 4, 3.0);
  const Matrix out = log_softmax_rows(m);
  const auto ref = testing::log_softmax_extended(m);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      EXPECT_NEAR(out(r, c), static_cast<double>(ref[r][c]), 1e-12);
}

TEST(LogSoftmaxTest, RowsExponentiateToOne) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = gaussian(rng, 3, 7, 1.0);
    for (double& v : m.data()) v = std::clamp(v * 400.0, -1e3, 1e3);
    const Matrix out = log_softmax_rows(m);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double total = 0.0;
      for (double v : out.row(r)) total += std::exp(v);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(LogSoftmaxTest, RejectsNonFinite) {
  EXPECT_THROW(log_softmax_rows(Matrix{{0.0, NAN}}), std::domain_error);
  EXPECT_THROW(log_softmax_rows(Matrix{{INFINITY, 0.0}}), std::domain_error);
}

TEST(NormalizeTest, ThreeFourFive) {
  const Matrix out = l2_normalize_rows(Matrix{{3.0, 4.0}});
  EXPECT_DOUBLE_EQ(out(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.8);
}

TEST(NormalizeTest, UnitRowUnchanged) {
  const Matrix unit{{0.0, 1.0, 0.0}};
  EXPECT_EQ(l2_normalize_rows(unit), unit);
}

TEST(NormalizeTest, Idempotent) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix once = l2_normalize_rows(gaussian(rng, 6, 5, 2.0));
    const Matrix twice = l2_normalize_rows(once);
    EXPECT_LE(testing::max_abs_diff(once, twice), 1e-12);
    for (std::size_t r = 0; r < once.rows(); ++r) {
      EXPECT_NEAR(std::sqrt(dot(once.row(r), once.row(r))), 1.0, 1e-12);
    }
  }
}

TEST(NormalizeTest, ZeroRowRejected) {
  EXPECT_THROW(l2_normalize_rows(Matrix{{1.0, 0.0}, {0.0, 0.0}}), std::domain_error);
}

TEST(GaussianTest, SameSeedSameMatrix) {
  Rng a(99), b(99);
  EXPECT_EQ(gaussian(a, 7, 3, 0.5), gaussian(b, 7, 3, 0.5));
}

TEST(GaussianTest, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  EXPECT_NE(gaussian(a, 4, 4, 1.0), gaussian(b, 4, 4, 1.0));
}

TEST(GaussianTest, NonPositiveStdRejected) {
  Rng rng(0);
  EXPECT_THROW(gaussian(rng, 2, 2, 0.0), std::invalid_argument);
  EXPECT_THROW(gaussian(rng, 2, 2, -1.0), std::invalid_argument);
}

TEST(GaussianTest, LargeSampleMoments) {
  Rng rng(2024);
  const Matrix draws = gaussian(rng, 1000, 1000, 1.0);
  const double mean = sum(draws.data()) / static_cast<double>(draws.size());
  double var = 0.0;
  for (double v : draws.data()) var += (v - mean) * (v - mean);
  const double std = std::sqrt(var / static_cast<double>(draws.size()));
  EXPECT_LT(std::abs(mean), 0.01);
  EXPECT_GE(std, 0.99);
  EXPECT_LE(std, 1.01);
}

TEST(RngTest, PermutationIsAPermutation) {
  Rng rng(8);
  std::vector<std::size_t> perm = rng.permutation(50);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(perm[i], i);
}

TEST(RngTest, MixSeedSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 1), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 1), mix_seed(2, 1));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

TEST(MatrixTest, RaggedInitializerRejected) {
  EXPECT_THROW((Matrix{{1.0, 2.0}, {3.0}}), std::invalid_argument);
}

TEST(MatrixTest, StackingRoundTrips) {
  Rng rng(6);
  const Matrix a = gaussian(rng, 2, 3, 1.0);
  const Matrix b = gaussian(rng, 4, 3, 1.0);
  const std::vector<Matrix> parts{a, b};
  const Matrix stacked = vstack(parts);
  EXPECT_EQ(stacked.slice_rows(0, 2), a);
  EXPECT_EQ(stacked.slice_rows(2, 4), b);
  EXPECT_THROW(stacked.slice_rows(5, 2), std::out_of_range);
  EXPECT_THROW(hstack(a, b), ShapeError);
}

}  // namespace
}  // namespace gbasim
