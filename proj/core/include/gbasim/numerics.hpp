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
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbasim {

/// Raised when two operands have incompatible shapes. Carries both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, std::size_t lhs_rows, std::size_t lhs_cols,
             std::size_t rhs_rows, std::size_t rhs_cols);

  std::size_t lhs_rows() const { return lhs_rows_; }
  std::size_t lhs_cols() const { return lhs_cols_; }
  std::size_t rhs_rows() const { return rhs_rows_; }
  std::size_t rhs_cols() const { return rhs_cols_; }

 private:
  std::size_t lhs_rows_, lhs_cols_, rhs_rows_, rhs_cols_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t bytes() const { return data_.size() * sizeof(double); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  Matrix transpose() const;
  /// Rows [begin, begin + count).
  Matrix slice_rows(std::size_t begin, std::size_t count) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// Image and text rows that belong together row by row. Used both for raw
/// pair features and for encoded [CLS] embeddings.
struct PairedRows {
  Matrix image;
  Matrix text;

  std::size_t size() const { return image.rows(); }
};

/// Standard product; each output entry accumulates left to right over k.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

/// Stacks matrices with equal column counts, top to bottom.
Matrix vstack(std::span<const Matrix> parts);
/// Joins matrices with equal row counts, left to right.
Matrix hstack(const Matrix& left, const Matrix& right);

double dot(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& m);
/// Left-to-right sum.
double sum(std::span<const double> values);

/// Row-wise log-softmax, stable for large magnitudes. Throws on non-finite input.
Matrix log_softmax_rows(const Matrix& m);
/// Throws std::domain_error on an all-zero row.
Matrix l2_normalize_rows(const Matrix& m);

/// Seeded random stream. Gaussian draws use Box-Muller over mt19937_64 so
/// the stream does not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);
  double normal();

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// rows x cols matrix of N(0, std^2) draws. Throws on std <= 0.
Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double std);

}  // namespace gbasim
