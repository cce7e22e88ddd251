// Copyright 2026 The ProxyMoE Authors.
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


// Dense row-major linear algebra used by the kernel and selection code, plus
// a Cholesky factor that can be grown one row/column at a time.

#ifndef PROXYMOE_LINALG_H_
#define PROXYMOE_LINALG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace proxymoe {

using Vector = std::vector<double>;

// Pivots and Schur complements at or below this value mark a dependent item.
inline constexpr double kJitterFloor = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws DimensionMismatch unless entries.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  // Nested-list construction, mainly for tests: {{1, 0}, {0, 1}}.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> entries() const noexcept { return data_; }
  std::span<double> mutable_entries() noexcept { return data_; }

  // Principal submatrix on the given (ordered) index set.
  Matrix submatrix(std::span<const std::size_t> index) const;
  bool is_symmetric(double tol) const;

  // Set only by code paths that have proven positive semi-definiteness
  // (successful factorization or a Gram construction).
  bool known_psd() const noexcept { return known_psd_; }
  void mark_psd() noexcept { known_psd_ = true; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  bool known_psd_ = false;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Lower-triangular P with P * P^T equal to the factored matrix. Rows are
// stored packed (row i holds i + 1 entries) so appending a row never moves
// existing data.
class CholeskyFactor;
CholeskyFactor cholesky_decompose(const Matrix& m);

class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  std::size_t order() const noexcept { return selected_ids_.size(); }
  double log_det() const noexcept { return log_det_; }
  const std::vector<std::size_t>& selected_ids() const noexcept {
    return selected_ids_;
  }

  double at(std::size_t i, std::size_t j) const;  // zero above the diagonal
  std::span<const double> row(std::size_t i) const {
    return {lower_.data() + i * (i + 1) / 2, i + 1};
  }
  Matrix dense_lower() const;
  Matrix reconstruct() const;  // P * P^T

  // In-place growth by one item; see cholesky_extend.
  void extend(std::span<const double> cross, double diag, std::size_t id);

 private:
  friend CholeskyFactor cholesky_decompose(const Matrix& m);

  std::vector<double> lower_;
  std::vector<std::size_t> selected_ids_;
  double log_det_ = 0.0;
};

// Throws DimensionMismatch for a non-square input, InvalidArgument when the
// input is not symmetric within 1e-10 and NotPositiveDefinite when a pivot
// falls to kJitterFloor or below. Item ids are 0..n-1.
CholeskyFactor cholesky_decompose(const Matrix& m);

// Forward substitution: returns y with P * y = rhs.
Vector solve_lower_triangular(const CholeskyFactor& f,
                              std::span<const double> rhs);

// Factor of the matrix augmented by one item whose cross-similarities to the
// covered items are `cross` and whose self-similarity is `diag`. Throws
// NonPositiveSchur when diag - |y|^2 <= kJitterFloor.
CholeskyFactor cholesky_extend(const CholeskyFactor& f,
                               std::span<const double> cross, double diag,
                               std::size_t id);
CholeskyFactor cholesky_extend(const CholeskyFactor& f,
                               std::span<const double> cross, double diag);

// Floating-point multiply-add counts recorded by the triangular solve and the
// extension step. Counters are per thread.
struct LinalgOpCounts {
  std::uint64_t solve_ops = 0;
  std::uint64_t extend_ops = 0;
};
LinalgOpCounts linalg_op_counts();
void reset_linalg_op_counts();

}  // namespace proxymoe

#endif  // PROXYMOE_LINALG_H_
