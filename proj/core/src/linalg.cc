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


#include "proxymoe/linalg.h"

#include <cmath>
#include <string>

#include "proxymoe/error.h"

namespace proxymoe {
namespace {

thread_local LinalgOpCounts g_op_counts;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + ": length " + std::to_string(a) +
                    " vs " + std::to_string(b));
  }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  require_same_length(data_.size(), rows * cols, "Matrix entries");
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    require_same_length(rows[i].size(), c, "Matrix row");
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  m.mark_psd();
  return m;
}

Matrix Matrix::submatrix(std::span<const std::size_t> index) const {
  Matrix out(index.size(), index.size());
  for (std::size_t a = 0; a < index.size(); ++a) {
    for (std::size_t b = 0; b < index.size(); ++b) {
      out(a, b) = (*this)(index[a], index[b]);
    }
  }
  if (known_psd_) out.mark_psd();
  return out;
}

bool Matrix::is_symmetric(double tol) const {
  if (!is_square()) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  require_same_length(a.cols(), b.rows(), "multiply");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

double CholeskyFactor::at(std::size_t i, std::size_t j) const {
  if (j > i) return 0.0;
  return lower_[i * (i + 1) / 2 + j];
}

Matrix CholeskyFactor::dense_lower() const {
  const std::size_t n = order();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) out(i, j) = at(i, j);
  }
  return out;
}

Matrix CholeskyFactor::reconstruct() const {
  const Matrix p = dense_lower();
  return multiply(p, transpose(p));
}

void CholeskyFactor::extend(std::span<const double> cross, double diag,
                            std::size_t id) {
  const std::size_t n = order();
  Vector y = solve_lower_triangular(*this, cross);
  const double schur = diag - squared_norm(y);
  g_op_counts.extend_ops += n + 1;
  if (!(schur > kJitterFloor)) {
    throw Error(ErrorKind::kNonPositiveSchur,
                "Schur complement " + std::to_string(schur) +
                    " at or below jitter floor");
  }
  lower_.reserve(lower_.size() + n + 1);
  lower_.insert(lower_.end(), y.begin(), y.end());
  lower_.push_back(std::sqrt(schur));
  selected_ids_.push_back(id);
  log_det_ += std::log(schur);
}

CholeskyFactor cholesky_decompose(const Matrix& m) {
  if (!m.is_square()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "cholesky_decompose: matrix is " + std::to_string(m.rows()) +
                    "x" + std::to_string(m.cols()));
  }
  if (!m.is_symmetric(1e-10)) {
    throw Error(ErrorKind::kInvalidArgument,
                "cholesky_decompose: matrix is not symmetric");
  }
  const std::size_t n = m.rows();
  Matrix p(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= p(j, k) * p(j, k);
    if (!(pivot > kJitterFloor)) {
      throw Error(ErrorKind::kNotPositiveDefinite,
                  "pivot " + std::to_string(j) + " is " +
                      std::to_string(pivot));
    }
    const double d = std::sqrt(pivot);
    p(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= p(i, k) * p(j, k);
      p(i, j) = s / d;
    }
  }
  CholeskyFactor f;
  f.lower_.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) f.lower_.push_back(p(i, j));
    f.selected_ids_.push_back(i);
    f.log_det_ += 2.0 * std::log(p(i, i));
  }
  return f;
}

Vector solve_lower_triangular(const CholeskyFactor& f,
                              std::span<const double> rhs) {
  const std::size_t n = f.order();
  require_same_length(rhs.size(), n, "solve_lower_triangular");
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = f.row(i);
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= r[k] * y[k];
    y[i] = s / r[i];
  }
  g_op_counts.solve_ops += n * (n + 1) / 2;
  return y;
}

CholeskyFactor cholesky_extend(const CholeskyFactor& f,
                               std::span<const double> cross, double diag,
                               std::size_t id) {
  CholeskyFactor out = f;
  out.extend(cross, diag, id);
  return out;
}

CholeskyFactor cholesky_extend(const CholeskyFactor& f,
                               std::span<const double> cross, double diag) {
  return cholesky_extend(f, cross, diag, f.order());
}

LinalgOpCounts linalg_op_counts() { return g_op_counts; }

void reset_linalg_op_counts() { g_op_counts = LinalgOpCounts{}; }

}  // namespace proxymoe
