// Copyright 2026 The rulstm Authors.
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


#include "rulstm/tensor.hpp"

#include <algorithm>
#include <string>

#include "rulstm/errors.hpp"

namespace rulstm {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

template <class F>
Vector map_vector(std::span<const double> x, F f) {
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), f);
  return out;
}

template <class F>
Matrix map_matrix(const Matrix& x, F f) {
  Matrix out(x.rows(), x.cols());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(), f);
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  Matrix m(values.size(), 1);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " times " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  if (!out.all_finite()) throw std::domain_error("matmul: non-finite result");
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Vector softmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("softmax: empty vector");
  const double shift = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - shift);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

Vector log_softmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("log_softmax: empty vector");
  const double shift = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - shift);
  const double log_z = shift + std::log(total);
  return map_vector(v, [log_z](double x) { return x - log_z; });
}

Vector sigmoid(std::span<const double> x) {
  return map_vector(x, [](double v) { return sigmoid(v); });
}
Vector tanh(std::span<const double> x) {
  return map_vector(x, [](double v) { return std::tanh(v); });
}
Vector relu(std::span<const double> x) {
  return map_vector(x, [](double v) { return relu(v); });
}
Matrix sigmoid(const Matrix& x) {
  return map_matrix(x, [](double v) { return sigmoid(v); });
}
Matrix tanh(const Matrix& x) {
  return map_matrix(x, [](double v) { return std::tanh(v); });
}
Matrix relu(const Matrix& x) {
  return map_matrix(x, [](double v) { return relu(v); });
}

void affine(const Matrix& w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  if (w.cols() != x.size() || w.rows() != y.size() || b.size() != y.size()) {
    throw ShapeError("affine: weight " + shape_str(w) + ", input " + std::to_string(x.size()) +
                     ", bias " + std::to_string(b.size()) + ", output " +
                     std::to_string(y.size()));
  }
  const std::size_t n = x.size();
  const double* xp = x.data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * xp[c];
    y[r] = acc + b[r];
  }
}

void accumulate_transposed(const Matrix& w, std::span<const double> dy, std::span<double> dx) {
  if (w.rows() != dy.size() || w.cols() != dx.size()) {
    throw ShapeError("accumulate_transposed: weight " + shape_str(w));
  }
  const std::size_t n = dx.size();
  double* dxp = dx.data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* wr = w.row(r).data();
    for (std::size_t c = 0; c < n; ++c) dxp[c] += g * wr[c];
  }
}

void accumulate_outer(Matrix& dw, std::span<const double> dy, std::span<const double> x) {
  if (dw.rows() != dy.size() || dw.cols() != x.size()) {
    throw ShapeError("accumulate_outer: gradient " + shape_str(dw));
  }
  const std::size_t n = x.size();
  const double* xp = x.data();
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* dr = dw.row(r).data();
    for (std::size_t c = 0; c < n; ++c) dr[c] += g * xp[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("argmax: empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace rulstm
