// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "kernels.hpp"

namespace shortft {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) +
                     " values do not fill shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows: expected rank 2, got " + shape_to_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols: expected rank 2, got " + shape_to_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item: tensor of shape " + shape_to_string(shape_) +
                     " is not a single value");
  }
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  const std::size_t c = cols();
  if (begin > end || end > rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") outside " + shape_to_string(shape_));
  }
  return Tensor({end - begin, c},
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * c)));
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean_squared_diff(const Tensor& a, const Tensor& b) {
  require_same_shape("mean_squared_diff", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double squared_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  kernels::gemm(a.data().data(), b.data().data(), out.data().data(), a.rows(), a.cols(),
                b.cols(), false, false, false);
  return out;
}

}  // namespace shortft
