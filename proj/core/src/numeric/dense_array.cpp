#include "gesturegen/numeric/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "gesturegen/error.hpp"

namespace gesturegen::numeric {

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const DenseArray& a, const DenseArray& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kDimension,
         fmt::format("{}: shapes {} and {} differ", what, shape_string(a.shape()),
                     shape_string(b.shape())));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, "x")); }

DenseArray::DenseArray(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) fail(ErrorKind::kDimension, "array extents must be positive, got " + shape_string(shape_));
  }
  data_.assign(element_count(shape_), fill);
}

DenseArray::DenseArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto extent : shape_) {
    if (extent == 0) fail(ErrorKind::kDimension, "array extents must be positive, got " + shape_string(shape_));
  }
  if (element_count(shape_) != data_.size()) {
    fail(ErrorKind::kDimension, fmt::format("shape {} needs {} values, got {}", shape_string(shape_),
                                            element_count(shape_), data_.size()));
  }
}

DenseArray DenseArray::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorKind::kDimension, "ragged row list");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseArray({r, c}, std::move(data));
}

DenseArray DenseArray::identity(std::size_t n) {
  DenseArray out = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

DenseArray& DenseArray::operator+=(const DenseArray& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseArray& DenseArray::operator-=(const DenseArray& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseArray& DenseArray::operator*=(double scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

void DenseArray::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

DenseArray DenseArray::reshaped(Shape shape) const { return DenseArray(std::move(shape), data_); }

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseArray::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

DenseArray operator+(DenseArray a, const DenseArray& b) { return a += b; }
DenseArray operator-(DenseArray a, const DenseArray& b) { return a -= b; }
DenseArray operator*(DenseArray a, double scale) { return a *= scale; }

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace gesturegen::numeric
