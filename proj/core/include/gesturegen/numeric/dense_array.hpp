#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gesturegen::numeric {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Row-major array of doubles. Rank 1 and rank 2 cover everything the model
/// needs; higher ranks are stored but only addressed through flat indexing.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(Shape shape, double fill = 0.0);
  DenseArray(Shape shape, std::vector<double> data);

  static DenseArray matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return DenseArray({rows, cols}, fill);
  }
  static DenseArray vector(std::size_t n, double fill = 0.0) { return DenseArray({n}, fill); }
  static DenseArray from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseArray identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Rank-2 view; a rank-1 array is treated as a single row.
  std::size_t rows() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols(), cols()};
  }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  DenseArray& operator+=(const DenseArray& other);
  DenseArray& operator-=(const DenseArray& other);
  DenseArray& operator*=(double scale);

  void fill(double value);
  DenseArray reshaped(Shape shape) const;
  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  friend bool operator==(const DenseArray&, const DenseArray&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

DenseArray operator+(DenseArray a, const DenseArray& b);
DenseArray operator-(DenseArray a, const DenseArray& b);
DenseArray operator*(DenseArray a, double scale);

double max_abs_diff(const DenseArray& a, const DenseArray& b);

}  // namespace gesturegen::numeric
