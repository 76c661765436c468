#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vle::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles, rank 1 to 3 (batch first).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same values under a new shape of equal element count; throws ShapeError.
  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Throws ShapeError unless `t` has the expected rank and, where the
/// expected extent is non-zero, the expected extent.
void expect_shape(const Tensor& t, const Shape& expected, const char* what);

namespace kernels {

/// c[m x n] += a[m x k] * b[k x n], all row-major. Each output element
/// accumulates its k products in ascending order, so results do not depend
/// on tiling.
void matmul_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n);

/// out[cols x rows] = in[rows x cols]^T.
void transpose(const double* in, double* out, std::size_t rows, std::size_t cols);

}  // namespace kernels

}  // namespace vle::nn
