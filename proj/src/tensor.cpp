#include "vle/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "vle/errors.hpp"

namespace vle::nn {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
  if (values_.size() != element_count(shape_)) {
    throw ShapeError(std::to_string(values_.size()) + " values do not fill shape " + shape_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void expect_shape(const Tensor& t, const Shape& expected, const char* what) {
  bool ok = t.rank() == expected.size();
  for (std::size_t i = 0; ok && i < expected.size(); ++i) {
    ok = expected[i] == 0 || expected[i] == t.dim(i);
  }
  if (!ok) {
    throw ShapeError(std::string(what) + ": expected " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
  }
}

namespace kernels {
namespace {

using v8 = double __attribute__((vector_size(64)));

constexpr std::size_t kRows = 6;
constexpr std::size_t kCols = 16;
constexpr std::size_t kDepth = 256;

inline v8 load(const double* p) {
  v8 v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, v8 v) { __builtin_memcpy(p, &v, sizeof v); }

// rows x kCols tile (rows <= kRows); accumulators stay in registers across k.
template <std::size_t Rows>
inline void tile(const double* __restrict a, const double* __restrict b, double* __restrict c, std::size_t k,
                 std::size_t lda, std::size_t ldb, std::size_t ldc) {
  v8 lo[Rows], hi[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    lo[r] = load(c + r * ldc);
    hi[r] = load(c + r * ldc + 8);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const v8 b0 = load(b + p * ldb);
    const v8 b1 = load(b + p * ldb + 8);
    for (std::size_t r = 0; r < Rows; ++r) {
      const double av = a[r * lda + p];
      lo[r] += av * b0;
      hi[r] += av * b1;
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    store(c + r * ldc, lo[r]);
    store(c + r * ldc + 8, hi[r]);
  }
}

template <std::size_t Rows>
void row_block(const double* a, const double* b, double* c, std::size_t k, std::size_t lda, std::size_t n,
               std::size_t n_full) {
  for (std::size_t j = 0; j < n_full; j += kCols) tile<Rows>(a, b + j, c + j, k, lda, n, n);
}

}  // namespace

void matmul_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n) {
  const std::size_t n_full = n - n % kCols;
  // Blocking k keeps a B panel cache-resident; C is carried between blocks,
  // so every element still sums its products in ascending k.
  for (std::size_t p0 = 0; p0 < k; p0 += kDepth) {
    const std::size_t kc = std::min(kDepth, k - p0);
    const double* ap = a + p0;
    const double* bp = b + p0 * n;
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows) row_block<kRows>(ap + i * k, bp, c + i * n, kc, k, n, n_full);
    switch (m - i) {
      case 5: row_block<5>(ap + i * k, bp, c + i * n, kc, k, n, n_full); break;
      case 4: row_block<4>(ap + i * k, bp, c + i * n, kc, k, n, n_full); break;
      case 3: row_block<3>(ap + i * k, bp, c + i * n, kc, k, n, n_full); break;
      case 2: row_block<2>(ap + i * k, bp, c + i * n, kc, k, n, n_full); break;
      case 1: row_block<1>(ap + i * k, bp, c + i * n, kc, k, n, n_full); break;
      default: break;
    }
    if (n_full == n) continue;
    // Ragged right edge: plain loops, same per-element accumulation order.
    for (std::size_t r = 0; r < m; ++r) {
      double* crow = c + r * n;
      const double* arow = ap + r * k;
      for (std::size_t j = n_full; j < n; ++j) {
        double acc = crow[j];
        for (std::size_t p = 0; p < kc; ++p) acc += arow[p] * bp[p * n + j];
        crow[j] = acc;
      }
    }
  }
}

void transpose(const double* in, double* out, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
    const std::size_t i1 = std::min(rows, i0 + kBlock);
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t j1 = std::min(cols, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = in[i * cols + j];
    }
  }
}

}  // namespace kernels
}  // namespace vle::nn
