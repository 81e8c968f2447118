#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kcache {

// Dense row-major fp32 matrix. Every kernel in this header keeps a fixed
// accumulation order (k ascending, then index ascending) so that independent
// evaluation paths can be compared bitwise.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const float& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// a (m x k) times b (k x n); throws ShapeError on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// Elementwise sum; throws ShapeError unless shapes match.
Matrix add(const Matrix& a, const Matrix& b);

// Numerically stable row softmax: subtract row max, exponentiate, normalize.
Matrix softmax_rows(const Matrix& m);
void softmax_inplace(std::span<float> row);

// x * sigmoid(x)
float silu(float x);
Matrix silu_map(const Matrix& m);

// row * gain / sqrt(mean(row^2) + eps); throws ShapeError on length mismatch.
std::vector<float> rms_norm(std::span<const float> row, std::span<const float> gain, float eps);
Matrix rms_norm_rows(const Matrix& m, std::span<const float> gain, float eps);

// Indices of the k largest values, k clamped to values.size(). Ties break
// toward the lowest index; the result is sorted ascending. k = 0 throws
// std::invalid_argument.
std::vector<std::size_t> arg_topk(std::span<const float> values, std::size_t k);

// Per-row argmax with lowest-index tie break.
std::vector<std::uint32_t> argmax_rows(const Matrix& m);

}  // namespace kcache
