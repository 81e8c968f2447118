#include "kcache/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kcache/errors.hpp"

namespace kcache {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols) + " vs " +
                     std::to_string(b.rows) + ")");
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    float* dst = out.data.data() + i * out.cols;
    const float* arow = a.data.data() + i * a.cols;
    // i-k-j loop order: each output element still accumulates in k-ascending
    // order, matching the naive triple loop bitwise.
    for (std::size_t k = 0; k < a.cols; ++k) {
      const float av = arow[k];
      const float* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) {
        dst[j] += av * brow[j];
      }
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: shape mismatch");
  }
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = a.data[i] + b.data[i];
  }
  return out;
}

void softmax_inplace(std::span<float> row) {
  if (row.empty()) {
    return;
  }
  float mx = row[0];
  for (float v : row) {
    mx = std::max(mx, v);
  }
  float sum = 0.0f;
  for (float& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (float& v : row) {
    v /= sum;
  }
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows; ++i) {
    softmax_inplace(out.row(i));
  }
  return out;
}

float silu(float x) { return x / (1.0f + std::exp(-x)); }

Matrix silu_map(const Matrix& m) {
  Matrix out = m;
  for (float& v : out.data) {
    v = silu(v);
  }
  return out;
}

std::vector<float> rms_norm(std::span<const float> row, std::span<const float> gain, float eps) {
  if (row.size() != gain.size()) {
    throw ShapeError("rms_norm: row/gain length mismatch");
  }
  float sumsq = 0.0f;
  for (float v : row) {
    sumsq += v * v;
  }
  const float denom = std::sqrt(sumsq / static_cast<float>(row.size()) + eps);
  std::vector<float> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = row[i] * gain[i] / denom;
  }
  return out;
}

Matrix rms_norm_rows(const Matrix& m, std::span<const float> gain, float eps) {
  if (m.cols != gain.size()) {
    throw ShapeError("rms_norm_rows: gain length mismatch");
  }
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto normed = rms_norm(m.row(i), gain, eps);
    std::copy(normed.begin(), normed.end(), out.row(i).begin());
  }
  return out;
}

std::vector<std::size_t> arg_topk(std::span<const float> values, std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument("arg_topk: k must be >= 1");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Full sort is fine at desk scale; stable sort makes ties break toward the
  // lowest index.
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  idx.resize(std::min(k, values.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::uint32_t> argmax_rows(const Matrix& m) {
  std::vector<std::uint32_t> out(m.rows, 0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto row = m.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) {
        best = j;
      }
    }
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

}  // namespace kcache
