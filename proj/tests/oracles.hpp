// Test-only reference implementations. These stay independent of the engine
// and cache code paths they check: attention is recomputed per position from
// full activations, reductions are written as plain scalar loops.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "kcache/matrix.hpp"
#include "kcache/model.hpp"
#include "kcache/rng.hpp"

namespace oracle {

inline bool bitwise_equal(const kcache::Matrix& a, const kcache::Matrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

inline kcache::Matrix random_matrix(std::size_t rows, std::size_t cols, kcache::SeededRng& rng,
                                    float lo = -1.0f, float hi = 1.0f) {
  kcache::Matrix m(rows, cols);
  for (float& v : m.data) {
    v = rng.next_uniform(lo, hi);
  }
  return m;
}

// i-j-k triple loop, k ascending: the production kernel's contract is to
// match this bitwise.
inline kcache::Matrix naive_matmul(const kcache::Matrix& a, const kcache::Matrix& b) {
  kcache::Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < a.cols; ++k) {
        acc += a.at(i, k) * b.at(k, j);
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

inline std::vector<float> scalar_rms_norm(std::span<const float> row,
                                          std::span<const float> gain, float eps) {
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

inline double scalar_silu(double x) { return x / (1.0 + std::exp(-x)); }

// Causal attention for one batch row, evaluated position by position with
// plain loops (no shared kernels beyond scalar math).
inline kcache::Matrix per_position_attention(const kcache::Matrix& q, const kcache::Matrix& k,
                                             const kcache::Matrix& v, std::size_t n_heads) {
  const std::size_t s = q.rows;
  const std::size_t h = q.cols / n_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(h));
  kcache::Matrix out(s, q.cols);
  for (std::size_t head = 0; head < n_heads; ++head) {
    const std::size_t off = head * h;
    for (std::size_t i = 0; i < s; ++i) {
      std::vector<float> scores(i + 1, 0.0f);
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        float acc = 0.0f;
        for (std::size_t t = 0; t < h; ++t) {
          acc += q.at(i, off + t) * k.at(j, off + t);
        }
        scores[j] = acc * scale;
        mx = std::max(mx, scores[j]);
      }
      float sum = 0.0f;
      for (std::size_t j = 0; j <= i; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        sum += scores[j];
      }
      for (std::size_t j = 0; j <= i; ++j) {
        scores[j] /= sum;
      }
      for (std::size_t j = 0; j <= i; ++j) {
        for (std::size_t t = 0; t < h; ++t) {
          out.at(i, off + t) += scores[j] * v.at(j, off + t);
        }
      }
    }
  }
  return out;
}

// Cache-free full forward for one batch row; returns logits at every
// position. Any engine caching bug shows up as a mismatch against this.
inline kcache::Matrix reference_forward_logits(const kcache::ModelWeights& w,
                                               std::span<const kcache::TokenId> ids) {
  using namespace kcache;
  const ModelConfig& c = w.config;
  Matrix x = embed_tokens(w, ids);
  for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
    const LayerWeights& lw = w.layers[layer];
    const Matrix normed = rms_norm_rows(x, lw.attn_gain, kRmsEps);
    const Matrix ctx = per_position_attention(matmul(normed, lw.wq), matmul(normed, lw.wk),
                                              matmul(normed, lw.wv), c.n_heads);
    x = add(x, matmul(ctx, lw.wo));
    x = add(x, ffn_swiglu(rms_norm_rows(x, lw.ffn_gain, kRmsEps), lw));
  }
  return output_logits(w, x);
}

inline double max_rel_error(std::span<const float> a, std::span<const float> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(static_cast<double>(a[i])),
                                   std::abs(static_cast<double>(b[i])), 1e-8});
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]) / denom);
  }
  return worst;
}

}  // namespace oracle
