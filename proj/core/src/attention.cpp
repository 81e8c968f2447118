#include "kcache/attention.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "kcache/errors.hpp"

namespace kcache {

namespace {

// Shared by every attention path so the arithmetic is identical expression
// for expression (bitwise comparability).
float dot_scaled(const float* a, const float* b, std::size_t n, float scale) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc * scale;
}

void add_scaled(float* acc, float w, const float* v, std::size_t n) {
  for (std::size_t c = 0; c < n; ++c) {
    acc[c] += w * v[c];
  }
}

}  // namespace

Matrix prefill_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t n_heads) {
  if (!q.same_shape(k) || !q.same_shape(v)) {
    throw ShapeError("prefill_attention: Q/K/V shapes differ");
  }
  if (n_heads == 0 || q.cols % n_heads != 0) {
    throw ShapeError("prefill_attention: cols must divide into heads");
  }
  const std::size_t s = q.rows;
  const std::size_t h = q.cols / n_heads;
  const float scale = attention_score_scale(h);

  Matrix out(s, q.cols);
  std::vector<float> scores;
  for (std::size_t head = 0; head < n_heads; ++head) {
    const std::size_t off = head * h;
    for (std::size_t i = 0; i < s; ++i) {
      // causal: position i sees keys 0..i
      scores.assign(i + 1, 0.0f);
      const float* qrow = q.data.data() + i * q.cols + off;
      for (std::size_t j = 0; j <= i; ++j) {
        scores[j] = dot_scaled(qrow, k.data.data() + j * k.cols + off, h, scale);
      }
      softmax_inplace(scores);
      float* dst = out.data.data() + i * out.cols + off;
      for (std::size_t j = 0; j <= i; ++j) {
        add_scaled(dst, scores[j], v.data.data() + j * v.cols + off, h);
      }
    }
  }
  return out;
}

namespace {

// Full softmax weights for one (batch, head) pair against the cached keys.
void head_weights(const Matrix& q, const TieredKVCache& cache, std::size_t layer,
                  std::size_t batch_idx, std::size_t head, std::vector<float>& weights) {
  const std::size_t h = cache.config().head_dim;
  const std::size_t off = head * h;
  const float scale = attention_score_scale(h);
  const std::size_t len = cache.current_len();
  weights.assign(len, 0.0f);
  const float* qrow = q.data.data() + batch_idx * q.cols + off;
  for (std::size_t j = 0; j < len; ++j) {
    weights[j] = dot_scaled(qrow, cache.k_row(layer, j, batch_idx).data() + off, h, scale);
  }
  softmax_inplace(weights);
}

void check_decode_inputs(const Matrix& q, const TieredKVCache& cache) {
  if (q.rows != cache.batch() || q.cols != cache.config().d_model) {
    throw ShapeError("decode attention: q must be batch x d_model");
  }
  if (cache.current_len() == 0) {
    throw StateError("decode attention: cache is empty");
  }
}

}  // namespace

Matrix decode_attention_full(const Matrix& q, const TieredKVCache& cache, std::size_t layer,
                             const ScoreObserver& observer) {
  check_decode_inputs(q, cache);
  const ModelConfig& c = cache.config();
  const std::size_t h = c.head_dim;
  const std::size_t len = cache.current_len();

  Matrix out(q.rows, q.cols);
  std::vector<float> weights;
  for (std::size_t b = 0; b < cache.batch(); ++b) {
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      head_weights(q, cache, layer, b, head, weights);
      if (observer) {
        observer(b, head, weights);
      }
      const std::size_t off = head * h;
      float* dst = out.data.data() + b * out.cols + off;
      for (std::size_t j = 0; j < len; ++j) {
        add_scaled(dst, weights[j], cache.v_row(layer, j, b).data() + off, h);
      }
    }
  }
  return out;
}

TopNResult decode_attention_topn(const Matrix& q, TieredKVCache& cache, std::size_t layer,
                                 std::size_t top_n, bool renormalize, bool ordered_accumulation,
                                 const ScoreObserver& observer) {
  if (top_n == 0) {
    throw std::invalid_argument("decode_attention_topn: top_n must be >= 1");
  }
  check_decode_inputs(q, cache);
  const ModelConfig& c = cache.config();
  const std::size_t h = c.head_dim;

  TopNResult res;
  res.selection.batch = cache.batch();
  res.selection.n_heads = c.n_heads;
  res.selection.indices.resize(cache.batch() * c.n_heads);
  res.selection.weights.resize(cache.batch() * c.n_heads);
  res.selection.dropped_mass.resize(cache.batch() * c.n_heads, 0.0);

  std::vector<float> weights;
  for (std::size_t b = 0; b < cache.batch(); ++b) {
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      head_weights(q, cache, layer, b, head, weights);
      if (observer) {
        observer(b, head, weights);
      }
      const auto picked = arg_topk({weights.data(), weights.size()}, top_n);
      const std::size_t slot = res.selection.slot(b, head);
      auto& idx = res.selection.indices[slot];
      auto& retained = res.selection.weights[slot];
      idx.reserve(picked.size());
      retained.reserve(picked.size());
      double mass = 0.0;
      for (std::size_t p : picked) {
        idx.push_back(static_cast<std::uint32_t>(p));
        retained.push_back(weights[p]);
        mass += static_cast<double>(weights[p]);
      }
      res.selection.dropped_mass[slot] = 1.0 - mass;
    }
  }

  GatheredV gathered = cache.gather_v(layer, res.selection.indices);
  res.h2d_bytes = gathered.h2d_bytes;

  res.out = Matrix(q.rows, q.cols);
  for (std::size_t b = 0; b < cache.batch(); ++b) {
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      const std::size_t slot = res.selection.slot(b, head);
      const auto& retained = res.selection.weights[slot];
      const auto& block = gathered.blocks[slot];
      float* dst = res.out.data.data() + b * res.out.cols + head * h;

      float norm = 1.0f;
      if (renormalize) {
        float sum = 0.0f;
        for (float w : retained) {
          sum += w;
        }
        norm = sum > 0.0f ? 1.0f / sum : 1.0f;
      }
      if (ordered_accumulation) {
        for (std::size_t r = 0; r < retained.size(); ++r) {
          const float w = renormalize ? retained[r] * norm : retained[r];
          add_scaled(dst, w, block.data() + r * h, h);
        }
      } else {
        // fault hook: descending position order
        for (std::size_t r = retained.size(); r-- > 0;) {
          const float w = renormalize ? retained[r] * norm : retained[r];
          add_scaled(dst, w, block.data() + r * h, h);
        }
      }
    }
  }
  return res;
}

}  // namespace kcache
