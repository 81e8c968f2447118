#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kcache/kv_cache.hpp"
#include "kcache/matrix.hpp"

namespace kcache {

// Logits are divided by sqrt(head_dim).
inline float attention_score_scale(std::size_t head_dim) {
  return 1.0f / std::sqrt(static_cast<float>(head_dim));
}

// Outcome of TopN filtering for one decode step.
struct TopNSelection {
  std::size_t batch = 0;
  std::size_t n_heads = 0;
  SelectionIndices indices;                 // ascending per (batch, head)
  std::vector<std::vector<float>> weights;  // raw softmax values at indices
  std::vector<double> dropped_mass;         // 1 - sum(retained weights)

  std::size_t slot(std::size_t batch_idx, std::size_t head) const {
    return batch_idx * n_heads + head;
  }
};

// Called with the full softmax weight row of one (batch, head) pair; used by
// sweep instrumentation. Must not mutate anything the kernel reads.
using ScoreObserver =
    std::function<void(std::size_t batch_idx, std::size_t head, std::span<const float> weights)>;

// Causal attention over full prompt activations, one batch row at a time:
// per head softmax(q k^T * scale + causal mask) v, heads concatenated. The
// output projection is the caller's job.
Matrix prefill_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t n_heads);

// Decode attention over every cached position. V rows are read from
// whichever tier holds them; nothing is ledgered. This is the baseline path
// and the resident-layer path.
Matrix decode_attention_full(const Matrix& q, const TieredKVCache& cache, std::size_t layer,
                             const ScoreObserver& observer = {});

struct TopNResult {
  Matrix out;
  TopNSelection selection;
  std::uint64_t h2d_bytes = 0;
};

// Decode attention with TopN filtering: scores against all cached K (K is
// always fast-resident), softmax, per-(batch, head) top-N pick with N clamped
// to the cache length, gather of the selected V rows, then a weighted sum of
// raw retained weights (or weights rescaled to sum 1 when renormalize).
// With N >= current_len and renormalize=false the result is bitwise equal to
// decode_attention_full.
//
// ordered_accumulation=false is a verification fault hook: it accumulates the
// selected rows in descending position order, which breaks the bitwise
// equivalence without touching the selection itself.
TopNResult decode_attention_topn(const Matrix& q, TieredKVCache& cache, std::size_t layer,
                                 std::size_t top_n, bool renormalize,
                                 bool ordered_accumulation = true,
                                 const ScoreObserver& observer = {});

}  // namespace kcache
