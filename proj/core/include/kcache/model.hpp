#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "kcache/matrix.hpp"

namespace kcache {

using TokenId = std::uint32_t;

inline constexpr float kRmsEps = 1e-5f;
inline constexpr float kInitRange = 0.08f;  // weights ~ U[-kInitRange, kInitRange]

struct ModelConfig {
  std::size_t n_layers = 0;
  std::size_t d_model = 0;
  std::size_t n_heads = 0;
  std::size_t head_dim = 0;
  std::size_t ffn_hidden = 0;
  std::size_t vocab = 0;
  std::size_t max_seq = 0;

  // Throws ShapeError unless d_model = n_heads * head_dim, ffn_hidden >= 1,
  // vocab >= 2 and every count >= 1.
  void validate() const;

  // (8/3) * d rounded up to a multiple of 16.
  static std::size_t default_ffn_hidden(std::size_t d_model);

  // l=4, d=64, n=4, h=16, ffn=176, vocab=256, max_seq=4096.
  static ModelConfig toy();

  // Shape-only 7B-class config for analytic commands: l=32, d=4096, n=32,
  // h=128, vocab=32000, max_seq=32768. Never meant to be instantiated.
  static ModelConfig shape_7b();
};

// Total scalar parameter count implied by the config.
std::uint64_t param_count(const ModelConfig& config);

struct LayerWeights {
  std::vector<float> attn_gain;  // d
  Matrix wq, wk, wv, wo;         // d x d, heads fused along columns
  std::vector<float> ffn_gain;   // d
  Matrix w_gate, w_up;           // d x ffn_hidden
  Matrix w_down;                 // ffn_hidden x d
};

struct ModelWeights {
  ModelConfig config;
  Matrix embedding;               // vocab x d
  std::vector<LayerWeights> layers;
  std::vector<float> final_gain;  // d
  Matrix head;                    // d x vocab
};

// All tensors i.i.d. uniform in [-kInitRange, kInitRange], drawn in the same
// fixed order the weight file uses: embedding, then per layer [attn_gain, wq,
// wk, wv, wo, ffn_gain, w_gate, w_up, w_down], then final_gain, head.
ModelWeights generate_weights(const ModelConfig& config, std::uint64_t seed);

// Little-endian binary: magic "KCW1", u32 version=1, u32 config fields
// (n_layers, d_model, n_heads, head_dim, ffn_hidden, vocab, max_seq), then
// fp32 tensors row-major in the generate_weights order. No padding.
void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

struct QkvRows {
  Matrix q, k, v;
};

// Three projections of x (t x d) against the layer weights.
QkvRows qkv_project(const Matrix& x, const LayerWeights& layer);

// silu(x W_gate) elementwise-times (x W_up), then times W_down.
Matrix ffn_swiglu(const Matrix& x, const LayerWeights& layer);

// Attention sublayer callback: receives the pre-normed activations and must
// return the attention output including the output projection.
using AttentionFn = std::function<Matrix(const Matrix& normed)>;

// Pre-norm residual block: x + attn(rms(x)), then + ffn(rms(.)).
Matrix block_forward(const Matrix& x, const LayerWeights& layer, const AttentionFn& attention);

// Embedding rows for a span of token ids; throws std::out_of_range on ids
// >= vocab.
Matrix embed_tokens(const ModelWeights& w, std::span<const TokenId> ids);

// Final rms norm followed by the output head: (t x d) -> (t x vocab).
Matrix output_logits(const ModelWeights& w, const Matrix& x);

}  // namespace kcache
