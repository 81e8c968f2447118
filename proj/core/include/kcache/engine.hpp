#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kcache/attention.hpp"
#include "kcache/kv_cache.hpp"
#include "kcache/model.hpp"

namespace kcache {

using TokenMatrix = std::vector<std::vector<TokenId>>;  // [batch][position]

struct EngineConfig {
  CacheMode mode = CacheMode::baseline;
  std::size_t top_n = 128;           // kcache only
  std::size_t resident_layers = 0;   // L, kcache only
  bool renormalize = false;
  bool topn_on_resident = false;     // apply TopN below L as well
  std::uint64_t prompt_seed = 0;
  std::size_t prompt_len = 0;
  std::size_t gen_len = 0;
  std::size_t batch = 1;
  std::size_t bytes_per_element = 2;  // ledger/footprint accounting
  std::optional<std::uint64_t> fast_capacity;

  void validate(const ModelConfig& model) const;
  TierPlacement placement(const ModelConfig& model) const;
};

inline constexpr std::size_t kPositionHistogramBins = 8;

struct StepStats {
  std::uint64_t h2d_bytes = 0;
  std::uint64_t d2h_bytes = 0;
  // Mean over the step's TopN selections (offloaded layers x batch x heads);
  // zero when the step ran no selection.
  double mean_dropped_mass = 0.0;
  // Selected positions bucketed by position/len into 8 bins.
  std::array<std::uint64_t, kPositionHistogramBins> position_histogram{};
};

struct LayerTransferTotals {
  std::size_t layer = 0;
  std::uint64_t d2h_bytes = 0;
  std::uint64_t h2d_bytes = 0;
};

struct GenerationReport {
  ModelConfig model;
  EngineConfig config;
  std::string weight_source;  // e.g. "seed:1" or "file:weights.bin"
  std::string prompt_source;
  float init_range = kInitRange;
  TokenMatrix tokens;         // [batch][gen_len]
  Matrix final_logits;        // last decode step (prefill logits if gen_len = 0)
  std::vector<StepStats> steps;
  std::vector<LayerTransferTotals> per_layer;
  TransferLedger ledger;      // full event list (JSONL via TransferLedger)
  std::uint64_t d2h_bytes_total = 0;
  std::uint64_t h2d_bytes_total = 0;
  FootprintBytes footprint;   // at prompt_len + gen_len
};

// Observation hook for sweep instrumentation; receives each decode-time
// softmax row. Never alters results.
using DecodeScoreObserver = std::function<void(std::size_t layer, std::size_t batch_idx,
                                               std::size_t head, std::span<const float> weights)>;

// One generation session: prefill once, then autoregressive greedy decode.
// Holds a reference to the weights, which must outlive the engine.
class Engine {
 public:
  Engine(const ModelWeights& weights, const EngineConfig& config);

  // Full causal forward over the prompt; populates and offloads the cache.
  // Returns the final-position logits (batch x vocab).
  Matrix prefill(const TokenMatrix& prompt);

  struct StepOutput {
    Matrix logits;                    // batch x vocab
    std::vector<TokenId> next_tokens; // greedy argmax, lowest-index ties
    StepStats stats;
  };

  // One decode step consuming the previous tokens (one per batch row).
  StepOutput decode_step(std::span<const TokenId> prev_tokens);

  const TieredKVCache& cache() const { return cache_; }
  const EngineConfig& config() const { return config_; }
  void set_score_observer(DecodeScoreObserver observer) { observer_ = std::move(observer); }

 private:
  Matrix forward_decode(const Matrix& embedded, StepStats& stats);

  const ModelWeights& weights_;
  EngineConfig config_;
  TieredKVCache cache_;
  DecodeScoreObserver observer_;
  bool prefill_done_ = false;
};

// prefill + gen_len decode steps. tokens[.][0] is the argmax of the prefill
// logits; each decode step consumes the latest token and produces the next.
GenerationReport generate(const ModelWeights& weights, const EngineConfig& config,
                          const TokenMatrix& prompt, const std::string& weight_source = "",
                          const std::string& prompt_source = "");

// Seeded uniform token ids in [0, vocab).
TokenMatrix random_prompt(const ModelConfig& model, std::size_t batch, std::size_t len,
                          std::uint64_t seed);

}  // namespace kcache
