#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "kcache/matrix.hpp"
#include "kcache/model.hpp"

namespace kcache {

enum class CacheMode { baseline, kcache };

enum class TransferDir { d2h, h2d };
enum class EnginePhase { prefill, decode };

const char* to_string(CacheMode mode);
const char* to_string(TransferDir dir);
const char* to_string(EnginePhase phase);

struct TransferEvent {
  EnginePhase phase;
  std::size_t layer;
  TransferDir dir;
  std::uint64_t bytes;
  std::uint64_t elements;
};

// Append-only record of every logical tier move.
class TransferLedger {
 public:
  void record(EnginePhase phase, std::size_t layer, TransferDir dir, std::uint64_t bytes,
              std::uint64_t elements);

  const std::vector<TransferEvent>& events() const { return events_; }
  std::uint64_t d2h_bytes() const { return d2h_bytes_; }
  std::uint64_t h2d_bytes() const { return h2d_bytes_; }

  // One JSON object per line: {"phase","layer","dir","bytes","elements"}.
  void write_jsonl(std::ostream& out) const;

 private:
  std::vector<TransferEvent> events_;
  std::uint64_t d2h_bytes_ = 0;
  std::uint64_t h2d_bytes_ = 0;
};

// Which layers keep their V cache in the fast tier. K is always fast.
struct TierPlacement {
  std::size_t resident_layers = 0;     // L: layers [0, L) keep V fast
  std::size_t n_layers = 0;            // l
  std::size_t bytes_per_element = 2;   // accounting metadata; storage stays fp32

  static TierPlacement baseline(std::size_t n_layers, std::size_t bytes_per_element = 2) {
    return {n_layers, n_layers, bytes_per_element};
  }
  static TierPlacement kcache(std::size_t resident_layers, std::size_t n_layers,
                              std::size_t bytes_per_element = 2) {
    return {resident_layers, n_layers, bytes_per_element};
  }

  void validate() const;  // 0 <= L <= l, bytes >= 1
  bool v_resident(std::size_t layer) const { return layer < resident_layers; }
};

struct FootprintBytes {
  std::uint64_t fast_bytes = 0;
  std::uint64_t slow_bytes = 0;
  std::uint64_t weight_bytes = 0;
};

// Closed-form cache + weight footprint. baseline: fast = 2*bytes*b*s*d*l.
// kcache: fast = bytes*b*s*d*(l+L), slow = bytes*b*s*d*(l-L).
FootprintBytes memory_footprint(const ModelConfig& config, std::size_t batch, std::size_t seq_len,
                                CacheMode mode, std::size_t resident_layers,
                                std::size_t bytes_per_element);

// Selected sequence positions per (batch, head), batch-major flattening.
using SelectionIndices = std::vector<std::vector<std::uint32_t>>;

struct GatheredV {
  std::size_t head_dim = 0;
  // blocks[b * n_heads + head]: row-major (selected_count x head_dim)
  std::vector<std::vector<float>> blocks;
  std::uint64_t h2d_bytes = 0;
};

// Per-layer K and V stores split across a fast and a slow tier with
// byte-accurate transfer accounting. One cache per generation session.
//
// Prefill: append_kv puts both K and V in the fast tier; offload_prefill_v
// then moves V of layers >= L to the slow tier (one D2H event per layer).
// Decode (after begin_decode): V rows of layers >= L are appended straight to
// the slow tier, each append recording a D2H event; gather_v pulls selected
// rows back, recording one H2D event per call. Resident layers never touch
// the ledger.
class TieredKVCache {
 public:
  TieredKVCache(const ModelConfig& config, std::size_t batch, TierPlacement placement,
                std::optional<std::uint64_t> fast_capacity_bytes = std::nullopt);

  // k_rows/v_rows hold m*batch rows of width d, position-major (all batch
  // rows of a position together). Decode steps pass m = 1.
  void append_kv(std::size_t layer, const Matrix& k_rows, const Matrix& v_rows);

  // No-op for layers < L. Throws StateError on a second call for a layer.
  void offload_prefill_v(std::size_t layer);

  // Switches append routing to decode behaviour. Requires every layer >= L
  // to have been offloaded.
  void begin_decode();

  // Head-sliced V rows for the given per-(batch, head) indices (each list
  // ascending, values < current_len). Records one H2D event covering
  // bytes * sum(counts) * head_dim unless the layer's V is fast-resident.
  GatheredV gather_v(std::size_t layer, const SelectionIndices& selection);

  std::span<const float> k_row(std::size_t layer, std::size_t pos, std::size_t batch_idx) const;
  std::span<const float> v_row(std::size_t layer, std::size_t pos, std::size_t batch_idx) const;

  std::size_t current_len() const;
  std::size_t batch() const { return batch_; }
  const ModelConfig& config() const { return config_; }
  const TierPlacement& placement() const { return placement_; }
  EnginePhase phase() const { return phase_; }

  std::uint64_t fast_bytes_used() const;
  std::uint64_t slow_bytes_used() const;
  std::uint64_t d2h_bytes_total() const { return ledger_.d2h_bytes(); }
  std::uint64_t h2d_bytes_total() const { return ledger_.h2d_bytes(); }
  const TransferLedger& ledger() const { return ledger_; }

 private:
  struct LayerStore {
    std::vector<float> k;       // fast tier, [pos][batch][d]
    std::vector<float> v_fast;  // fast tier
    std::vector<float> v_slow;  // slow tier
    bool offloaded = false;
    std::size_t len = 0;  // positions
  };

  void check_layer(std::size_t layer) const;
  void check_fast_capacity() const;
  bool v_in_slow(std::size_t layer) const;

  ModelConfig config_;
  std::size_t batch_;
  TierPlacement placement_;
  std::optional<std::uint64_t> fast_capacity_;
  EnginePhase phase_ = EnginePhase::prefill;
  std::vector<LayerStore> layers_;
  TransferLedger ledger_;
};

}  // namespace kcache
