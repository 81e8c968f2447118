#include "kcache/kv_cache.hpp"

#include <algorithm>
#include <string>

#include "kcache/checked.hpp"
#include "kcache/errors.hpp"

namespace kcache {

const char* to_string(CacheMode mode) {
  return mode == CacheMode::baseline ? "baseline" : "kcache";
}

const char* to_string(TransferDir dir) { return dir == TransferDir::d2h ? "D2H" : "H2D"; }

const char* to_string(EnginePhase phase) {
  return phase == EnginePhase::prefill ? "prefill" : "decode";
}

void TransferLedger::record(EnginePhase phase, std::size_t layer, TransferDir dir,
                            std::uint64_t bytes, std::uint64_t elements) {
  events_.push_back({phase, layer, dir, bytes, elements});
  if (dir == TransferDir::d2h) {
    d2h_bytes_ += bytes;
  } else {
    h2d_bytes_ += bytes;
  }
}

void TransferLedger::write_jsonl(std::ostream& out) const {
  for (const auto& e : events_) {
    out << "{\"phase\":\"" << to_string(e.phase) << "\",\"layer\":" << e.layer << ",\"dir\":\""
        << to_string(e.dir) << "\",\"bytes\":" << e.bytes << ",\"elements\":" << e.elements
        << "}\n";
  }
}

void TierPlacement::validate() const {
  if (resident_layers > n_layers) {
    throw ShapeError("TierPlacement: resident_layers must be <= n_layers");
  }
  if (bytes_per_element == 0) {
    throw ShapeError("TierPlacement: bytes_per_element must be >= 1");
  }
}

FootprintBytes memory_footprint(const ModelConfig& config, std::size_t batch, std::size_t seq_len,
                                CacheMode mode, std::size_t resident_layers,
                                std::size_t bytes_per_element) {
  const std::uint64_t per_layer =
      checked_mul({bytes_per_element, batch, seq_len, config.d_model});
  FootprintBytes fp;
  if (mode == CacheMode::baseline) {
    fp.fast_bytes = checked_mul({2, per_layer, config.n_layers});
    fp.slow_bytes = 0;
  } else {
    if (resident_layers > config.n_layers) {
      throw ShapeError("memory_footprint: resident_layers > n_layers");
    }
    fp.fast_bytes = checked_mul({per_layer, config.n_layers + resident_layers});
    fp.slow_bytes = checked_mul({per_layer, config.n_layers - resident_layers});
  }
  fp.weight_bytes = checked_mul({param_count(config), bytes_per_element});
  return fp;
}

TieredKVCache::TieredKVCache(const ModelConfig& config, std::size_t batch,
                             TierPlacement placement,
                             std::optional<std::uint64_t> fast_capacity_bytes)
    : config_(config), batch_(batch), placement_(placement), fast_capacity_(fast_capacity_bytes) {
  config_.validate();
  placement_.validate();
  if (placement_.n_layers != config_.n_layers) {
    throw ShapeError("TieredKVCache: placement layer count differs from config");
  }
  if (batch_ == 0) {
    throw ShapeError("TieredKVCache: batch must be >= 1");
  }
  layers_.resize(config_.n_layers);
}

void TieredKVCache::check_layer(std::size_t layer) const {
  if (layer >= layers_.size()) {
    throw std::out_of_range("TieredKVCache: layer " + std::to_string(layer) + " out of range");
  }
}

bool TieredKVCache::v_in_slow(std::size_t layer) const {
  if (placement_.v_resident(layer)) {
    return false;
  }
  return layers_[layer].offloaded;
}

void TieredKVCache::append_kv(std::size_t layer, const Matrix& k_rows, const Matrix& v_rows) {
  check_layer(layer);
  if (k_rows.cols != config_.d_model || v_rows.cols != config_.d_model) {
    throw ShapeError("append_kv: row width must equal d_model");
  }
  if (k_rows.rows != v_rows.rows || k_rows.rows == 0 || k_rows.rows % batch_ != 0) {
    throw ShapeError("append_kv: need a positive multiple of batch rows for K and V");
  }
  LayerStore& store = layers_[layer];
  store.k.insert(store.k.end(), k_rows.data.begin(), k_rows.data.end());

  const bool to_slow = phase_ == EnginePhase::decode && !placement_.v_resident(layer);
  if (to_slow) {
    store.v_slow.insert(store.v_slow.end(), v_rows.data.begin(), v_rows.data.end());
    const std::uint64_t elements = v_rows.data.size();
    ledger_.record(phase_, layer, TransferDir::d2h,
                   checked_mul({placement_.bytes_per_element, elements}), elements);
  } else {
    store.v_fast.insert(store.v_fast.end(), v_rows.data.begin(), v_rows.data.end());
  }
  store.len += k_rows.rows / batch_;
  if (store.len > config_.max_seq) {
    throw StateError("append_kv: cache grew past max_seq");
  }
  check_fast_capacity();
}

void TieredKVCache::offload_prefill_v(std::size_t layer) {
  check_layer(layer);
  if (placement_.v_resident(layer)) {
    return;
  }
  LayerStore& store = layers_[layer];
  if (store.offloaded) {
    throw StateError("offload_prefill_v: layer " + std::to_string(layer) + " already offloaded");
  }
  const std::uint64_t elements = store.v_fast.size();
  store.v_slow.insert(store.v_slow.end(), store.v_fast.begin(), store.v_fast.end());
  store.v_fast.clear();
  store.v_fast.shrink_to_fit();
  store.offloaded = true;
  ledger_.record(EnginePhase::prefill, layer, TransferDir::d2h,
                 checked_mul({placement_.bytes_per_element, elements}), elements);
}

void TieredKVCache::begin_decode() {
  for (std::size_t layer = placement_.resident_layers; layer < layers_.size(); ++layer) {
    if (!layers_[layer].offloaded) {
      throw StateError("begin_decode: layer " + std::to_string(layer) + " was never offloaded");
    }
  }
  phase_ = EnginePhase::decode;
}

GatheredV TieredKVCache::gather_v(std::size_t layer, const SelectionIndices& selection) {
  check_layer(layer);
  const LayerStore& store = layers_[layer];
  if (selection.size() != batch_ * config_.n_heads) {
    throw ShapeError("gather_v: selection must cover batch * n_heads slots");
  }
  const std::size_t h = config_.head_dim;
  const std::size_t d = config_.d_model;
  const std::vector<float>& src = v_in_slow(layer) ? store.v_slow : store.v_fast;

  GatheredV out;
  out.head_dim = h;
  out.blocks.resize(selection.size());
  std::uint64_t gathered_rows = 0;
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t head = 0; head < config_.n_heads; ++head) {
      const auto& idx = selection[b * config_.n_heads + head];
      auto& block = out.blocks[b * config_.n_heads + head];
      block.resize(idx.size() * h);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t pos = idx[r];
        if (pos >= store.len) {
          throw std::out_of_range("gather_v: index " + std::to_string(pos) +
                                  " past current length " + std::to_string(store.len));
        }
        const float* row = src.data() + (pos * batch_ + b) * d + head * h;
        std::copy(row, row + h, block.data() + r * h);
      }
      gathered_rows += idx.size();
    }
  }
  if (v_in_slow(layer)) {
    const std::uint64_t elements = checked_mul({gathered_rows, h});
    out.h2d_bytes = checked_mul({placement_.bytes_per_element, elements});
    ledger_.record(phase_, layer, TransferDir::h2d, out.h2d_bytes, elements);
  }
  return out;
}

std::span<const float> TieredKVCache::k_row(std::size_t layer, std::size_t pos,
                                            std::size_t batch_idx) const {
  check_layer(layer);
  const LayerStore& store = layers_[layer];
  if (pos >= store.len || batch_idx >= batch_) {
    throw std::out_of_range("k_row: position or batch index out of range");
  }
  return {store.k.data() + (pos * batch_ + batch_idx) * config_.d_model, config_.d_model};
}

std::span<const float> TieredKVCache::v_row(std::size_t layer, std::size_t pos,
                                            std::size_t batch_idx) const {
  check_layer(layer);
  const LayerStore& store = layers_[layer];
  if (pos >= store.len || batch_idx >= batch_) {
    throw std::out_of_range("v_row: position or batch index out of range");
  }
  const std::vector<float>& src = v_in_slow(layer) ? store.v_slow : store.v_fast;
  return {src.data() + (pos * batch_ + batch_idx) * config_.d_model, config_.d_model};
}

std::size_t TieredKVCache::current_len() const {
  return layers_.empty() ? 0 : layers_[0].len;
}

std::uint64_t TieredKVCache::fast_bytes_used() const {
  std::uint64_t elements = 0;
  for (const auto& store : layers_) {
    elements += store.k.size() + store.v_fast.size();
  }
  return checked_mul({placement_.bytes_per_element, elements});
}

std::uint64_t TieredKVCache::slow_bytes_used() const {
  std::uint64_t elements = 0;
  for (const auto& store : layers_) {
    elements += store.v_slow.size();
  }
  return checked_mul({placement_.bytes_per_element, elements});
}

void TieredKVCache::check_fast_capacity() const {
  if (fast_capacity_ && fast_bytes_used() > *fast_capacity_) {
    throw CapacityError("fast tier over budget: " + std::to_string(fast_bytes_used()) + " > " +
                        std::to_string(*fast_capacity_) + " bytes");
  }
}

}  // namespace kcache
