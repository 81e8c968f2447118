#include "kcache/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "kcache/errors.hpp"
#include "kcache/rng.hpp"

namespace kcache {

void EngineConfig::validate(const ModelConfig& model) const {
  if (batch == 0) {
    throw ShapeError("EngineConfig: batch must be >= 1");
  }
  if (bytes_per_element == 0) {
    throw ShapeError("EngineConfig: bytes_per_element must be >= 1");
  }
  if (mode == CacheMode::kcache) {
    if (top_n == 0) {
      throw std::invalid_argument("EngineConfig: kcache mode requires top_n >= 1");
    }
    if (resident_layers > model.n_layers) {
      throw ShapeError("EngineConfig: resident_layers must be <= n_layers");
    }
  }
  if (prompt_len == 0) {
    throw std::invalid_argument("EngineConfig: prompt must be non-empty");
  }
  if (prompt_len + gen_len > model.max_seq) {
    throw StateError("EngineConfig: prompt_len + gen_len exceeds max_seq");
  }
}

TierPlacement EngineConfig::placement(const ModelConfig& model) const {
  // Baseline degenerates to the fully resident placement.
  const std::size_t resident =
      mode == CacheMode::baseline ? model.n_layers : resident_layers;
  return TierPlacement{resident, model.n_layers, bytes_per_element};
}

Engine::Engine(const ModelWeights& weights, const EngineConfig& config)
    : weights_(weights),
      config_(config),
      cache_(weights.config, config.batch, config.placement(weights.config),
             config.fast_capacity) {}

namespace {

// Interleaves per-batch-row matrices (rows x d each) into position-major
// order: all batch rows of position 0, then position 1, ...
Matrix interleave_rows(const std::vector<Matrix>& per_batch) {
  const std::size_t batch = per_batch.size();
  const std::size_t rows = per_batch[0].rows;
  const std::size_t d = per_batch[0].cols;
  Matrix out(rows * batch, d);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t b = 0; b < batch; ++b) {
      const auto src = per_batch[b].row(pos);
      std::copy(src.begin(), src.end(), out.row(pos * batch + b).begin());
    }
  }
  return out;
}

}  // namespace

Matrix Engine::prefill(const TokenMatrix& prompt) {
  if (prefill_done_) {
    throw StateError("prefill: session already prefilled");
  }
  if (prompt.size() != config_.batch) {
    throw ShapeError("prefill: prompt rows must equal batch");
  }
  const std::size_t s = prompt.empty() ? 0 : prompt[0].size();
  if (s == 0) {
    throw std::invalid_argument("prefill: prompt must be non-empty");
  }
  for (const auto& row : prompt) {
    if (row.size() != s) {
      throw ShapeError("prefill: all batch rows must share one prompt length");
    }
  }
  if (s > weights_.config.max_seq) {
    throw StateError("prefill: prompt longer than max_seq");
  }

  const std::size_t batch = config_.batch;
  std::vector<Matrix> x(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    x[b] = embed_tokens(weights_, prompt[b]);
  }

  for (std::size_t layer = 0; layer < weights_.config.n_layers; ++layer) {
    const LayerWeights& lw = weights_.layers[layer];
    std::vector<Matrix> q(batch), k(batch), v(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const Matrix normed = rms_norm_rows(x[b], lw.attn_gain, kRmsEps);
      QkvRows rows = qkv_project(normed, lw);
      q[b] = std::move(rows.q);
      k[b] = std::move(rows.k);
      v[b] = std::move(rows.v);
    }
    cache_.append_kv(layer, interleave_rows(k), interleave_rows(v));
    for (std::size_t b = 0; b < batch; ++b) {
      const Matrix ctx = prefill_attention(q[b], k[b], v[b], weights_.config.n_heads);
      x[b] = add(x[b], matmul(ctx, lw.wo));
      const Matrix ffn_in = rms_norm_rows(x[b], lw.ffn_gain, kRmsEps);
      x[b] = add(x[b], ffn_swiglu(ffn_in, lw));
    }
    cache_.offload_prefill_v(layer);
  }
  cache_.begin_decode();
  prefill_done_ = true;

  Matrix last(batch, weights_.config.d_model);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto src = x[b].row(s - 1);
    std::copy(src.begin(), src.end(), last.row(b).begin());
  }
  return output_logits(weights_, last);
}

Matrix Engine::forward_decode(const Matrix& embedded, StepStats& stats) {
  Matrix x = embedded;
  std::size_t selections = 0;
  double dropped_sum = 0.0;

  for (std::size_t layer = 0; layer < weights_.config.n_layers; ++layer) {
    const LayerWeights& lw = weights_.layers[layer];
    const bool use_topn =
        config_.mode == CacheMode::kcache &&
        (layer >= config_.resident_layers || config_.topn_on_resident);

    ScoreObserver layer_observer;
    if (observer_) {
      layer_observer = [this, layer](std::size_t b, std::size_t head,
                                     std::span<const float> w) { observer_(layer, b, head, w); };
    }

    x = block_forward(x, lw, [&](const Matrix& normed) {
      QkvRows rows = qkv_project(normed, lw);
      cache_.append_kv(layer, rows.k, rows.v);
      Matrix ctx;
      if (use_topn) {
        TopNResult r = decode_attention_topn(rows.q, cache_, layer, config_.top_n,
                                             config_.renormalize, true, layer_observer);
        stats.h2d_bytes += r.h2d_bytes;
        const std::size_t len = cache_.current_len();
        for (std::size_t slot = 0; slot < r.selection.dropped_mass.size(); ++slot) {
          dropped_sum += r.selection.dropped_mass[slot];
          ++selections;
          for (std::uint32_t idx : r.selection.indices[slot]) {
            const std::size_t bin =
                std::min<std::size_t>(kPositionHistogramBins - 1,
                                      idx * kPositionHistogramBins / len);
            ++stats.position_histogram[bin];
          }
        }
        ctx = std::move(r.out);
      } else {
        ctx = decode_attention_full(rows.q, cache_, layer, layer_observer);
      }
      return matmul(ctx, lw.wo);
    });
  }
  if (selections > 0) {
    stats.mean_dropped_mass = dropped_sum / static_cast<double>(selections);
  }
  return x;
}

Engine::StepOutput Engine::decode_step(std::span<const TokenId> prev_tokens) {
  if (!prefill_done_) {
    throw StateError("decode_step: prefill has not run");
  }
  if (prev_tokens.size() != config_.batch) {
    throw ShapeError("decode_step: need one previous token per batch row");
  }
  if (cache_.current_len() + 1 > weights_.config.max_seq) {
    throw StateError("decode_step: cache would grow past max_seq");
  }

  StepOutput out;
  const std::uint64_t d2h_before = cache_.d2h_bytes_total();
  const Matrix x = embed_tokens(weights_, prev_tokens);
  const Matrix hidden = forward_decode(x, out.stats);
  out.stats.d2h_bytes = cache_.d2h_bytes_total() - d2h_before;
  out.logits = output_logits(weights_, hidden);
  out.next_tokens = argmax_rows(out.logits);
  return out;
}

GenerationReport generate(const ModelWeights& weights, const EngineConfig& config,
                          const TokenMatrix& prompt, const std::string& weight_source,
                          const std::string& prompt_source) {
  config.validate(weights.config);
  if (prompt.size() != config.batch) {
    throw ShapeError("generate: prompt rows must equal batch");
  }
  for (const auto& row : prompt) {
    if (row.size() != config.prompt_len) {
      throw ShapeError("generate: prompt rows must match config.prompt_len");
    }
  }

  // OOM is reproduced analytically against the footprint at final length,
  // never by real allocation failure.
  const FootprintBytes footprint =
      memory_footprint(weights.config, config.batch, config.prompt_len + config.gen_len,
                       config.mode, config.resident_layers, config.bytes_per_element);
  if (config.fast_capacity &&
      footprint.fast_bytes + footprint.weight_bytes > *config.fast_capacity) {
    throw CapacityError("fast tier cannot hold weights + cache: " +
                        std::to_string(footprint.fast_bytes + footprint.weight_bytes) + " > " +
                        std::to_string(*config.fast_capacity) + " bytes");
  }

  Engine engine(weights, config);
  GenerationReport report;
  report.model = weights.config;
  report.config = config;
  report.weight_source = weight_source;
  report.prompt_source = prompt_source;
  report.footprint = footprint;
  report.tokens.assign(config.batch, {});

  report.final_logits = engine.prefill(prompt);
  std::vector<TokenId> next = argmax_rows(report.final_logits);

  for (std::size_t step = 0; step < config.gen_len; ++step) {
    for (std::size_t b = 0; b < config.batch; ++b) {
      report.tokens[b].push_back(next[b]);
    }
    Engine::StepOutput out = engine.decode_step(next);
    report.steps.push_back(out.stats);
    report.final_logits = std::move(out.logits);
    next = std::move(out.next_tokens);
  }

  report.ledger = engine.cache().ledger();
  report.d2h_bytes_total = engine.cache().d2h_bytes_total();
  report.h2d_bytes_total = engine.cache().h2d_bytes_total();
  report.per_layer.assign(weights.config.n_layers, {});
  for (std::size_t layer = 0; layer < weights.config.n_layers; ++layer) {
    report.per_layer[layer].layer = layer;
  }
  for (const TransferEvent& e : engine.cache().ledger().events()) {
    if (e.dir == TransferDir::d2h) {
      report.per_layer[e.layer].d2h_bytes += e.bytes;
    } else {
      report.per_layer[e.layer].h2d_bytes += e.bytes;
    }
  }
  return report;
}

TokenMatrix random_prompt(const ModelConfig& model, std::size_t batch, std::size_t len,
                          std::uint64_t seed) {
  SeededRng rng(seed);
  TokenMatrix prompt(batch, std::vector<TokenId>(len, 0));
  for (auto& row : prompt) {
    for (auto& id : row) {
      id = rng.next_below(static_cast<std::uint32_t>(model.vocab));
    }
  }
  return prompt;
}

}  // namespace kcache
