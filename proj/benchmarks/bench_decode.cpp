#include <benchmark/benchmark.h>

#include "kcache/attention.hpp"
#include "kcache/engine.hpp"
#include "kcache/rng.hpp"

using namespace kcache;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  for (float& v : m.data) {
    v = rng.next_uniform(-1.0f, 1.0f);
  }
  return m;
}

ModelConfig bench_config() {
  ModelConfig c;
  c.n_layers = 1;
  c.d_model = 256;
  c.n_heads = 8;
  c.head_dim = 32;
  c.ffn_hidden = ModelConfig::default_ffn_hidden(256);
  c.vocab = 256;
  c.max_seq = 1 << 16;
  return c;
}

TieredKVCache filled_cache(const ModelConfig& c, std::size_t len, SeededRng& rng) {
  TieredKVCache cache(c, 1, TierPlacement::kcache(0, c.n_layers));
  cache.append_kv(0, random_matrix(len, c.d_model, rng), random_matrix(len, c.d_model, rng));
  cache.offload_prefill_v(0);
  cache.begin_decode();
  return cache;
}

void BM_decode_full(benchmark::State& state) {
  const std::size_t s = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  const ModelConfig c = bench_config();
  TieredKVCache cache = filled_cache(c, s, rng);
  const Matrix q = random_matrix(1, c.d_model, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_attention_full(q, cache, 0));
  }
}
BENCHMARK(BM_decode_full)->Arg(1024)->Arg(4096)->Arg(16384);

void BM_decode_topn(benchmark::State& state) {
  const std::size_t s = static_cast<std::size_t>(state.range(0));
  const std::size_t top_n = static_cast<std::size_t>(state.range(1));
  SeededRng rng(2);
  const ModelConfig c = bench_config();
  TieredKVCache cache = filled_cache(c, s, rng);
  const Matrix q = random_matrix(1, c.d_model, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_attention_topn(q, cache, 0, top_n, false));
  }
}
BENCHMARK(BM_decode_topn)
    ->Args({4096, 64})
    ->Args({4096, 256})
    ->Args({16384, 64})
    ->Args({16384, 256});

void BM_toy_decode_step(benchmark::State& state) {
  const ModelConfig c = ModelConfig::toy();
  const ModelWeights w = generate_weights(c, 1);
  EngineConfig ec;
  ec.mode = state.range(0) == 0 ? CacheMode::baseline : CacheMode::kcache;
  ec.top_n = 16;
  ec.resident_layers = 0;
  ec.prompt_len = 256;
  ec.gen_len = 0;
  Engine engine(w, ec);
  Matrix logits = engine.prefill(random_prompt(c, 1, ec.prompt_len, 7));
  std::vector<TokenId> next = argmax_rows(logits);
  for (auto _ : state) {
    next = engine.decode_step(next).next_tokens;
  }
}
// iteration cap keeps the session inside the toy preset's max_seq
BENCHMARK(BM_toy_decode_step)->Arg(0)->Arg(1)->Iterations(2048);

}  // namespace

BENCHMARK_MAIN();
