#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "kcache/errors.hpp"
#include "kcache/kv_cache.hpp"
#include "kcache/rng.hpp"
#include "oracles.hpp"

using namespace kcache;

namespace {

ModelConfig small_config(std::size_t layers, std::size_t d, std::size_t heads) {
  ModelConfig c;
  c.n_layers = layers;
  c.d_model = d;
  c.n_heads = heads;
  c.head_dim = d / heads;
  c.ffn_hidden = ModelConfig::default_ffn_hidden(d);
  c.vocab = 64;
  c.max_seq = 8192;
  return c;
}

void fill_prefill(TieredKVCache& cache, std::size_t len, SeededRng& rng) {
  const ModelConfig& c = cache.config();
  for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
    cache.append_kv(layer, oracle::random_matrix(len * cache.batch(), c.d_model, rng),
                    oracle::random_matrix(len * cache.batch(), c.d_model, rng));
    cache.offload_prefill_v(layer);
  }
  cache.begin_decode();
}

}  // namespace

TEST_CASE("baseline placement never records D2H") {
  const ModelConfig c = small_config(4, 64, 4);
  TieredKVCache cache(c, 1, TierPlacement::baseline(c.n_layers));
  SeededRng rng(1);
  fill_prefill(cache, 16, rng);
  cache.append_kv(0, oracle::random_matrix(1, 64, rng), oracle::random_matrix(1, 64, rng));
  CHECK(cache.d2h_bytes_total() == 0);
  CHECK(cache.h2d_bytes_total() == 0);
  CHECK(cache.slow_bytes_used() == 0);
}

TEST_CASE("prefill offload accounts bytes per layer") {
  // single offloaded layer, 128 tokens, d=64, bytes=2 -> 16384 bytes
  const ModelConfig c = small_config(1, 64, 4);
  TieredKVCache cache(c, 1, TierPlacement::kcache(0, c.n_layers));
  SeededRng rng(2);
  cache.append_kv(0, oracle::random_matrix(128, 64, rng), oracle::random_matrix(128, 64, rng));
  CHECK(cache.d2h_bytes_total() == 0);  // nothing moved yet
  cache.offload_prefill_v(0);
  CHECK(cache.d2h_bytes_total() == 2ull * 1 * 128 * 64);
  CHECK(cache.d2h_bytes_total() == 16384);
}

TEST_CASE("decode append to an offloaded layer records one row of D2H") {
  const ModelConfig c = small_config(2, 64, 4);
  TieredKVCache cache(c, 1, TierPlacement::kcache(1, c.n_layers));
  SeededRng rng(3);
  fill_prefill(cache, 8, rng);
  const std::uint64_t before = cache.d2h_bytes_total();
  cache.append_kv(0, oracle::random_matrix(1, 64, rng), oracle::random_matrix(1, 64, rng));
  cache.append_kv(1, oracle::random_matrix(1, 64, rng), oracle::random_matrix(1, 64, rng));
  // layer 0 resident, layer 1 offloaded: exactly bytes*b*d new D2H
  CHECK(cache.d2h_bytes_total() - before == 2ull * 1 * 64);
}

TEST_CASE("byte counters after offload match the placement split") {
  const ModelConfig c = small_config(4, 64, 4);
  const std::size_t resident = 1;
  const std::size_t s = 32;
  const std::size_t b = 2;
  TieredKVCache cache(c, b, TierPlacement::kcache(resident, c.n_layers));
  SeededRng rng(4);
  fill_prefill(cache, s, rng);
  const std::uint64_t unit = 2ull * b * s * c.d_model;
  CHECK(cache.fast_bytes_used() == unit * (c.n_layers + resident));
  CHECK(cache.slow_bytes_used() == unit * (c.n_layers - resident));
  CHECK(cache.current_len() == s);
}

TEST_CASE("double offload is a state error") {
  const ModelConfig c = small_config(2, 32, 4);
  TieredKVCache cache(c, 1, TierPlacement::kcache(1, c.n_layers));
  SeededRng rng(5);
  cache.append_kv(1, oracle::random_matrix(4, 32, rng), oracle::random_matrix(4, 32, rng));
  cache.offload_prefill_v(0);  // resident: no-op, repeatable
  cache.offload_prefill_v(0);
  cache.offload_prefill_v(1);
  CHECK_THROWS_AS(cache.offload_prefill_v(1), StateError);
}

TEST_CASE("append errors") {
  const ModelConfig c = small_config(2, 32, 4);
  TieredKVCache cache(c, 2, TierPlacement::kcache(0, c.n_layers));
  SeededRng rng(6);
  CHECK_THROWS_AS(
      cache.append_kv(7, oracle::random_matrix(2, 32, rng), oracle::random_matrix(2, 32, rng)),
      std::out_of_range);
  CHECK_THROWS_AS(
      cache.append_kv(0, oracle::random_matrix(2, 16, rng), oracle::random_matrix(2, 32, rng)),
      ShapeError);
  CHECK_THROWS_AS(
      cache.append_kv(0, oracle::random_matrix(3, 32, rng), oracle::random_matrix(3, 32, rng)),
      ShapeError);  // not a multiple of batch
}

TEST_CASE("gather accounting: resident bypass, offloaded charge, clamping") {
  SUBCASE("paper-shape gather charge") {
    // b=2, n=32, N=128, h=128, bytes=2 -> 2,097,152 bytes per offloaded call
    ModelConfig c = small_config(1, 4096, 32);
    TieredKVCache cache(c, 2, TierPlacement::kcache(0, c.n_layers));
    SeededRng rng(7);
    fill_prefill(cache, 128, rng);
    SelectionIndices sel(2 * 32);
    for (auto& idx : sel) {
      idx.resize(128);
      for (std::uint32_t i = 0; i < 128; ++i) {
        idx[i] = i;
      }
    }
    const GatheredV got = cache.gather_v(0, sel);
    CHECK(got.h2d_bytes == 2097152);
    CHECK(cache.h2d_bytes_total() == 2097152);
  }

  SUBCASE("resident layers bypass the ledger") {
    ModelConfig c = small_config(2, 64, 4);
    TieredKVCache cache(c, 1, TierPlacement::kcache(2, c.n_layers));
    SeededRng rng(8);
    fill_prefill(cache, 10, rng);
    SelectionIndices sel(4, {0, 1, 2});
    const GatheredV got = cache.gather_v(1, sel);
    CHECK(got.h2d_bytes == 0);
    CHECK(cache.h2d_bytes_total() == 0);
    CHECK(got.blocks[0].size() == 3 * c.head_dim);
  }

  SUBCASE("rows are returned bitwise") {
    ModelConfig c = small_config(1, 64, 4);
    TieredKVCache cache(c, 2, TierPlacement::kcache(0, c.n_layers));
    SeededRng rng(9);
    const Matrix k = oracle::random_matrix(20 * 2, 64, rng);
    const Matrix v = oracle::random_matrix(20 * 2, 64, rng);
    cache.append_kv(0, k, v);
    cache.offload_prefill_v(0);
    cache.begin_decode();
    SelectionIndices sel(2 * 4);
    for (auto& idx : sel) {
      idx = {1, 7, 19};
    }
    const GatheredV got = cache.gather_v(0, sel);
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t head = 0; head < 4; ++head) {
        const auto& block = got.blocks[b * 4 + head];
        for (std::size_t r = 0; r < 3; ++r) {
          const std::size_t pos = sel[b * 4 + head][r];
          for (std::size_t t = 0; t < c.head_dim; ++t) {
            CHECK(block[r * c.head_dim + t] ==
                  v.at(pos * 2 + b, head * c.head_dim + t));
          }
        }
      }
    }
  }

  SUBCASE("out-of-range index throws") {
    ModelConfig c = small_config(1, 64, 4);
    TieredKVCache cache(c, 1, TierPlacement::kcache(0, c.n_layers));
    SeededRng rng(10);
    fill_prefill(cache, 10, rng);
    SelectionIndices sel(4, {0, 10});
    CHECK_THROWS_AS(cache.gather_v(0, sel), std::out_of_range);
  }
}

TEST_CASE("memory footprint formulas") {
  const ModelConfig c = ModelConfig::shape_7b();

  SUBCASE("baseline 128 GiB at the paper shape") {
    const FootprintBytes fp = memory_footprint(c, 8, 32768, CacheMode::baseline, 0, 2);
    CHECK(fp.fast_bytes == 137438953472ull);
    CHECK(fp.slow_bytes == 0);
    // weights land around 14 GB at fp16 accounting
    CHECK(fp.weight_bytes > 12'600'000'000ull);
    CHECK(fp.weight_bytes < 15'400'000'000ull);
  }

  SUBCASE("kcache split with L = 2") {
    const FootprintBytes fp = memory_footprint(c, 8, 32768, CacheMode::kcache, 2, 2);
    CHECK(fp.fast_bytes == 73014444032ull);
    CHECK(fp.fast_bytes + fp.slow_bytes == 137438953472ull);
  }

  SUBCASE("doubling any dimension doubles the baseline bytes") {
    const auto base = memory_footprint(c, 4, 1024, CacheMode::baseline, 0, 2).fast_bytes;
    CHECK(memory_footprint(c, 8, 1024, CacheMode::baseline, 0, 2).fast_bytes == 2 * base);
    CHECK(memory_footprint(c, 4, 2048, CacheMode::baseline, 0, 2).fast_bytes == 2 * base);
    CHECK(memory_footprint(c, 4, 1024, CacheMode::baseline, 0, 4).fast_bytes == 2 * base);
    ModelConfig wide = c;
    wide.d_model *= 2;
    wide.head_dim *= 2;
    CHECK(memory_footprint(wide, 4, 1024, CacheMode::baseline, 0, 2).fast_bytes == 2 * base);
  }
}

TEST_CASE("fast-tier capacity budget") {
  const ModelConfig c = small_config(2, 64, 4);
  TieredKVCache cache(c, 1, TierPlacement::kcache(2, c.n_layers), 4096);
  SeededRng rng(11);
  cache.append_kv(0, oracle::random_matrix(8, 64, rng), oracle::random_matrix(8, 64, rng));
  // 8 positions * 64 floats * 2 bytes * (K+V) = 2048 bytes for layer 0
  CHECK_THROWS_AS(
      cache.append_kv(1, oracle::random_matrix(16, 64, rng), oracle::random_matrix(16, 64, rng)),
      CapacityError);
}

TEST_CASE("ledger serializes to JSON lines") {
  const ModelConfig c = small_config(1, 32, 4);
  TieredKVCache cache(c, 1, TierPlacement::kcache(0, c.n_layers));
  SeededRng rng(12);
  cache.append_kv(0, oracle::random_matrix(2, 32, rng), oracle::random_matrix(2, 32, rng));
  cache.offload_prefill_v(0);
  std::ostringstream out;
  cache.ledger().write_jsonl(out);
  CHECK(out.str() ==
        "{\"phase\":\"prefill\",\"layer\":0,\"dir\":\"D2H\",\"bytes\":128,\"elements\":64}\n");
}

TEST_CASE("ledger totals equal the sum of events") {
  const ModelConfig c = small_config(3, 32, 4);
  TieredKVCache cache(c, 2, TierPlacement::kcache(1, c.n_layers));
  SeededRng rng(13);
  fill_prefill(cache, 12, rng);
  SelectionIndices sel(2 * 4, {0, 3, 5});
  cache.gather_v(1, sel);
  cache.gather_v(2, sel);
  std::uint64_t d2h = 0, h2d = 0;
  for (const TransferEvent& e : cache.ledger().events()) {
    (e.dir == TransferDir::d2h ? d2h : h2d) += e.bytes;
  }
  CHECK(d2h == cache.d2h_bytes_total());
  CHECK(h2d == cache.h2d_bytes_total());
  CHECK(h2d == 2ull * (2 * 4 * 3 * c.head_dim) * 2);
}
