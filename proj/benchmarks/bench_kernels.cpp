#include <benchmark/benchmark.h>

#include "kcache/matrix.hpp"
#include "kcache/rng.hpp"

using namespace kcache;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SeededRng rng(seed);
  Matrix m(rows, cols);
  for (float& v : m.data) {
    v = rng.next_uniform(-1.0f, 1.0f);
  }
  return m;
}

void BM_matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 2 * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_softmax_rows(benchmark::State& state) {
  const std::size_t s = static_cast<std::size_t>(state.range(0));
  const Matrix m = random_matrix(s, s, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_rows(m));
  }
}
BENCHMARK(BM_softmax_rows)->Arg(128)->Arg(512);

void BM_arg_topk(benchmark::State& state) {
  const std::size_t s = static_cast<std::size_t>(state.range(0));
  SeededRng rng(4);
  std::vector<float> vals(s);
  for (float& v : vals) {
    v = rng.next_uniform(0.0f, 1.0f);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(arg_topk(vals, 128));
  }
}
BENCHMARK(BM_arg_topk)->Arg(1024)->Arg(8192)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
