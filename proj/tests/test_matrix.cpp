#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kcache/errors.hpp"
#include "kcache/matrix.hpp"
#include "kcache/rng.hpp"
#include "oracles.hpp"

using namespace kcache;

TEST_CASE("matmul identity and hand cases") {
  Matrix eye(2, 2);
  eye.at(0, 0) = 1.0f;
  eye.at(1, 1) = 1.0f;
  Matrix b(2, 2);
  b.data = {3, 4, 5, 6};
  const Matrix prod = matmul(eye, b);
  CHECK(prod.data == std::vector<float>{3, 4, 5, 6});

  Matrix row(1, 2);
  row.data = {1, 2};
  Matrix col(2, 1);
  col.data = {3, 4};
  CHECK(matmul(row, col).at(0, 0) == 11.0f);
}

TEST_CASE("matmul equals the naive triple loop bitwise") {
  SeededRng rng(7);
  for (std::size_t size : {3u, 8u, 17u, 64u}) {
    const Matrix a = oracle::random_matrix(size, size, rng);
    const Matrix b = oracle::random_matrix(size, size, rng);
    CHECK(oracle::bitwise_equal(matmul(a, b), oracle::naive_matmul(a, b)));
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 2)), ShapeError);
}

TEST_CASE("softmax rows: uniform, stability, closed form") {
  Matrix m(1, 4);
  const Matrix u = softmax_rows(m);
  for (float v : u.data) {
    CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
  }

  Matrix big(1, 2);
  big.data = {1000.0f, 1000.0f};
  const Matrix stable = softmax_rows(big);
  CHECK(stable.data[0] == doctest::Approx(0.5));
  CHECK(stable.data[1] == doctest::Approx(0.5));

  Matrix ln(1, 2);
  ln.data = {0.0f, std::log(3.0f)};
  const Matrix closed = softmax_rows(ln);
  CHECK(closed.data[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(closed.data[1] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one and shift exactly") {
  SeededRng rng(3);
  Matrix m(8, 32);
  for (float& v : m.data) {
    // integer logits so that +256 stays exactly representable
    v = static_cast<float>(static_cast<int>(rng.next_below(100)) - 50);
  }
  const Matrix sm = softmax_rows(m);
  for (std::size_t i = 0; i < sm.rows; ++i) {
    float sum = 0.0f;
    for (float v : sm.row(i)) {
      sum += v;
    }
    CHECK(std::abs(sum - 1.0f) <= 1e-6f);
  }
  Matrix shifted = m;
  for (float& v : shifted.data) {
    v += 256.0f;
  }
  CHECK(oracle::bitwise_equal(softmax_rows(shifted), sm));
}

TEST_CASE("silu values") {
  CHECK(silu(0.0f) == 0.0f);
  CHECK(std::abs(silu(20.0f) - 20.0f) < 1e-6f);
  const double expected = oracle::scalar_silu(-20.0);  // ~ -4.122e-8
  CHECK(silu(-20.0f) == doctest::Approx(expected).epsilon(1e-4));
  CHECK(std::isfinite(silu(-200.0f)));
}

TEST_CASE("rms_norm closed forms and oracle match") {
  std::vector<float> ones(8, 1.0f);
  const auto unit = rms_norm(ones, ones, 0.0f);
  for (float v : unit) {
    CHECK(v == 1.0f);
  }

  std::vector<float> row = {3.0f, 4.0f};
  std::vector<float> gain = {1.0f, 1.0f};
  const auto scaled = rms_norm(row, gain, 0.0f);
  const float denom = std::sqrt(12.5f);
  CHECK(scaled[0] == doctest::Approx(3.0f / denom));
  CHECK(scaled[1] == doctest::Approx(4.0f / denom));

  SeededRng rng(5);
  std::vector<float> rrow(64), rgain(64);
  for (auto& v : rrow) {
    v = rng.next_uniform(-2.0f, 2.0f);
  }
  for (auto& v : rgain) {
    v = rng.next_uniform(-1.0f, 1.0f);
  }
  const auto got = rms_norm(rrow, rgain, 1e-5f);
  const auto want = oracle::scalar_rms_norm(rrow, rgain, 1e-5f);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - want[i]) <= 1e-7f);
  }

  CHECK_THROWS_AS(rms_norm(row, ones, 1e-5f), ShapeError);
}

TEST_CASE("arg_topk examples") {
  std::vector<float> vals = {0.1f, 0.4f, 0.2f, 0.3f};
  CHECK(arg_topk(vals, 2) == std::vector<std::size_t>{1, 3});
  CHECK(arg_topk(vals, 9) == std::vector<std::size_t>{0, 1, 2, 3});

  std::vector<float> ties = {0.5f, 0.5f, 0.1f};
  CHECK(arg_topk(ties, 1) == std::vector<std::size_t>{0});

  CHECK_THROWS_AS(arg_topk(vals, 0), std::invalid_argument);
}

TEST_CASE("arg_topk selection property") {
  SeededRng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.next_below(50);
    std::vector<float> vals(n);
    for (auto& v : vals) {
      v = rng.next_uniform(-1.0f, 1.0f);
    }
    const std::size_t k = 1 + rng.next_below(60);
    const auto idx = arg_topk(vals, k);
    REQUIRE(idx.size() == std::min(k, n));
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    float min_sel = std::numeric_limits<float>::infinity();
    std::vector<bool> in(n, false);
    for (auto i : idx) {
      REQUIRE(i < n);
      in[i] = true;
      min_sel = std::min(min_sel, vals[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!in[i]) {
        CHECK(vals[i] <= min_sel);
      }
    }
  }
}

TEST_CASE("kernels stay finite on finite input") {
  SeededRng rng(13);
  const Matrix a = oracle::random_matrix(16, 16, rng, -100.0f, 100.0f);
  for (const Matrix& m : {matmul(a, a), softmax_rows(a), silu_map(a)}) {
    for (float v : m.data) {
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("seeded rng determinism") {
  SeededRng a(42), b(42), c(43);
  bool equal = true;
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    equal = equal && x == b.next_u64();
    differs = differs || x != c.next_u64();
  }
  CHECK(equal);
  CHECK(differs);
}

TEST_CASE("argmax rows breaks ties toward the lowest index") {
  Matrix m(2, 3);
  m.data = {1.0f, 5.0f, 5.0f, 2.0f, 2.0f, 1.0f};
  const auto ids = argmax_rows(m);
  CHECK(ids == std::vector<std::uint32_t>{1, 0});
}
