#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include "doctest.h"
#include "sset/rerank.hpp"

using namespace sset;

namespace {

// Descending order with ties toward the lower index.
std::vector<std::uint32_t> order_of(const std::vector<float>& v) {
  std::vector<std::uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  return idx;
}

std::vector<float> random_row(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof(float)) == 0; }

}  // namespace

TEST_CASE("worked example flips the top type") {
  const std::vector<float> q{0.9f, 0.8f, 0.2f, 0.1f};
  const std::vector<float> p{0.1f, 0.95f, 0.99f, 0.0f};
  const auto z = rerank(p, q, {0.5, 2});
  REQUIRE(z.size() == 4);
  CHECK(z[0] == doctest::Approx(0.5));
  CHECK(z[1] == doctest::Approx(0.875));
  CHECK(z[2] == 0.2f);
  CHECK(z[3] == 0.1f);
  CHECK(order_of(q)[0] == 0);
  CHECK(order_of(z)[0] == 1);
}

TEST_CASE("midpoint and degenerate alpha") {
  const std::vector<float> q{0.8f}, p{0.9f};
  CHECK(rerank(p, q, {0.5, 1})[0] == doctest::Approx(0.85));
  CHECK(rerank(p, q, {0.0, 1})[0] == 0.8f);
  CHECK(rerank(p, q, {1.0, 1})[0] == 0.9f);
}

TEST_CASE("top-k pool") {
  const std::vector<float> q{0.3f, 0.7f, 0.7f, 0.1f, 0.7f};
  CHECK(top_k_pool(q, 2) == std::vector<std::uint32_t>{1, 2});
  CHECK(top_k_pool(q, 4) == std::vector<std::uint32_t>{1, 2, 4, 0});
  CHECK(top_k_pool(q, 99).size() == 5);
  CHECK(top_k_pool({}, 3).empty());
}

TEST_CASE("input validation") {
  const std::vector<float> a{0.1f, 0.2f}, b{0.1f};
  CHECK_THROWS_AS(rerank(a, b, {}), std::invalid_argument);
  CHECK_THROWS_AS(rerank(a, a, {1.5, 2}), std::invalid_argument);
  CHECK_THROWS_AS(rerank(a, a, {0.5, 0}), std::invalid_argument);
}

TEST_CASE("rerank algebra on random pairs") {
  std::mt19937_64 rng(2024);
  constexpr std::size_t kTypes = 50;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_row(rng, kTypes);
    auto q = random_row(rng, kTypes);
    if (trial % 7 == 0) q[3] = q[9] = q[17];  // ties in q
    const std::size_t k = 1 + rng() % kTypes;

    CHECK(order_of(rerank(p, q, {0.0, k})) == order_of(q));
    CHECK(order_of(rerank(p, q, {1.0, kTypes})) == order_of(p));

    const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto z = rerank(p, q, {alpha, k});
    const auto pool = top_k_pool(q, k);
    std::vector<bool> in_pool(kTypes);
    for (auto j : pool) in_pool[j] = true;
    for (std::size_t j = 0; j < kTypes; ++j) {
      if (!in_pool[j]) CHECK(same_bits(z[j], q[j]));
      CHECK(z[j] >= 0.0f);
      CHECK(z[j] <= 1.0f);
    }
    // Re-running on (p, z) leaves everything outside the pool of z untouched.
    const auto z2 = rerank(p, z, {alpha, k});
    const auto pool2 = top_k_pool(z, k);
    std::vector<bool> in_pool2(kTypes);
    for (auto j : pool2) in_pool2[j] = true;
    for (std::size_t j = 0; j < kTypes; ++j) {
      if (!in_pool2[j]) CHECK(same_bits(z2[j], z[j]));
    }
  }
}

TEST_CASE("table rerank handles dense and sparse inputs") {
  ProbabilityTable q(2, 4, ProbabilityMode::dense);
  q.set_dense_row(0, std::vector<float>{0.9f, 0.8f, 0.2f, 0.1f});
  q.set_dense_row(1, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f});
  ProbabilityTable p(2, 4, ProbabilityMode::sparse_topk);
  p.set_sparse_row(0, {{1, 0.95f}, {2, 0.99f}});
  p.set_floor(0.1f);
  const auto z = rerank_tables(p, q, {0.5, 2});
  CHECK(z.mode() == ProbabilityMode::dense);
  const auto row0 = z.row(0);
  CHECK(row0[0] == doctest::Approx(0.5));
  CHECK(row0[1] == doctest::Approx(0.875));
  CHECK(row0[2] == 0.2f);
  // Entity 1 has no teacher record: the floor stands in.
  const auto row1 = z.row(1);
  CHECK(row1[3] == doctest::Approx(0.25));
  CHECK(row1[2] == doctest::Approx(0.2));
  CHECK(row1[0] == 0.1f);

  ProbabilityTable mismatch(3, 4, ProbabilityMode::dense);
  CHECK_THROWS_AS(rerank_tables(mismatch, q, {}), std::invalid_argument);
}
