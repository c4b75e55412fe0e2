#include "sset/rerank.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sset {

std::vector<std::uint32_t> top_k_pool(std::span<const float> q, std::size_t k) {
  std::vector<std::uint32_t> order(q.size());
  std::iota(order.begin(), order.end(), 0u);
  k = std::min(k, q.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) { return q[a] > q[b] || (q[a] == q[b] && a < b); });
  order.resize(k);
  return order;
}

std::vector<float> rerank(std::span<const float> p, std::span<const float> q, const RerankConfig& cfg) {
  cfg.validate();
  if (p.size() != q.size()) {
    throw std::invalid_argument("rerank: p has " + std::to_string(p.size()) + " entries, q has " +
                                std::to_string(q.size()));
  }
  std::vector<float> z(q.begin(), q.end());
  const auto alpha = static_cast<float>(cfg.alpha);
  for (auto j : top_k_pool(q, cfg.k)) z[j] = alpha * p[j] + (1.0f - alpha) * q[j];
  return z;
}

ProbabilityTable rerank_tables(const ProbabilityTable& p, const ProbabilityTable& q, const RerankConfig& cfg) {
  if (p.num_entities() != q.num_entities() || p.num_types() != q.num_types()) {
    throw std::invalid_argument("rerank: probability tables have different shapes");
  }
  ProbabilityTable z(q.num_entities(), q.num_types(), ProbabilityMode::dense);
  std::vector<float> prow(p.num_types());
  std::vector<float> qrow(q.num_types());
  for (std::uint32_t e = 0; e < q.num_entities(); ++e) {
    p.row_into(e, prow);
    q.row_into(e, qrow);
    z.set_dense_row(e, rerank(prow, qrow, cfg));
  }
  return z;
}

}  // namespace sset
