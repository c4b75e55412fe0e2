#pragma once

// Unsupervised re-ranking: blends teacher probabilities p into the top-k
// candidates of the structural probabilities q. No parameters are learned.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sset/config.hpp"
#include "sset/formats.hpp"

namespace sset {

// Indices of the k largest values of q, ties broken toward the lower index.
// k is clamped to q.size().
std::vector<std::uint32_t> top_k_pool(std::span<const float> q, std::size_t k);

// z_j = alpha p_j + (1 - alpha) q_j for j in the top-k of q, q_j otherwise.
// Throws std::invalid_argument on length mismatch or a bad config.
std::vector<float> rerank(std::span<const float> p, std::span<const float> q, const RerankConfig& cfg);

// Row-wise rerank of two tables over the same vocabulary. The result is
// dense. Sparse inputs read missing entries as their floor.
ProbabilityTable rerank_tables(const ProbabilityTable& p, const ProbabilityTable& q, const RerankConfig& cfg);

}  // namespace sset
