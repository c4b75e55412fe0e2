#pragma once

// Filtered ranking metrics over type assertions.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sset/formats.hpp"
#include "sset/kg_store.hpp"

namespace sset {

// 1 + #(strictly greater) + #(equal, other than target), counted over types
// outside known \ {target}. Throws std::out_of_range for a bad target and
// std::invalid_argument for a NaN score.
std::size_t filtered_rank(std::span<const float> scores, TypeId target, std::span<const TypeId> known);

struct RankingReport {
  std::vector<std::size_t> ranks;
  double hit1 = 0.0;
  double hit3 = 0.0;
  double hit10 = 0.0;
  double mr = 0.0;
  double mrr = 0.0;
};

RankingReport summarize_ranks(std::vector<std::size_t> ranks);

// Ranks every assertion of `split` against the score table, filtering each
// entity's types from all three splits. Throws std::invalid_argument when the
// table shape disagrees with the graph or a test entity has no row.
RankingReport evaluate(const KnowledgeGraph& g, const ProbabilityTable& scores, Split split = Split::test);

// Key-value block followed by `hit1\thit3\thit10\tmr\tmrr` and its values.
std::string format_report(const RankingReport& report);

}  // namespace sset
