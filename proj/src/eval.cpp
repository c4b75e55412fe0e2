#include "sset/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sset {

std::size_t filtered_rank(std::span<const float> scores, TypeId target, std::span<const TypeId> known) {
  if (target.index() >= scores.size()) {
    throw std::out_of_range("filtered_rank: target type " + std::to_string(target.value) + " out of range");
  }
  std::vector<std::uint8_t> skip(scores.size(), 0);
  for (auto t : known) {
    if (t.index() < skip.size()) skip[t.index()] = 1;
  }
  const float s = scores[target.index()];
  if (std::isnan(s)) throw std::invalid_argument("filtered_rank: NaN score for target");
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == target.index() || skip[j]) continue;
    if (std::isnan(scores[j])) throw std::invalid_argument("filtered_rank: NaN score");
    if (scores[j] >= s) ++rank;
  }
  return rank;
}

RankingReport summarize_ranks(std::vector<std::size_t> ranks) {
  RankingReport r;
  r.ranks = std::move(ranks);
  if (r.ranks.empty()) return r;
  for (auto k : r.ranks) {
    r.hit1 += k <= 1 ? 1.0 : 0.0;
    r.hit3 += k <= 3 ? 1.0 : 0.0;
    r.hit10 += k <= 10 ? 1.0 : 0.0;
    r.mr += static_cast<double>(k);
    r.mrr += 1.0 / static_cast<double>(k);
  }
  const auto n = static_cast<double>(r.ranks.size());
  r.hit1 /= n;
  r.hit3 /= n;
  r.hit10 /= n;
  r.mr /= n;
  r.mrr /= n;
  return r;
}

RankingReport evaluate(const KnowledgeGraph& g, const ProbabilityTable& scores, Split split) {
  if (scores.num_entities() != g.num_entities() || scores.num_types() != g.num_types()) {
    throw std::invalid_argument("score table is " + std::to_string(scores.num_entities()) + " x " +
                                std::to_string(scores.num_types()) + ", graph has " +
                                std::to_string(g.num_entities()) + " entities and " + std::to_string(g.num_types()) +
                                " types");
  }
  const auto& assertions = g.assertions(split);
  std::vector<std::size_t> ranks;
  ranks.reserve(assertions.size());
  std::vector<float> row(scores.num_types());
  std::uint32_t cached = UINT32_MAX;
  for (const auto& a : assertions) {
    if (a.entity.value != cached) {
      if (!scores.has_row(a.entity.value)) {
        throw std::invalid_argument("no score row for entity " + g.entities().name(a.entity.value));
      }
      scores.row_into(a.entity.value, row);
      cached = a.entity.value;
    }
    ranks.push_back(filtered_rank(row, a.type, g.all_types(a.entity)));
  }
  return summarize_ranks(std::move(ranks));
}

std::string format_report(const RankingReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << "assertions = " << r.ranks.size() << "\n";
  out << "hit1 = " << r.hit1 << "\n";
  out << "hit3 = " << r.hit3 << "\n";
  out << "hit10 = " << r.hit10 << "\n";
  out << "mr = " << r.mr << "\n";
  out << "mrr = " << r.mrr << "\n";
  out << "hit1\thit3\thit10\tmr\tmrr\n";
  out << r.hit1 << '\t' << r.hit3 << '\t' << r.hit10 << '\t' << r.mr << '\t' << r.mrr << "\n";
  return out.str();
}

}  // namespace sset
