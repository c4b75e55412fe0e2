#include "sset/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace sset {

KnowledgeGraph toy_graph() {
  KnowledgeGraph::Builder b;
  const char* entity_labels[5] = {"Ada", "Bern", "Cali", "Dorn", "Ems"};
  for (std::uint32_t i = 0; i < 5; ++i) {
    b.add_entity("e" + std::to_string(i), entity_labels[i], std::string("toy entity ") + entity_labels[i]);
  }
  b.add_relation("r0", "located in");
  b.add_relation("r1", "borders");
  b.add_relation("r2", "founded by");
  b.add_type("t0", "city");
  b.add_type("t1", "region");
  b.add_type("t2", "country");
  b.add_type("t3", "person");

  const std::uint32_t triples[][3] = {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}, {3, 0, 0}, {0, 1, 2}};
  for (const auto& t : triples) b.add_triple({EntityId{t[0]}, RelationId{t[1]}, EntityId{t[2]}});

  const std::pair<std::uint32_t, std::uint32_t> train[] = {{0, 0}, {1, 1}, {1, 2}, {2, 2}, {3, 3}, {4, 0}};
  for (auto [e, t] : train) b.add_assertion({EntityId{e}, TypeId{t}, Split::train});
  b.add_assertion({EntityId{1}, TypeId{0}, Split::valid});
  b.add_assertion({EntityId{2}, TypeId{3}, Split::test});
  b.add_assertion({EntityId{3}, TypeId{1}, Split::test});
  return std::move(b).build();
}

TextualEmbeddings random_text_embeddings(const KnowledgeGraph& g, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  auto make = [&](EmbeddingKind kind, std::size_t count) {
    EmbeddingTable t;
    t.kind = kind;
    t.count = static_cast<std::uint32_t>(count);
    t.dim = static_cast<std::uint32_t>(dim);
    t.values.resize(count * dim);
    for (auto& v : t.values) v = normal(rng);
    return t;
  };
  TextualEmbeddings out;
  out.entity = make(EmbeddingKind::entity, g.num_entities());
  out.relation = make(EmbeddingKind::relation, g.num_relations());
  out.type = make(EmbeddingKind::type, g.num_types());
  return out;
}

ProbabilityTable random_teacher(const KnowledgeGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uniform(0.02f, 0.98f);
  const auto ne = static_cast<std::uint32_t>(g.num_entities());
  const auto nt = static_cast<std::uint32_t>(g.num_types());
  ProbabilityTable table(ne, nt, ProbabilityMode::dense);
  std::vector<float> row(nt);
  for (std::uint32_t e = 0; e < ne; ++e) {
    for (auto& v : row) v = uniform(rng);
    table.set_dense_row(e, row);
  }
  return table;
}

KnowledgeGraph relation_typed_graph(const RelationTypedOptions& opts) {
  if (opts.entities < 2 || opts.relations < 1 || opts.edges_per_entity < 1) {
    throw std::invalid_argument("relation_typed_graph: need >= 2 entities, >= 1 relation, >= 1 edge per entity");
  }
  if (!(opts.test_fraction >= 0.0 && opts.test_fraction < 1.0)) {
    throw std::invalid_argument("relation_typed_graph: test_fraction must lie in [0, 1)");
  }
  std::mt19937_64 rng(opts.seed);
  KnowledgeGraph::Builder b;
  for (std::size_t i = 0; i < opts.entities; ++i) b.add_entity("ent" + std::to_string(i));
  for (std::size_t r = 0; r < opts.relations; ++r) b.add_relation("rel" + std::to_string(r));
  for (std::size_t r = 0; r < opts.relations; ++r) {
    b.add_type("subj_of_rel" + std::to_string(r));
    b.add_type("obj_of_rel" + std::to_string(r));
  }

  std::uniform_int_distribution<std::uint32_t> pick_entity(0, static_cast<std::uint32_t>(opts.entities - 1));
  std::uniform_int_distribution<std::uint32_t> pick_relation(0, static_cast<std::uint32_t>(opts.relations - 1));
  std::bernoulli_distribution coin(0.5);
  std::set<std::pair<std::uint32_t, std::uint32_t>> types;
  for (std::uint32_t e = 0; e < opts.entities; ++e) {
    for (std::size_t k = 0; k < opts.edges_per_entity; ++k) {
      std::uint32_t other = pick_entity(rng);
      while (other == e) other = pick_entity(rng);
      const std::uint32_t r = pick_relation(rng);
      const bool as_subject = coin(rng);
      const std::uint32_t s = as_subject ? e : other;
      const std::uint32_t o = as_subject ? other : e;
      if (b.add_triple({EntityId{s}, RelationId{r}, EntityId{o}})) {
        types.insert({s, 2 * r});
        types.insert({o, 2 * r + 1});
      }
    }
  }

  std::vector<std::uint32_t> order(opts.entities);
  for (std::uint32_t e = 0; e < opts.entities; ++e) order[e] = e;
  std::shuffle(order.begin(), order.end(), rng);
  const auto num_test = static_cast<std::size_t>(opts.test_fraction * static_cast<double>(opts.entities));
  std::vector<std::uint8_t> held_out(opts.entities, 0);
  for (std::size_t i = 0; i < num_test; ++i) held_out[order[i]] = 1;
  for (const auto& [e, t] : types) {
    b.add_assertion({EntityId{e}, TypeId{t}, held_out[e] ? Split::test : Split::train});
  }
  return std::move(b).build();
}

}  // namespace sset
