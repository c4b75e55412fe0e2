#pragma once

// Small generated inputs: the 5-entity toy graph, random textual tables and
// teacher rows, and a graph whose types follow from incident relations.

#include <cstddef>
#include <cstdint>

#include "sset/formats.hpp"
#include "sset/kg_store.hpp"
#include "sset/model.hpp"

namespace sset {

// 5 entities, 3 relations, 4 types; same content as data/toy.
KnowledgeGraph toy_graph();

// Rows ~ N(0, 1), one table per vocabulary.
TextualEmbeddings random_text_embeddings(const KnowledgeGraph& g, std::size_t dim, std::uint64_t seed);

// Dense |E| x |T| table with entries uniform in [0.02, 0.98].
ProbabilityTable random_teacher(const KnowledgeGraph& g, std::uint64_t seed);

struct RelationTypedOptions {
  std::size_t entities = 200;
  std::size_t relations = 5;
  std::size_t edges_per_entity = 2;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
};

// Entity e gets type 2r when it is the subject of some (e, r, x) and type
// 2r + 1 when it is the object of some (x, r, e). Every entity has at least
// one edge. A seeded test_fraction of the entities is held out: all of their
// assertions go to the test split, everything else to train.
KnowledgeGraph relation_typed_graph(const RelationTypedOptions& opts);

}  // namespace sset
