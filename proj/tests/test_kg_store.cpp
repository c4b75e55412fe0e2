#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "sset/kg_store.hpp"
#include "sset/synthetic.hpp"

using namespace sset;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Three entities A, B, C; A -r-> B, B -s-> C, C -r-> C.
void write_three_entity_dataset(const std::filesystem::path& dir) {
  write_file(dir / "entity_text.tsv", "A\tAlpha\tfirst\nB\tBeta\t\nC\tGamma\tthird\n");
  write_file(dir / "relation_text.tsv", "r\trel r\ns\trel s\n");
  write_file(dir / "type_text.tsv", "t0\tzero\nt1\tone\nt2\ttwo\n");
  write_file(dir / "triples.tsv", "A\tr\tB\nB\ts\tC\nC\tr\tC\n");
  write_file(dir / "types_train.tsv", "A\tt2\nA\tt0\nB\tt1\n");
  write_file(dir / "types_valid.tsv", "C\tt0\n");
  write_file(dir / "types_test.tsv", "C\tt1\nA\tt1\n");
}

std::vector<NeighborEdge> brute_force_neighbors(const KnowledgeGraph& g, EntityId e) {
  std::vector<NeighborEdge> out;
  for (const auto& t : g.triples()) {
    if (t.subject == e) out.push_back({t.relation, Direction::forward, t.object});
    if (t.object == e) out.push_back({t.relation, Direction::inverse, t.subject});
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("single triple neighbor lists") {
  KnowledgeGraph::Builder b;
  const auto a = b.add_entity("A");
  const auto bb = b.add_entity("B");
  const auto r = b.add_relation("r");
  b.add_triple({a, r, bb});
  const auto g = std::move(b).build();
  REQUIRE(g.neighbors(a).size() == 1);
  CHECK(g.neighbors(a)[0] == NeighborEdge{r, Direction::forward, bb});
  REQUIRE(g.neighbors(bb).size() == 1);
  CHECK(g.neighbors(bb)[0] == NeighborEdge{r, Direction::inverse, a});
  CHECK_THROWS_AS(g.neighbors(EntityId{7}), std::out_of_range);
  CHECK_THROWS_AS(g.known_types(EntityId{7}), std::out_of_range);
}

TEST_CASE("star graph center has one edge per triple") {
  KnowledgeGraph::Builder b;
  const auto c = b.add_entity("center");
  const auto r = b.add_relation("r");
  for (int i = 0; i < 9; ++i) b.add_triple({c, r, b.add_entity("leaf" + std::to_string(i))});
  const auto g = std::move(b).build();
  CHECK(g.neighbors(c).size() == 9);
  CHECK(g.neighbors(c).size() == brute_force_neighbors(g, c).size());
}

TEST_CASE("three-entity dataset from disk") {
  testing::TempDir dir;
  write_three_entity_dataset(dir.path());
  const auto g = load_dataset(dir.path());
  CHECK(g.num_entities() == 3);
  CHECK(g.num_relations() == 2);
  CHECK(g.num_types() == 3);
  const auto A = g.entity_id("A"), B = g.entity_id("B"), C = g.entity_id("C");
  const auto r = g.relation_id("r"), s = g.relation_id("s");

  // Hand-built adjacency.
  const std::vector<NeighborEdge> want_a = {{r, Direction::forward, B}};
  const std::vector<NeighborEdge> want_b = {{r, Direction::inverse, A}, {s, Direction::forward, C}};
  const std::vector<NeighborEdge> want_c = {
      {r, Direction::forward, C}, {r, Direction::inverse, C}, {s, Direction::inverse, B}};
  CHECK(std::vector<NeighborEdge>(g.neighbors(A).begin(), g.neighbors(A).end()) == want_a);
  CHECK(std::vector<NeighborEdge>(g.neighbors(B).begin(), g.neighbors(B).end()) == want_b);
  CHECK(std::vector<NeighborEdge>(g.neighbors(C).begin(), g.neighbors(C).end()) == want_c);

  const std::vector<TypeId> types_a = {g.type_id("t0"), g.type_id("t2")};
  CHECK(std::vector<TypeId>(g.known_types(A).begin(), g.known_types(A).end()) == types_a);
  CHECK(g.known_types(C).empty());
  CHECK(g.all_types(C).size() == 2);
  CHECK(g.all_types(A).size() == 3);

  CHECK(g.entity_text(B).label == "Beta");
  CHECK(g.entity_text(B).description.empty());
  CHECK(g.entity_text(A).description == "first");
  CHECK(g.relation_text(s).label == "rel s");
}

TEST_CASE("neighbor and type index properties on random graphs") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = testing::random_graph(rng, 12);
    std::size_t total = 0;
    for (std::uint32_t e = 0; e < g.num_entities(); ++e) {
      const EntityId id{e};
      const auto nb = g.neighbors(id);
      total += nb.size();
      CHECK(std::vector<NeighborEdge>(nb.begin(), nb.end()) == brute_force_neighbors(g, id));
      // Linear-scan oracle for T(e).
      std::set<TypeId> want;
      for (const auto& a : g.assertions(Split::train)) {
        if (a.entity == id) want.insert(a.type);
      }
      CHECK(std::vector<TypeId>(g.known_types(id).begin(), g.known_types(id).end()) ==
            std::vector<TypeId>(want.begin(), want.end()));
    }
    CHECK(total == 2 * g.triples().size());
    for (const auto& t : g.triples()) {
      const auto fwd = g.neighbors(t.subject);
      const auto inv = g.neighbors(t.object);
      CHECK(std::find(fwd.begin(), fwd.end(), NeighborEdge{t.relation, Direction::forward, t.object}) != fwd.end());
      CHECK(std::find(inv.begin(), inv.end(), NeighborEdge{t.relation, Direction::inverse, t.subject}) != inv.end());
    }
  }
}

TEST_CASE("known types never leak valid or test assertions") {
  const auto g = toy_graph();
  for (Split split : {Split::valid, Split::test}) {
    for (const auto& a : g.assertions(split)) {
      const auto known = g.known_types(a.entity);
      const bool also_train = std::count(g.assertions(Split::train).begin(), g.assertions(Split::train).end(),
                                         TypeAssertion{a.entity, a.type, Split::train}) > 0;
      CHECK((std::find(known.begin(), known.end(), a.type) != known.end()) == also_train);
    }
  }
}

TEST_CASE("empty assertion files give empty type index") {
  testing::TempDir dir;
  write_three_entity_dataset(dir.path());
  for (auto f : {"types_train.tsv", "types_valid.tsv", "types_test.tsv"}) write_file(dir / f, "");
  const auto g = load_dataset(dir.path());
  for (std::uint32_t e = 0; e < g.num_entities(); ++e) CHECK(g.known_types(EntityId{e}).empty());
  CHECK(g.triples().size() == 3);
}

TEST_CASE("load errors name the file and line") {
  testing::TempDir dir;
  write_three_entity_dataset(dir.path());

  SUBCASE("unknown entity in triples") {
    write_file(dir / "triples.tsv", "A\tr\tB\nA\tr\tZ\n");
    try {
      load_dataset(dir.path());
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.file().find("triples.tsv") != std::string::npos);
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("Z") != std::string::npos);
    }
  }
  SUBCASE("duplicate triple") {
    write_file(dir / "triples.tsv", "A\tr\tB\nB\ts\tC\nA\tr\tB\n");
    try {
      load_dataset(dir.path());
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.line() == 3);
    }
    LoadOptions tolerant;
    tolerant.allow_duplicate_triples = true;
    CHECK(load_dataset(dir.path(), std::nullopt, tolerant).triples().size() == 2);
  }
  SUBCASE("unknown type in a split file") {
    write_file(dir / "types_test.tsv", "C\tt9\n");
    try {
      load_dataset(dir.path());
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.file().find("types_test.tsv") != std::string::npos);
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("duplicate assertion within a split") {
    write_file(dir / "types_train.tsv", "A\tt0\nA\tt0\n");
    CHECK_THROWS_AS(load_dataset(dir.path()), LoadError);
  }
  SUBCASE("too few fields") {
    write_file(dir / "triples.tsv", "A\tr\n");
    CHECK_THROWS_AS(load_dataset(dir.path()), LoadError);
  }
  SUBCASE("missing directory") {
    CHECK_THROWS_AS(load_dataset(dir / "nope"), LoadError);
  }
  SUBCASE("manifest count mismatch") {
    write_file(dir / "manifest.json", R"({"entities": 3, "triples": 4})");
    try {
      load_dataset(dir.path());
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.file().find("manifest.json") != std::string::npos);
      CHECK(std::string(e.what()).find("triples") != std::string::npos);
    }
  }
  SUBCASE("matching manifest") {
    write_file(dir / "manifest.json", R"({"entities": 3, "relations": 2, "types": 3, "triples": 3,
                                          "train": 3, "valid": 1, "test": 2})");
    CHECK_NOTHROW(load_dataset(dir.path()));
  }
}

TEST_CASE("self loops are indexed in both directions") {
  KnowledgeGraph::Builder b;
  const auto a = b.add_entity("A");
  const auto r = b.add_relation("r");
  b.add_triple({a, r, a});
  const auto g = std::move(b).build();
  CHECK(g.neighbors(a).size() == 2);
}

TEST_CASE("graph index round trip") {
  testing::TempDir dir;
  const auto g = toy_graph();
  write_graph_index(g, dir / "g.idx");
  const auto h = read_graph_index(dir / "g.idx");
  CHECK(h.entities().names() == g.entities().names());
  CHECK(h.relations().names() == g.relations().names());
  CHECK(h.types().names() == g.types().names());
  CHECK(h.triples() == g.triples());
  for (Split s : {Split::train, Split::valid, Split::test}) CHECK(h.assertions(s) == g.assertions(s));
  for (std::uint32_t e = 0; e < g.num_entities(); ++e) {
    CHECK(h.entity_text(EntityId{e}).label == g.entity_text(EntityId{e}).label);
    CHECK(h.entity_text(EntityId{e}).description == g.entity_text(EntityId{e}).description);
  }
  // Re-writing the reloaded graph is byte identical.
  write_graph_index(h, dir / "h.idx");
  std::ifstream a(dir / "g.idx", std::ios::binary), b(dir / "h.idx", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("bundled toy dataset equals the in-code toy graph") {
  const auto disk = load_dataset(testing::source_dir() / "data" / "toy");
  const auto code = toy_graph();
  CHECK(disk.entities().names() == code.entities().names());
  CHECK(disk.relations().names() == code.relations().names());
  CHECK(disk.types().names() == code.types().names());
  CHECK(disk.triples() == code.triples());
  for (Split s : {Split::train, Split::valid, Split::test}) CHECK(disk.assertions(s) == code.assertions(s));
  CHECK(open_graph(testing::source_dir() / "data" / "toy").num_entities() == 5);
}

TEST_CASE("published dataset statistics") {
  const auto fb = DatasetManifest::fb15ket();
  CHECK(fb.entities == 14951u);
  CHECK(fb.relations == 1345u);
  CHECK(fb.types == 3851u);
  CHECK(fb.triples == 483142u);
  CHECK(fb.train == 136618u);
  const auto yago = DatasetManifest::yago43ket();
  CHECK(yago.entities == 42335u);
  CHECK(yago.relations == 37u);
  CHECK(yago.types == 45182u);
}
