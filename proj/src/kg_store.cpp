#include "sset/kg_store.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"

namespace sset {

namespace {

constexpr std::string_view kGraphIndexMagic = "SSETKGIX";
constexpr std::uint32_t kGraphIndexVersion = 1;

std::uint64_t pack(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Calls fn(fields, line_number) for every non-empty line of a TSV file.
template <class Fn>
void for_each_record(const std::filesystem::path& path, std::size_t min_fields, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() < min_fields) {
      throw LoadError(path.string(), line_no,
                      "expected " + std::to_string(min_fields) + " tab-separated fields, got " +
                          std::to_string(fields.size()));
    }
    fn(fields, line_no);
  }
}

void check_count(const std::optional<std::size_t>& expected, std::size_t actual,
                 std::string_view what, const std::string& source) {
  if (expected && *expected != actual) {
    throw LoadError(source, 0,
                    "count mismatch for " + std::string(what) + ": manifest says " +
                        std::to_string(*expected) + ", loaded " + std::to_string(actual));
  }
}

// CSR index entity -> sorted unique type ids.
void build_type_index(const std::vector<TypeAssertion>& assertions, std::size_t n,
                      std::vector<std::size_t>& offsets, std::vector<TypeId>& entries) {
  std::vector<std::vector<TypeId>> per_entity(n);
  for (const auto& a : assertions) per_entity[a.entity.index()].push_back(a.type);
  offsets.assign(n + 1, 0);
  entries.clear();
  for (std::size_t e = 0; e < n; ++e) {
    auto& types = per_entity[e];
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    entries.insert(entries.end(), types.begin(), types.end());
    offsets[e + 1] = entries.size();
  }
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

LoadError::LoadError(std::string file, std::size_t line, const std::string& what)
    : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
      file_(std::move(file)),
      line_(line) {}

DatasetManifest DatasetManifest::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), 0, "cannot open manifest");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
  DatasetManifest m;
  auto read = [&](const char* key, std::optional<std::size_t>& field) {
    if (j.contains(key)) field = j.at(key).get<std::size_t>();
  };
  read("entities", m.entities);
  read("relations", m.relations);
  read("types", m.types);
  read("triples", m.triples);
  read("train", m.train);
  read("valid", m.valid);
  read("test", m.test);
  return m;
}

DatasetManifest DatasetManifest::fb15ket() {
  return {14951, 1345, 3851, 483142, 136618, 15749, 15780};
}

DatasetManifest DatasetManifest::yago43ket() {
  return {42335, 37, 45182, 331687, 375853, 42739, 42750};
}

std::uint32_t Vocabulary::add(std::string_view name) {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::vector<TypeAssertion>& KnowledgeGraph::assertions(Split split) const {
  return assertions_[static_cast<int>(split)];
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e.index() >= entities_.size()) {
    throw std::out_of_range("entity id " + std::to_string(e.value) + " out of range");
  }
}

std::span<const NeighborEdge> KnowledgeGraph::neighbors(EntityId e) const {
  check_entity(e);
  const auto begin = neighbor_offsets_[e.index()];
  const auto end = neighbor_offsets_[e.index() + 1];
  return std::span<const NeighborEdge>(neighbor_edges_).subspan(begin, end - begin);
}

std::span<const TypeId> KnowledgeGraph::known_types(EntityId e) const {
  check_entity(e);
  const auto begin = type_offsets_[e.index()];
  const auto end = type_offsets_[e.index() + 1];
  return std::span<const TypeId>(type_entries_).subspan(begin, end - begin);
}

std::span<const TypeId> KnowledgeGraph::all_types(EntityId e) const {
  check_entity(e);
  const auto begin = all_type_offsets_[e.index()];
  const auto end = all_type_offsets_[e.index() + 1];
  return std::span<const TypeId>(all_type_entries_).subspan(begin, end - begin);
}

EntityId KnowledgeGraph::entity_id(std::string_view name) const {
  if (auto id = entities_.find(name)) return EntityId(*id);
  throw std::out_of_range("unknown entity '" + std::string(name) + "'");
}

RelationId KnowledgeGraph::relation_id(std::string_view name) const {
  if (auto id = relations_.find(name)) return RelationId(*id);
  throw std::out_of_range("unknown relation '" + std::string(name) + "'");
}

TypeId KnowledgeGraph::type_id(std::string_view name) const {
  if (auto id = types_.find(name)) return TypeId(*id);
  throw std::out_of_range("unknown type '" + std::string(name) + "'");
}

void KnowledgeGraph::validate(const DatasetManifest& m, const std::string& source) const {
  check_count(m.entities, num_entities(), "entities", source);
  check_count(m.relations, num_relations(), "relations", source);
  check_count(m.types, num_types(), "types", source);
  check_count(m.triples, triples_.size(), "triples", source);
  check_count(m.train, assertions(Split::train).size(), "train assertions", source);
  check_count(m.valid, assertions(Split::valid).size(), "valid assertions", source);
  check_count(m.test, assertions(Split::test).size(), "test assertions", source);
}

EntityId KnowledgeGraph::Builder::add_entity(std::string_view name, std::string label,
                                             std::string description) {
  const auto before = g_.entities_.size();
  const auto id = g_.entities_.add(name);
  if (g_.entities_.size() > before) {
    if (label.empty()) label = std::string(name);
    g_.entity_text_.push_back({std::move(label), std::move(description)});
  }
  return EntityId(id);
}

RelationId KnowledgeGraph::Builder::add_relation(std::string_view name, std::string label) {
  const auto before = g_.relations_.size();
  const auto id = g_.relations_.add(name);
  if (g_.relations_.size() > before) {
    if (label.empty()) label = std::string(name);
    g_.relation_text_.push_back({std::move(label), {}});
  }
  return RelationId(id);
}

TypeId KnowledgeGraph::Builder::add_type(std::string_view name, std::string label) {
  const auto before = g_.types_.size();
  const auto id = g_.types_.add(name);
  if (g_.types_.size() > before) {
    if (label.empty()) label = std::string(name);
    g_.type_text_.push_back({std::move(label), {}});
  }
  return TypeId(id);
}

bool KnowledgeGraph::Builder::add_triple(Triple t) {
  if (t.subject.index() >= g_.entities_.size() || t.object.index() >= g_.entities_.size() ||
      t.relation.index() >= g_.relations_.size()) {
    throw std::out_of_range("triple refers to an unknown id");
  }
  if (!seen_triples_.insert(t).second) return false;
  g_.triples_.push_back(t);
  return true;
}

bool KnowledgeGraph::Builder::add_assertion(TypeAssertion a) {
  if (a.entity.index() >= g_.entities_.size() || a.type.index() >= g_.types_.size()) {
    throw std::out_of_range("type assertion refers to an unknown id");
  }
  auto& seen = seen_assertions_[static_cast<int>(a.split)];
  if (!seen.try_emplace(pack(a.entity.value, a.type.value), 0).second) return false;
  g_.assertions_[static_cast<int>(a.split)].push_back(a);
  return true;
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  KnowledgeGraph g = std::move(g_);
  const auto n = g.entities_.size();

  std::vector<std::size_t> degree(n, 0);
  for (const auto& t : g.triples_) {
    ++degree[t.subject.index()];
    ++degree[t.object.index()];
  }
  g.neighbor_offsets_.assign(n + 1, 0);
  for (std::size_t e = 0; e < n; ++e) g.neighbor_offsets_[e + 1] = g.neighbor_offsets_[e] + degree[e];
  g.neighbor_edges_.resize(g.neighbor_offsets_[n]);
  std::vector<std::size_t> fill(g.neighbor_offsets_.begin(), g.neighbor_offsets_.end() - 1);
  for (const auto& t : g.triples_) {
    g.neighbor_edges_[fill[t.subject.index()]++] = {t.relation, Direction::forward, t.object};
    g.neighbor_edges_[fill[t.object.index()]++] = {t.relation, Direction::inverse, t.subject};
  }
  for (std::size_t e = 0; e < n; ++e) {
    std::sort(g.neighbor_edges_.begin() + static_cast<std::ptrdiff_t>(g.neighbor_offsets_[e]),
              g.neighbor_edges_.begin() + static_cast<std::ptrdiff_t>(g.neighbor_offsets_[e + 1]));
  }

  build_type_index(g.assertions_[static_cast<int>(Split::train)], n, g.type_offsets_,
                   g.type_entries_);
  std::vector<TypeAssertion> all;
  for (const auto& split : g.assertions_) all.insert(all.end(), split.begin(), split.end());
  build_type_index(all, n, g.all_type_offsets_, g.all_type_entries_);
  return g;
}

KnowledgeGraph load_dataset(const std::filesystem::path& dir,
                            std::optional<DatasetManifest> manifest, const LoadOptions& options) {
  if (!std::filesystem::is_directory(dir)) {
    throw LoadError(dir.string(), 0, "dataset directory does not exist");
  }
  KnowledgeGraph::Builder b;

  const auto entity_file = dir / "entity_text.tsv";
  for_each_record(entity_file, 2, [&](const auto& f, std::size_t line) {
    if (b.partial().entities().find(f[0])) {
      throw LoadError(entity_file.string(), line, "duplicate entity '" + std::string(f[0]) + "'");
    }
    b.add_entity(f[0], std::string(f[1]), f.size() > 2 ? std::string(f[2]) : std::string());
  });
  const auto relation_file = dir / "relation_text.tsv";
  for_each_record(relation_file, 1, [&](const auto& f, std::size_t line) {
    if (b.partial().relations().find(f[0])) {
      throw LoadError(relation_file.string(), line, "duplicate relation '" + std::string(f[0]) + "'");
    }
    b.add_relation(f[0], f.size() > 1 ? std::string(f[1]) : std::string());
  });
  const auto type_file = dir / "type_text.tsv";
  for_each_record(type_file, 1, [&](const auto& f, std::size_t line) {
    if (b.partial().types().find(f[0])) {
      throw LoadError(type_file.string(), line, "duplicate type '" + std::string(f[0]) + "'");
    }
    b.add_type(f[0], f.size() > 1 ? std::string(f[1]) : std::string());
  });

  const auto& g = b.partial();
  auto entity = [&](std::string_view name, const std::filesystem::path& file, std::size_t line) {
    if (auto id = g.entities().find(name)) return EntityId(*id);
    throw LoadError(file.string(), line, "unknown entity '" + std::string(name) + "'");
  };

  const auto triple_file = dir / "triples.tsv";
  for_each_record(triple_file, 3, [&](const auto& f, std::size_t line) {
    const auto s = entity(f[0], triple_file, line);
    const auto r = g.relations().find(f[1]);
    if (!r) throw LoadError(triple_file.string(), line, "unknown relation '" + std::string(f[1]) + "'");
    const auto o = entity(f[2], triple_file, line);
    if (!b.add_triple({s, RelationId(*r), o}) && !options.allow_duplicate_triples) {
      throw LoadError(triple_file.string(), line, "duplicate triple");
    }
  });

  for (Split split : {Split::train, Split::valid, Split::test}) {
    const auto file = dir / ("types_" + std::string(to_string(split)) + ".tsv");
    for_each_record(file, 2, [&](const auto& f, std::size_t line) {
      const auto e = entity(f[0], file, line);
      const auto t = g.types().find(f[1]);
      if (!t) throw LoadError(file.string(), line, "unknown type '" + std::string(f[1]) + "'");
      if (!b.add_assertion({e, TypeId(*t), split})) {
        throw LoadError(file.string(), line, "duplicate type assertion");
      }
    });
  }

  auto graph = std::move(b).build();
  if (!manifest && std::filesystem::exists(dir / "manifest.json")) {
    manifest = DatasetManifest::from_json_file(dir / "manifest.json");
  }
  if (manifest) graph.validate(*manifest, (dir / "manifest.json").string());
  return graph;
}

void write_graph_index(const KnowledgeGraph& g, const std::filesystem::path& path) {
  detail::BinaryWriter w(path);
  w.magic(kGraphIndexMagic);
  w.put<std::uint32_t>(kGraphIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.num_entities()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.num_relations()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.num_types()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.triples().size()));
  for (Split s : {Split::train, Split::valid, Split::test}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.assertions(s).size()));
  }
  for (std::size_t e = 0; e < g.num_entities(); ++e) {
    w.put_string(g.entities().name(static_cast<std::uint32_t>(e)));
    const auto& text = g.entity_text(EntityId(static_cast<std::uint32_t>(e)));
    w.put_string(text.label);
    w.put_string(text.description);
  }
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    w.put_string(g.relations().name(static_cast<std::uint32_t>(r)));
    w.put_string(g.relation_text(RelationId(static_cast<std::uint32_t>(r))).label);
  }
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    w.put_string(g.types().name(static_cast<std::uint32_t>(t)));
    w.put_string(g.type_text(TypeId(static_cast<std::uint32_t>(t))).label);
  }
  for (const auto& t : g.triples()) {
    w.put(t.subject.value);
    w.put(t.relation.value);
    w.put(t.object.value);
  }
  for (Split s : {Split::train, Split::valid, Split::test}) {
    for (const auto& a : g.assertions(s)) {
      w.put(a.entity.value);
      w.put(a.type.value);
    }
  }
  w.finish();
}

KnowledgeGraph read_graph_index(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kGraphIndexMagic);
  r.expect_version(kGraphIndexVersion);
  const auto ne = r.get<std::uint32_t>();
  const auto nr = r.get<std::uint32_t>();
  const auto nt = r.get<std::uint32_t>();
  const auto ntriples = r.get<std::uint32_t>();
  std::uint32_t nsplit[3];
  for (auto& n : nsplit) n = r.get<std::uint32_t>();

  KnowledgeGraph::Builder b;
  for (std::uint32_t i = 0; i < ne; ++i) {
    auto name = r.get_string();
    auto label = r.get_string();
    auto desc = r.get_string();
    b.add_entity(name, std::move(label), std::move(desc));
  }
  for (std::uint32_t i = 0; i < nr; ++i) {
    auto name = r.get_string();
    b.add_relation(name, r.get_string());
  }
  for (std::uint32_t i = 0; i < nt; ++i) {
    auto name = r.get_string();
    b.add_type(name, r.get_string());
  }
  if (b.num_entities() != ne || b.num_relations() != nr || b.num_types() != nt) {
    throw FormatError(path.string(), "duplicate vocabulary entries");
  }
  try {
    for (std::uint32_t i = 0; i < ntriples; ++i) {
      const EntityId s(r.get<std::uint32_t>());
      const RelationId rel(r.get<std::uint32_t>());
      const EntityId o(r.get<std::uint32_t>());
      if (!b.add_triple({s, rel, o})) throw FormatError(path.string(), "duplicate triple");
    }
    for (int s = 0; s < 3; ++s) {
      for (std::uint32_t i = 0; i < nsplit[s]; ++i) {
        const EntityId e(r.get<std::uint32_t>());
        const TypeId t(r.get<std::uint32_t>());
        if (!b.add_assertion({e, t, static_cast<Split>(s)})) {
          throw FormatError(path.string(), "duplicate type assertion");
        }
      }
    }
  } catch (const std::out_of_range& e) {
    throw FormatError(path.string(), e.what());
  }
  r.expect_eof();
  return std::move(b).build();
}

KnowledgeGraph open_graph(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_dataset(path);
  return read_graph_index(path);
}

}  // namespace sset
