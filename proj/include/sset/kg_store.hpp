#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sset {

// Dense index into one of the three vocabularies. The tag keeps entity,
// relation and type ids from being mixed up.
template <class Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}
  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(Id, Id) = default;
};

struct EntityTag {};
struct RelationTag {};
struct TypeTag {};
using EntityId = Id<EntityTag>;
using RelationId = Id<RelationTag>;
using TypeId = Id<TypeTag>;

struct Triple {
  EntityId subject;
  RelationId relation;
  EntityId object;
  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

enum class Split : std::uint8_t { train = 0, valid = 1, test = 2 };
std::string_view to_string(Split split);

struct TypeAssertion {
  EntityId entity;
  TypeId type;
  Split split = Split::train;
  friend constexpr auto operator<=>(const TypeAssertion&, const TypeAssertion&) = default;
};

// forward: the queried entity is the subject; inverse: it is the object and
// the relation is traversed as r^-1 = -r.
enum class Direction : std::uint8_t { forward = 0, inverse = 1 };

struct NeighborEdge {
  RelationId relation;
  Direction direction = Direction::forward;
  EntityId neighbor;
  friend constexpr auto operator<=>(const NeighborEdge&, const NeighborEdge&) = default;
};

// +1 for forward edges, -1 for inverse edges.
constexpr int relation_sign(Direction d) { return d == Direction::forward ? 1 : -1; }

struct TextRecord {
  std::string label;
  std::string description;
};

// Expected counts, usually read from manifest.json next to the TSV files.
struct DatasetManifest {
  std::optional<std::size_t> entities;
  std::optional<std::size_t> relations;
  std::optional<std::size_t> types;
  std::optional<std::size_t> triples;
  std::optional<std::size_t> train;
  std::optional<std::size_t> valid;
  std::optional<std::size_t> test;

  static DatasetManifest from_json_file(const std::filesystem::path& path);
  // FB15kET and YAGO43kET statistics as published.
  static DatasetManifest fb15ket();
  static DatasetManifest yago43ket();
};

// Raised for malformed or inconsistent dataset files. `file` and `line`
// locate the offending record (line is 1-based, 0 when not line specific).
class LoadError : public std::runtime_error {
 public:
  LoadError(std::string file, std::size_t line, const std::string& what);
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

struct LoadOptions {
  // Drop repeated triples instead of failing.
  bool allow_duplicate_triples = false;
};

// Bijective string <-> dense id table, ids assigned in first-occurrence order.
class Vocabulary {
 public:
  std::uint32_t add(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Immutable after construction; safe to share across reader threads.
class KnowledgeGraph {
 public:
  class Builder;

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_types() const { return types_.size(); }

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  const Vocabulary& types() const { return types_; }

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<TypeAssertion>& assertions(Split split) const;

  const TextRecord& entity_text(EntityId e) const { return entity_text_.at(e.index()); }
  const TextRecord& relation_text(RelationId r) const { return relation_text_.at(r.index()); }
  const TextRecord& type_text(TypeId t) const { return type_text_.at(t.index()); }

  // Sorted by (relation, direction, neighbor). Throws std::out_of_range on a bad id.
  std::span<const NeighborEdge> neighbors(EntityId e) const;
  // Train-split types of e, sorted ascending.
  std::span<const TypeId> known_types(EntityId e) const;
  // Types of e across train, valid and test (the filter set for evaluation).
  std::span<const TypeId> all_types(EntityId e) const;

  EntityId entity_id(std::string_view name) const;
  RelationId relation_id(std::string_view name) const;
  TypeId type_id(std::string_view name) const;

  // Throws LoadError naming `source` when a provided count disagrees.
  void validate(const DatasetManifest& manifest, const std::string& source) const;

 private:
  friend class Builder;
  void check_entity(EntityId e) const;

  Vocabulary entities_;
  Vocabulary relations_;
  Vocabulary types_;
  std::vector<TextRecord> entity_text_;
  std::vector<TextRecord> relation_text_;
  std::vector<TextRecord> type_text_;
  std::vector<Triple> triples_;
  std::vector<TypeAssertion> assertions_[3];

  // CSR layout of the neighbor index and the train-type index.
  std::vector<std::size_t> neighbor_offsets_;
  std::vector<NeighborEdge> neighbor_edges_;
  std::vector<std::size_t> type_offsets_;
  std::vector<TypeId> type_entries_;
  std::vector<std::size_t> all_type_offsets_;
  std::vector<TypeId> all_type_entries_;
};

// Incremental construction used by the TSV loader, the binary index reader
// and by tests that assemble small graphs in code.
class KnowledgeGraph::Builder {
 public:
  EntityId add_entity(std::string_view name, std::string label = {},
                      std::string description = {});
  RelationId add_relation(std::string_view name, std::string label = {});
  TypeId add_type(std::string_view name, std::string label = {});

  // Returns false when the triple was already present.
  bool add_triple(Triple t);
  // Returns false when (entity, type) was already present in that split.
  bool add_assertion(TypeAssertion a);

  std::size_t num_entities() const { return g_.entities_.size(); }
  std::size_t num_relations() const { return g_.relations_.size(); }
  std::size_t num_types() const { return g_.types_.size(); }
  const KnowledgeGraph& partial() const { return g_; }

  KnowledgeGraph build() &&;

 private:
  KnowledgeGraph g_;
  struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
      std::uint64_t h = t.subject.value;
      h = h * 0x9E3779B97F4A7C15ULL ^ t.relation.value;
      h = h * 0x9E3779B97F4A7C15ULL ^ t.object.value;
      return static_cast<std::size_t>(h ^ (h >> 29));
    }
  };
  std::unordered_set<Triple, TripleHash> seen_triples_;
  std::unordered_map<std::uint64_t, char> seen_assertions_[3];
};

// Reads entity_text.tsv, relation_text.tsv, type_text.tsv (vocabularies),
// triples.tsv and types_{train,valid,test}.tsv from `dir`. When `manifest`
// is empty and dir/manifest.json exists, that file is used.
KnowledgeGraph load_dataset(const std::filesystem::path& dir,
                            std::optional<DatasetManifest> manifest = std::nullopt,
                            const LoadOptions& options = {});

// Binary index produced by `sset prepare`; see formats.hpp for the layout.
void write_graph_index(const KnowledgeGraph& g, const std::filesystem::path& path);
KnowledgeGraph read_graph_index(const std::filesystem::path& path);

// Loads either a dataset directory or a prepared index file.
KnowledgeGraph open_graph(const std::filesystem::path& path);

}  // namespace sset
