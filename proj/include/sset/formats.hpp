#pragma once

// Binary interchange formats shared with the semantic encoder.
//
// All integers are unsigned little-endian; all values are IEEE-754 binary32,
// little-endian. Every file starts with an 8-byte magic and a u32 version.
//
// Embedding file ("SSETEMB1"):
//   magic[8] version:u32 kind:u32 count:u32 dim:u32  then count*dim f32,
//   rows in vocabulary order. kind: 0 entity, 1 relation, 2 type.
//
// Probability file ("SSETPROB"):
//   magic[8] version:u32 num_entities:u32 num_types:u32 mode:u32
//   mode 0 (dense):  num_entities rows of num_types f32.
//   mode 1 (sparse): records until end of file, each
//                    entity_id:u32 count:u32 then count*(type_id:u32 value:f32).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sset {

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::uint32_t kProbabilityFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  FormatError(std::string file, const std::string& what)
      : std::runtime_error(file + ": " + what), file_(std::move(file)) {}
  const std::string& file() const { return file_; }

 private:
  std::string file_;
};

enum class EmbeddingKind : std::uint32_t { entity = 0, relation = 1, type = 2 };

struct EmbeddingTable {
  EmbeddingKind kind = EmbeddingKind::entity;
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // count x dim, row-major

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }
};

void write_embedding_file(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embedding_file(const std::filesystem::path& path);

enum class ProbabilityMode : std::uint32_t { dense = 0, sparse_topk = 1 };

// In-memory form of a probability file: one row of per-type probabilities
// for some or all entities. Sparse rows hold only listed (type, value)
// entries; missing entries read back as `floor`.
class ProbabilityTable {
 public:
  using SparseEntry = std::pair<std::uint32_t, float>;

  ProbabilityTable() = default;
  ProbabilityTable(std::uint32_t num_entities, std::uint32_t num_types, ProbabilityMode mode);

  std::uint32_t num_entities() const { return num_entities_; }
  std::uint32_t num_types() const { return num_types_; }
  ProbabilityMode mode() const { return mode_; }

  float floor() const { return floor_; }
  void set_floor(float f) { floor_ = f; }

  bool has_row(std::uint32_t entity) const;
  // Dense view of one entity's probabilities (floor-filled for sparse gaps and
  // absent rows).
  std::vector<float> row(std::uint32_t entity) const;
  void row_into(std::uint32_t entity, std::span<float> out) const;

  // Dense tables: replaces the entity's row.
  void set_dense_row(std::uint32_t entity, std::span<const float> values);
  // Sparse tables: replaces the entity's record; entries sorted by type id.
  void set_sparse_row(std::uint32_t entity, std::vector<SparseEntry> entries);
  // Sparse tables: keeps the k largest values of `values` (ties -> lower id).
  void set_topk_row(std::uint32_t entity, std::span<const float> values, std::size_t k);

  const std::vector<float>& dense_values() const { return dense_; }
  const std::vector<SparseEntry>& sparse_row(std::uint32_t entity) const;

  // Every stored value lies in [0, 1] and every type id is < num_types.
  // Returns a description of the first violation, or nullopt.
  std::optional<std::string> check() const;

  friend bool operator==(const ProbabilityTable&, const ProbabilityTable&);

 private:
  void check_entity(std::uint32_t entity) const;

  std::uint32_t num_entities_ = 0;
  std::uint32_t num_types_ = 0;
  ProbabilityMode mode_ = ProbabilityMode::dense;
  float floor_ = 0.0f;
  std::vector<float> dense_;
  std::vector<std::uint8_t> present_;
  std::vector<std::vector<SparseEntry>> sparse_;
};

void write_probability_file(const std::filesystem::path& path, const ProbabilityTable& table);
ProbabilityTable read_probability_file(const std::filesystem::path& path);

// Reads a probability file and applies ProbabilityTable::check(); throws
// FormatError on any violation. This is the checker used for files coming
// from the semantic encoder.
ProbabilityTable read_and_check_probability_file(const std::filesystem::path& path,
                                                  std::optional<std::uint32_t> num_entities,
                                                  std::optional<std::uint32_t> num_types);

}  // namespace sset
