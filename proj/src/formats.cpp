#include "sset/formats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"

namespace sset {

namespace {

constexpr std::string_view kEmbeddingMagic = "SSETEMB1";
constexpr std::string_view kProbabilityMagic = "SSETPROB";

bool in_unit_interval(float v) { return v >= 0.0f && v <= 1.0f; }

}  // namespace

void write_embedding_file(const std::filesystem::path& path, const EmbeddingTable& table) {
  if (table.values.size() != static_cast<std::size_t>(table.count) * table.dim) {
    throw FormatError(path.string(), "embedding table has inconsistent size");
  }
  detail::BinaryWriter out(path);
  out.magic(kEmbeddingMagic);
  out.put<std::uint32_t>(kEmbeddingFormatVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(table.kind));
  out.put<std::uint32_t>(table.count);
  out.put<std::uint32_t>(table.dim);
  out.put_span<float>(table.values);
  out.finish();
}

EmbeddingTable read_embedding_file(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kEmbeddingMagic);
  in.expect_version(kEmbeddingFormatVersion);
  EmbeddingTable t;
  const auto kind = in.get<std::uint32_t>();
  if (kind > 2) throw FormatError(path.string(), "unknown embedding kind " + std::to_string(kind));
  t.kind = static_cast<EmbeddingKind>(kind);
  t.count = in.get<std::uint32_t>();
  t.dim = in.get<std::uint32_t>();
  t.values.resize(static_cast<std::size_t>(t.count) * t.dim);
  in.get_span<float>(t.values);
  in.expect_eof();
  for (float v : t.values) {
    if (!std::isfinite(v)) throw FormatError(path.string(), "non-finite embedding value");
  }
  return t;
}

ProbabilityTable::ProbabilityTable(std::uint32_t num_entities, std::uint32_t num_types, ProbabilityMode mode)
    : num_entities_(num_entities), num_types_(num_types), mode_(mode) {
  if (mode == ProbabilityMode::dense) {
    dense_.assign(static_cast<std::size_t>(num_entities) * num_types, 0.0f);
  } else {
    present_.assign(num_entities, 0);
    sparse_.resize(num_entities);
  }
}

void ProbabilityTable::check_entity(std::uint32_t entity) const {
  if (entity >= num_entities_) {
    throw std::out_of_range("entity " + std::to_string(entity) + " out of range (" +
                            std::to_string(num_entities_) + " entities)");
  }
}

bool ProbabilityTable::has_row(std::uint32_t entity) const {
  check_entity(entity);
  return mode_ == ProbabilityMode::dense || present_[entity] != 0;
}

std::vector<float> ProbabilityTable::row(std::uint32_t entity) const {
  std::vector<float> out(num_types_);
  row_into(entity, out);
  return out;
}

void ProbabilityTable::row_into(std::uint32_t entity, std::span<float> out) const {
  check_entity(entity);
  if (out.size() != num_types_) throw std::invalid_argument("row_into: output has wrong length");
  if (mode_ == ProbabilityMode::dense) {
    const auto* src = dense_.data() + static_cast<std::size_t>(entity) * num_types_;
    std::copy_n(src, num_types_, out.begin());
    return;
  }
  std::fill(out.begin(), out.end(), floor_);
  for (const auto& [type, value] : sparse_[entity]) out[type] = value;
}

void ProbabilityTable::set_dense_row(std::uint32_t entity, std::span<const float> values) {
  check_entity(entity);
  if (mode_ != ProbabilityMode::dense) throw std::logic_error("set_dense_row on a sparse table");
  if (values.size() != num_types_) throw std::invalid_argument("set_dense_row: wrong row length");
  std::copy(values.begin(), values.end(), dense_.begin() + static_cast<std::ptrdiff_t>(entity) * num_types_);
}

void ProbabilityTable::set_sparse_row(std::uint32_t entity, std::vector<SparseEntry> entries) {
  check_entity(entity);
  if (mode_ != ProbabilityMode::sparse_topk) throw std::logic_error("set_sparse_row on a dense table");
  std::sort(entries.begin(), entries.end());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first >= num_types_) throw std::out_of_range("sparse entry type id out of range");
    if (i > 0 && entries[i].first == entries[i - 1].first) {
      throw std::invalid_argument("sparse row lists type " + std::to_string(entries[i].first) + " twice");
    }
  }
  sparse_[entity] = std::move(entries);
  present_[entity] = 1;
}

void ProbabilityTable::set_topk_row(std::uint32_t entity, std::span<const float> values, std::size_t k) {
  if (values.size() != num_types_) throw std::invalid_argument("set_topk_row: wrong row length");
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });
  std::vector<SparseEntry> entries;
  entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) entries.emplace_back(order[i], values[order[i]]);
  set_sparse_row(entity, std::move(entries));
}

const std::vector<ProbabilityTable::SparseEntry>& ProbabilityTable::sparse_row(std::uint32_t entity) const {
  check_entity(entity);
  if (mode_ != ProbabilityMode::sparse_topk) throw std::logic_error("sparse_row on a dense table");
  return sparse_[entity];
}

std::optional<std::string> ProbabilityTable::check() const {
  if (mode_ == ProbabilityMode::dense) {
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      if (!in_unit_interval(dense_[i])) {
        return "entity " + std::to_string(i / num_types_) + " type " + std::to_string(i % num_types_) +
               ": value " + std::to_string(dense_[i]) + " outside [0, 1]";
      }
    }
    return std::nullopt;
  }
  for (std::uint32_t e = 0; e < num_entities_; ++e) {
    for (const auto& [type, value] : sparse_[e]) {
      if (type >= num_types_) return "entity " + std::to_string(e) + ": type id " + std::to_string(type) + " out of range";
      if (!in_unit_interval(value)) {
        return "entity " + std::to_string(e) + " type " + std::to_string(type) + ": value " + std::to_string(value) +
               " outside [0, 1]";
      }
    }
  }
  return std::nullopt;
}

bool operator==(const ProbabilityTable& a, const ProbabilityTable& b) {
  return a.num_entities_ == b.num_entities_ && a.num_types_ == b.num_types_ && a.mode_ == b.mode_ &&
         a.dense_ == b.dense_ && a.present_ == b.present_ && a.sparse_ == b.sparse_;
}

void write_probability_file(const std::filesystem::path& path, const ProbabilityTable& table) {
  detail::BinaryWriter out(path);
  out.magic(kProbabilityMagic);
  out.put<std::uint32_t>(kProbabilityFormatVersion);
  out.put<std::uint32_t>(table.num_entities());
  out.put<std::uint32_t>(table.num_types());
  out.put<std::uint32_t>(static_cast<std::uint32_t>(table.mode()));
  if (table.mode() == ProbabilityMode::dense) {
    out.put_span<float>(table.dense_values());
  } else {
    for (std::uint32_t e = 0; e < table.num_entities(); ++e) {
      if (!table.has_row(e)) continue;
      const auto& entries = table.sparse_row(e);
      out.put<std::uint32_t>(e);
      out.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
      for (const auto& [type, value] : entries) {
        out.put<std::uint32_t>(type);
        out.put<float>(value);
      }
    }
  }
  out.finish();
}

ProbabilityTable read_probability_file(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kProbabilityMagic);
  in.expect_version(kProbabilityFormatVersion);
  const auto num_entities = in.get<std::uint32_t>();
  const auto num_types = in.get<std::uint32_t>();
  const auto mode = in.get<std::uint32_t>();
  if (mode > 1) throw FormatError(path.string(), "unknown probability mode " + std::to_string(mode));
  ProbabilityTable table(num_entities, num_types, static_cast<ProbabilityMode>(mode));
  if (mode == 0) {
    std::vector<float> row(num_types);
    for (std::uint32_t e = 0; e < num_entities; ++e) {
      in.get_span<float>(row);
      table.set_dense_row(e, row);
    }
    in.expect_eof();
    return table;
  }
  while (!in.at_eof()) {
    const auto entity = in.get<std::uint32_t>();
    const auto count = in.get<std::uint32_t>();
    if (entity >= num_entities) {
      throw FormatError(path.string(), "record for entity " + std::to_string(entity) + " out of range");
    }
    if (table.has_row(entity)) {
      throw FormatError(path.string(), "duplicate record for entity " + std::to_string(entity));
    }
    if (count > num_types) throw FormatError(path.string(), "record count exceeds number of types");
    std::vector<ProbabilityTable::SparseEntry> entries(count);
    for (auto& [type, value] : entries) {
      type = in.get<std::uint32_t>();
      value = in.get<float>();
      if (type >= num_types) {
        throw FormatError(path.string(), "entity " + std::to_string(entity) + ": type id " + std::to_string(type) +
                                             " out of range");
      }
    }
    try {
      table.set_sparse_row(entity, std::move(entries));
    } catch (const std::exception& ex) {
      throw FormatError(path.string(), ex.what());
    }
  }
  return table;
}

ProbabilityTable read_and_check_probability_file(const std::filesystem::path& path,
                                                  std::optional<std::uint32_t> num_entities,
                                                  std::optional<std::uint32_t> num_types) {
  auto table = read_probability_file(path);
  if (num_entities && table.num_entities() != *num_entities) {
    throw FormatError(path.string(), "file has " + std::to_string(table.num_entities()) + " entities, expected " +
                                         std::to_string(*num_entities));
  }
  if (num_types && table.num_types() != *num_types) {
    throw FormatError(path.string(), "file has " + std::to_string(table.num_types()) + " types, expected " +
                                         std::to_string(*num_types));
  }
  if (auto problem = table.check()) throw FormatError(path.string(), *problem);
  return table;
}

}  // namespace sset
