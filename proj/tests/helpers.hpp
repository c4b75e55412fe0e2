#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sset/kg_store.hpp"
#include "sset/numerics.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("sset_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <class Real>
sset::num::Matrix<Real> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  sset::num::Matrix<Real> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<Real>(normal(rng));
  return m;
}

inline std::filesystem::path source_dir() { return SSET_SOURCE_DIR; }

// Random graph with up to `max_entities` entities, a few relations and
// types, random triples and train types. Some entities may be isolated.
inline sset::KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t max_entities, std::size_t relations = 3,
                                         std::size_t types = 4) {
  std::uniform_int_distribution<std::size_t> count(2, max_entities);
  const std::size_t n = count(rng);
  sset::KnowledgeGraph::Builder b;
  for (std::size_t i = 0; i < n; ++i) b.add_entity("e" + std::to_string(i));
  for (std::size_t r = 0; r < relations; ++r) b.add_relation("r" + std::to_string(r));
  for (std::size_t t = 0; t < types; ++t) b.add_type("t" + std::to_string(t));
  std::uniform_int_distribution<std::uint32_t> ent(0, static_cast<std::uint32_t>(n - 1));
  std::uniform_int_distribution<std::uint32_t> rel(0, static_cast<std::uint32_t>(relations - 1));
  std::uniform_int_distribution<std::uint32_t> typ(0, static_cast<std::uint32_t>(types - 1));
  std::uniform_int_distribution<std::size_t> num_triples(0, 2 * n);
  const std::size_t m = num_triples(rng);
  for (std::size_t i = 0; i < m; ++i) {
    const auto s = ent(rng);
    const auto o = ent(rng);
    if (s == o) continue;
    b.add_triple({sset::EntityId{s}, sset::RelationId{rel(rng)}, sset::EntityId{o}});
  }
  std::bernoulli_distribution has_type(0.5);
  for (std::uint32_t e = 0; e < n; ++e) {
    if (has_type(rng)) b.add_assertion({sset::EntityId{e}, sset::TypeId{typ(rng)}, sset::Split::train});
    if (has_type(rng)) b.add_assertion({sset::EntityId{e}, sset::TypeId{typ(rng)}, sset::Split::train});
  }
  return std::move(b).build();
}

}  // namespace testing
