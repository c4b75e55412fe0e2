#pragma once

// Model checkpoint ("SSETCKPT"), little-endian:
//   magic[8] version:u32
//   num_entities num_relations num_types text_dim struct_dim dim hops
//   csra_mean num_temps : u32, then num_temps f32 temperatures
//   epochs_completed:u32 adam_step:u64 has_optimizer_state:u32
//   textual tables (entity, relation, type) when text_dim > 0
//   learnable tensors in canonical order (see SkaModel::parameters)
//   Adam first moments, then second moments, when has_optimizer_state
// All tables are raw f32, row-major. text_dim 0 means structural-only.

#include <cstdint>
#include <filesystem>

#include "sset/kg_store.hpp"
#include "sset/trainer.hpp"

namespace sset {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, bool with_optimizer = true);

// Throws FormatError on a bad magic, version, truncation or trailing bytes.
TrainState load_checkpoint(const std::filesystem::path& path);

// Throws std::invalid_argument when the checkpoint vocabulary sizes differ
// from the graph.
void check_checkpoint_matches(const SkaModel<float>& model, const KnowledgeGraph& g);

}  // namespace sset
