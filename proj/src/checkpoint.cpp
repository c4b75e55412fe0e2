#include "sset/checkpoint.hpp"

#include <array>
#include <limits>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace sset {

namespace {

constexpr std::string_view kMagic = "SSETCKPT";

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw std::overflow_error(std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

num::MlpParams<float> mlp_shape(std::size_t in, std::size_t dim) {
  num::MlpParams<float> m;
  m.weights = {Matrix<float>(dim, in), Matrix<float>(dim, dim)};
  m.biases = {Matrix<float>(1, dim), Matrix<float>(1, dim)};
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, bool with_optimizer) {
  const auto& model = state.model;
  const auto& emb = model.embeddings;
  const std::size_t text_dim = emb.has_text() ? emb.text[0].cols() : 0;
  const auto params = model.parameters();
  const bool has_opt = with_optimizer && state.adam.first_moment.size() == params.size() &&
                       state.adam.second_moment.size() == params.size();

  detail::BinaryWriter out(path);
  out.magic(kMagic);
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(narrow(emb.count(ItemKind::entity), "entity count"));
  out.put<std::uint32_t>(narrow(emb.count(ItemKind::relation), "relation count"));
  out.put<std::uint32_t>(narrow(emb.count(ItemKind::type), "type count"));
  out.put<std::uint32_t>(narrow(text_dim, "text_dim"));
  out.put<std::uint32_t>(narrow(emb.structural[0].cols(), "struct_dim"));
  out.put<std::uint32_t>(narrow(emb.dim(), "dim"));
  out.put<std::uint32_t>(narrow(static_cast<std::size_t>(model.hops), "hops"));
  out.put<std::uint32_t>(model.csra_mean == num::CsraMeanMode::per_head ? 0u : 1u);
  out.put<std::uint32_t>(narrow(model.temps.size(), "temperature count"));
  out.put_span<float>(model.temps);
  out.put<std::uint32_t>(narrow(state.epochs_completed, "epoch count"));
  out.put<std::uint64_t>(state.adam.step);
  out.put<std::uint32_t>(has_opt ? 1u : 0u);
  if (text_dim > 0) {
    for (const auto& t : emb.text) out.put_span<float>(t.values());
  }
  for (const auto* p : params) out.put_span<float>(p->values());
  if (has_opt) {
    for (const auto& m : state.adam.first_moment) out.put_span<float>(m.values());
    for (const auto& v : state.adam.second_moment) out.put_span<float>(v.values());
  }
  out.finish();
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kMagic);
  in.expect_version(kCheckpointVersion);
  const auto num_entities = in.get<std::uint32_t>();
  const auto num_relations = in.get<std::uint32_t>();
  const auto num_types = in.get<std::uint32_t>();
  const auto text_dim = in.get<std::uint32_t>();
  const auto struct_dim = in.get<std::uint32_t>();
  const auto dim = in.get<std::uint32_t>();
  const auto hops = in.get<std::uint32_t>();
  const auto csra_mean = in.get<std::uint32_t>();
  const auto num_temps = in.get<std::uint32_t>();
  if (struct_dim == 0 || dim == 0 || hops == 0 || num_temps == 0 || csra_mean > 1) {
    throw FormatError(path.string(), "invalid checkpoint header");
  }
  if (num_temps > 1024 || hops > 64) throw FormatError(path.string(), "implausible checkpoint header");

  TrainState state;
  auto& model = state.model;
  model.temps.resize(num_temps);
  in.get_span<float>(model.temps);
  model.hops = static_cast<int>(hops);
  model.csra_mean = csra_mean == 0 ? num::CsraMeanMode::per_head : num::CsraMeanMode::once;
  state.epochs_completed = in.get<std::uint32_t>();
  state.adam.step = in.get<std::uint64_t>();
  const auto has_opt = in.get<std::uint32_t>();
  if (has_opt > 1) throw FormatError(path.string(), "invalid optimizer flag");

  auto& emb = model.embeddings;
  const std::array<std::uint32_t, 3> counts = {num_entities, num_relations, num_types};
  for (std::size_t k = 0; k < 3; ++k) {
    emb.text[k] = Matrix<float>(counts[k], text_dim);
    emb.structural[k] = Matrix<float>(counts[k], struct_dim);
  }
  if (text_dim > 0) {
    for (auto& t : emb.text) in.get_span<float>(t.values());
    emb.text_mlp = mlp_shape(text_dim, dim);
  }
  emb.struct_mlp = mlp_shape(struct_dim, dim);
  model.classifier.weight = Matrix<float>(num_types, dim);
  model.classifier.bias = Matrix<float>(1, num_types);

  const auto params = model.parameters();
  for (auto* p : params) in.get_span<float>(p->values());
  if (has_opt) {
    for (auto* moments : {&state.adam.first_moment, &state.adam.second_moment}) {
      for (const auto* p : params) {
        Matrix<float> m(p->rows(), p->cols());
        in.get_span<float>(m.values());
        moments->push_back(std::move(m));
      }
    }
  }
  in.expect_eof();
  return state;
}

void check_checkpoint_matches(const SkaModel<float>& model, const KnowledgeGraph& g) {
  const auto& emb = model.embeddings;
  if (emb.count(ItemKind::entity) != g.num_entities() || emb.count(ItemKind::relation) != g.num_relations() ||
      emb.count(ItemKind::type) != g.num_types()) {
    throw std::invalid_argument("checkpoint vocabulary (" + std::to_string(emb.count(ItemKind::entity)) + " entities, " +
                                std::to_string(emb.count(ItemKind::relation)) + " relations, " +
                                std::to_string(emb.count(ItemKind::type)) + " types) does not match the dataset (" +
                                std::to_string(g.num_entities()) + ", " + std::to_string(g.num_relations()) + ", " +
                                std::to_string(g.num_types()) + ")");
  }
}

}  // namespace sset
