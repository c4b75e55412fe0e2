#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <string>

#include "sset/eval.hpp"
#include "sset/formats.hpp"
#include "sset/kg_store.hpp"
#include "sset/losses.hpp"
#include "sset/rerank.hpp"

namespace py = pybind11;
using namespace sset;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

EmbeddingKind kind_from_string(const std::string& s) {
  if (s == "entity") return EmbeddingKind::entity;
  if (s == "relation") return EmbeddingKind::relation;
  if (s == "type") return EmbeddingKind::type;
  throw py::value_error("kind must be 'entity', 'relation' or 'type'");
}

const char* kind_name(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::entity: return "entity";
    case EmbeddingKind::relation: return "relation";
    case EmbeddingKind::type: return "type";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw py::value_error("split must be 'train', 'valid' or 'test'");
}

FloatArray require_matrix(const FloatArray& a, const char* what) {
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be a 2-d array");
  return a;
}

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

FloatArray dense_array(const ProbabilityTable& t) {
  FloatArray out({static_cast<py::ssize_t>(t.num_entities()), static_cast<py::ssize_t>(t.num_types())});
  auto* dst = out.mutable_data();
  for (std::uint32_t e = 0; e < t.num_entities(); ++e) {
    t.row_into(e, std::span<float>(dst + std::size_t{e} * t.num_types(), t.num_types()));
  }
  return out;
}

ProbabilityTable table_from_dense(const FloatArray& probs) {
  require_matrix(probs, "probabilities");
  ProbabilityTable t(static_cast<std::uint32_t>(probs.shape(0)), static_cast<std::uint32_t>(probs.shape(1)),
                     ProbabilityMode::dense);
  const std::size_t cols = t.num_types();
  for (std::uint32_t e = 0; e < t.num_entities(); ++e) {
    t.set_dense_row(e, std::span<const float>(probs.data() + std::size_t{e} * cols, cols));
  }
  return t;
}

py::dict report_dict(const RankingReport& r) {
  py::dict d;
  d["ranks"] = r.ranks;
  d["hit1"] = r.hit1;
  d["hit3"] = r.hit3;
  d["hit10"] = r.hit10;
  d["mr"] = r.mr;
  d["mrr"] = r.mrr;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sset, m) {
  m.doc() = "Entity typing toolkit: interchange formats, dataset loading, re-ranking and filtered evaluation.";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_ValueError);

  m.attr("EMBEDDING_FORMAT_VERSION") = kEmbeddingFormatVersion;
  m.attr("PROBABILITY_FORMAT_VERSION") = kProbabilityFormatVersion;

  m.def(
      "write_embedding_file",
      [](const std::filesystem::path& path, const std::string& kind, const FloatArray& values) {
        require_matrix(values, "values");
        EmbeddingTable t;
        t.kind = kind_from_string(kind);
        t.count = static_cast<std::uint32_t>(values.shape(0));
        t.dim = static_cast<std::uint32_t>(values.shape(1));
        t.values.assign(values.data(), values.data() + values.size());
        write_embedding_file(path, t);
      },
      py::arg("path"), py::arg("kind"), py::arg("values"));

  m.def(
      "read_embedding_file",
      [](const std::filesystem::path& path) {
        const auto t = read_embedding_file(path);
        FloatArray out({static_cast<py::ssize_t>(t.count), static_cast<py::ssize_t>(t.dim)});
        std::memcpy(out.mutable_data(), t.values.data(), t.values.size() * sizeof(float));
        return py::make_tuple(kind_name(t.kind), out);
      },
      py::arg("path"), "Returns (kind, array of shape (count, dim)).");

  m.def(
      "write_probability_file",
      [](const std::filesystem::path& path, const FloatArray& probs) {
        write_probability_file(path, table_from_dense(probs));
      },
      py::arg("path"), py::arg("probs"), "Dense |E| x |T| table.");

  m.def(
      "write_topk_probability_file",
      [](const std::filesystem::path& path, const FloatArray& probs, std::size_t k) {
        require_matrix(probs, "probs");
        ProbabilityTable t(static_cast<std::uint32_t>(probs.shape(0)), static_cast<std::uint32_t>(probs.shape(1)),
                           ProbabilityMode::sparse_topk);
        const std::size_t cols = t.num_types();
        for (std::uint32_t e = 0; e < t.num_entities(); ++e) {
          t.set_topk_row(e, std::span<const float>(probs.data() + std::size_t{e} * cols, cols), k);
        }
        write_probability_file(path, t);
      },
      py::arg("path"), py::arg("probs"), py::arg("k"), "Keeps the k largest entries of each row.");

  m.def(
      "read_probability_file",
      [](const std::filesystem::path& path, float floor) {
        auto t = read_probability_file(path);
        t.set_floor(floor);
        return py::make_tuple(t.mode() == ProbabilityMode::dense ? "dense" : "sparse_topk", dense_array(t));
      },
      py::arg("path"), py::arg("floor") = 0.0f, "Returns (mode, dense array); sparse gaps read as floor.");

  m.def(
      "check_probability_file",
      [](const std::filesystem::path& path, std::optional<std::uint32_t> num_entities,
         std::optional<std::uint32_t> num_types) {
        read_and_check_probability_file(path, num_entities, num_types);
      },
      py::arg("path"), py::arg("num_entities") = py::none(), py::arg("num_types") = py::none(),
      "Raises FormatError when the file is malformed, out of range or has the wrong shape.");

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def_property_readonly("num_entities", &KnowledgeGraph::num_entities)
      .def_property_readonly("num_relations", &KnowledgeGraph::num_relations)
      .def_property_readonly("num_types", &KnowledgeGraph::num_types)
      .def_property_readonly("num_triples", [](const KnowledgeGraph& g) { return g.triples().size(); })
      .def_property_readonly("entities", [](const KnowledgeGraph& g) { return g.entities().names(); })
      .def_property_readonly("relations", [](const KnowledgeGraph& g) { return g.relations().names(); })
      .def_property_readonly("types", [](const KnowledgeGraph& g) { return g.types().names(); })
      .def("entity_text",
           [](const KnowledgeGraph& g, std::uint32_t e) {
             const auto& t = g.entity_text(EntityId{e});
             return py::make_tuple(t.label, t.description);
           })
      .def("num_assertions",
           [](const KnowledgeGraph& g, const std::string& split) {
             return g.assertions(split_from_string(split)).size();
           })
      .def("assertions",
           [](const KnowledgeGraph& g, const std::string& split) {
             std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
             for (const auto& a : g.assertions(split_from_string(split))) out.emplace_back(a.entity.value, a.type.value);
             return out;
           })
      .def("triples",
           [](const KnowledgeGraph& g) {
             std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> out;
             for (const auto& t : g.triples()) out.emplace_back(t.subject.value, t.relation.value, t.object.value);
             return out;
           })
      .def("known_types", [](const KnowledgeGraph& g, std::uint32_t e) {
        std::vector<std::uint32_t> out;
        for (auto t : g.known_types(EntityId{e})) out.push_back(t.value);
        return out;
      });

  m.def(
      "open_graph", [](const std::filesystem::path& path) { return open_graph(path); }, py::arg("path"),
      "Loads a dataset directory or a prepared index file.");

  m.def("reweight", &reweight, py::arg("x"));

  m.def(
      "rerank",
      [](const FloatArray& p, const FloatArray& q, double alpha, std::size_t k) {
        const auto z = rerank(to_vector(p), to_vector(q), RerankConfig{alpha, k});
        return FloatArray(static_cast<py::ssize_t>(z.size()), z.data());
      },
      py::arg("p"), py::arg("q"), py::arg("alpha") = 0.5, py::arg("k") = 100);

  m.def(
      "filtered_rank",
      [](const FloatArray& scores, std::uint32_t target, const std::vector<std::uint32_t>& known) {
        std::vector<TypeId> ids;
        for (auto t : known) ids.push_back(TypeId{t});
        return filtered_rank(to_vector(scores), TypeId{target}, ids);
      },
      py::arg("scores"), py::arg("target"), py::arg("known") = std::vector<std::uint32_t>{});

  m.def(
      "summarize_ranks", [](std::vector<std::size_t> ranks) { return report_dict(summarize_ranks(std::move(ranks))); },
      py::arg("ranks"));

  m.def(
      "evaluate",
      [](const KnowledgeGraph& g, const FloatArray& scores, const std::string& split) {
        return report_dict(evaluate(g, table_from_dense(scores), split_from_string(split)));
      },
      py::arg("graph"), py::arg("scores"), py::arg("split") = "test");
}
