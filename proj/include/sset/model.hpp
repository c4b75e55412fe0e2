#pragma once

// Structural knowledge aggregation: embedding fusion, k-hop TransE-style
// aggregation over the neighbor index, and the classifier + CSRA head.
//
// Forward and backward passes are written by hand. All templates are
// instantiated for float (training, inference) and double (gradient checks).

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "sset/config.hpp"
#include "sset/formats.hpp"
#include "sset/kg_store.hpp"
#include "sset/numerics.hpp"

namespace sset {

enum class ItemKind : std::size_t { entity = 0, relation = 1, type = 2 };

template <class Real>
using Matrix = num::Matrix<Real>;

// Textual tables are inputs and never updated; structural tables and both
// fusion MLPs are learnable. Text tables have zero columns in
// structural-only mode.
template <class Real>
struct EmbeddingSet {
  std::array<Matrix<Real>, 3> text;
  std::array<Matrix<Real>, 3> structural;
  num::MlpParams<Real> text_mlp;
  num::MlpParams<Real> struct_mlp;
  Real norm_eps = Real(1e-12);

  bool has_text() const { return text[0].cols() > 0; }
  std::size_t dim() const { return struct_mlp.out_dim(); }
  std::size_t count(ItemKind kind) const { return structural[static_cast<std::size_t>(kind)].rows(); }
};

template <class Real>
struct ClassifierParams {
  Matrix<Real> weight;  // |T| x d
  Matrix<Real> bias;    // 1 x |T|
};

template <class Real>
struct SkaModel {
  EmbeddingSet<Real> embeddings;
  ClassifierParams<Real> classifier;
  std::vector<Real> temps;
  int hops = 2;
  num::CsraMeanMode csra_mean = num::CsraMeanMode::per_head;

  std::size_t num_types() const { return classifier.weight.rows(); }

  // Learnable tensors in canonical order: entity/relation/type structural
  // tables, text MLP (weights, biases per layer; absent without text),
  // structural MLP, classifier weight, classifier bias.
  std::vector<Matrix<Real>*> parameters();
  std::vector<const Matrix<Real>*> parameters() const;

  // Same shapes, all learnable tensors zero; text tables left empty.
  SkaModel zeros_like() const;

  template <class Other>
  SkaModel<Other> cast() const;
};

// Textual embeddings for the three vocabularies, as read from embedding files.
struct TextualEmbeddings {
  EmbeddingTable entity;
  EmbeddingTable relation;
  EmbeddingTable type;
};

// dir/entity.emb, dir/relation.emb, dir/type.emb.
TextualEmbeddings read_textual_embeddings(const std::filesystem::path& dir);
void write_textual_embeddings(const std::filesystem::path& dir, const TextualEmbeddings& text);

// Fresh parameters: structural rows ~ N(0, 0.02^2), fusion MLPs with one
// hidden layer of width d and ELU, uniform(+-1/sqrt(fan_in)) weights,
// classifier weight uniform(+-1/sqrt(d)), zero biases. Throws
// std::invalid_argument when text tables disagree with the graph or config.
template <class Real>
SkaModel<Real> init_model(const KnowledgeGraph& g, const TrainConfig& cfg,
                          const TextualEmbeddings* text, std::uint64_t seed);

// Unified embedding of one item: MLP_t(h_t)/|.| + MLP_s(h_s)/|.|.
template <class Real>
std::vector<Real> fuse_embedding(ItemKind kind, std::uint32_t index, const EmbeddingSet<Real>& emb);

// Batched fusion over a set of distinct items of one kind, keeping what the
// backward pass needs.
template <class Real>
class FusionPass {
 public:
  FusionPass(const EmbeddingSet<Real>& emb, ItemKind kind, std::vector<std::uint32_t> items);

  const std::vector<std::uint32_t>& items() const { return items_; }
  const Matrix<Real>& output() const { return output_; }
  // grad_out rows follow items(); accumulates into grads' structural table
  // and MLP parameters.
  void backward(const Matrix<Real>& grad_out, EmbeddingSet<Real>& grads) const;

 private:
  const EmbeddingSet<Real>* emb_;
  ItemKind kind_;
  std::vector<std::uint32_t> items_;
  Matrix<Real> output_;
  Matrix<Real> text_raw_;
  Matrix<Real> struct_raw_;
  num::MlpTrace<Real> text_trace_;
  num::MlpTrace<Real> struct_trace_;
};

// What one target entity contributes to H^agg: the selected edges (each
// expanded to K hop views) and the selected known types.
struct ViewPlan {
  EntityId entity;
  std::vector<NeighborEdge> edges;
  std::vector<TypeId> types;

  std::size_t num_rows(int hops) const { return static_cast<std::size_t>(hops) * edges.size() + types.size(); }
};

enum class ViewMode { train, infer };

class NoEvidenceError : public std::runtime_error {
 public:
  explicit NoEvidenceError(EntityId e)
      : std::runtime_error("entity " + std::to_string(e.value) + " has no neighbors and no known types"),
        entity_(e) {}
  EntityId entity() const { return entity_; }

 private:
  EntityId entity_;
};

// Train mode samples up to m edges and n known types uniformly without
// replacement using `rng`; infer mode takes everything and ignores rng.
// Throws NoEvidenceError when the plan would be empty.
ViewPlan plan_views(const KnowledgeGraph& g, EntityId e, std::size_t max_edges, std::size_t max_types,
                    ViewMode mode, std::mt19937_64* rng);

// Computes f_agg^(l) for the entities a batch needs, for l = 0..max_level,
// where level 0 is the fused embedding. Requests are expanded to the full
// dependency closure over the neighbor index. Gradients are accumulated
// through add_*_grad and pushed down to the parameters by backward().
template <class Real>
class AggregationPass {
 public:
  struct Request {
    int level;
    EntityId entity;
  };

  AggregationPass(const KnowledgeGraph& g, const EmbeddingSet<Real>& emb, int max_level,
                  std::span<const Request> entities, std::span<const RelationId> relations,
                  std::span<const TypeId> types);

  std::span<const Real> entity(int level, EntityId e) const;
  std::span<const Real> relation(RelationId r) const;
  std::span<const Real> type(TypeId t) const;

  void add_entity_grad(int level, EntityId e, std::span<const Real> g, Real scale = Real(1));
  void add_relation_grad(RelationId r, std::span<const Real> g, Real scale = Real(1));
  void add_type_grad(TypeId t, std::span<const Real> g, Real scale = Real(1));

  // Propagates the accumulated gradients top-down through the levels and the
  // fusion MLPs into `grads`.
  void backward(EmbeddingSet<Real>& grads);

 private:
  struct Level {
    std::vector<EntityId> entities;
    std::vector<std::int32_t> slot;  // entity index -> row, -1 when absent
    Matrix<Real> values;
    Matrix<Real> grads;
  };

  std::size_t row_of(const Level& level, EntityId e) const;
  std::size_t relation_row(RelationId r) const;
  std::size_t type_row(TypeId t) const;

  const KnowledgeGraph* g_;
  std::size_t dim_;
  std::vector<Level> levels_;
  std::vector<std::int32_t> relation_slot_;
  std::vector<std::int32_t> type_slot_;
  std::optional<FusionPass<Real>> entity_fusion_;
  std::optional<FusionPass<Real>> relation_fusion_;
  std::optional<FusionPass<Real>> type_fusion_;
  Matrix<Real> relation_grads_;
  Matrix<Real> type_grads_;
};

// H^agg for one target plus the plan that produced it. Rows are ordered hop
// major: all k=1 edge rows, then k=2, ..., k=K, then known-type rows.
template <class Real>
struct AggregatedViews {
  ViewPlan plan;
  int hops = 1;
  Matrix<Real> rows;
};

// Views for a batch of plans sharing one aggregation pass.
template <class Real>
class ViewBatch {
 public:
  ViewBatch(const KnowledgeGraph& g, const EmbeddingSet<Real>& emb, int hops, std::vector<ViewPlan> plans);

  std::size_t size() const { return plans_.size(); }
  const ViewPlan& plan(std::size_t i) const { return plans_[i]; }
  const Matrix<Real>& views(std::size_t i) const { return views_[i]; }

  // view_grads[i] matches views(i); accumulates into grads.
  void backward(std::span<const Matrix<Real>> view_grads, EmbeddingSet<Real>& grads);

 private:
  int hops_;
  std::vector<ViewPlan> plans_;
  std::vector<Matrix<Real>> views_;
  AggregationPass<Real> pass_;
};

template <class Real>
AggregatedViews<Real> build_views(EntityId e, const KnowledgeGraph& g, const EmbeddingSet<Real>& emb,
                                  const TrainConfig& cfg, ViewMode mode, std::mt19937_64* rng = nullptr);

// h^(1) = e~ - r (forward) or e~ + r (inverse).
template <class Real>
std::vector<Real> one_hop_view(const NeighborEdge& edge, const KnowledgeGraph& g,
                               const EmbeddingSet<Real>& emb);
// h^(k) = f_agg^(k-1)(e~) -/+ r, k >= 2.
template <class Real>
std::vector<Real> multi_hop_view(const NeighborEdge& edge, int k, const KnowledgeGraph& g,
                                 const EmbeddingSet<Real>& emb);
// f_agg^(k)(e), k >= 1. Falls back to the fused embedding of e when e has
// neither neighbors nor known types.
template <class Real>
std::vector<Real> agg_entity(EntityId e, int k, const KnowledgeGraph& g, const EmbeddingSet<Real>& emb);

// Classifier + CSRA over H^agg rows: logit = csra_pool(W elu(H)^T + b).
template <class Real>
struct HeadTrace {
  Matrix<Real> activated;  // elu(H)
  Matrix<Real> scores;     // (rows) x |T|
};

template <class Real>
std::vector<Real> head_logits(const Matrix<Real>& views, const ClassifierParams<Real>& cls,
                              std::span<const Real> temps, num::CsraMeanMode mode,
                              HeadTrace<Real>* trace = nullptr);

// Accumulates classifier gradients and writes d loss / d views.
template <class Real>
void head_backward(const Matrix<Real>& views, const ClassifierParams<Real>& cls,
                   std::span<const Real> temps, num::CsraMeanMode mode, const HeadTrace<Real>& trace,
                   std::span<const Real> grad_logit, ClassifierParams<Real>& grads,
                   Matrix<Real>& grad_views);

// sigmoid(head_logits(...)).
template <class Real>
std::vector<Real> infer_probabilities(const Matrix<Real>& views, const ClassifierParams<Real>& cls,
                                      std::span<const Real> temps,
                                      num::CsraMeanMode mode = num::CsraMeanMode::per_head);

struct ProbabilityRow {
  EntityId entity;
  std::vector<float> values;
};

}  // namespace sset
