#include "sset/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sset {

namespace {

constexpr std::size_t kind_index(ItemKind k) { return static_cast<std::size_t>(k); }

template <class Real>
void axpy(Real a, std::span<const Real> x, std::span<Real> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

template <class To, class From>
Matrix<To> cast_matrix(const Matrix<From>& m) {
  Matrix<To> out(m.rows(), m.cols());
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<To>(src[i]);
  return out;
}

template <class To, class From>
num::MlpParams<To> cast_mlp(const num::MlpParams<From>& m) {
  num::MlpParams<To> out;
  for (const auto& w : m.weights) out.weights.push_back(cast_matrix<To>(w));
  for (const auto& b : m.biases) out.biases.push_back(cast_matrix<To>(b));
  return out;
}

template <class Real>
Matrix<Real> table_from_file(const EmbeddingTable& t) {
  Matrix<Real> out(t.count, t.dim);
  for (std::size_t i = 0; i < t.values.size(); ++i) out.values()[i] = static_cast<Real>(t.values[i]);
  return out;
}

}  // namespace

template <class Real>
std::vector<Matrix<Real>*> SkaModel<Real>::parameters() {
  std::vector<Matrix<Real>*> out;
  for (auto& t : embeddings.structural) out.push_back(&t);
  for (auto* mlp : {&embeddings.text_mlp, &embeddings.struct_mlp}) {
    for (std::size_t l = 0; l < mlp->num_layers(); ++l) {
      out.push_back(&mlp->weights[l]);
      out.push_back(&mlp->biases[l]);
    }
  }
  out.push_back(&classifier.weight);
  out.push_back(&classifier.bias);
  return out;
}

template <class Real>
std::vector<const Matrix<Real>*> SkaModel<Real>::parameters() const {
  auto mutable_params = const_cast<SkaModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template <class Real>
SkaModel<Real> SkaModel<Real>::zeros_like() const {
  SkaModel out;
  for (std::size_t k = 0; k < 3; ++k) {
    out.embeddings.structural[k] = Matrix<Real>(embeddings.structural[k].rows(), embeddings.structural[k].cols());
  }
  out.embeddings.text_mlp = num::MlpParams<Real>::zeros_like(embeddings.text_mlp);
  out.embeddings.struct_mlp = num::MlpParams<Real>::zeros_like(embeddings.struct_mlp);
  out.embeddings.norm_eps = embeddings.norm_eps;
  out.classifier.weight = Matrix<Real>(classifier.weight.rows(), classifier.weight.cols());
  out.classifier.bias = Matrix<Real>(classifier.bias.rows(), classifier.bias.cols());
  out.temps = temps;
  out.hops = hops;
  out.csra_mean = csra_mean;
  return out;
}

template <class Real>
template <class Other>
SkaModel<Other> SkaModel<Real>::cast() const {
  SkaModel<Other> out;
  for (std::size_t k = 0; k < 3; ++k) {
    out.embeddings.text[k] = cast_matrix<Other>(embeddings.text[k]);
    out.embeddings.structural[k] = cast_matrix<Other>(embeddings.structural[k]);
  }
  out.embeddings.text_mlp = cast_mlp<Other>(embeddings.text_mlp);
  out.embeddings.struct_mlp = cast_mlp<Other>(embeddings.struct_mlp);
  out.embeddings.norm_eps = static_cast<Other>(embeddings.norm_eps);
  out.classifier.weight = cast_matrix<Other>(classifier.weight);
  out.classifier.bias = cast_matrix<Other>(classifier.bias);
  for (Real t : temps) out.temps.push_back(static_cast<Other>(t));
  out.hops = hops;
  out.csra_mean = csra_mean;
  return out;
}

TextualEmbeddings read_textual_embeddings(const std::filesystem::path& dir) {
  TextualEmbeddings text;
  text.entity = read_embedding_file(dir / "entity.emb");
  text.relation = read_embedding_file(dir / "relation.emb");
  text.type = read_embedding_file(dir / "type.emb");
  return text;
}

void write_textual_embeddings(const std::filesystem::path& dir, const TextualEmbeddings& text) {
  std::filesystem::create_directories(dir);
  write_embedding_file(dir / "entity.emb", text.entity);
  write_embedding_file(dir / "relation.emb", text.relation);
  write_embedding_file(dir / "type.emb", text.type);
}

template <class Real>
SkaModel<Real> init_model(const KnowledgeGraph& g, const TrainConfig& cfg, const TextualEmbeddings* text,
                          std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  SkaModel<Real> model;
  auto& emb = model.embeddings;
  emb.norm_eps = static_cast<Real>(cfg.norm_eps);

  const std::size_t counts[3] = {g.num_entities(), g.num_relations(), g.num_types()};
  if (text) {
    const EmbeddingTable* tables[3] = {&text->entity, &text->relation, &text->type};
    const EmbeddingKind kinds[3] = {EmbeddingKind::entity, EmbeddingKind::relation, EmbeddingKind::type};
    const char* names[3] = {"entity", "relation", "type"};
    const std::size_t text_dim = tables[0]->dim;
    for (std::size_t k = 0; k < 3; ++k) {
      if (tables[k]->kind != kinds[k]) {
        throw std::invalid_argument(std::string(names[k]) + " embedding file has the wrong kind");
      }
      if (tables[k]->count != counts[k]) {
        throw std::invalid_argument(std::string(names[k]) + " embedding file has " +
                                    std::to_string(tables[k]->count) + " rows, vocabulary has " +
                                    std::to_string(counts[k]));
      }
      if (tables[k]->dim != text_dim) {
        throw std::invalid_argument("textual embedding files disagree on dimension");
      }
      if (cfg.text_dim != 0 && tables[k]->dim != cfg.text_dim) {
        throw std::invalid_argument(std::string(names[k]) + " embedding dimension " +
                                    std::to_string(tables[k]->dim) + " does not match config text_dim " +
                                    std::to_string(cfg.text_dim));
      }
      emb.text[k] = table_from_file<Real>(*tables[k]);
    }
    const std::size_t dims[3] = {text_dim, cfg.dim, cfg.dim};
    emb.text_mlp = num::MlpParams<Real>::init(dims, rng);
  } else {
    for (std::size_t k = 0; k < 3; ++k) emb.text[k] = Matrix<Real>(counts[k], 0);
  }

  std::normal_distribution<double> normal(0.0, 0.02);
  for (std::size_t k = 0; k < 3; ++k) {
    emb.structural[k] = Matrix<Real>(counts[k], cfg.struct_dim);
    for (auto& v : emb.structural[k].values()) v = static_cast<Real>(normal(rng));
  }
  const std::size_t sdims[3] = {cfg.struct_dim, cfg.dim, cfg.dim};
  emb.struct_mlp = num::MlpParams<Real>::init(sdims, rng);

  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  model.classifier.weight = Matrix<Real>(g.num_types(), cfg.dim);
  for (auto& v : model.classifier.weight.values()) v = static_cast<Real>(uniform(rng));
  model.classifier.bias = Matrix<Real>(1, g.num_types());

  for (double t : cfg.temps) model.temps.push_back(static_cast<Real>(t));
  model.hops = cfg.hops;
  model.csra_mean = cfg.csra_mean;
  return model;
}

template <class Real>
FusionPass<Real>::FusionPass(const EmbeddingSet<Real>& emb, ItemKind kind, std::vector<std::uint32_t> items)
    : emb_(&emb), kind_(kind), items_(std::move(items)) {
  const auto& table = emb.structural[kind_index(kind)];
  const std::size_t n = items_.size();
  for (auto i : items_) {
    if (i >= table.rows()) throw std::out_of_range("fusion: item index out of range");
  }
  const std::size_t d = emb.dim();
  output_ = Matrix<Real>(n, d);

  Matrix<Real> xs(n, table.cols());
  for (std::size_t r = 0; r < n; ++r) std::copy_n(table.row(items_[r]).begin(), table.cols(), xs.row(r).begin());
  struct_raw_ = num::mlp_forward(emb.struct_mlp, xs, &struct_trace_);
  std::vector<Real> tmp(d);
  for (std::size_t r = 0; r < n; ++r) {
    num::l2_normalize<Real>(struct_raw_.row(r), tmp, emb.norm_eps);
    axpy<Real>(Real(1), tmp, output_.row(r));
  }

  if (emb.has_text()) {
    const auto& text = emb.text[kind_index(kind)];
    Matrix<Real> xt(n, text.cols());
    for (std::size_t r = 0; r < n; ++r) std::copy_n(text.row(items_[r]).begin(), text.cols(), xt.row(r).begin());
    text_raw_ = num::mlp_forward(emb.text_mlp, xt, &text_trace_);
    if (text_raw_.cols() != d) throw std::invalid_argument("fusion: text MLP output dimension mismatch");
    for (std::size_t r = 0; r < n; ++r) {
      num::l2_normalize<Real>(text_raw_.row(r), tmp, emb.norm_eps);
      axpy<Real>(Real(1), tmp, output_.row(r));
    }
  }
}

template <class Real>
void FusionPass<Real>::backward(const Matrix<Real>& grad_out, EmbeddingSet<Real>& grads) const {
  const std::size_t n = items_.size();
  if (n == 0) return;
  const Real eps = emb_->norm_eps;

  Matrix<Real> g_struct(n, struct_raw_.cols());
  for (std::size_t r = 0; r < n; ++r) {
    num::l2_normalize_backward<Real>(struct_raw_.row(r), grad_out.row(r), eps, g_struct.row(r));
  }
  Matrix<Real> g_input;
  num::mlp_backward(emb_->struct_mlp, struct_trace_, g_struct, grads.struct_mlp, &g_input);
  auto& table_grad = grads.structural[kind_index(kind_)];
  for (std::size_t r = 0; r < n; ++r) axpy<Real>(Real(1), g_input.row(r), table_grad.row(items_[r]));

  if (emb_->has_text()) {
    Matrix<Real> g_text(n, text_raw_.cols());
    for (std::size_t r = 0; r < n; ++r) {
      num::l2_normalize_backward<Real>(text_raw_.row(r), grad_out.row(r), eps, g_text.row(r));
    }
    num::mlp_backward(emb_->text_mlp, text_trace_, g_text, grads.text_mlp, static_cast<Matrix<Real>*>(nullptr));
  }
}

template <class Real>
std::vector<Real> fuse_embedding(ItemKind kind, std::uint32_t index, const EmbeddingSet<Real>& emb) {
  FusionPass<Real> pass(emb, kind, {index});
  auto row = pass.output().row(0);
  return {row.begin(), row.end()};
}

ViewPlan plan_views(const KnowledgeGraph& g, EntityId e, std::size_t max_edges, std::size_t max_types,
                    ViewMode mode, std::mt19937_64* rng) {
  const auto edges = g.neighbors(e);
  const auto types = g.known_types(e);
  ViewPlan plan;
  plan.entity = e;
  if (mode == ViewMode::infer) {
    plan.edges.assign(edges.begin(), edges.end());
    plan.types.assign(types.begin(), types.end());
  } else {
    if (!rng) throw std::invalid_argument("plan_views: train mode needs a random generator");
    std::sample(edges.begin(), edges.end(), std::back_inserter(plan.edges), max_edges, *rng);
    std::sample(types.begin(), types.end(), std::back_inserter(plan.types), max_types, *rng);
  }
  if (plan.edges.empty() && plan.types.empty()) throw NoEvidenceError(e);
  return plan;
}

template <class Real>
AggregationPass<Real>::AggregationPass(const KnowledgeGraph& g, const EmbeddingSet<Real>& emb, int max_level,
                                       std::span<const Request> entities, std::span<const RelationId> relations,
                                       std::span<const TypeId> types)
    : g_(&g), dim_(emb.dim()) {
  if (max_level < 0) throw std::invalid_argument("AggregationPass: negative level");
  levels_.resize(static_cast<std::size_t>(max_level) + 1);
  for (auto& level : levels_) level.slot.assign(g.num_entities(), -1);
  relation_slot_.assign(g.num_relations(), -1);
  type_slot_.assign(g.num_types(), -1);

  std::vector<std::uint32_t> relation_items;
  std::vector<std::uint32_t> type_items;
  auto add_entity = [&](int level, EntityId e) {
    if (e.index() >= g.num_entities()) throw std::out_of_range("AggregationPass: entity out of range");
    auto& l = levels_[static_cast<std::size_t>(level)];
    if (l.slot[e.index()] < 0) {
      l.slot[e.index()] = static_cast<std::int32_t>(l.entities.size());
      l.entities.push_back(e);
    }
  };
  auto add_relation = [&](RelationId r) {
    if (r.index() >= g.num_relations()) throw std::out_of_range("AggregationPass: relation out of range");
    if (relation_slot_[r.index()] < 0) {
      relation_slot_[r.index()] = static_cast<std::int32_t>(relation_items.size());
      relation_items.push_back(r.value);
    }
  };
  auto add_type = [&](TypeId t) {
    if (t.index() >= g.num_types()) throw std::out_of_range("AggregationPass: type out of range");
    if (type_slot_[t.index()] < 0) {
      type_slot_[t.index()] = static_cast<std::int32_t>(type_items.size());
      type_items.push_back(t.value);
    }
  };

  for (const auto& req : entities) {
    if (req.level < 0 || req.level > max_level) throw std::invalid_argument("AggregationPass: bad request level");
    add_entity(req.level, req.entity);
  }
  for (auto r : relations) add_relation(r);
  for (auto t : types) add_type(t);

  // Dependency closure, top level first.
  for (int level = max_level; level >= 1; --level) {
    const auto& members = levels_[static_cast<std::size_t>(level)].entities;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const EntityId e = members[i];
      const auto edges = g.neighbors(e);
      const auto known = g.known_types(e);
      if (edges.empty() && known.empty()) {
        add_entity(0, e);
        continue;
      }
      for (const auto& edge : edges) {
        add_entity(level - 1, edge.neighbor);
        add_relation(edge.relation);
      }
      for (auto t : known) add_type(t);
    }
  }

  auto& base = levels_[0];
  std::vector<std::uint32_t> entity_items;
  entity_items.reserve(base.entities.size());
  for (auto e : base.entities) entity_items.push_back(e.value);
  entity_fusion_.emplace(emb, ItemKind::entity, std::move(entity_items));
  relation_fusion_.emplace(emb, ItemKind::relation, std::move(relation_items));
  type_fusion_.emplace(emb, ItemKind::type, std::move(type_items));
  base.values = entity_fusion_->output();
  base.grads = Matrix<Real>(base.values.rows(), dim_);
  relation_grads_ = Matrix<Real>(relation_fusion_->output().rows(), dim_);
  type_grads_ = Matrix<Real>(type_fusion_->output().rows(), dim_);

  for (int level = 1; level <= max_level; ++level) {
    auto& cur = levels_[static_cast<std::size_t>(level)];
    const auto& prev = levels_[static_cast<std::size_t>(level) - 1];
    cur.values = Matrix<Real>(cur.entities.size(), dim_);
    cur.grads = Matrix<Real>(cur.entities.size(), dim_);
    for (std::size_t i = 0; i < cur.entities.size(); ++i) {
      const EntityId e = cur.entities[i];
      const auto edges = g.neighbors(e);
      const auto known = g.known_types(e);
      auto out = cur.values.row(i);
      if (edges.empty() && known.empty()) {
        auto own = base.values.row(row_of(base, e));
        std::copy(own.begin(), own.end(), out.begin());
        continue;
      }
      for (const auto& edge : edges) {
        axpy<Real>(Real(1), prev.values.row(row_of(prev, edge.neighbor)), out);
        axpy<Real>(-Real(relation_sign(edge.direction)), relation(edge.relation), out);
      }
      for (auto t : known) axpy<Real>(Real(1), type(t), out);
      const Real inv = Real(1) / Real(edges.size() + known.size());
      for (auto& v : out) v *= inv;
    }
  }
}

template <class Real>
std::size_t AggregationPass<Real>::row_of(const Level& level, EntityId e) const {
  const auto s = e.index() < level.slot.size() ? level.slot[e.index()] : -1;
  if (s < 0) throw std::logic_error("AggregationPass: entity " + std::to_string(e.value) + " not computed");
  return static_cast<std::size_t>(s);
}

template <class Real>
std::size_t AggregationPass<Real>::relation_row(RelationId r) const {
  const auto s = r.index() < relation_slot_.size() ? relation_slot_[r.index()] : -1;
  if (s < 0) throw std::logic_error("AggregationPass: relation not computed");
  return static_cast<std::size_t>(s);
}

template <class Real>
std::size_t AggregationPass<Real>::type_row(TypeId t) const {
  const auto s = t.index() < type_slot_.size() ? type_slot_[t.index()] : -1;
  if (s < 0) throw std::logic_error("AggregationPass: type not computed");
  return static_cast<std::size_t>(s);
}

template <class Real>
std::span<const Real> AggregationPass<Real>::entity(int level, EntityId e) const {
  const auto& l = levels_.at(static_cast<std::size_t>(level));
  return l.values.row(row_of(l, e));
}

template <class Real>
std::span<const Real> AggregationPass<Real>::relation(RelationId r) const {
  return relation_fusion_->output().row(relation_row(r));
}

template <class Real>
std::span<const Real> AggregationPass<Real>::type(TypeId t) const {
  return type_fusion_->output().row(type_row(t));
}

template <class Real>
void AggregationPass<Real>::add_entity_grad(int level, EntityId e, std::span<const Real> g, Real scale) {
  auto& l = levels_.at(static_cast<std::size_t>(level));
  axpy<Real>(scale, g, l.grads.row(row_of(l, e)));
}

template <class Real>
void AggregationPass<Real>::add_relation_grad(RelationId r, std::span<const Real> g, Real scale) {
  axpy<Real>(scale, g, relation_grads_.row(relation_row(r)));
}

template <class Real>
void AggregationPass<Real>::add_type_grad(TypeId t, std::span<const Real> g, Real scale) {
  axpy<Real>(scale, g, type_grads_.row(type_row(t)));
}

template <class Real>
void AggregationPass<Real>::backward(EmbeddingSet<Real>& grads) {
  auto& base = levels_[0];
  for (std::size_t level = levels_.size() - 1; level >= 1; --level) {
    auto& cur = levels_[level];
    auto& prev = levels_[level - 1];
    for (std::size_t i = 0; i < cur.entities.size(); ++i) {
      const auto grad = cur.grads.row(i);
      if (std::all_of(grad.begin(), grad.end(), [](Real v) { return v == Real(0); })) continue;
      const EntityId e = cur.entities[i];
      const auto edges = g_->neighbors(e);
      const auto known = g_->known_types(e);
      if (edges.empty() && known.empty()) {
        axpy<Real>(Real(1), grad, base.grads.row(row_of(base, e)));
        continue;
      }
      const Real inv = Real(1) / Real(edges.size() + known.size());
      for (const auto& edge : edges) {
        axpy<Real>(inv, grad, prev.grads.row(row_of(prev, edge.neighbor)));
        axpy<Real>(-inv * Real(relation_sign(edge.direction)), grad, relation_grads_.row(relation_row(edge.relation)));
      }
      for (auto t : known) axpy<Real>(inv, grad, type_grads_.row(type_row(t)));
    }
  }
  entity_fusion_->backward(base.grads, grads);
  relation_fusion_->backward(relation_grads_, grads);
  type_fusion_->backward(type_grads_, grads);
}

namespace {

template <class Real>
AggregationPass<Real> make_view_pass(const KnowledgeGraph& g, const EmbeddingSet<Real>& emb, int hops,
                                     const std::vector<ViewPlan>& plans) {
  if (hops < 1) throw std::invalid_argument("hops must be >= 1");
  std::vector<typename AggregationPass<Real>::Request> requests;
  std::vector<RelationId> relations;
  std::vector<TypeId> types;
  for (const auto& plan : plans) {
    for (const auto& edge : plan.edges) {
      for (int level = 0; level < hops; ++level) requests.push_back({level, edge.neighbor});
      relations.push_back(edge.relation);
    }
    types.insert(types.end(), plan.types.begin(), plan.types.end());
  }
  return AggregationPass<Real>(g, emb, hops - 1, requests, relations, types);
}

}  // namespace

template <class Real>
ViewBatch<Real>::ViewBatch(const KnowledgeGraph& g, const EmbeddingSet<Real>& emb, int hops, std::vector<ViewPlan> plans)
    : hops_(hops), plans_(std::move(plans)), pass_(make_view_pass(g, emb, hops, plans_)) {
  const std::size_t d = emb.dim();
  views_.reserve(plans_.size());
  for (const auto& plan : plans_) {
    Matrix<Real> rows(plan.num_rows(hops_), d);
    std::size_t r = 0;
    for (int k = 1; k <= hops_; ++k) {
      for (const auto& edge : plan.edges) {
        auto out = rows.row(r++);
        axpy<Real>(Real(1), pass_.entity(k - 1, edge.neighbor), out);
        axpy<Real>(-Real(relation_sign(edge.direction)), pass_.relation(edge.relation), out);
      }
    }
    for (auto t : plan.types) axpy<Real>(Real(1), pass_.type(t), rows.row(r++));
    views_.push_back(std::move(rows));
  }
}

template <class Real>
void ViewBatch<Real>::backward(std::span<const Matrix<Real>> view_grads, EmbeddingSet<Real>& grads) {
  if (view_grads.size() != plans_.size()) throw std::invalid_argument("ViewBatch::backward: gradient count mismatch");
  for (std::size_t i = 0; i < plans_.size(); ++i) {
    const auto& plan = plans_[i];
    const auto& g = view_grads[i];
    std::size_t r = 0;
    for (int k = 1; k <= hops_; ++k) {
      for (const auto& edge : plan.edges) {
        const auto row = g.row(r++);
        pass_.add_entity_grad(k - 1, edge.neighbor, row);
        pass_.add_relation_grad(edge.relation, row, -Real(relation_sign(edge.direction)));
      }
    }
    for (auto t : plan.types) pass_.add_type_grad(t, g.row(r++));
  }
  pass_.backward(grads);
}

template <class Real>
AggregatedViews<Real> build_views(EntityId e, const KnowledgeGraph& g, const EmbeddingSet<Real>& emb,
                                  const TrainConfig& cfg, ViewMode mode, std::mt19937_64* rng) {
  auto plan = plan_views(g, e, cfg.sample_triples, cfg.sample_types, mode, rng);
  ViewBatch<Real> batch(g, emb, cfg.hops, {plan});
  return {std::move(plan), cfg.hops, batch.views(0)};
}

template <class Real>
std::vector<Real> one_hop_view(const NeighborEdge& edge, const KnowledgeGraph& g, const EmbeddingSet<Real>& emb) {
  return multi_hop_view(edge, 1, g, emb);
}

template <class Real>
std::vector<Real> multi_hop_view(const NeighborEdge& edge, int k, const KnowledgeGraph& g,
                                 const EmbeddingSet<Real>& emb) {
  if (k < 1) throw std::invalid_argument("multi_hop_view: k must be >= 1");
  const typename AggregationPass<Real>::Request req{k - 1, edge.neighbor};
  AggregationPass<Real> pass(g, emb, k - 1, std::span(&req, 1), std::span(&edge.relation, 1), {});
  const auto base = pass.entity(k - 1, edge.neighbor);
  const auto rel = pass.relation(edge.relation);
  std::vector<Real> out(base.begin(), base.end());
  axpy<Real>(-Real(relation_sign(edge.direction)), rel, out);
  return out;
}

template <class Real>
std::vector<Real> agg_entity(EntityId e, int k, const KnowledgeGraph& g, const EmbeddingSet<Real>& emb) {
  if (k < 1) throw std::invalid_argument("agg_entity: k must be >= 1");
  const typename AggregationPass<Real>::Request req{k, e};
  AggregationPass<Real> pass(g, emb, k, std::span(&req, 1), {}, {});
  const auto v = pass.entity(k, e);
  return {v.begin(), v.end()};
}

template <class Real>
std::vector<Real> head_logits(const Matrix<Real>& views, const ClassifierParams<Real>& cls,
                              std::span<const Real> temps, num::CsraMeanMode mode, HeadTrace<Real>* trace) {
  if (views.rows() == 0) throw std::invalid_argument("head_logits: no views");
  HeadTrace<Real> local;
  HeadTrace<Real>& t = trace ? *trace : local;
  t.activated = num::elu(views);
  num::matmul_nt(t.activated, cls.weight, t.scores);
  const auto bias = cls.bias.row(0);
  for (std::size_t r = 0; r < t.scores.rows(); ++r) axpy<Real>(Real(1), bias, t.scores.row(r));
  return num::csra_pool(t.scores, temps, mode);
}

template <class Real>
void head_backward(const Matrix<Real>& views, const ClassifierParams<Real>& cls, std::span<const Real> temps,
                   num::CsraMeanMode mode, const HeadTrace<Real>& trace, std::span<const Real> grad_logit,
                   ClassifierParams<Real>& grads, Matrix<Real>& grad_views) {
  Matrix<Real> grad_scores(trace.scores.rows(), trace.scores.cols());
  num::csra_pool_backward(trace.scores, temps, grad_logit, grad_scores, mode);
  num::add_matmul_tn(grad_scores, trace.activated, grads.weight);
  auto gb = grads.bias.row(0);
  for (std::size_t r = 0; r < grad_scores.rows(); ++r) axpy<Real>(Real(1), grad_scores.row(r), gb);
  num::matmul_nn(grad_scores, cls.weight, grad_views);
  auto gv = grad_views.values();
  auto v = views.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= num::elu_grad(v[i]);
}

template <class Real>
std::vector<Real> infer_probabilities(const Matrix<Real>& views, const ClassifierParams<Real>& cls,
                                      std::span<const Real> temps, num::CsraMeanMode mode) {
  auto logits = head_logits(views, cls, temps, mode);
  for (auto& v : logits) v = num::sigmoid(v);
  return logits;
}

#define SSET_INSTANTIATE_MODEL(Real)                                                                        \
  template struct SkaModel<Real>;                                                                           \
  template SkaModel<Real> init_model<Real>(const KnowledgeGraph&, const TrainConfig&, const TextualEmbeddings*, \
                                           std::uint64_t);                                                  \
  template std::vector<Real> fuse_embedding<Real>(ItemKind, std::uint32_t, const EmbeddingSet<Real>&);      \
  template class FusionPass<Real>;                                                                          \
  template class AggregationPass<Real>;                                                                     \
  template class ViewBatch<Real>;                                                                           \
  template AggregatedViews<Real> build_views<Real>(EntityId, const KnowledgeGraph&, const EmbeddingSet<Real>&, \
                                                   const TrainConfig&, ViewMode, std::mt19937_64*);         \
  template std::vector<Real> one_hop_view<Real>(const NeighborEdge&, const KnowledgeGraph&,                 \
                                                const EmbeddingSet<Real>&);                                 \
  template std::vector<Real> multi_hop_view<Real>(const NeighborEdge&, int, const KnowledgeGraph&,          \
                                                  const EmbeddingSet<Real>&);                               \
  template std::vector<Real> agg_entity<Real>(EntityId, int, const KnowledgeGraph&, const EmbeddingSet<Real>&); \
  template std::vector<Real> head_logits<Real>(const Matrix<Real>&, const ClassifierParams<Real>&,          \
                                               std::span<const Real>, num::CsraMeanMode, HeadTrace<Real>*); \
  template void head_backward<Real>(const Matrix<Real>&, const ClassifierParams<Real>&, std::span<const Real>, \
                                    num::CsraMeanMode, const HeadTrace<Real>&, std::span<const Real>,       \
                                    ClassifierParams<Real>&, Matrix<Real>&);                                \
  template std::vector<Real> infer_probabilities<Real>(const Matrix<Real>&, const ClassifierParams<Real>&,  \
                                                       std::span<const Real>, num::CsraMeanMode);

SSET_INSTANTIATE_MODEL(float)
SSET_INSTANTIATE_MODEL(double)

template SkaModel<double> SkaModel<float>::cast<double>() const;
template SkaModel<float> SkaModel<double>::cast<float>() const;
template SkaModel<float> SkaModel<float>::cast<float>() const;
template SkaModel<double> SkaModel<double>::cast<double>() const;

#undef SSET_INSTANTIATE_MODEL

}  // namespace sset
