#include "sset/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sset {

namespace {

// Teacher row with missing sparse entries at the given floor.
std::vector<float> teacher_row(const ProbabilityTable& teacher, EntityId e, float floor) {
  if (teacher.mode() == ProbabilityMode::dense) return teacher.row(e.value);
  std::vector<float> out(teacher.num_types(), floor);
  for (const auto& [type, value] : teacher.sparse_row(e.value)) out[type] = value;
  return out;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(static_cast<std::uint64_t>(epoch) >> 32)};
  return std::mt19937_64(seq);
}

template <class Real>
std::vector<const Matrix<Real>*> const_params(const std::vector<Matrix<Real>*>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

template <class Real>
BatchLoss ska_batch_loss(const SkaModel<Real>& model, const KnowledgeGraph& g, std::span<const ViewPlan> plans,
                         const ProbabilityTable* teacher, const LossOptions& opts, SkaModel<Real>* grads,
                         ReweightCache<Real>* cache) {
  if (plans.empty()) throw std::invalid_argument("ska_batch_loss: empty batch");
  if (opts.kd_enabled && !teacher) throw std::invalid_argument("KD is enabled but no teacher probabilities were given");
  if (cache && cache->frozen && cache->rows.size() != plans.size()) {
    throw std::invalid_argument("ska_batch_loss: frozen reweighting does not match the batch");
  }
  if (cache && !cache->frozen) cache->rows.clear();

  const double lambda = opts.effective_lambda();
  const auto batch = static_cast<double>(plans.size());
  const Real sfna_coef = static_cast<Real>(lambda / batch);
  const Real kd_coef = static_cast<Real>((1.0 - lambda) / batch);
  const std::span<const Real> temps(model.temps);
  const std::size_t num_types = model.num_types();

  ViewBatch<Real> views(g, model.embeddings, model.hops, {plans.begin(), plans.end()});
  std::vector<Matrix<Real>> view_grads;
  if (grads) view_grads.resize(plans.size());

  BatchLoss out;
  out.count = plans.size();
  std::vector<Real> q(num_types);
  std::vector<Real> p(num_types);
  std::vector<Real> grad_logit(num_types);
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const EntityId e = plans[i].entity;
    HeadTrace<Real> trace;
    const auto logits = head_logits(views.views(i), model.classifier, temps, model.csra_mean, &trace);
    for (std::size_t j = 0; j < num_types; ++j) q[j] = num::sigmoid(logits[j]);

    std::optional<std::span<const Real>> frozen;
    if (cache && cache->frozen) frozen = std::span<const Real>(cache->rows[i]);
    const auto sfna = sfna_loss<Real>(q, g.known_types(e), opts.negative_sign, frozen);
    if (cache && !cache->frozen) cache->rows.push_back(sfna.f);
    out.sfna += static_cast<double>(sfna.value);

    std::optional<LossResult<Real>> kd;
    if (opts.kd_enabled) {
      const auto row = teacher_row(*teacher, e, opts.sem_prob_floor);
      std::copy(row.begin(), row.end(), p.begin());
      kd = kd_loss<Real>(p, q, opts.negative_sign, std::span<const Real>(sfna.f));
      out.kd += static_cast<double>(kd->value);
    }

    if (grads) {
      for (std::size_t j = 0; j < num_types; ++j) grad_logit[j] = sfna_coef * sfna.grad_logit[j];
      if (kd && kd_coef != Real(0)) {
        for (std::size_t j = 0; j < num_types; ++j) grad_logit[j] += kd_coef * kd->grad_logit[j];
      }
      head_backward(views.views(i), model.classifier, temps, model.csra_mean, trace,
                    std::span<const Real>(grad_logit), grads->classifier, view_grads[i]);
    }
  }
  out.sfna /= batch;
  out.kd /= batch;
  out.total = lambda * out.sfna + (1.0 - lambda) * out.kd;
  if (grads) views.backward(view_grads, grads->embeddings);
  return out;
}

std::string format_epoch_record(const EpochRecord& r) {
  std::ostringstream out;
  out.precision(8);
  out << r.epoch << '\t' << r.loss_sfna << '\t' << r.loss_kd << '\t' << r.loss_total << '\t' << r.lr;
  return out.str();
}

std::vector<EntityId> training_entities(const KnowledgeGraph& g) {
  std::vector<EntityId> out;
  for (std::uint32_t e = 0; e < g.num_entities(); ++e) {
    if (!g.known_types(EntityId{e}).empty()) out.push_back(EntityId{e});
  }
  return out;
}

void check_teacher(const KnowledgeGraph& g, const ProbabilityTable& teacher) {
  if (teacher.num_entities() != g.num_entities() || teacher.num_types() != g.num_types()) {
    throw std::invalid_argument("teacher probabilities are " + std::to_string(teacher.num_entities()) + " x " +
                                std::to_string(teacher.num_types()) + ", graph has " +
                                std::to_string(g.num_entities()) + " entities and " + std::to_string(g.num_types()) +
                                " types");
  }
  for (auto e : training_entities(g)) {
    if (!teacher.has_row(e.value)) {
      throw std::invalid_argument("teacher probabilities have no row for training entity " + g.entities().name(e.value));
    }
  }
  if (auto problem = teacher.check()) throw std::invalid_argument("teacher probabilities: " + *problem);
}

std::vector<EpochRecord> train(const KnowledgeGraph& g, const TrainConfig& cfg, const ProbabilityTable* teacher,
                               TrainState& state, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (cfg.kd_enabled) {
    if (!teacher) throw std::invalid_argument("KD is enabled but no SEM probability file was given");
    check_teacher(g, *teacher);
  }
  const auto entities = training_entities(g);
  if (entities.empty()) throw std::invalid_argument("no entity has a train type");
  const auto opts = LossOptions::from(cfg);

  auto& model = state.model;
  auto params = model.parameters();
  std::vector<EpochRecord> history;
  for (std::size_t epoch = state.epochs_completed; epoch < cfg.epochs; ++epoch) {
    auto rng = epoch_rng(cfg.seed, epoch);
    auto order = entities;
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = learning_rate_at(cfg, epoch);
    state.adam.learning_rate = static_cast<float>(lr);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<ViewPlan> plans;
      plans.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        try {
          plans.push_back(plan_views(g, order[i], cfg.sample_triples, cfg.sample_types, ViewMode::train, &rng));
        } catch (const NoEvidenceError&) {
          ++rec.skipped;
        }
      }
      if (plans.empty()) continue;

      auto fail = [&](const std::string& what) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch + 1 << ", batch starting at position " << start << " (" << what
            << ", lr=" << lr << "); entities:";
        for (const auto& p : plans) msg << ' ' << g.entities().name(p.entity.value);
        throw std::runtime_error(msg.str());
      };
      auto grads = model.zeros_like();
      BatchLoss loss;
      try {
        loss = ska_batch_loss<float>(model, g, plans, teacher, opts, &grads);
      } catch (const std::domain_error& e) {
        fail(e.what());
      }
      if (!std::isfinite(loss.total)) {
        fail("sfna=" + std::to_string(loss.sfna) + ", kd=" + std::to_string(loss.kd));
      }
      const auto n = static_cast<double>(loss.count);
      rec.loss_sfna += loss.sfna * n;
      rec.loss_kd += loss.kd * n;
      rec.loss_total += loss.total * n;
      seen += loss.count;

      const auto grad_params = const_params(grads.parameters());
      num::adam_step<float>(params, grad_params, state.adam);
    }
    if (seen > 0) {
      rec.loss_sfna /= static_cast<double>(seen);
      rec.loss_kd /= static_cast<double>(seen);
      rec.loss_total /= static_cast<double>(seen);
    }
    state.epochs_completed = epoch + 1;
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

InferenceResult infer_all(const KnowledgeGraph& g, const SkaModel<float>& model, std::size_t topk,
                          std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("infer_all: batch size must be positive");
  const auto num_entities = static_cast<std::uint32_t>(g.num_entities());
  const auto num_types = static_cast<std::uint32_t>(g.num_types());
  InferenceResult result{
      ProbabilityTable(num_entities, num_types, topk == 0 ? ProbabilityMode::dense : ProbabilityMode::sparse_topk), {}};
  const std::span<const float> temps(model.temps);
  std::vector<float> zeros(num_types, 0.0f);

  for (std::uint32_t start = 0; start < num_entities; start += static_cast<std::uint32_t>(batch_size)) {
    const std::uint32_t stop = std::min<std::uint32_t>(num_entities, start + static_cast<std::uint32_t>(batch_size));
    std::vector<ViewPlan> plans;
    for (std::uint32_t e = start; e < stop; ++e) {
      try {
        plans.push_back(plan_views(g, EntityId{e}, 0, 0, ViewMode::infer, nullptr));
      } catch (const NoEvidenceError& err) {
        result.no_evidence.push_back(err.entity());
        if (topk == 0) result.probabilities.set_dense_row(e, zeros);
        else result.probabilities.set_topk_row(e, zeros, topk);
      }
    }
    if (plans.empty()) continue;
    ViewBatch<float> views(g, model.embeddings, model.hops, plans);
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const auto q = infer_probabilities(views.views(i), model.classifier, temps, model.csra_mean);
      if (topk == 0) result.probabilities.set_dense_row(plans[i].entity.value, q);
      else result.probabilities.set_topk_row(plans[i].entity.value, q, topk);
    }
  }
  return result;
}

template <class Real>
std::vector<double> flatten_parameters(const SkaModel<Real>& model) {
  std::vector<double> out;
  for (const auto* m : model.parameters()) {
    for (Real v : m->values()) out.push_back(static_cast<double>(v));
  }
  return out;
}

template <class Real>
void unflatten_parameters(std::span<const double> values, SkaModel<Real>& model) {
  std::size_t pos = 0;
  for (auto* m : model.parameters()) {
    auto dst = m->values();
    if (pos + dst.size() > values.size()) throw std::invalid_argument("unflatten_parameters: too few values");
    for (auto& v : dst) v = static_cast<Real>(values[pos++]);
  }
  if (pos != values.size()) throw std::invalid_argument("unflatten_parameters: too many values");
}

num::GradCheckResult check_ska_gradient(const KnowledgeGraph& g, const SkaModel<double>& model,
                                        std::span<const ViewPlan> plans, const ProbabilityTable* teacher,
                                        const LossOptions& opts, double h, std::size_t max_coords,
                                        std::uint64_t seed) {
  ReweightCache<double> cache;
  ska_batch_loss<double>(model, g, plans, teacher, opts, nullptr, &cache);
  cache.frozen = true;

  SkaModel<double> work = model;
  const auto loss = [&](std::span<const double> x, std::span<double> grad) {
    unflatten_parameters(x, work);
    if (grad.empty()) return ska_batch_loss<double>(work, g, plans, teacher, opts, nullptr, &cache).total;
    auto grads = work.zeros_like();
    const double value = ska_batch_loss<double>(work, g, plans, teacher, opts, &grads, &cache).total;
    const auto flat = flatten_parameters(grads);
    std::copy(flat.begin(), flat.end(), grad.begin());
    return value;
  };
  const auto x0 = flatten_parameters(model);
  return num::finite_difference_check(loss, x0, h, max_coords, seed);
}

template BatchLoss ska_batch_loss<float>(const SkaModel<float>&, const KnowledgeGraph&, std::span<const ViewPlan>,
                                         const ProbabilityTable*, const LossOptions&, SkaModel<float>*,
                                         ReweightCache<float>*);
template BatchLoss ska_batch_loss<double>(const SkaModel<double>&, const KnowledgeGraph&, std::span<const ViewPlan>,
                                          const ProbabilityTable*, const LossOptions&, SkaModel<double>*,
                                          ReweightCache<double>*);
template std::vector<double> flatten_parameters<float>(const SkaModel<float>&);
template std::vector<double> flatten_parameters<double>(const SkaModel<double>&);
template void unflatten_parameters<float>(std::span<const double>, SkaModel<float>&);
template void unflatten_parameters<double>(std::span<const double>, SkaModel<double>&);

}  // namespace sset
