#pragma once

// Batch loss with gradients, the Adam training loop, whole-graph inference
// and the gradient-check harness for the structural model.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sset/config.hpp"
#include "sset/formats.hpp"
#include "sset/kg_store.hpp"
#include "sset/losses.hpp"
#include "sset/model.hpp"
#include "sset/numerics.hpp"

namespace sset {

struct LossOptions {
  double lambda = 0.75;
  bool kd_enabled = true;
  NegativeTermSign negative_sign = NegativeTermSign::nll;
  float sem_prob_floor = 0.0f;

  static LossOptions from(const TrainConfig& cfg) {
    return {cfg.lambda, cfg.kd_enabled, cfg.negative_sign, cfg.sem_prob_floor};
  }
  double effective_lambda() const { return kd_enabled ? lambda : 1.0; }
};

// Per-entity f(q) rows. When `frozen` is false the loss fills `rows`;
// when true it reuses them instead of recomputing f.
template <class Real>
struct ReweightCache {
  std::vector<std::vector<Real>> rows;
  bool frozen = false;
};

struct BatchLoss {
  double sfna = 0.0;   // mean over the batch
  double kd = 0.0;     // mean over the batch, 0 when KD is off
  double total = 0.0;  // lambda * sfna + (1 - lambda) * kd
  std::size_t count = 0;
};

// L_SKA over a batch of view plans. Positives are every train type of the
// entity. When `grads` is non-null the gradient of `total` is accumulated
// into it (shaped like model.zeros_like()).
template <class Real>
BatchLoss ska_batch_loss(const SkaModel<Real>& model, const KnowledgeGraph& g, std::span<const ViewPlan> plans,
                         const ProbabilityTable* teacher, const LossOptions& opts, SkaModel<Real>* grads,
                         ReweightCache<Real>* cache = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_sfna = 0.0;
  double loss_kd = 0.0;
  double loss_total = 0.0;
  double lr = 0.0;
  std::size_t skipped = 0;  // sampled plans with no evidence
};

// Tab separated: epoch loss_sfna loss_kd loss_total lr
std::string format_epoch_record(const EpochRecord& r);

struct TrainState {
  SkaModel<float> model;
  num::AdamState<float> adam;
  std::size_t epochs_completed = 0;
};

// Entities with at least one train type, in id order.
std::vector<EntityId> training_entities(const KnowledgeGraph& g);

// Checks that a teacher table fits the graph and covers every training
// entity. Throws std::invalid_argument otherwise.
void check_teacher(const KnowledgeGraph& g, const ProbabilityTable& teacher);

// Runs epochs state.epochs_completed + 1 .. cfg.epochs. The generator is
// reseeded from (cfg.seed, epoch) every epoch, so a run resumed from a
// checkpoint follows the uninterrupted trajectory. Throws
// std::invalid_argument when KD is enabled without a teacher and
// std::runtime_error on a non-finite loss.
std::vector<EpochRecord> train(const KnowledgeGraph& g, const TrainConfig& cfg, const ProbabilityTable* teacher,
                               TrainState& state, const std::function<void(const EpochRecord&)>& on_epoch = {});

struct InferenceResult {
  ProbabilityTable probabilities;
  std::vector<EntityId> no_evidence;  // rows left at zero
};

// q_CSRA for every entity using all edges and known types. topk == 0 writes a
// dense table, otherwise a sparse table with the topk largest values per row.
InferenceResult infer_all(const KnowledgeGraph& g, const SkaModel<float>& model, std::size_t topk = 0,
                          std::size_t batch_size = 256);

// Learnable parameters flattened in canonical order and back.
template <class Real>
std::vector<double> flatten_parameters(const SkaModel<Real>& model);
template <class Real>
void unflatten_parameters(std::span<const double> values, SkaModel<Real>& model);

// Central-difference check of ska_batch_loss in double precision. The
// reweighting rows are frozen at the unperturbed point so the numeric and
// analytic gradients differentiate the same function.
num::GradCheckResult check_ska_gradient(const KnowledgeGraph& g, const SkaModel<double>& model,
                                        std::span<const ViewPlan> plans, const ProbabilityTable* teacher,
                                        const LossOptions& opts, double h = 1e-6, std::size_t max_coords = 0,
                                        std::uint64_t seed = 0);

}  // namespace sset
