#pragma once

// SFNA and knowledge-distillation losses over one entity's probability row.
//
// Both are instances of a weighted binary cross-entropy
//   L = -sum_j a_j log q_j - s * sum_j b_j log(1 - q_j)
// with s = +1 (nll) or -1 (as_printed). The reweighting f(q) inside b_j is a
// constant weight: no gradient flows through it.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sset/config.hpp"
#include "sset/kg_store.hpp"

namespace sset {

inline constexpr double kProbClamp = 1e-7;

// f(x) = 3x - 2x^2 for x <= 0.5, x - 2x^2 + 1 otherwise. Throws
// std::domain_error outside [0, 1].
double reweight(double x);

template <class Real>
struct LossResult {
  Real value = 0;
  std::vector<Real> grad_prob;   // d L / d q, evaluated at the clamped q
  std::vector<Real> grad_logit;  // d L / d logit with q = sigmoid(logit)
  std::vector<Real> pos_weight;  // a_j
  std::vector<Real> neg_weight;  // b_j (includes f(q_j))
  std::vector<Real> f;           // f(q_j) as used
};

// Core weighted BCE. `q` are probabilities in [0, 1].
template <class Real>
LossResult<Real> weighted_bce(std::span<const Real> q, std::span<const Real> pos_weight,
                              std::span<const Real> neg_weight, NegativeTermSign sign = NegativeTermSign::nll);

// -sum_{j not in pos} f(q_j) log(1 - q_j) - sum_{j in pos} log q_j.
// `frozen_f`, when given, replaces f(q) (used to hold the weights fixed
// during finite differences).
template <class Real>
LossResult<Real> sfna_loss(std::span<const Real> q, std::span<const TypeId> positives,
                           NegativeTermSign sign = NegativeTermSign::nll,
                           std::optional<std::span<const Real>> frozen_f = std::nullopt);

// -sum_j (1 - p_j) f(q_j) log(1 - q_j) - sum_j p_j log q_j, teacher p fixed.
template <class Real>
LossResult<Real> kd_loss(std::span<const Real> p, std::span<const Real> q,
                         NegativeTermSign sign = NegativeTermSign::nll,
                         std::optional<std::span<const Real>> frozen_f = std::nullopt);

}  // namespace sset
