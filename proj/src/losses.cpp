#include "sset/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sset {

double reweight(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("reweight: argument " + std::to_string(x) + " outside [0, 1]");
  if (x <= 0.5) return 3.0 * x - 2.0 * x * x;
  return x - 2.0 * x * x + 1.0;
}

namespace {

template <class Real>
std::vector<Real> weights_for(std::span<const Real> q, std::optional<std::span<const Real>> frozen_f) {
  if (frozen_f) {
    if (frozen_f->size() != q.size()) throw std::invalid_argument("frozen reweighting has the wrong length");
    return {frozen_f->begin(), frozen_f->end()};
  }
  std::vector<Real> f(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) f[j] = static_cast<Real>(reweight(static_cast<double>(q[j])));
  return f;
}

}  // namespace

template <class Real>
LossResult<Real> weighted_bce(std::span<const Real> q, std::span<const Real> pos_weight,
                              std::span<const Real> neg_weight, NegativeTermSign sign) {
  const std::size_t n = q.size();
  if (pos_weight.size() != n || neg_weight.size() != n) throw std::invalid_argument("weighted_bce: length mismatch");
  const Real s = sign == NegativeTermSign::nll ? Real(1) : Real(-1);
  const Real lo = static_cast<Real>(kProbClamp);
  const Real hi = Real(1) - lo;
  LossResult<Real> r;
  r.grad_prob.resize(n);
  r.grad_logit.resize(n);
  r.pos_weight.assign(pos_weight.begin(), pos_weight.end());
  r.neg_weight.assign(neg_weight.begin(), neg_weight.end());
  for (std::size_t j = 0; j < n; ++j) {
    if (!(q[j] >= Real(0) && q[j] <= Real(1))) {
      throw std::domain_error("probability " + std::to_string(static_cast<double>(q[j])) + " outside [0, 1]");
    }
    const Real qc = std::clamp(q[j], lo, hi);
    const Real a = pos_weight[j];
    const Real b = neg_weight[j];
    r.value += -a * std::log(qc) - s * b * std::log1p(-qc);
    r.grad_prob[j] = -a / qc + s * b / (Real(1) - qc);
    r.grad_logit[j] = -a * (Real(1) - q[j]) + s * b * q[j];
  }
  return r;
}

template <class Real>
LossResult<Real> sfna_loss(std::span<const Real> q, std::span<const TypeId> positives, NegativeTermSign sign,
                           std::optional<std::span<const Real>> frozen_f) {
  const std::size_t n = q.size();
  std::vector<Real> a(n, Real(0));
  for (auto t : positives) {
    if (t.index() >= n) throw std::out_of_range("sfna_loss: positive type out of range");
    a[t.index()] = Real(1);
  }
  auto f = weights_for(q, frozen_f);
  std::vector<Real> b(n);
  for (std::size_t j = 0; j < n; ++j) b[j] = a[j] == Real(1) ? Real(0) : f[j];
  auto r = weighted_bce<Real>(q, a, b, sign);
  r.f = std::move(f);
  return r;
}

template <class Real>
LossResult<Real> kd_loss(std::span<const Real> p, std::span<const Real> q, NegativeTermSign sign,
                         std::optional<std::span<const Real>> frozen_f) {
  const std::size_t n = q.size();
  if (p.size() != n) throw std::invalid_argument("kd_loss: teacher and student rows differ in length");
  for (Real v : p) {
    if (!(v >= Real(0) && v <= Real(1))) throw std::domain_error("kd_loss: teacher probability outside [0, 1]");
  }
  auto f = weights_for(q, frozen_f);
  std::vector<Real> b(n);
  for (std::size_t j = 0; j < n; ++j) b[j] = (Real(1) - p[j]) * f[j];
  auto r = weighted_bce<Real>(q, p, b, sign);
  r.f = std::move(f);
  return r;
}

#define SSET_INSTANTIATE_LOSSES(Real)                                                                         \
  template LossResult<Real> weighted_bce<Real>(std::span<const Real>, std::span<const Real>,                  \
                                               std::span<const Real>, NegativeTermSign);                      \
  template LossResult<Real> sfna_loss<Real>(std::span<const Real>, std::span<const TypeId>, NegativeTermSign, \
                                            std::optional<std::span<const Real>>);                            \
  template LossResult<Real> kd_loss<Real>(std::span<const Real>, std::span<const Real>, NegativeTermSign,     \
                                          std::optional<std::span<const Real>>);

SSET_INSTANTIATE_LOSSES(float)
SSET_INSTANTIATE_LOSSES(double)

#undef SSET_INSTANTIATE_LOSSES

}  // namespace sset
