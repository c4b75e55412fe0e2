#include "sset/numerics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sset::num {

template <class Real>
Real elu(Real x) {
  return x > Real(0) ? x : std::expm1(x);
}

template <class Real>
Real elu_grad(Real x) {
  return x > Real(0) ? Real(1) : std::exp(x);
}

template <class Real>
Matrix<Real> elu(const Matrix<Real>& x) {
  Matrix<Real> out(x.rows(), x.cols());
  auto src = x.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = elu(src[i]);
  return out;
}

template <class Real>
Real sigmoid(Real x) {
  if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <class Real>
Real l2_normalize(std::span<const Real> v, std::span<Real> out, Real eps) {
  Real sq = 0;
  for (Real x : v) sq += x * x;
  const Real norm = std::sqrt(sq);
  const Real denom = std::max(norm, eps);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / denom;
  return norm;
}

template <class Real>
void l2_normalize_backward(std::span<const Real> v, std::span<const Real> grad_out, Real eps,
                           std::span<Real> grad_in) {
  Real sq = 0;
  for (Real x : v) sq += x * x;
  const Real norm = std::sqrt(sq);
  if (norm <= eps) {
    for (std::size_t i = 0; i < v.size(); ++i) grad_in[i] += grad_out[i] / eps;
    return;
  }
  // (I - u u^T) g / ||v||, u = v / ||v||
  Real dot = 0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * grad_out[i];
  const Real inv = Real(1) / norm;
  const Real scale = dot * inv * inv;
  for (std::size_t i = 0; i < v.size(); ++i) grad_in[i] += (grad_out[i] - v[i] * scale) * inv;
}

template <class Real>
Matrix<Real> l2_normalize_rows(const Matrix<Real>& x, Real eps) {
  Matrix<Real> out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) l2_normalize<Real>(x.row(r), out.row(r), eps);
  return out;
}

namespace {

// Softmax weights over rows for column j at temperature temp.
template <class Real>
void column_softmax(const Matrix<Real>& s, std::size_t j, Real temp, std::vector<Real>& w) {
  const std::size_t n = s.rows();
  w.resize(n);
  Real mx = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, temp * s(i, j));
  Real z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(temp * s(i, j) - mx);
    z += w[i];
  }
  for (std::size_t i = 0; i < n; ++i) w[i] /= z;
}

template <class Real>
void check_pool_args(const Matrix<Real>& scores, std::span<const Real> temps) {
  if (scores.rows() == 0) throw std::invalid_argument("csra_pool: empty score matrix");
  if (temps.empty()) throw std::invalid_argument("csra_pool: no temperatures");
}

}  // namespace

template <class Real>
std::vector<Real> csra_attend(const Matrix<Real>& scores, Real temp) {
  const Real one = 1;
  check_pool_args(scores, std::span<const Real>(&one, 1));
  std::vector<Real> out(scores.cols(), Real(0));
  std::vector<Real> w;
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    column_softmax(scores, j, temp, w);
    Real acc = 0;
    for (std::size_t i = 0; i < scores.rows(); ++i) acc += w[i] * scores(i, j);
    out[j] = acc;
  }
  return out;
}

template <class Real>
std::vector<Real> csra_pool(const Matrix<Real>& scores, std::span<const Real> temps,
                            CsraMeanMode mode) {
  check_pool_args(scores, temps);
  const std::size_t n = scores.rows();
  const Real mean_weight = mode == CsraMeanMode::per_head ? Real(temps.size()) : Real(1);
  std::vector<Real> logit(scores.cols(), Real(0));
  std::vector<Real> w;
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    Real mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += scores(i, j);
    mean /= Real(n);
    Real acc = mean_weight * mean;
    for (Real t : temps) {
      column_softmax(scores, j, t, w);
      for (std::size_t i = 0; i < n; ++i) acc += w[i] * scores(i, j);
    }
    logit[j] = acc;
  }
  return logit;
}

template <class Real>
void csra_pool_backward(const Matrix<Real>& scores, std::span<const Real> temps,
                        std::span<const Real> grad_logit, Matrix<Real>& grad_scores,
                        CsraMeanMode mode) {
  check_pool_args(scores, temps);
  const std::size_t n = scores.rows();
  const Real mean_weight = mode == CsraMeanMode::per_head ? Real(temps.size()) : Real(1);
  std::vector<Real> w;
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    const Real g = grad_logit[j];
    if (g == Real(0)) continue;
    for (std::size_t i = 0; i < n; ++i) grad_scores(i, j) += g * mean_weight / Real(n);
    for (Real t : temps) {
      column_softmax(scores, j, t, w);
      Real pooled = 0;
      for (std::size_t i = 0; i < n; ++i) pooled += w[i] * scores(i, j);
      // d/ds_i sum_k w_k s_k = w_i (1 + T (s_i - pooled))
      for (std::size_t i = 0; i < n; ++i) {
        grad_scores(i, j) += g * w[i] * (Real(1) + t * (scores(i, j) - pooled));
      }
    }
  }
}

template <class Real>
void matmul_nt(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  out.resize(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      Real acc = 0;
      for (std::size_t k = 0; k < ar.size(); ++k) acc += ar[k] * br[k];
      o[j] = acc;
    }
  }
}

template <class Real>
void add_matmul_tn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw std::invalid_argument("add_matmul_tn: shape mismatch");
  }
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ar = a.row(r);
    auto br = b.row(r);
    for (std::size_t i = 0; i < ar.size(); ++i) {
      const Real x = ar[i];
      if (x == Real(0)) continue;
      auto o = out.row(i);
      for (std::size_t k = 0; k < br.size(); ++k) o[k] += x * br[k];
    }
  }
}

template <class Real>
void matmul_nn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul_nn: inner dimension mismatch");
  out.resize(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    auto o = out.row(i);
    for (std::size_t k = 0; k < ar.size(); ++k) {
      const Real x = ar[k];
      if (x == Real(0)) continue;
      auto br = b.row(k);
      for (std::size_t j = 0; j < br.size(); ++j) o[j] += x * br[j];
    }
  }
}

template <class Real>
MlpParams<Real> MlpParams<Real>::init(std::span<const std::size_t> dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw std::invalid_argument("MlpParams::init: need at least in and out dims");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = dims[l];
    const auto out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix<Real> w(out, in);
    for (auto& v : w.values()) v = static_cast<Real>(dist(rng));
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(1, out);
  }
  return p;
}

template <class Real>
MlpParams<Real> MlpParams<Real>::zeros_like(const MlpParams& other) {
  MlpParams p;
  for (const auto& w : other.weights) p.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : other.biases) p.biases.emplace_back(b.rows(), b.cols());
  return p;
}

template <class Real>
MlpParams<Real> MlpParams<Real>::identity(std::size_t dim) {
  MlpParams p;
  Matrix<Real> w(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) w(i, i) = Real(1);
  p.weights.push_back(std::move(w));
  p.biases.emplace_back(1, dim);
  return p;
}

template <class Real>
Matrix<Real> mlp_forward(const MlpParams<Real>& mlp, const Matrix<Real>& x, MlpTrace<Real>* trace) {
  if (x.cols() != mlp.in_dim()) throw std::invalid_argument("mlp_forward: input dimension mismatch");
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Matrix<Real> h = x;
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    Matrix<Real> z;
    matmul_nt(h, mlp.weights[l], z);
    const auto bias = mlp.biases[l].row(0);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      for (std::size_t c = 0; c < zr.size(); ++c) zr[c] += bias[c];
    }
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(z);
    }
    h = (l + 1 < mlp.num_layers()) ? elu(z) : std::move(z);
  }
  return h;
}

template <class Real>
void mlp_backward(const MlpParams<Real>& mlp, const MlpTrace<Real>& trace,
                  const Matrix<Real>& grad_out, MlpParams<Real>& grads, Matrix<Real>* grad_in) {
  Matrix<Real> g = grad_out;
  for (std::size_t l = mlp.num_layers(); l-- > 0;) {
    if (l + 1 < mlp.num_layers()) {
      const auto& pre = trace.pre[l];
      auto gv = g.values();
      auto pv = pre.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= elu_grad(pv[i]);
    }
    add_matmul_tn(g, trace.inputs[l], grads.weights[l]);
    auto gb = grads.biases[l].row(0);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) gb[c] += gr[c];
    }
    if (l > 0 || grad_in) {
      Matrix<Real> next;
      matmul_nn(g, mlp.weights[l], next);
      g = std::move(next);
    }
  }
  if (grad_in) *grad_in = std::move(g);
}

template <class Real>
void adam_step(std::span<Matrix<Real>* const> params, std::span<const Matrix<Real>* const> grads,
               AdamState<Real>& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params/grads count mismatch");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first_moment[i]) ||
        !params[i]->same_shape(state.second_moment[i])) {
      throw std::invalid_argument("adam_step: shape mismatch for tensor " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Real b1 = state.beta1;
  const Real b2 = state.beta2;
  const Real c1 = static_cast<Real>(1.0 - std::pow(static_cast<double>(b1), t));
  const Real c2 = static_cast<Real>(1.0 - std::pow(static_cast<double>(b2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (Real(1) - b1) * g[k];
      v[k] = b2 * v[k] + (Real(1) - b2) * g[k] * g[k];
      const Real mhat = m[k] / c1;
      const Real vhat = v[k] / c2;
      p[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

GradCheckResult finite_difference_check(const LossWithGradient& loss,
                                        std::span<const double> params, double h,
                                        std::size_t max_coords, std::uint64_t seed,
                                        double abs_floor) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be positive");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> analytic(x.size(), 0.0);
  const double base = loss(x, analytic);
  if (!std::isfinite(base)) throw std::runtime_error("finite_difference_check: non-finite loss");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coords != 0 && max_coords < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  GradCheckResult result;
  for (std::size_t idx : coords) {
    const double saved = x[idx];
    x[idx] = saved + h;
    const double up = loss(x, {});
    x[idx] = saved - h;
    const double down = loss(x, {});
    x[idx] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("finite_difference_check: non-finite loss at coordinate " +
                               std::to_string(idx));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double abs_err = std::abs(numeric - analytic[idx]);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[idx]), abs_floor});
    const double rel = abs_err / denom;
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = idx;
    }
    ++result.checked;
  }
  return result;
}

#define SSET_INSTANTIATE_NUMERICS(Real)                                                          \
  template Real elu<Real>(Real);                                                                 \
  template Real elu_grad<Real>(Real);                                                            \
  template Matrix<Real> elu<Real>(const Matrix<Real>&);                                          \
  template Real sigmoid<Real>(Real);                                                             \
  template Matrix<Real> l2_normalize_rows<Real>(const Matrix<Real>&, Real);                      \
  template Real l2_normalize<Real>(std::span<const Real>, std::span<Real>, Real);                \
  template void l2_normalize_backward<Real>(std::span<const Real>, std::span<const Real>, Real,  \
                                            std::span<Real>);                                    \
  template std::vector<Real> csra_pool<Real>(const Matrix<Real>&, std::span<const Real>,         \
                                             CsraMeanMode);                                      \
  template std::vector<Real> csra_attend<Real>(const Matrix<Real>&, Real);                       \
  template void csra_pool_backward<Real>(const Matrix<Real>&, std::span<const Real>,             \
                                         std::span<const Real>, Matrix<Real>&, CsraMeanMode);    \
  template void matmul_nt<Real>(const Matrix<Real>&, const Matrix<Real>&, Matrix<Real>&);        \
  template void add_matmul_tn<Real>(const Matrix<Real>&, const Matrix<Real>&, Matrix<Real>&);    \
  template void matmul_nn<Real>(const Matrix<Real>&, const Matrix<Real>&, Matrix<Real>&);        \
  template struct MlpParams<Real>;                                                               \
  template Matrix<Real> mlp_forward<Real>(const MlpParams<Real>&, const Matrix<Real>&,           \
                                          MlpTrace<Real>*);                                      \
  template void mlp_backward<Real>(const MlpParams<Real>&, const MlpTrace<Real>&,                \
                                   const Matrix<Real>&, MlpParams<Real>&, Matrix<Real>*);        \
  template void adam_step<Real>(std::span<Matrix<Real>* const>,                                  \
                                std::span<const Matrix<Real>* const>, AdamState<Real>&);

SSET_INSTANTIATE_NUMERICS(float)
SSET_INSTANTIATE_NUMERICS(double)

#undef SSET_INSTANTIATE_NUMERICS

}  // namespace sset::num
