#pragma once

// Small dense kernel used by the structural model: row-major matrices, ELU,
// row normalization, temperature-softmax (CSRA) pooling, MLPs and Adam.
// Everything is templated on the scalar so the same code runs in float for
// training and in double for gradient verification; float and double are
// explicitly instantiated in numerics.cpp.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace sset::num {

template <class Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<Real> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw std::invalid_argument("Matrix: data size mismatch");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }
  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, Real(0));
  }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

using DenseMatrix = Matrix<float>;

template <class Real>
Real elu(Real x);
// d elu / dx evaluated at the pre-activation x.
template <class Real>
Real elu_grad(Real x);
template <class Real>
Matrix<Real> elu(const Matrix<Real>& x);

template <class Real>
Real sigmoid(Real x);

// Divides each row by max(||row||_2, eps).
template <class Real>
Matrix<Real> l2_normalize_rows(const Matrix<Real>& x, Real eps);

// out = v / max(||v||, eps); returns ||v||.
template <class Real>
Real l2_normalize(std::span<const Real> v, std::span<Real> out, Real eps);

// Accumulates d(v / max(||v||, eps)) / dv applied to grad_out into grad_in.
template <class Real>
void l2_normalize_backward(std::span<const Real> v, std::span<const Real> grad_out, Real eps,
                           std::span<Real> grad_in);

// How the residual mean term enters the pooled logit.
//   per_head: sum_h (s_{T_h} + mean)   (mean counted H times)
//   once:     sum_h s_{T_h} + mean
enum class CsraMeanMode { per_head, once };

// Class-specific residual attention pooling over the rows of `scores`
// ((m+n) x |T|). Returns the pre-sigmoid logit per type. Softmax is taken
// over rows independently for every column with max subtraction.
template <class Real>
std::vector<Real> csra_pool(const Matrix<Real>& scores, std::span<const Real> temps,
                            CsraMeanMode mode = CsraMeanMode::per_head);

// Pooled vector s_T for a single temperature.
template <class Real>
std::vector<Real> csra_attend(const Matrix<Real>& scores, Real temp);

// Accumulates d logit / d scores, contracted with grad_logit, into grad_scores.
template <class Real>
void csra_pool_backward(const Matrix<Real>& scores, std::span<const Real> temps,
                        std::span<const Real> grad_logit, Matrix<Real>& grad_scores,
                        CsraMeanMode mode = CsraMeanMode::per_head);

// out = a * b^T   (a: n x k, b: m x k)
template <class Real>
void matmul_nt(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out);
// out += a^T * b  (a: n x m, b: n x k)
template <class Real>
void add_matmul_tn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out);
// out = a * b     (a: n x k, b: k x m)
template <class Real>
void matmul_nn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out);

// Fully connected layers with ELU between consecutive layers (none after the
// last). weights[l] is out x in, biases[l] is 1 x out.
template <class Real>
struct MlpParams {
  std::vector<Matrix<Real>> weights;
  std::vector<Matrix<Real>> biases;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t in_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
  std::size_t out_dim() const { return weights.empty() ? 0 : weights.back().rows(); }

  // dims = {in, hidden..., out}; weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias.
  static MlpParams init(std::span<const std::size_t> dims, std::mt19937_64& rng);
  static MlpParams zeros_like(const MlpParams& other);
  // Identity map in -> in (one layer, W = I, b = 0).
  static MlpParams identity(std::size_t dim);
};

template <class Real>
struct MlpTrace {
  std::vector<Matrix<Real>> inputs;  // input to each layer (post-activation of previous)
  std::vector<Matrix<Real>> pre;     // pre-activation output of each layer
};

template <class Real>
Matrix<Real> mlp_forward(const MlpParams<Real>& mlp, const Matrix<Real>& x,
                         MlpTrace<Real>* trace = nullptr);

// Accumulates parameter gradients into `grads`; writes d loss / d x into
// grad_in when non-null.
template <class Real>
void mlp_backward(const MlpParams<Real>& mlp, const MlpTrace<Real>& trace,
                  const Matrix<Real>& grad_out, MlpParams<Real>& grads,
                  Matrix<Real>* grad_in = nullptr);

template <class Real>
struct AdamState {
  std::vector<Matrix<Real>> first_moment;
  std::vector<Matrix<Real>> second_moment;
  std::uint64_t step = 0;
  Real learning_rate = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
};

// One bias-corrected Adam update. Moments are allocated on first use; any
// shape mismatch between params, grads and moments throws invalid_argument.
template <class Real>
void adam_step(std::span<Matrix<Real>* const> params, std::span<const Matrix<Real>* const> grads,
               AdamState<Real>& state);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// loss(params, grad): returns the loss at `params`; when `grad` is non-empty
// it also writes the analytic gradient there.
using LossWithGradient = std::function<double(std::span<const double>, std::span<double>)>;

// Central differences (f(x+h) - f(x-h)) / 2h against the analytic gradient.
// Relative error per coordinate is |a - n| / max(|a|, |n|, abs_floor).
// max_coords == 0 checks every coordinate, otherwise a seeded sample.
GradCheckResult finite_difference_check(const LossWithGradient& loss,
                                        std::span<const double> params, double h,
                                        std::size_t max_coords = 0, std::uint64_t seed = 0,
                                        double abs_floor = 1e-7);

}  // namespace sset::num
