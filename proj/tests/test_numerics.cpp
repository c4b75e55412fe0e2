#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sset/numerics.hpp"

using namespace sset;
using num::Matrix;

namespace {

// Direct softmax enumeration in long double, no max shift.
long double attend_oracle(const std::vector<long double>& col, long double temp) {
  long double z = 0, acc = 0;
  for (auto v : col) z += std::exp(temp * v);
  for (auto v : col) acc += std::exp(temp * v) / z * v;
  return acc;
}

std::vector<double> pool_oracle(const Matrix<double>& s, const std::vector<double>& temps, bool mean_per_head) {
  std::vector<double> out(s.cols());
  for (std::size_t j = 0; j < s.cols(); ++j) {
    std::vector<long double> col;
    for (std::size_t i = 0; i < s.rows(); ++i) col.push_back(s(i, j));
    const long double mean = std::accumulate(col.begin(), col.end(), 0.0L) / col.size();
    long double acc = mean_per_head ? 0 : mean;
    for (double t : temps) acc += attend_oracle(col, t) + (mean_per_head ? mean : 0);
    out[j] = static_cast<double>(acc);
  }
  return out;
}

double central_diff(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("elu values, continuity and monotonicity") {
  CHECK(num::elu(0.0) == 0.0);
  CHECK(num::elu(2.0) == 2.0);
  CHECK(num::elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-12));
  CHECK(num::elu(-1.0) == doctest::Approx(-0.632121).epsilon(1e-6));
  double prev = num::elu(-10.0);
  for (double x = -10.0 + 1e-3; x <= 10.0; x += 1e-3) {
    const double y = num::elu(x);
    CHECK(y > prev);
    prev = y;
  }
  CHECK(std::abs(num::elu(1e-9) - num::elu(-1e-9)) < 1e-8);
  CHECK(num::elu_grad(-0.5) == doctest::Approx(std::exp(-0.5)));
  CHECK(num::elu_grad(0.5) == 1.0);

  Matrix<float> m(1, 3, std::vector<float>{-1.0f, 0.0f, 2.0f});
  const auto e = num::elu(m);
  CHECK(e(0, 0) == doctest::Approx(std::exp(-1.0f) - 1.0f));
  CHECK(e(0, 1) == 0.0f);
  CHECK(e(0, 2) == 2.0f);
}

TEST_CASE("sigmoid is stable at extremes") {
  CHECK(num::sigmoid(0.0) == 0.5);
  CHECK(num::sigmoid(-1000.0) >= 0.0);
  CHECK(num::sigmoid(1000.0) <= 1.0);
  CHECK(std::isfinite(num::sigmoid(-1000.0f)));
  CHECK(num::sigmoid(20.0) > 0.999);
}

TEST_CASE("l2_normalize_rows") {
  Matrix<float> x(2, 2, std::vector<float>{3, 4, 0, 0});
  const auto y = num::l2_normalize_rows(x, 1e-12f);
  CHECK(y(0, 0) == doctest::Approx(0.6f));
  CHECK(y(0, 1) == doctest::Approx(0.8f));
  CHECK(y(1, 0) == 0.0f);
  CHECK(y(1, 1) == 0.0f);

  std::mt19937_64 rng(3);
  const auto r = testing::random_matrix<float>(50, 7, rng);
  const auto n = num::l2_normalize_rows(r, 1e-12f);
  for (std::size_t i = 0; i < n.rows(); ++i) {
    double s = 0;
    for (float v : n.row(i)) s += double(v) * v;
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("l2_normalize_backward matches central differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto v = testing::random_matrix<double>(1, 6, rng);
    const auto g = testing::random_matrix<double>(1, 6, rng);
    std::vector<double> analytic(6, 0.0);
    num::l2_normalize_backward<double>(v.row(0), g.row(0), 1e-12, analytic);
    std::vector<double> tmp(6);
    auto f = [&] {
      num::l2_normalize<double>(v.row(0), tmp, 1e-12);
      double s = 0;
      for (std::size_t k = 0; k < 6; ++k) s += tmp[k] * g(0, k);
      return s;
    };
    for (std::size_t k = 0; k < 6; ++k) CHECK(analytic[k] == doctest::Approx(central_diff(f, v(0, k))).epsilon(1e-6));
  }
}

TEST_CASE("csra_pool single row gives 2H times the score") {
  Matrix<double> s(1, 3, std::vector<double>{0.5, -1.0, 2.0});
  const std::vector<double> temps = {1.0, 2.0, 7.0};
  const auto out = num::csra_pool<double>(s, temps);
  for (std::size_t j = 0; j < 3; ++j) CHECK(out[j] == doctest::Approx(2.0 * 3 * s(0, j)));
}

TEST_CASE("csra_attend on column (0, 2)") {
  Matrix<double> s(2, 1, std::vector<double>{0.0, 2.0});
  CHECK(num::csra_attend<double>(s, 0.0)[0] == doctest::Approx(1.0));
  const double e2 = std::exp(2.0);
  CHECK(num::csra_attend<double>(s, 1.0)[0] == doctest::Approx(2.0 * e2 / (1.0 + e2)).epsilon(1e-12));
}

TEST_CASE("csra_pool matches a direct softmax oracle in both mean modes") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testing::random_matrix<double>(1 + trial % 6, 5, rng);
    const std::vector<double> temps = {0.5, 1.0, 4.0};
    const auto per_head = num::csra_pool<double>(s, temps, num::CsraMeanMode::per_head);
    const auto once = num::csra_pool<double>(s, temps, num::CsraMeanMode::once);
    const auto want_per_head = pool_oracle(s, temps, true);
    const auto want_once = pool_oracle(s, temps, false);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(per_head[j] == doctest::Approx(want_per_head[j]).epsilon(1e-12));
      CHECK(once[j] == doctest::Approx(want_once[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("csra_pool properties: argmax limit, mean limit, row permutation") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = testing::random_matrix<float>(6, 4, rng);
    const auto hot = num::csra_attend<float>(s, 1e4f);
    const auto flat = num::csra_attend<float>(s, 0.0f);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      float mx = s(0, j);
      double mean = 0;
      for (std::size_t i = 0; i < s.rows(); ++i) {
        mx = std::max(mx, s(i, j));
        mean += s(i, j);
      }
      CHECK(std::abs(hot[j] - mx) < 1e-5);
      CHECK(std::abs(flat[j] - mean / s.rows()) < 1e-6);
    }

    std::vector<std::size_t> perm(s.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix<float> p(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) std::copy_n(s.row(perm[i]).begin(), s.cols(), p.row(i).begin());
    const std::vector<float> temps = {1.0f, 3.0f};
    const auto a = num::csra_pool<float>(s, temps);
    const auto b = num::csra_pool<float>(p, temps);
    for (std::size_t j = 0; j < s.cols(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-5));
  }
}

TEST_CASE("csra_pool rejects empty input") {
  Matrix<float> empty(0, 3);
  const std::vector<float> temps = {1.0f};
  CHECK_THROWS_AS(num::csra_pool<float>(empty, temps), std::invalid_argument);
  Matrix<float> s(2, 3);
  CHECK_THROWS_AS(num::csra_pool<float>(s, std::span<const float>{}), std::invalid_argument);
}

TEST_CASE("csra_pool_backward matches central differences") {
  std::mt19937_64 rng(17);
  for (auto mode : {num::CsraMeanMode::per_head, num::CsraMeanMode::once}) {
    auto s = testing::random_matrix<double>(4, 3, rng);
    const auto g = testing::random_matrix<double>(1, 3, rng);
    const std::vector<double> temps = {0.7, 2.5};
    Matrix<double> analytic(4, 3);
    num::csra_pool_backward<double>(s, temps, g.row(0), analytic, mode);
    auto f = [&] {
      const auto out = num::csra_pool<double>(s, temps, mode);
      double acc = 0;
      for (std::size_t j = 0; j < 3; ++j) acc += out[j] * g(0, j);
      return acc;
    };
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(analytic(i, j) == doctest::Approx(central_diff(f, s(i, j))).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("matrix products against triple loops") {
  std::mt19937_64 rng(19);
  const auto a = testing::random_matrix<double>(3, 4, rng);
  const auto b = testing::random_matrix<double>(5, 4, rng);
  const auto c = testing::random_matrix<double>(4, 2, rng);
  const auto d = testing::random_matrix<double>(3, 5, rng);

  Matrix<double> nt;
  num::matmul_nt(a, b, nt);
  Matrix<double> nn;
  num::matmul_nn(a, c, nn);
  Matrix<double> tn(4, 5, 1.0);
  num::add_matmul_tn(a, d, tn);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * b(j, k);
      CHECK(nt(i, j) == doctest::Approx(acc));
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * c(k, j);
      CHECK(nn(i, j) == doctest::Approx(acc));
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 1.0;
      for (std::size_t k = 0; k < 3; ++k) acc += a(k, i) * d(k, j);
      CHECK(tn(i, j) == doctest::Approx(acc));
    }
  }
  Matrix<double> bad(2, 2);
  CHECK_THROWS_AS(num::matmul_nn(a, bad, nn), std::invalid_argument);
}

TEST_CASE("mlp forward and backward") {
  std::mt19937_64 rng(23);
  const std::size_t dims[] = {4, 5, 3};
  auto mlp = num::MlpParams<double>::init(dims, rng);
  CHECK(mlp.num_layers() == 2);
  CHECK(mlp.in_dim() == 4);
  CHECK(mlp.out_dim() == 3);
  for (const auto& w : mlp.weights) {
    const double bound = 1.0 / std::sqrt(double(w.cols()));
    for (double v : w.values()) CHECK(std::abs(v) <= bound);
  }
  for (auto& b : mlp.biases) {
    for (auto& v : b.values()) v = 0.1;
  }

  auto x = testing::random_matrix<double>(3, 4, rng);
  const auto g = testing::random_matrix<double>(3, 3, rng);
  num::MlpTrace<double> trace;
  const auto y = num::mlp_forward(mlp, x, &trace);

  // Forward oracle: layer by layer with explicit loops.
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> h(x.row(r).begin(), x.row(r).end());
    for (std::size_t l = 0; l < 2; ++l) {
      std::vector<double> next(mlp.weights[l].rows());
      for (std::size_t o = 0; o < next.size(); ++o) {
        double acc = mlp.biases[l](0, o);
        for (std::size_t i = 0; i < h.size(); ++i) acc += mlp.weights[l](o, i) * h[i];
        next[o] = l + 1 < 2 ? num::elu(acc) : acc;
      }
      h = next;
    }
    for (std::size_t o = 0; o < 3; ++o) CHECK(y(r, o) == doctest::Approx(h[o]));
  }

  auto grads = num::MlpParams<double>::zeros_like(mlp);
  Matrix<double> gx;
  num::mlp_backward(mlp, trace, g, grads, &gx);
  auto f = [&] {
    const auto out = num::mlp_forward(mlp, x);
    double acc = 0;
    for (std::size_t k = 0; k < out.size(); ++k) acc += out.values()[k] * g.values()[k];
    return acc;
  };
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t k = 0; k < mlp.weights[l].size(); ++k) {
      CHECK(grads.weights[l].values()[k] == doctest::Approx(central_diff(f, mlp.weights[l].values()[k])).epsilon(1e-6));
    }
    for (std::size_t k = 0; k < mlp.biases[l].size(); ++k) {
      CHECK(grads.biases[l].values()[k] == doctest::Approx(central_diff(f, mlp.biases[l].values()[k])).epsilon(1e-6));
    }
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    CHECK(gx.values()[k] == doctest::Approx(central_diff(f, x.values()[k])).epsilon(1e-6));
  }
}

TEST_CASE("identity mlp passes input through") {
  auto id = num::MlpParams<float>::identity(3);
  Matrix<float> x(2, 3, std::vector<float>{1, -2, 3, 0, 5, -6});
  CHECK(num::mlp_forward(id, x) == x);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix<float> p(2, 2, std::vector<float>{1, 2, 3, 4});
    const Matrix<float> before = p;
    Matrix<float> g(2, 2);
    num::AdamState<float> st;
    Matrix<float>* ps[] = {&p};
    const Matrix<float>* gs[] = {&g};
    for (int i = 0; i < 5; ++i) num::adam_step<float>(ps, gs, st);
    CHECK(p == before);
    CHECK(st.step == 5);
  }
  SUBCASE("first step moves by about lr") {
    Matrix<double> p(1, 1, std::vector<double>{0.0});
    Matrix<double> g(1, 1, std::vector<double>{1.0});
    num::AdamState<double> st;
    st.learning_rate = 0.1;
    Matrix<double>* ps[] = {&p};
    const Matrix<double>* gs[] = {&g};
    num::adam_step<double>(ps, gs, st);
    // m_hat = 1, v_hat = 1: delta = -lr / (1 + eps).
    CHECK(p(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("constant gradient moves monotonically against its sign") {
    Matrix<double> p(1, 2, std::vector<double>{0.0, 0.0});
    Matrix<double> g(1, 2, std::vector<double>{0.3, -2.0});
    num::AdamState<double> st;
    Matrix<double>* ps[] = {&p};
    const Matrix<double>* gs[] = {&g};
    double prev0 = 0, prev1 = 0;
    for (int i = 0; i < 50; ++i) {
      num::adam_step<double>(ps, gs, st);
      CHECK(p(0, 0) < prev0);
      CHECK(p(0, 1) > prev1);
      prev0 = p(0, 0);
      prev1 = p(0, 1);
    }
  }
  SUBCASE("beta1 = beta2 = 0 reduces to g / (|g| + eps) steps") {
    Matrix<double> p(1, 3, std::vector<double>{1.0, 1.0, 1.0});
    num::AdamState<double> st;
    st.beta1 = 0;
    st.beta2 = 0;
    st.learning_rate = 0.01;
    Matrix<double>* ps[] = {&p};
    double expect[3] = {1.0, 1.0, 1.0};
    std::mt19937_64 rng(29);
    for (int i = 0; i < 10; ++i) {
      const auto g = testing::random_matrix<double>(1, 3, rng);
      const Matrix<double>* gs[] = {&g};
      num::adam_step<double>(ps, gs, st);
      for (int k = 0; k < 3; ++k) expect[k] -= 0.01 * g(0, k) / (std::abs(g(0, k)) + 1e-8);
    }
    for (int k = 0; k < 3; ++k) CHECK(p(0, k) == doctest::Approx(expect[k]).epsilon(1e-12));
  }
  SUBCASE("shape mismatch throws") {
    Matrix<float> p(2, 2);
    Matrix<float> g(2, 3);
    num::AdamState<float> st;
    Matrix<float>* ps[] = {&p};
    const Matrix<float>* gs[] = {&g};
    CHECK_THROWS_AS(num::adam_step<float>(ps, gs, st), std::invalid_argument);
  }
}

TEST_CASE("finite_difference_check") {
  const num::LossWithGradient quad = [](std::span<const double> x, std::span<double> g) {
    double v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      v += 0.5 * x[i] * x[i];
      if (!g.empty()) g[i] = x[i];
    }
    return v;
  };
  const std::vector<double> x = {0.3, -1.2, 2.5, 0.0, 7.0};
  const auto r = num::finite_difference_check(quad, x, 1e-4);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.checked == 5);
  CHECK(num::finite_difference_check(quad, x, 1e-4, 2, 1).checked == 2);

  const num::LossWithGradient wrong = [](std::span<const double> x, std::span<double> g) {
    if (!g.empty()) g[0] = 2 * x[0];
    return 0.5 * x[0] * x[0];
  };
  CHECK(num::finite_difference_check(wrong, std::vector<double>{1.0}, 1e-4).max_rel_error > 0.4);

  const num::LossWithGradient nan_loss = [](std::span<const double>, std::span<double>) { return std::nan(""); };
  CHECK_THROWS_AS(num::finite_difference_check(nan_loss, x, 1e-4), std::runtime_error);
  CHECK_THROWS_AS(num::finite_difference_check(quad, x, 0.0), std::invalid_argument);
}
