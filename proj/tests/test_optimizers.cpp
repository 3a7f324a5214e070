#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "sympolicy/cmaes.hpp"
#include "sympolicy/riccati.hpp"
#include "sympolicy/rng.hpp"

using namespace sympolicy;

namespace {

Mat sho_A(double omega, double zeta) {
  Mat A(2, 2);
  A(0, 0) = 0;
  A(0, 1) = 1;
  A(1, 0) = -omega;
  A(1, 1) = -zeta;
  return A;
}

}  // namespace

TEST_CASE("control riccati: zero cost gives zero solution") {
  const Mat P = solve_control_riccati(sho_A(1.0, 0.0), {0.0, 1.0}, Mat(2, 2), 0.5);
  for (double v : P.a) CHECK(std::abs(v) < 1e-12);
  const auto K = lqr_gain(P, {0.0, 1.0}, 0.5);
  CHECK(K[0] == 0.0);
  CHECK(K[1] == 0.0);
}

TEST_CASE("control riccati: scalar closed form") {
  Mat A(1, 1), Q(1, 1);
  A(0, 0) = -1.0;
  Q(0, 0) = 1.0;
  const Mat P = solve_control_riccati(A, {1.0}, Q, 1.0);
  CHECK(std::abs(P(0, 0) - (std::sqrt(2.0) - 1.0)) < 1e-10);
}

TEST_CASE("control riccati: oscillator gains match the hand-derived solution") {
  // For A=[0 1; -1 0], b=(0,1), Q=diag(0.5,0), r=0.5 the stationary solution
  // works out to p12=(sqrt(2)-1)/2, p22=sqrt(p12), p11=p22+2*p12*p22.
  Mat Q(2, 2);
  Q(0, 0) = 0.5;
  const std::vector<double> b = {0.0, 1.0};
  const Mat A = sho_A(1.0, 0.0);
  const Mat P = solve_control_riccati(A, b, Q, 0.5);
  const double p12 = (std::sqrt(2.0) - 1.0) / 2.0;
  const double p22 = std::sqrt(p12);
  CHECK(std::abs(P(0, 1) - p12) < 1e-9);
  CHECK(std::abs(P(1, 0) - p12) < 1e-9);
  CHECK(std::abs(P(1, 1) - p22) < 1e-9);
  CHECK(std::abs(P(0, 0) - (p22 + 2 * p12 * p22)) < 1e-9);
  CHECK(control_riccati_residual(A, b, Q, 0.5, P) < 1e-8);

  const auto K = lqr_gain(P, b, 0.5);
  Mat closed = A;
  for (int j = 0; j < 2; ++j) {
    closed(0, j) -= b[0] * K[static_cast<std::size_t>(j)];
    closed(1, j) -= b[1] * K[static_cast<std::size_t>(j)];
  }
  CHECK(is_hurwitz(closed));
}

TEST_CASE("control riccati: residual and Hurwitz across the varying-parameter range") {
  RngStream rng(3);
  Mat Q(2, 2);
  Q(0, 0) = 0.5;
  const std::vector<double> b = {0.0, 1.0};
  for (int i = 0; i < 25; ++i) {
    const double omega = rng.uniform(0.0, 2.0);
    const double zeta = rng.uniform(0.0, 1.5);
    const Mat A = sho_A(omega, zeta);
    const Mat P = solve_control_riccati(A, b, Q, 0.5);
    CHECK(control_riccati_residual(A, b, Q, 0.5, P) < 1e-8);
    const auto K = lqr_gain(P, b, 0.5);
    Mat closed = A;
    closed(1, 0) -= K[0];
    closed(1, 1) -= K[1];
    CHECK(is_hurwitz(closed));
  }
}

TEST_CASE("control riccati: unstabilizable system is rejected") {
  Mat A = Mat::identity(2);
  Mat Q = Mat::identity(2);
  RiccatiOptions opts;
  opts.max_time = 50.0;
  CHECK_THROWS_AS(solve_control_riccati(A, {0.0, 0.0}, Q, 1.0, opts), ConfigError);
}

TEST_CASE("filter riccati: no process noise means no estimation error") {
  Mat D = Mat::identity(2);
  Mat Sigma = Mat::identity(2);
  const Mat P = solve_filter_riccati(sho_A(1.0, 0.0), Mat(2, 1), D, Sigma);
  for (double v : P.a) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("filter riccati: duality with the control equation") {
  RngStream rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mat A(2, 2);
    A(0, 0) = -1.0 + 0.2 * rng.uniform01();
    A(0, 1) = rng.uniform(-0.5, 0.5);
    A(1, 0) = rng.uniform(-0.5, 0.5);
    A(1, 1) = -2.0 + 0.2 * rng.uniform01();
    Mat V(2, 2);
    for (auto& v : V.a) v = rng.uniform(-0.5, 0.5);
    Mat D(1, 2);
    D(0, 0) = rng.uniform(0.5, 1.5);
    D(0, 1) = rng.uniform(-0.5, 0.5);
    Mat Sigma(1, 1);
    Sigma(0, 0) = rng.uniform(0.2, 1.0);

    const Mat Pf = solve_filter_riccati(A, V, D, Sigma);

    // dual control problem: A~ = A', b~ = D', Q~ = V V', r~ = Sigma
    Mat At(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) At(i, j) = A(j, i);
    Mat W(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        W(i, j) = V(i, 0) * V(j, 0) + V(i, 1) * V(j, 1);
    const Mat Pc = solve_control_riccati(At, {D(0, 0), D(0, 1)}, W, Sigma(0, 0));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(Pf(i, j) - Pc(i, j)) < 1e-7);
  }
}

TEST_CASE("filter riccati: partial observation yields a finite gain") {
  Mat D(1, 2);
  D(0, 0) = 1.0;
  Mat Sigma(1, 1);
  Sigma(0, 0) = 0.3;
  Mat V(2, 1);
  V(1, 0) = 0.05;
  const Mat P = solve_filter_riccati(sho_A(1.0, 0.0), V, D, Sigma);
  CHECK(filter_riccati_residual(sho_A(1.0, 0.0), V, D, Sigma, P) < 1e-8);
  const Mat L = kalman_gain(P, D, Sigma);
  CHECK(L.rows == 2);
  CHECK(L.cols == 1);
  for (double v : L.a) CHECK(std::isfinite(v));
}

// ---------------------------------------------------------------------------

TEST_CASE("cmaes: default lambda rule") {
  CHECK(cmaes_default_lambda(5) == 8);    // 4 + floor(3 ln 5) = 4 + 4
  CHECK(cmaes_default_lambda(10) == 10);  // 4 + floor(3 ln 10) = 4 + 6
  CHECK(cmaes_default_lambda(79) == 17);  // 4 + floor(3 ln 79) = 4 + 13
}

TEST_CASE("cmaes: sigma -> 0 collapses candidates onto the mean") {
  CmaesConfig cfg;
  cfg.dimension = 4;
  cfg.sigma0 = 1e-12;
  cfg.mean0 = {1.0, -2.0, 3.0, 0.5};
  CmaEs es(cfg);
  RngStream rng(1);
  for (const auto& x : es.ask(rng)) {
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(x[static_cast<std::size_t>(i)] - cfg.mean0[static_cast<std::size_t>(i)]) <
            1e-10);
    }
  }
}

TEST_CASE("cmaes: initial sample covariance is sigma^2 I") {
  CmaesConfig cfg;
  cfg.dimension = 3;
  cfg.sigma0 = 0.5;
  cfg.lambda = 100000;
  CmaEs es(cfg);
  RngStream rng(2);
  const auto xs = es.ask(rng);
  double cov[3][3] = {};
  for (const auto& x : xs) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) cov[i][j] += x[i] * x[j];
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double expect = i == j ? 0.25 : 0.0;
      CHECK(std::abs(cov[i][j] / xs.size() - expect) < 0.01);
    }
  }
}

TEST_CASE("cmaes: constant fitness leaves the mean unchanged") {
  CmaesConfig cfg;
  cfg.dimension = 3;
  cfg.mean0 = {1.0, 2.0, 3.0};
  CmaEs es(cfg);
  RngStream rng(3);
  const auto xs = es.ask(rng);
  es.tell(xs, std::vector<double>(xs.size(), 7.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(es.mean()[static_cast<std::size_t>(i)] == cfg.mean0[static_cast<std::size_t>(i)]);
  }
}

namespace {

// Runs CMA-ES on fitness() until the budget is exhausted; returns ||m||.
template <class F>
double run_to_budget(CmaEs& es, RngStream& rng, int max_evals, F fitness) {
  int evals = 0;
  while (evals < max_evals) {
    const auto xs = es.ask(rng);
    std::vector<double> fs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = fitness(xs[i]);
    evals += static_cast<int>(xs.size());
    es.tell(xs, fs);
  }
  double norm2 = 0;
  for (double v : es.mean()) norm2 += v * v;
  return std::sqrt(norm2);
}

}  // namespace

TEST_CASE("cmaes: 5-D sphere reaches 1e-6 within 2000 evaluations") {
  CmaesConfig cfg;
  cfg.dimension = 5;
  cfg.mean0 = std::vector<double>(5, 1.0);
  CmaEs es(cfg);
  RngStream rng(4);
  const double norm = run_to_budget(es, rng, 2000, [](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return -s;
  });
  CHECK(norm < 1e-6);
}

TEST_CASE("cmaes: quadratic bowl converges to its center") {
  const std::vector<double> c = {2.0, -1.0, 0.5};
  CmaesConfig cfg;
  cfg.dimension = 3;
  CmaEs es(cfg);
  RngStream rng(5);
  int evals = 0;
  while (evals < 3000) {
    const auto xs = es.ask(rng);
    std::vector<double> fs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double s = 0;
      for (int j = 0; j < 3; ++j) {
        const double d = xs[i][static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)];
        s += d * d;
      }
      fs[i] = -s;
    }
    evals += static_cast<int>(xs.size());
    es.tell(xs, fs);
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(es.mean()[static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)]) <
          1e-4);
  }
}

TEST_CASE("cmaes: invariant to order-preserving fitness transforms") {
  auto run = [](bool transformed) {
    CmaesConfig cfg;
    cfg.dimension = 4;
    cfg.mean0 = {1, 1, 1, 1};
    CmaEs es(cfg);
    RngStream rng(6);
    std::vector<double> trace;
    for (int g = 0; g < 50; ++g) {
      const auto xs = es.ask(rng);
      std::vector<double> fs(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        double s = 0;
        for (double v : xs[i]) s += v * v;
        fs[i] = transformed ? 2.0 * -s + 3.0 : -s;
      }
      es.tell(xs, fs);
      for (double v : es.mean()) trace.push_back(v);
    }
    return trace;
  };
  const auto a = run(false);
  const auto b = run(true);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("cmaes: non-finite fitness is ranked worst") {
  CmaesConfig cfg;
  cfg.dimension = 2;
  cfg.mean0 = {5.0, 5.0};
  CmaEs es(cfg);
  RngStream rng(7);
  for (int g = 0; g < 60; ++g) {
    const auto xs = es.ask(rng);
    std::vector<double> fs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double s = 0;
      for (double v : xs[i]) s += v * v;
      // poison a fixed share of candidates
      fs[i] = (i % 4 == 0) ? std::numeric_limits<double>::quiet_NaN() : -s;
    }
    es.tell(xs, fs);
  }
  double norm2 = 0;
  for (double v : es.mean()) norm2 += v * v;
  CHECK(std::sqrt(norm2) < 1.0);  // still makes progress toward the optimum
}
