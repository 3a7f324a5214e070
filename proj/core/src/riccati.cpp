#include "sympolicy/riccati.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace sympolicy {

namespace {

Eigen::MatrixXd to_eigen(const Mat& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) e(i, j) = m(i, j);
  return e;
}

Mat from_eigen(const Eigen::MatrixXd& e) {
  Mat m(static_cast<int>(e.rows()), static_cast<int>(e.cols()));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) m(i, j) = e(i, j);
  return m;
}

// Integrates dP/dt = F(P) with RK4 until the flow stalls. Restarts with a
// smaller step if the iteration diverges.
template <class Rhs>
Eigen::MatrixXd integrate_to_stationarity(int n, const Rhs& rhs, const RiccatiOptions& opts) {
  double dt = opts.dt;
  for (int attempt = 0; attempt < 6; ++attempt, dt *= 0.25) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    bool diverged = false;
    const long steps = static_cast<long>(opts.max_time / dt);
    for (long s = 0; s < steps; ++s) {
      const Eigen::MatrixXd k1 = rhs(P);
      const Eigen::MatrixXd k2 = rhs(P + 0.5 * dt * k1);
      const Eigen::MatrixXd k3 = rhs(P + 0.5 * dt * k2);
      const Eigen::MatrixXd k4 = rhs(P + dt * k3);
      P += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      P = 0.5 * (P + P.transpose());  // keep symmetric against roundoff
      if (!P.allFinite()) {
        diverged = true;
        break;
      }
      if ((s & 63) == 0 && k1.norm() < opts.stall_tol * std::max(1.0, P.norm())) {
        return P;
      }
    }
    if (!diverged) return P;
  }
  throw ConfigError("riccati integration diverged");
}

}  // namespace

Mat solve_control_riccati(const Mat& A, const std::vector<double>& b, const Mat& Q, double r,
                          const RiccatiOptions& opts) {
  if (A.rows != A.cols || Q.rows != A.rows || Q.cols != A.cols ||
      static_cast<int>(b.size()) != A.rows || r <= 0.0) {
    throw ConfigError("control riccati: inconsistent dimensions");
  }
  const Eigen::MatrixXd Ae = to_eigen(A);
  const Eigen::MatrixXd Qe = to_eigen(Q);
  Eigen::VectorXd be(A.rows);
  for (int i = 0; i < A.rows; ++i) be(i) = b[static_cast<std::size_t>(i)];
  auto rhs = [&](const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
    return Ae.transpose() * P + P * Ae - P * be * be.transpose() * P / r + Qe;
  };
  const Eigen::MatrixXd P = integrate_to_stationarity(A.rows, rhs, opts);
  Mat result = from_eigen(P);
  if (control_riccati_residual(A, b, Q, r, result) > opts.residual_tol) {
    throw ConfigError("control riccati did not converge to tolerance");
  }
  return result;
}

Mat solve_filter_riccati(const Mat& A, const Mat& V, const Mat& D, const Mat& Sigma,
                         const RiccatiOptions& opts) {
  if (A.rows != A.cols || V.rows != A.rows || D.cols != A.rows || Sigma.rows != D.rows ||
      Sigma.cols != D.rows) {
    throw ConfigError("filter riccati: inconsistent dimensions");
  }
  const Eigen::MatrixXd Ae = to_eigen(A);
  const Eigen::MatrixXd De = to_eigen(D);
  const Eigen::MatrixXd W = to_eigen(V) * to_eigen(V).transpose();
  const Eigen::MatrixXd SigInv = to_eigen(Sigma).inverse();
  if (!SigInv.allFinite()) throw ConfigError("observation covariance is singular");
  auto rhs = [&](const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
    return Ae * P + P * Ae.transpose() - P * De.transpose() * SigInv * De * P + W;
  };
  const Eigen::MatrixXd P = integrate_to_stationarity(A.rows, rhs, opts);
  Mat result = from_eigen(P);
  if (filter_riccati_residual(A, V, D, Sigma, result) > opts.residual_tol) {
    throw ConfigError("filter riccati did not converge to tolerance");
  }
  return result;
}

double control_riccati_residual(const Mat& A, const std::vector<double>& b, const Mat& Q,
                                double r, const Mat& P) {
  const Eigen::MatrixXd Ae = to_eigen(A);
  const Eigen::MatrixXd Pe = to_eigen(P);
  Eigen::VectorXd be(A.rows);
  for (int i = 0; i < A.rows; ++i) be(i) = b[static_cast<std::size_t>(i)];
  return (Ae.transpose() * Pe + Pe * Ae - Pe * be * be.transpose() * Pe / r + to_eigen(Q)).norm();
}

double filter_riccati_residual(const Mat& A, const Mat& V, const Mat& D, const Mat& Sigma,
                               const Mat& P) {
  const Eigen::MatrixXd Ae = to_eigen(A);
  const Eigen::MatrixXd Pe = to_eigen(P);
  const Eigen::MatrixXd De = to_eigen(D);
  const Eigen::MatrixXd W = to_eigen(V) * to_eigen(V).transpose();
  const Eigen::MatrixXd SigInv = to_eigen(Sigma).inverse();
  return (Ae * Pe + Pe * Ae.transpose() - Pe * De.transpose() * SigInv * De * Pe + W).norm();
}

std::vector<double> lqr_gain(const Mat& P, const std::vector<double>& b, double r) {
  std::vector<double> k(static_cast<std::size_t>(P.cols), 0.0);
  for (int j = 0; j < P.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < P.rows; ++i) s += b[static_cast<std::size_t>(i)] * P(i, j);
    k[static_cast<std::size_t>(j)] = s / r;
  }
  return k;
}

Mat kalman_gain(const Mat& P, const Mat& D, const Mat& Sigma) {
  const Eigen::MatrixXd L = to_eigen(P) * to_eigen(D).transpose() * to_eigen(Sigma).inverse();
  return from_eigen(L);
}

bool is_hurwitz(const Mat& M) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(M));
  for (int i = 0; i < M.rows; ++i) {
    if (es.eigenvalues()(i).real() >= 0.0) return false;
  }
  return true;
}

}  // namespace sympolicy
