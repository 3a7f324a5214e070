#include "sympolicy/cmaes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sympolicy/errors.hpp"

namespace sympolicy {

int cmaes_default_lambda(int dimension) {
  return 4 + static_cast<int>(3.0 * std::log(static_cast<double>(dimension)));
}

struct CmaEs::Impl {
  int n = 0;
  int lambda = 0;
  int mu = 0;
  double mu_eff = 0.0;
  double cc = 0, cs = 0, c1 = 0, cmu = 0, damps = 0, chi_n = 0;
  double sigma = 0.5;
  int generation = 0;

  Eigen::VectorXd weights;
  Eigen::VectorXd mean;
  Eigen::VectorXd ps, pc;
  Eigen::MatrixXd C, B;
  Eigen::VectorXd D;  // sqrt of eigenvalues
  std::vector<double> mean_out;

  void init(const CmaesConfig& cfg) {
    n = cfg.dimension;
    if (n < 1) throw ConfigError("cmaes: dimension must be positive");
    lambda = cfg.lambda > 0 ? cfg.lambda : cmaes_default_lambda(n);
    if (lambda < 2) throw ConfigError("cmaes: lambda must be at least 2");
    mu = lambda / 2;
    weights = Eigen::VectorXd(mu);
    for (int i = 0; i < mu; ++i) {
      weights(i) = std::log(mu + 0.5) - std::log(static_cast<double>(i + 1));
    }
    weights /= weights.sum();
    mu_eff = 1.0 / weights.squaredNorm();

    cc = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    cs = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    cmu = std::min(1.0 - c1,
                   2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
    damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + cs;
    chi_n = std::sqrt(static_cast<double>(n)) *
            (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    sigma = cfg.sigma0;
    if (sigma <= 0.0) throw ConfigError("cmaes: sigma0 must be positive");
    mean = Eigen::VectorXd::Zero(n);
    if (!cfg.mean0.empty()) {
      if (static_cast<int>(cfg.mean0.size()) != n) throw ConfigError("cmaes: bad mean0 size");
      for (int i = 0; i < n; ++i) mean(i) = cfg.mean0[static_cast<std::size_t>(i)];
    }
    ps = Eigen::VectorXd::Zero(n);
    pc = Eigen::VectorXd::Zero(n);
    C = Eigen::MatrixXd::Identity(n, n);
    decompose();
    sync_mean();
  }

  void decompose() {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite() ||
        es.eigenvalues().minCoeff() <= 0.0) {
      std::fprintf(stderr, "cmaes: covariance decomposition failed, resetting C to identity\n");
      C = Eigen::MatrixXd::Identity(n, n);
      B = Eigen::MatrixXd::Identity(n, n);
      D = Eigen::VectorXd::Ones(n);
      return;
    }
    B = es.eigenvectors();
    D = es.eigenvalues().cwiseSqrt();
  }

  void sync_mean() { mean_out.assign(mean.data(), mean.data() + n); }
};

CmaEs::CmaEs(const CmaesConfig& config) : impl_(std::make_unique<Impl>()) {
  impl_->init(config);
}
CmaEs::~CmaEs() = default;
CmaEs::CmaEs(CmaEs&&) noexcept = default;
CmaEs& CmaEs::operator=(CmaEs&&) noexcept = default;

int CmaEs::dimension() const { return impl_->n; }
int CmaEs::lambda() const { return impl_->lambda; }
int CmaEs::generation() const { return impl_->generation; }
double CmaEs::sigma() const { return impl_->sigma; }
const std::vector<double>& CmaEs::mean() const { return impl_->mean_out; }

std::vector<std::vector<double>> CmaEs::ask(RngStream& rng) {
  auto& s = *impl_;
  std::vector<std::vector<double>> out(static_cast<std::size_t>(s.lambda));
  Eigen::VectorXd z(s.n);
  for (int k = 0; k < s.lambda; ++k) {
    for (int i = 0; i < s.n; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = s.mean + s.sigma * (s.B * (s.D.asDiagonal() * z));
    out[static_cast<std::size_t>(k)].assign(x.data(), x.data() + s.n);
  }
  return out;
}

void CmaEs::tell(const std::vector<std::vector<double>>& candidates,
                 const std::vector<double>& fitnesses) {
  auto& s = *impl_;
  const int lambda = s.lambda;
  if (static_cast<int>(candidates.size()) != lambda ||
      static_cast<int>(fitnesses.size()) != lambda) {
    throw ConfigError("cmaes: tell() arity mismatch");
  }

  // A fully tied (or fully non-finite) ranking carries no selection
  // information; leave the distribution untouched.
  bool all_equal = true;
  bool none_finite = true;
  for (int i = 0; i < lambda; ++i) {
    const double f = fitnesses[static_cast<std::size_t>(i)];
    all_equal &= f == fitnesses[0];
    none_finite &= !std::isfinite(f);
  }
  if (all_equal || none_finite) {
    s.generation += 1;
    return;
  }

  // Rank by fitness, best first; non-finite sinks to the bottom.
  std::vector<int> order(static_cast<std::size_t>(lambda));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = fitnesses[static_cast<std::size_t>(a)];
    const double fb = fitnesses[static_cast<std::size_t>(b)];
    const bool ga = std::isfinite(fa), gb = std::isfinite(fb);
    if (ga != gb) return ga;
    return fa > fb;
  });

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(s.n);
  for (int i = 0; i < s.mu; ++i) {
    const auto& x = candidates[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    for (int j = 0; j < s.n; ++j) new_mean(j) += s.weights(i) * x[static_cast<std::size_t>(j)];
  }

  const Eigen::VectorXd delta = (new_mean - old_mean) / s.sigma;

  const Eigen::VectorXd c_inv_sqrt_delta =
      s.B * (s.D.cwiseInverse().asDiagonal() * (s.B.transpose() * delta));

  s.ps = (1.0 - s.cs) * s.ps + std::sqrt(s.cs * (2.0 - s.cs) * s.mu_eff) * c_inv_sqrt_delta;

  const double ps_norm = s.ps.norm();
  const bool hsig =
      ps_norm / std::sqrt(1.0 - std::pow(1.0 - s.cs, 2.0 * (s.generation + 1))) / s.chi_n <
      1.4 + 2.0 / (s.n + 1.0);

  s.pc = (1.0 - s.cc) * s.pc;
  if (hsig) s.pc += std::sqrt(s.cc * (2.0 - s.cc) * s.mu_eff) * delta;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(s.n, s.n);
  for (int i = 0; i < s.mu; ++i) {
    const auto& x = candidates[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    Eigen::VectorXd y(s.n);
    for (int j = 0; j < s.n; ++j) {
      y(j) = (x[static_cast<std::size_t>(j)] - old_mean(j)) / s.sigma;
    }
    rank_mu += s.weights(i) * y * y.transpose();
  }

  // the (1 - hsig) variance-loss correction folds into the C discount
  const double c1a = s.c1 * (hsig ? 1.0 : 1.0 - s.cc * (2.0 - s.cc));
  s.C = (1.0 - c1a - s.cmu) * s.C + s.c1 * (s.pc * s.pc.transpose()) + s.cmu * rank_mu;

  s.sigma *= std::exp((s.cs / s.damps) * (ps_norm / s.chi_n - 1.0));
  if (!std::isfinite(s.sigma) || s.sigma <= 0.0) s.sigma = 1e-12;

  s.mean = new_mean;
  s.generation += 1;
  s.decompose();
  s.sync_mean();
}

}  // namespace sympolicy
