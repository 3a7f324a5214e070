#pragma once

// Executable policies. All policy state that changes during a trial (latent
// vector, previous control, filter estimate) is owned by the simulator's
// per-trial scratch; the policy objects themselves are immutable and shared
// across threads.

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sympolicy/environments.hpp"
#include "sympolicy/expr.hpp"
#include "sympolicy/linalg.hpp"

namespace sympolicy {

// Row-pointer view over one batch step; every row holds `lanes` doubles.
struct LaneBlock {
  int lanes = 0;
  const double* const* latent = nullptr;  // H rows
  const double* const* obs = nullptr;     // M rows
  const double* const* u_prev = nullptr;  // C rows
  const double* const* target = nullptr;  // P rows
  double* const* out = nullptr;           // C rows (control) or H rows (derivative)
  double* scratch = nullptr;              // tree evaluation stack
};

// u_j = g_j(y, xstar)
class StaticTreePolicy {
public:
  StaticTreePolicy() = default;
  explicit StaticTreePolicy(std::vector<ExprTree> readouts);

  int latent_dim() const { return 0; }
  int control_dim() const { return static_cast<int>(readouts_.size()); }
  int obs_dim() const { return obs_dim_; }
  int target_dim() const { return target_dim_; }
  bool latent_before_control() const { return false; }
  int scratch_rows() const { return scratch_rows_; }

  void control(const LaneBlock& io) const;
  void latent_derivative(const LaneBlock&) const {}

  std::vector<double> control_scalar(std::span<const double> y,
                                     std::span<const double> target) const;

  const std::vector<ExprTree>& readouts() const { return readouts_; }

private:
  std::vector<ExprTree> readouts_;
  int obs_dim_ = 0;
  int target_dim_ = 0;
  int scratch_rows_ = 0;
};

// adot_i = f_i(a, y, u, xstar); u_j = g_j(a, xstar)
class DynamicTreePolicy {
public:
  DynamicTreePolicy() = default;
  DynamicTreePolicy(std::vector<ExprTree> state_trees, std::vector<ExprTree> readouts);

  int latent_dim() const { return static_cast<int>(state_trees_.size()); }
  int control_dim() const { return static_cast<int>(readouts_.size()); }
  int obs_dim() const { return obs_dim_; }
  int target_dim() const { return target_dim_; }
  bool latent_before_control() const { return false; }
  int scratch_rows() const { return scratch_rows_; }

  void control(const LaneBlock& io) const;
  void latent_derivative(const LaneBlock& io) const;

  std::vector<double> control_scalar(std::span<const double> a,
                                     std::span<const double> target) const;
  std::vector<double> derivative_scalar(std::span<const double> a, std::span<const double> y,
                                        std::span<const double> u_prev,
                                        std::span<const double> target) const;

  const std::vector<ExprTree>& state_trees() const { return state_trees_; }
  const std::vector<ExprTree>& readouts() const { return readouts_; }

private:
  std::vector<ExprTree> state_trees_;
  std::vector<ExprTree> readouts_;
  int obs_dim_ = 0;
  int target_dim_ = 0;
  int scratch_rows_ = 0;
};

// Neural-ODE baseline: adot = tanh(A z), z = (a, y, u, xstar, 1);
// u = B v, v = (a, xstar, 1). The latent dimension is fixed at five.
struct NdeShape {
  int latent = 5;
  int obs = 0;
  int control = 0;
  int target = 1;

  int z_dim() const { return latent + obs + control + target + 1; }
  int v_dim() const { return latent + target + 1; }
  int param_count() const { return latent * z_dim() + control * v_dim(); }
};

class NdePolicy {
public:
  NdePolicy() = default;
  NdePolicy(NdeShape shape, const std::vector<double>& params);  // A rows, then B rows

  const NdeShape& shape() const { return shape_; }
  int latent_dim() const { return shape_.latent; }
  int control_dim() const { return shape_.control; }
  bool latent_before_control() const { return false; }
  int scratch_rows() const { return 0; }

  void control(const LaneBlock& io) const;
  void latent_derivative(const LaneBlock& io) const;

  std::vector<double> control_scalar(std::span<const double> a,
                                     std::span<const double> target) const;
  std::vector<double> derivative_scalar(std::span<const double> a, std::span<const double> y,
                                        std::span<const double> u_prev,
                                        std::span<const double> target) const;

  std::vector<double> flatten() const;
  const Mat& state_matrix() const { return A_; }
  const Mat& readout_matrix() const { return B_; }

private:
  NdeShape shape_;
  Mat A_;
  Mat B_;
};

// Random-search candidate: a dynamic policy with freshly grown trees of
// depth at most seven whose readouts reference at least one latent.
DynamicTreePolicy sample_random_policy(const FunctionSet& fset, int latent_dim, int obs_dim,
                                       int control_dim, int target_dim, RngStream& rng);

// ---------------------------------------------------------------------------
// LQG: Kalman-Bucy filter plus LQR feedback with steady-state feedforward,
// the analytic optimum for the linear oscillator. The estimate advances one
// Euler step of
//   dxhat = (A xhat + b u) dt + L(t) (y - D xhat) dt
// before the control u = -K (xhat - x*) + u_ff is read out; u_ff cancels the
// spring force at the target (b u_ff = -A x*). The filter gain
// L(t) = P(t) D' Sigma^{-1} follows the covariance Riccati ODE from the
// trial prior P(0) = diag(3, 1) and settles on the algebraic solution; K is
// the stationary LQR gain.
class LqgPolicy {
public:
  struct Gains {
    double omega = 1.0;
    double zeta = 0.0;
    std::array<double, 2> K{};
    std::array<double, 2> sigma_inv{};  // per observed channel
    std::array<double, 2> target{};
    double u_ff = 0.0;
  };

  // latent layout per lane: (xhat1, xhat2, p11, p12, p22)
  static constexpr int kLatentDim = 5;
  static constexpr double kPriorVarPos = 3.0;
  static constexpr double kPriorVarVel = 1.0;
  static constexpr double kProcessVar = 0.05 * 0.05;

  LqgPolicy(const ShoEnv& env, std::span<const ShoEnv::Trial> trials);

  int latent_dim() const { return kLatentDim; }
  int control_dim() const { return 1; }
  int obs_dim() const { return obs_dim_; }
  bool latent_before_control() const { return true; }
  int scratch_rows() const { return 0; }

  void initial_latent(int lane, double* out) const;
  void control(const LaneBlock& io) const;
  void latent_derivative(const LaneBlock& io) const;

  const Gains& gains(int lane) const { return gains_[static_cast<std::size_t>(lane)]; }

private:
  std::vector<Gains> gains_;
  int obs_dim_ = 0;
};

// Scalar single-trial LQG controller (estimate and covariance owned by the
// object).
class LqgController {
public:
  LqgController(const ShoEnv& env, const ShoEnv::Trial& trial);

  // One filter step followed by the feedback readout.
  double step(std::span<const double> y, double dt);

  std::span<const double> estimate() const { return {state_.data(), 2}; }
  const LqgPolicy::Gains& gains() const { return gains_; }

private:
  LqgPolicy::Gains gains_;
  int obs_dim_ = 1;
  std::array<double, LqgPolicy::kLatentDim> state_{};
  double u_prev_ = 0.0;
};

// ---------------------------------------------------------------------------
// Serialization. Symbolic policies use the expression grammar, one line per
// tree ("adot1 = ...", "u1 = ..."), preceded by a dims header. NDE policies
// use a flat array file with a dimension header.

using SymbolicPolicy = std::variant<StaticTreePolicy, DynamicTreePolicy>;

std::string policy_to_text(const StaticTreePolicy& policy);
std::string policy_to_text(const DynamicTreePolicy& policy);
SymbolicPolicy policy_from_text(const std::string& text);

std::string nde_to_text(const NdePolicy& policy);
NdePolicy nde_from_text(const std::string& text);

}  // namespace sympolicy
