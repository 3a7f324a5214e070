#pragma once

// Benchmark environments: stochastic harmonic oscillator, acrobot swing-up,
// and the continuous stirred tank reactor. Each environment defines its
// drift, constant diffusion, observation model, per-trial sampling
// distributions, control clipping, step cost, and termination events.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "sympolicy/linalg.hpp"
#include "sympolicy/rng.hpp"

namespace sympolicy {

enum class StepEvent { kContinue, kSuccess, kAbort };

// Diagonal-noise observation y = D x + eps, eps ~ N(0, diag(noise_var)).
struct ObservationModel {
  Mat D;
  std::vector<double> noise_var;

  int obs_dim() const { return D.rows; }
  void observe(const double* x, RngStream& rng, double* y) const {
    D.matvec(x, y);
    for (int i = 0; i < D.rows; ++i) {
      const double v = noise_var[static_cast<std::size_t>(i)];
      if (v > 0.0) y[i] += rng.normal() * std::sqrt(v);
    }
  }
};

double wrap_angle(double theta);  // into [-pi, pi]

// ---------------------------------------------------------------------------
// Stochastic harmonic oscillator:
//   dx = (A x + b u) dt + v dw,  A = [0 1; -omega -zeta], b = (0,1),
//   v = (0, 0.05). Quadratic cost with Q = diag(0.5, 0), r = 0.5.
class ShoEnv {
public:
  enum class Variant { kNoise, kPartial, kVarying };

  static constexpr int kStateDim = 2;

  struct Trial {
    double omega = 1.0;
    double zeta = 0.0;
    std::array<double, 2> x0{};
    double target_pos = 0.0;  // target velocity is always zero
    std::uint64_t noise_seed = 0;
  };

  explicit ShoEnv(Variant variant) : variant_(variant), obs_(make_obs(variant)) {}

  Variant variant() const { return variant_; }
  int obs_dim() const { return obs_.obs_dim(); }
  int control_dim() const { return 1; }
  const ObservationModel& obs_model() const { return obs_; }

  // Removes process and observation noise (deterministic closed loop).
  void set_noise_enabled(bool enabled) {
    process_noise_ = enabled ? 0.05 : 0.0;
    if (!enabled) {
      for (auto& v : obs_.noise_var) v = 0.0;
    }
  }

  Trial sample_trial(RngStream& rng) const;

  void drift(const Trial& t, const double* x, const double* u, double* dx) const {
    dx[0] = x[1];
    dx[1] = -t.omega * x[0] - t.zeta * x[1] + u[0];
  }
  void apply_noise(const Trial&, double* x, double sqrt_dt, RngStream& rng) const {
    if (process_noise_ > 0.0) x[1] += process_noise_ * sqrt_dt * rng.normal();
  }
  void observe(const Trial&, const double* x, RngStream& rng, double* y) const {
    obs_.observe(x, rng, y);
  }
  void clip(double*) const {}
  void project(double*) const {}
  double step_cost(const Trial& t, const double* x, const double* u) const {
    const double e = x[0] - t.target_pos;
    return 0.5 * e * e + 0.5 * u[0] * u[0];
  }
  StepEvent check_event(const Trial&, const double*) const { return StepEvent::kContinue; }
  double finalize_fitness(const Trial&, double cost_sum, StepEvent, double, double) const {
    return -cost_sum;
  }
  double policy_target(const Trial& t) const { return t.target_pos; }
  std::array<double, 2> target_state(const Trial& t) const { return {t.target_pos, 0.0}; }

private:
  static ObservationModel make_obs(Variant variant);

  Variant variant_;
  ObservationModel obs_;
  double process_noise_ = 0.05;
};

// ---------------------------------------------------------------------------
// Acrobot swing-up with bounded continuous torque. State (th1, th2, th1d,
// th2d); process noise diag(0, 0, 0.05, 0.05) on the accelerations; control
// clipped to [-1, 1]. Sparse fitness -t_f - sum u'Ru with R = 0.01 I; the
// swing-up succeeds when -cos(th1) - cos(th1 + th2) exceeds the 1.5 target
// height, and a trial aborts when |th1d| > 8 pi or |th2d| > 18 pi.
class AcrobotEnv {
public:
  enum class Variant { kNoise, kPartial, kTwoControls };

  static constexpr int kStateDim = 4;
  static constexpr double kTargetHeight = 1.5;

  struct Trial {
    std::array<double, 4> x0{};
    std::uint64_t noise_seed = 0;
  };

  explicit AcrobotEnv(Variant variant) : variant_(variant), obs_(make_obs(variant)) {}

  Variant variant() const { return variant_; }
  int obs_dim() const { return obs_.obs_dim(); }
  int control_dim() const { return variant_ == Variant::kTwoControls ? 2 : 1; }
  const ObservationModel& obs_model() const { return obs_; }

  Trial sample_trial(RngStream& rng) const;

  // u[0] is the torque on the second link; u[1] (two-control variant) acts
  // on the first link.
  void drift(const Trial&, const double* x, const double* u, double* dx) const;

  void apply_noise(const Trial&, double* x, double sqrt_dt, RngStream& rng) const {
    x[2] += 0.05 * sqrt_dt * rng.normal();
    x[3] += 0.05 * sqrt_dt * rng.normal();
  }
  void observe(const Trial&, const double* x, RngStream& rng, double* y) const {
    obs_.observe(x, rng, y);
    y[0] = wrap_angle(y[0]);
    y[1] = wrap_angle(y[1]);
  }
  void clip(double* u) const {
    for (int j = 0; j < control_dim(); ++j) {
      if (u[j] > 1.0) u[j] = 1.0;
      if (u[j] < -1.0) u[j] = -1.0;
    }
  }
  void project(double*) const {}
  double step_cost(const Trial&, const double*, const double* u) const {
    double s = 0.0;
    for (int j = 0; j < control_dim(); ++j) s += u[j] * u[j];
    return 0.01 * s;
  }
  StepEvent check_event(const Trial&, const double* x) const {
    if (-std::cos(x[0]) - std::cos(x[0] + x[1]) > kTargetHeight) return StepEvent::kSuccess;
    if (std::abs(x[2]) > 8.0 * kPi || std::abs(x[3]) > 18.0 * kPi) return StepEvent::kAbort;
    return StepEvent::kContinue;
  }
  double finalize_fitness(const Trial&, double cost_sum, StepEvent final_event,
                          double event_time, double horizon) const {
    const double t_f = final_event == StepEvent::kSuccess ? event_time : horizon;
    return -t_f - cost_sum;
  }
  double policy_target(const Trial&) const { return kTargetHeight; }

  // Total mechanical energy of the unforced system (used by integration
  // oracles).
  double energy(const double* x) const;

  static constexpr double kPi = 3.14159265358979323846;

  // link parameters, shared by both links
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kCom = 0.5;
  static constexpr double kInertia = 1.0;
  static constexpr double kGravity = 9.81;

private:
  static ObservationModel make_obs(Variant variant);

  Variant variant_;
  ObservationModel obs_;
};

// ---------------------------------------------------------------------------
// Continuous stirred tank reactor, x = (c, T_r, T_c); eight parameters are
// resampled per trial. Control is the coolant flow rate, clipped to
// [0, 300]. Quadratic cost 0.01 (T_r - T*)^2 + 1e-4 u^2. The reaction term
// consumes reactant (f1 carries -k(T_r) c); concentration is projected onto
// c >= 0 after each step.
class CstrEnv {
public:
  static constexpr int kStateDim = 3;

  struct Trial {
    std::array<double, 3> x0{};
    double target_temp = 450.0;
    double q_r = 100.0;
    double T_f = 325.0;
    double T_cf = 275.0;
    double V_r = 100.0;
    double V_c = 20.0;
    double dH = -50000.0;
    double C_p = 0.275;
    double UA = 50000.0;
    std::uint64_t noise_seed = 0;
  };

  // fixed parameters
  static constexpr double kFeedConcentration = 1.0;
  static constexpr double kDensity = 1000.0;
  static constexpr double kArrhenius = 7.2e10;
  static constexpr double kActivationEnergy = 72750.0;
  static constexpr double kGasConstant = 8.314;

  CstrEnv() : obs_(make_obs()) {}

  int obs_dim() const { return 2; }
  int control_dim() const { return 1; }
  const ObservationModel& obs_model() const { return obs_; }

  Trial sample_trial(RngStream& rng) const;

  static double reaction_rate(double T_r) {
    return kArrhenius * std::exp(-kActivationEnergy / (kGasConstant * T_r));
  }

  void drift(const Trial& t, const double* x, const double* u, double* dx) const {
    const double c = x[0], T_r = x[1], T_c = x[2];
    const double k = reaction_rate(T_r);
    const double flow = t.q_r / t.V_r;
    const double heat = t.UA / (kDensity * t.C_p * t.V_r);
    dx[0] = flow * (kFeedConcentration - c) - k * c;
    dx[1] = flow * (t.T_f - T_r) + (-t.dH / (kDensity * t.C_p)) * k * c + heat * (T_c - T_r);
    dx[2] = u[0] / t.V_c * (t.T_cf - T_c) + heat * (T_r - T_c);
  }
  void apply_noise(const Trial&, double* x, double sqrt_dt, RngStream& rng) const {
    x[0] += 0.025 * sqrt_dt * rng.normal();
    x[1] += 3.0 * sqrt_dt * rng.normal();
    x[2] += 3.0 * sqrt_dt * rng.normal();
  }
  void observe(const Trial&, const double* x, RngStream& rng, double* y) const {
    obs_.observe(x, rng, y);
  }
  void clip(double* u) const {
    if (u[0] < 0.0) u[0] = 0.0;
    if (u[0] > 300.0) u[0] = 300.0;
  }
  void project(double* x) const {
    if (x[0] < 0.0) x[0] = 0.0;
  }
  double step_cost(const Trial& t, const double* x, const double* u) const {
    const double e = x[1] - t.target_temp;
    return 0.01 * e * e + 1e-4 * u[0] * u[0];
  }
  StepEvent check_event(const Trial&, const double*) const { return StepEvent::kContinue; }
  double finalize_fitness(const Trial&, double cost_sum, StepEvent, double, double) const {
    return -cost_sum;
  }
  double policy_target(const Trial& t) const { return t.target_temp; }

private:
  static ObservationModel make_obs();

  ObservationModel obs_;
};

}  // namespace sympolicy
