#pragma once

// Fixed-step closed-loop integration of environment + policy over a batch of
// trials. Trials run in lockstep lanes so tree evaluation vectorizes across
// the batch; every lane owns its noise stream, which makes results
// independent of batching and scheduling.
//
// Running cost accumulates as a time integral (dt-weighted sum over recorded
// steps), so fitness magnitudes are horizon-scaled, not step-count-scaled;
// the sparse swing-up time term is already in time units.
//
// Step order (index k, time t = k dt):
//   1. termination check on the current state,
//   2. observe y_k,
//   3. latent-first policies (the LQG filter) advance their latent with
//      (a_k, y_k, u_{k-1}),
//   4. control u_k is read out (from a_k, or y_k for static policies) and
//      clipped per environment,
//   5. cost accumulates on (x_k, u_k),
//   6. x advances one Euler(-Heun, additive noise) step,
//   7. latent-last policies advance their latent with (a_k, y_k, u_{k-1}).
// The raw (pre-clipping) readout becomes u_prev for the next step; it is
// zero at t0.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sympolicy/environments.hpp"
#include "sympolicy/policies.hpp"

namespace sympolicy {

struct SimParams {
  double horizon = 30.0;
  double dt = 0.02;
  double floor_penalty = -1e6;
};

enum class TrialOutcome : std::uint8_t { kHorizon, kSuccess, kAbort, kNonFinite };

struct BatchResult {
  std::vector<double> fitness;
  std::vector<TrialOutcome> outcome;
  std::vector<double> end_time;

  double mean_fitness() const {
    double s = 0.0;
    for (double f : fitness) s += f;
    return fitness.empty() ? 0.0 : s / static_cast<double>(fitness.size());
  }
};

struct Trajectory {
  int state_dim = 0, obs_dim = 0, control_dim = 0, latent_dim = 0;
  std::vector<double> t;
  std::vector<double> x;  // step-major
  std::vector<double> y;
  std::vector<double> u;  // applied (clipped) control
  std::vector<double> a;

  int steps() const { return static_cast<int>(t.size()); }
};

// One predictor-corrector step for a Stratonovich SDE with state-dependent
// diffusion: dW ~ N(0, dt I); predictor xp = x + f(x) dt + V(x) dW;
// corrected x' = x + f(x) dt + 1/2 (V(x) + V(xp)) dW. With constant V this
// reduces to Euler-Maruyama.
template <class Drift, class Diffusion>
void euler_heun_step(const Drift& drift, const Diffusion& diffusion, std::span<double> state,
                     int noise_dim, double dt, RngStream& rng) {
  const int n = static_cast<int>(state.size());
  std::vector<double> f(n), v0(static_cast<std::size_t>(n) * noise_dim),
      v1(static_cast<std::size_t>(n) * noise_dim), dw(noise_dim), xp(n);
  drift(state.data(), f.data());
  diffusion(state.data(), v0.data());
  const double sqrt_dt = std::sqrt(dt);
  for (int k = 0; k < noise_dim; ++k) dw[static_cast<std::size_t>(k)] = sqrt_dt * rng.normal();
  for (int i = 0; i < n; ++i) {
    double noise = 0.0;
    for (int k = 0; k < noise_dim; ++k) {
      noise += v0[static_cast<std::size_t>(i) * noise_dim + k] * dw[static_cast<std::size_t>(k)];
    }
    xp[static_cast<std::size_t>(i)] = state[static_cast<std::size_t>(i)] + f[i] * dt + noise;
  }
  diffusion(xp.data(), v1.data());
  for (int i = 0; i < n; ++i) {
    double noise = 0.0;
    for (int k = 0; k < noise_dim; ++k) {
      noise += 0.5 *
               (v0[static_cast<std::size_t>(i) * noise_dim + k] +
                v1[static_cast<std::size_t>(i) * noise_dim + k]) *
               dw[static_cast<std::size_t>(k)];
    }
    state[static_cast<std::size_t>(i)] += f[i] * dt + noise;
  }
}

namespace detail {

constexpr double kLatentLimit = 1e30;

template <class Policy>
int policy_obs_dim(const Policy& p, int fallback) {
  if constexpr (requires { p.obs_dim(); }) {
    return p.obs_dim();
  } else {
    return fallback;
  }
}

}  // namespace detail

// Samples trial conditions and assigns per-trial noise substreams. Trial i
// of a batch is fully determined by (batch_seed, i).
template <class Env>
std::vector<typename Env::Trial> make_trials(const Env& env, std::uint64_t batch_seed, int n) {
  std::vector<typename Env::Trial> trials;
  trials.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RngStream ts(derive_seed(batch_seed, 0xA11CE, static_cast<std::uint64_t>(i)));
    auto trial = env.sample_trial(ts);
    trial.noise_seed = derive_seed(batch_seed, 0xB0B, static_cast<std::uint64_t>(i));
    trials.push_back(trial);
  }
  return trials;
}

template <class Env, class Policy>
BatchResult simulate_batch(const Env& env, const Policy& policy,
                           std::span<const typename Env::Trial> trials, const SimParams& sp,
                           std::vector<Trajectory>* recordings = nullptr) {
  constexpr int N = Env::kStateDim;
  const int B = static_cast<int>(trials.size());
  const int M = env.obs_dim();
  const int C = env.control_dim();
  const int H = policy.latent_dim();
  const int P = 1;  // scalar policy target in every experiment

  if (policy.control_dim() != C) throw ConfigError("policy/environment control dim mismatch");
  if (detail::policy_obs_dim(policy, M) != M) {
    throw ConfigError("policy/environment observation dim mismatch");
  }

  BatchResult result;
  result.fitness.assign(static_cast<std::size_t>(B), 0.0);
  result.outcome.assign(static_cast<std::size_t>(B), TrialOutcome::kHorizon);
  result.end_time.assign(static_cast<std::size_t>(B), 0.0);
  if (B == 0) return result;

  if (recordings) {
    recordings->assign(static_cast<std::size_t>(B), Trajectory{});
    for (auto& rec : *recordings) {
      rec.state_dim = N;
      rec.obs_dim = M;
      rec.control_dim = C;
      rec.latent_dim = H;
    }
  }

  const long T = std::lround(sp.horizon / sp.dt);
  const double horizon_time = static_cast<double>(T) * sp.dt;
  const double sqrt_dt = std::sqrt(sp.dt);

  // lane-major state, row-major everything the trees touch
  std::vector<double> X(static_cast<std::size_t>(B) * N);
  std::vector<double> Y(static_cast<std::size_t>(std::max(M, 1)) * B);
  std::vector<double> A(static_cast<std::size_t>(std::max(H, 1)) * B, 0.0);
  std::vector<double> ADOT(static_cast<std::size_t>(std::max(H, 1)) * B, 0.0);
  std::vector<double> U(static_cast<std::size_t>(C) * B, 0.0);
  std::vector<double> UPREV(static_cast<std::size_t>(C) * B, 0.0);
  std::vector<double> TGT(static_cast<std::size_t>(P) * B);
  std::vector<double> scratch(static_cast<std::size_t>(std::max(policy.scratch_rows(), 1)) * B);
  std::vector<double> cost(static_cast<std::size_t>(B), 0.0);
  std::vector<RngStream> eng;
  eng.reserve(static_cast<std::size_t>(B));

  std::vector<const double*> y_rows(static_cast<std::size_t>(std::max(M, 1)));
  std::vector<const double*> a_rows(static_cast<std::size_t>(std::max(H, 1)));
  std::vector<const double*> uprev_rows(static_cast<std::size_t>(C));
  std::vector<const double*> tgt_rows(static_cast<std::size_t>(P));
  std::vector<double*> u_out_rows(static_cast<std::size_t>(C));
  std::vector<double*> adot_rows(static_cast<std::size_t>(std::max(H, 1)));
  for (int m = 0; m < M; ++m) y_rows[static_cast<std::size_t>(m)] = Y.data() + m * B;
  for (int h = 0; h < H; ++h) a_rows[static_cast<std::size_t>(h)] = A.data() + h * B;
  for (int c = 0; c < C; ++c) uprev_rows[static_cast<std::size_t>(c)] = UPREV.data() + c * B;
  tgt_rows[0] = TGT.data();
  for (int c = 0; c < C; ++c) u_out_rows[static_cast<std::size_t>(c)] = U.data() + c * B;
  for (int h = 0; h < H; ++h) adot_rows[static_cast<std::size_t>(h)] = ADOT.data() + h * B;

  for (int l = 0; l < B; ++l) {
    const auto& trial = trials[static_cast<std::size_t>(l)];
    for (int i = 0; i < N; ++i) X[static_cast<std::size_t>(l) * N + i] = trial.x0[i];
    TGT[static_cast<std::size_t>(l)] = env.policy_target(trial);
    eng.emplace_back(trial.noise_seed);
    if constexpr (requires { policy.initial_latent(0, static_cast<double*>(nullptr)); }) {
      double a0[16];
      policy.initial_latent(l, a0);
      for (int h = 0; h < H; ++h) A[static_cast<std::size_t>(h) * B + l] = a0[h];
    }
  }

  std::vector<int> active(static_cast<std::size_t>(B));
  for (int l = 0; l < B; ++l) active[static_cast<std::size_t>(l)] = l;
  std::vector<std::uint8_t> done(static_cast<std::size_t>(B), 0);

  LaneBlock control_io{B,          a_rows.data(),     y_rows.data(), uprev_rows.data(),
                       tgt_rows.data(), u_out_rows.data(), scratch.data()};
  LaneBlock latent_io{B,          a_rows.data(),   y_rows.data(), uprev_rows.data(),
                      tgt_rows.data(), adot_rows.data(), scratch.data()};

  auto finish = [&](int lane, TrialOutcome oc, double event_time) {
    done[static_cast<std::size_t>(lane)] = 1;
    result.outcome[static_cast<std::size_t>(lane)] = oc;
    result.end_time[static_cast<std::size_t>(lane)] = event_time;
    if (oc == TrialOutcome::kNonFinite) {
      result.fitness[static_cast<std::size_t>(lane)] = sp.floor_penalty;
    } else {
      const StepEvent ev =
          oc == TrialOutcome::kSuccess ? StepEvent::kSuccess : StepEvent::kAbort;
      result.fitness[static_cast<std::size_t>(lane)] = env.finalize_fitness(
          trials[static_cast<std::size_t>(lane)], cost[static_cast<std::size_t>(lane)],
          oc == TrialOutcome::kHorizon ? StepEvent::kContinue : ev, event_time, horizon_time);
    }
  };

  double ytmp[8];
  double utmp[4];

  for (long k = 0; k <= T && !active.empty(); ++k) {
    const double t = static_cast<double>(k) * sp.dt;

    // 1. termination on the current state
    for (std::size_t idx = 0; idx < active.size();) {
      const int l = active[idx];
      const auto& trial = trials[static_cast<std::size_t>(l)];
      const StepEvent ev = env.check_event(trial, &X[static_cast<std::size_t>(l) * N]);
      if (ev != StepEvent::kContinue) {
        finish(l,
               ev == StepEvent::kSuccess ? TrialOutcome::kSuccess : TrialOutcome::kAbort, t);
        active[idx] = active.back();
        active.pop_back();
        continue;
      }
      ++idx;
    }
    if (active.empty()) break;

    // 2. observe
    for (const int l : active) {
      const auto& trial = trials[static_cast<std::size_t>(l)];
      env.observe(trial, &X[static_cast<std::size_t>(l) * N], eng[static_cast<std::size_t>(l)],
                  ytmp);
      for (int m = 0; m < M; ++m) Y[static_cast<std::size_t>(m) * B + l] = ytmp[m];
    }

    // 3. latent-first policies advance the latent before reading out
    if (H > 0 && policy.latent_before_control()) {
      policy.latent_derivative(latent_io);
      for (int h = 0; h < H; ++h) {
        double* a = A.data() + static_cast<std::size_t>(h) * B;
        const double* ad = ADOT.data() + static_cast<std::size_t>(h) * B;
        for (const int l : active) {
          double v = a[l] + sp.dt * ad[l];
          if (v > detail::kLatentLimit) v = detail::kLatentLimit;
          if (v < -detail::kLatentLimit) v = -detail::kLatentLimit;
          a[l] = v;
        }
      }
    }

    // 4. control readout
    policy.control(control_io);

    // 5. cost on (x_k, clipped u_k), accumulated as a time integral; record
    for (const int l : active) {
      const auto& trial = trials[static_cast<std::size_t>(l)];
      for (int c = 0; c < C; ++c) utmp[c] = U[static_cast<std::size_t>(c) * B + l];
      env.clip(utmp);
      cost[static_cast<std::size_t>(l)] +=
          sp.dt * env.step_cost(trial, &X[static_cast<std::size_t>(l) * N], utmp);
      if (recordings) {
        auto& rec = (*recordings)[static_cast<std::size_t>(l)];
        rec.t.push_back(t);
        for (int i = 0; i < N; ++i) rec.x.push_back(X[static_cast<std::size_t>(l) * N + i]);
        for (int m = 0; m < M; ++m) rec.y.push_back(Y[static_cast<std::size_t>(m) * B + l]);
        for (int c = 0; c < C; ++c) rec.u.push_back(utmp[c]);
        for (int h = 0; h < H; ++h) rec.a.push_back(A[static_cast<std::size_t>(h) * B + l]);
      }

      // 6. advance the environment state (skipped on the final record)
      if (k < T) {
        double* x = &X[static_cast<std::size_t>(l) * N];
        double dx[N];
        env.drift(trial, x, utmp, dx);
        for (int i = 0; i < N; ++i) x[i] += sp.dt * dx[i];
        env.apply_noise(trial, x, sqrt_dt, eng[static_cast<std::size_t>(l)]);
        env.project(x);
        bool finite = true;
        for (int i = 0; i < N; ++i) finite &= std::isfinite(x[i]);
        if (!finite) {
          finish(l, TrialOutcome::kNonFinite, t);
        }
      }
    }
    // drop lanes that went non-finite
    for (std::size_t idx = 0; idx < active.size();) {
      if (done[static_cast<std::size_t>(active[idx])]) {
        active[idx] = active.back();
        active.pop_back();
      } else {
        ++idx;
      }
    }

    if (k == T) break;

    // 7. latent-last policies integrate with this step's y and the previous
    //    control
    if (H > 0 && !policy.latent_before_control()) {
      policy.latent_derivative(latent_io);
      for (int h = 0; h < H; ++h) {
        double* a = A.data() + static_cast<std::size_t>(h) * B;
        const double* ad = ADOT.data() + static_cast<std::size_t>(h) * B;
        for (const int l : active) {
          double v = a[l] + sp.dt * ad[l];
          if (v > detail::kLatentLimit) v = detail::kLatentLimit;
          if (v < -detail::kLatentLimit) v = -detail::kLatentLimit;
          a[l] = v;
        }
      }
    }

    // the raw readout becomes the next step's u_prev
    for (int c = 0; c < C; ++c) {
      double* up = UPREV.data() + static_cast<std::size_t>(c) * B;
      const double* u = U.data() + static_cast<std::size_t>(c) * B;
      for (const int l : active) up[l] = u[l];
    }
  }

  // lanes that ran the full horizon
  for (std::size_t l = 0; l < static_cast<std::size_t>(B); ++l) {
    if (!done[l]) {
      result.outcome[l] = TrialOutcome::kHorizon;
      result.end_time[l] = horizon_time;
      result.fitness[l] = env.finalize_fitness(trials[l], cost[l], StepEvent::kContinue,
                                               horizon_time, horizon_time);
    }
  }
  return result;
}

template <class Env, class Policy>
BatchResult simulate_trials(const Env& env, const Policy& policy, std::uint64_t batch_seed,
                            int batch_size, const SimParams& sp,
                            std::vector<Trajectory>* recordings = nullptr) {
  const auto trials = make_trials(env, batch_seed, batch_size);
  return simulate_batch(env, policy,
                        std::span<const typename Env::Trial>(trials.data(), trials.size()), sp,
                        recordings);
}

// Mean fitness over a batch of trials with common random numbers: the same
// batch_seed produces the same trials and noise for every policy, so
// comparisons between policies are paired.
template <class Env, class Policy>
double evaluate_policy(const Env& env, const Policy& policy, std::uint64_t batch_seed,
                       int batch_size, const SimParams& sp) {
  return simulate_trials(env, policy, batch_seed, batch_size, sp).mean_fitness();
}

// Trajectory-based fitness definitions; the streaming accumulation in
// simulate_batch is tested against these.
double fitness_quadratic(const Trajectory& traj, const Mat& Q, double r,
                         std::span<const double> xstar);
double fitness_swing_up(const Trajectory& traj, const Mat& R, double t_f);

}  // namespace sympolicy
