#include "sympolicy/simulate.hpp"

namespace sympolicy {

double fitness_quadratic(const Trajectory& traj, const Mat& Q, double r,
                         std::span<const double> xstar) {
  const int N = traj.state_dim;
  const int C = traj.control_dim;
  if (Q.rows != N || Q.cols != N || static_cast<int>(xstar.size()) != N) {
    throw ConfigError("fitness_quadratic: dimension mismatch");
  }
  double total = 0.0;
  for (int k = 0; k < traj.steps(); ++k) {
    const double* x = traj.x.data() + static_cast<std::size_t>(k) * N;
    const double* u = traj.u.data() + static_cast<std::size_t>(k) * C;
    double q = 0.0;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        q += (x[i] - xstar[static_cast<std::size_t>(i)]) * Q(i, j) *
             (x[j] - xstar[static_cast<std::size_t>(j)]);
      }
    }
    double effort = 0.0;
    for (int c = 0; c < C; ++c) effort += u[c] * u[c];
    total += q + r * effort;
  }
  return -total;
}

double fitness_swing_up(const Trajectory& traj, const Mat& R, double t_f) {
  const int C = traj.control_dim;
  if (R.rows != C || R.cols != C) throw ConfigError("fitness_swing_up: dimension mismatch");
  double effort = 0.0;
  for (int k = 0; k < traj.steps(); ++k) {
    const double* u = traj.u.data() + static_cast<std::size_t>(k) * C;
    for (int i = 0; i < C; ++i) {
      for (int j = 0; j < C; ++j) effort += u[i] * R(i, j) * u[j];
    }
  }
  return -t_f - effort;
}

}  // namespace sympolicy
