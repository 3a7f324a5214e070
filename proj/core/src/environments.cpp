#include "sympolicy/environments.hpp"

#include <cmath>

namespace sympolicy {

double wrap_angle(double theta) { return std::remainder(theta, 2.0 * AcrobotEnv::kPi); }

// ---------------------------------------------------------------------------
// SHO

ObservationModel ShoEnv::make_obs(Variant variant) {
  ObservationModel m;
  if (variant == Variant::kPartial) {
    m.D = Mat(1, 2);
    m.D(0, 0) = 1.0;  // position only
    m.noise_var = {0.3};
  } else {
    m.D = Mat::identity(2);
    m.noise_var = {0.3, 0.3};
  }
  return m;
}

ShoEnv::Trial ShoEnv::sample_trial(RngStream& rng) const {
  Trial t;
  if (variant_ == Variant::kVarying) {
    t.omega = rng.uniform(0.0, 2.0);
    t.zeta = rng.uniform(0.0, 1.5);
  }
  t.x0[0] = rng.normal(0.0, std::sqrt(3.0));
  t.x0[1] = rng.normal(0.0, 1.0);
  t.target_pos = rng.uniform(-3.0, 3.0);
  return t;
}

// ---------------------------------------------------------------------------
// Acrobot

ObservationModel AcrobotEnv::make_obs(Variant variant) {
  ObservationModel m;
  if (variant == Variant::kPartial) {
    m.D = Mat(2, 4);
    m.D(0, 0) = 1.0;  // angles only
    m.D(1, 1) = 1.0;
    m.noise_var = {0.3, 0.3};
  } else {
    m.D = Mat::identity(4);
    m.noise_var = {0.3, 0.3, 0.3, 0.3};
  }
  return m;
}

AcrobotEnv::Trial AcrobotEnv::sample_trial(RngStream& rng) const {
  Trial t;
  for (auto& v : t.x0) v = rng.uniform(-0.1, 0.1);
  return t;
}

void AcrobotEnv::drift(const Trial&, const double* x, const double* u, double* dx) const {
  const double th1 = x[0], th2 = x[1], th1d = x[2], th2d = x[3];
  const double s1 = std::sin(th1), c1 = std::cos(th1);
  const double s2 = std::sin(th2), c2 = std::cos(th2);
  const double s12 = s1 * c2 + c1 * s2;  // sin(th1 + th2)

  const double m = kMass, l1 = kLength, lc = kCom, I = kInertia, g = kGravity;

  const double d1 = m * lc * lc + m * (l1 * l1 + lc * lc + 2.0 * l1 * lc * c2) + I + I;
  const double d2 = m * (lc * lc + l1 * lc * c2) + I;
  const double phi2 = m * lc * g * s12;  // cos(th1 + th2 - pi/2) = sin(th1 + th2)
  const double phi1 = -m * l1 * lc * th2d * th2d * s2 - 2.0 * m * l1 * lc * th2d * th1d * s2 +
                      (m * lc + m * l1) * g * s1 + phi2;

  const double th2dd = (u[0] + d2 / d1 * phi1 - m * l1 * lc * th1d * th1d * s2 - phi2) /
                       (m * lc * lc + I - d2 * d2 / d1);
  const double th1dd = variant_ == Variant::kTwoControls
                           ? (u[1] - d2 * th2dd - phi1) / d1
                           : -(d2 * th2dd + phi1) / d1;

  dx[0] = th1d;
  dx[1] = th2d;
  dx[2] = th1dd;
  dx[3] = th2dd;
}

double AcrobotEnv::energy(const double* x) const {
  const double th1 = x[0], th2 = x[1], th1d = x[2], th2d = x[3];
  const double m = kMass, l1 = kLength, lc = kCom, I = kInertia, g = kGravity;
  const double c2 = std::cos(th2);
  const double d1 = m * lc * lc + m * (l1 * l1 + lc * lc + 2.0 * l1 * lc * c2) + I + I;
  const double d2 = m * (lc * lc + l1 * lc * c2) + I;
  const double kinetic =
      0.5 * d1 * th1d * th1d + d2 * th1d * th2d + 0.5 * (m * lc * lc + I) * th2d * th2d;
  const double potential =
      -(m * lc + m * l1) * g * std::cos(th1) - m * lc * g * std::cos(th1 + th2);
  return kinetic + potential;
}

// ---------------------------------------------------------------------------
// CSTR

ObservationModel CstrEnv::make_obs() {
  ObservationModel m;
  m.D = Mat(2, 3);
  m.D(0, 1) = 1.0;  // reactor temperature
  m.D(1, 2) = 1.0;  // cooling jacket temperature
  m.noise_var = {7.5, 7.5};
  return m;
}

CstrEnv::Trial CstrEnv::sample_trial(RngStream& rng) const {
  Trial t;
  t.x0[0] = rng.uniform(0.5, 1.0);
  t.x0[1] = rng.uniform(350.0, 375.0);
  t.x0[2] = rng.uniform(275.0, 300.0);
  t.target_temp = rng.uniform(400.0, 500.0);
  t.q_r = rng.uniform(75.0, 125.0);
  t.T_f = rng.uniform(300.0, 350.0);
  t.T_cf = rng.uniform(250.0, 300.0);
  t.V_r = rng.uniform(75.0, 150.0);
  t.V_c = rng.uniform(10.0, 30.0);
  t.dH = rng.uniform(-55000.0, -45000.0);
  t.C_p = rng.uniform(0.2, 0.35);
  t.UA = rng.uniform(25000.0, 75000.0);
  return t;
}

}  // namespace sympolicy
