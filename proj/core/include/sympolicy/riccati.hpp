#pragma once

// Continuous-time algebraic Riccati solutions, obtained by integrating the
// Riccati ODE to stationarity. Dimensions here are tiny (the linear
// benchmark is 2x2), so the ODE route is simple and ample.

#include <vector>

#include "sympolicy/linalg.hpp"

namespace sympolicy {

struct RiccatiOptions {
  double dt = 1e-3;
  double stall_tol = 1e-13;    // stop when ||dP/dt||_F falls below this
  double max_time = 2000.0;    // integration budget in ODE time
  double residual_tol = 1e-8;  // required algebraic residual
};

// Solves A'P + PA - P b r^{-1} b' P + Q = 0. Throws ConfigError when the
// iteration budget is exhausted before the residual tolerance is met.
Mat solve_control_riccati(const Mat& A, const std::vector<double>& b, const Mat& Q, double r,
                          const RiccatiOptions& opts = {});

// Dual (filter) equation: A P + P A' - P D' Sigma^{-1} D P + V V' = 0.
Mat solve_filter_riccati(const Mat& A, const Mat& V, const Mat& D, const Mat& Sigma,
                         const RiccatiOptions& opts = {});

double control_riccati_residual(const Mat& A, const std::vector<double>& b, const Mat& Q,
                                double r, const Mat& P);
double filter_riccati_residual(const Mat& A, const Mat& V, const Mat& D, const Mat& Sigma,
                               const Mat& P);

// K = r^{-1} b' P (row vector).
std::vector<double> lqr_gain(const Mat& P, const std::vector<double>& b, double r);

// L = P D' Sigma^{-1}.
Mat kalman_gain(const Mat& P, const Mat& D, const Mat& Sigma);

// All eigenvalues strictly in the left half-plane.
bool is_hurwitz(const Mat& M);

}  // namespace sympolicy
