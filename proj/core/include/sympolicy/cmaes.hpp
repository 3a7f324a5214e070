#pragma once

// Covariance matrix adaptation evolution strategy (maximization form) with
// the standard rank-mu update, cumulative step-size adaptation, and default
// strategy parameters. Drives the neural-ODE baseline.

#include <cstdint>
#include <memory>
#include <vector>

#include "sympolicy/rng.hpp"

namespace sympolicy {

struct CmaesConfig {
  int dimension = 0;
  int lambda = 0;               // 0 -> 4 + floor(3 ln n)
  double sigma0 = 0.5;
  std::vector<double> mean0;    // empty -> origin
};

int cmaes_default_lambda(int dimension);

class CmaEs {
public:
  explicit CmaEs(const CmaesConfig& config);
  ~CmaEs();
  CmaEs(CmaEs&&) noexcept;
  CmaEs& operator=(CmaEs&&) noexcept;

  int dimension() const;
  int lambda() const;
  int generation() const;
  double sigma() const;
  const std::vector<double>& mean() const;

  // lambda candidates from N(mean, sigma^2 C).
  std::vector<std::vector<double>> ask(RngStream& rng);

  // Rank-based update; higher fitness is better. Non-finite fitness values
  // are ranked worst.
  void tell(const std::vector<std::vector<double>>& candidates,
            const std::vector<double>& fitnesses);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sympolicy
