#pragma once

// Multi-tree genetic programming engine. Individuals hold one tree per
// control output (static) or one per latent dimension plus one per control
// output (dynamic). Islands evolve independently with graded
// exploration/exploitation profiles and exchange elites on a ring.
//
// Selection uses the size-regularized fitness; raw fitness is what gets
// reported. Offspring that break the depth bound or the latent-reference
// constraint are retried a bounded number of times, then the parents are
// cloned into the next generation.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sympolicy/expr.hpp"

namespace sympolicy {

struct Individual {
  std::vector<ExprTree> trees;
  std::optional<double> fitness;              // raw batch mean
  std::optional<double> regularized_fitness;  // selection key

  int total_nodes() const {
    int n = 0;
    for (const auto& t : trees) n += t.node_count();
    return n;
  }
};

struct TreeRole {
  SignaturePtr signature;
  bool requires_latent_ref = false;
};

struct ReproductionMix {
  double crossover = 0.60;
  double mutation = 0.25;
  double simplify = 0.05;
  double sample = 0.10;
  // crossover variant split
  double cx_subtree = 0.60;
  double cx_uniform = 0.20;
  double cx_tree_swap = 0.20;
};

struct GpConfig {
  int population_size = 500;
  int generations = 30;
  double elite_fraction = 0.1;
  int latent_dim = 0;  // 0: static individuals
  int control_dim = 1;
  int obs_dim = 2;
  int target_dim = 1;
  FunctionSet fset = FunctionSet::arithmetic();
  std::vector<TreeRole> roles;  // derived; call finalize()
  int subpopulations = 4;
  std::vector<ReproductionMix> mixes;  // per island; derived when empty
  int tournament_size = 5;
  double size_penalty = 0.01;
  int init_depth = 4;  // ramped half-and-half over depths 2..init_depth
  int max_depth = 7;
  int migration_interval = 10;
  int migration_count = 2;
  int batch_size = 32;
  std::uint64_t seed = 0;

  bool is_dynamic() const { return latent_dim > 0; }
  int tree_count() const { return latent_dim + control_dim; }

  // Builds roles and island mixes from the dimensional fields.
  void finalize();
  void validate() const;

  // Island profiles graded from exploitation (low mutation/sampling) to
  // exploration; a single island keeps the default mix.
  static std::vector<ReproductionMix> graded_mixes(int islands);
};

struct Population {
  std::vector<std::vector<Individual>> islands;
  int generation = 0;

  int size() const {
    int n = 0;
    for (const auto& isl : islands) n += static_cast<int>(isl.size());
    return n;
  }
};

struct IslandStats {
  double best_raw = 0.0;
  double best_reg = 0.0;
  double mean_raw = 0.0;
  std::string best_texts;  // ';'-joined rendered trees of the island best
};

struct GenerationStats {
  int generation = 0;
  std::vector<IslandStats> islands;
  double best_raw = 0.0;
  double best_reg = 0.0;
  double best_ever_raw = 0.0;
  double best_ever_reg = 0.0;
};

// Evaluates one individual on the generation's trial batch; eval_seed is
// shared by every individual of a generation, so fitness comparisons within
// a generation are paired.
using Evaluator = std::function<double(const Individual&, std::uint64_t eval_seed)>;
using GenObserver = std::function<void(const Population&, const GenerationStats&)>;

struct GpResult {
  Individual best;  // best-ever by regularized fitness
  double best_raw = 0.0;
  double best_reg = 0.0;
  std::vector<GenerationStats> history;
};

// --- operations -------------------------------------------------------------

Population init_population(const GpConfig& cfg, RngStream& rng);

const Individual& tournament_select(std::span<const Individual> pool, int k, RngStream& rng);

std::pair<Individual, Individual> crossover_subtree(const Individual& a, const Individual& b,
                                                    const GpConfig& cfg, RngStream& rng);
std::pair<Individual, Individual> crossover_uniform(const Individual& a, const Individual& b,
                                                    const GpConfig& cfg, RngStream& rng);
std::pair<Individual, Individual> crossover_tree_swap(const Individual& a, const Individual& b,
                                                      const GpConfig& cfg, RngStream& rng);
Individual mutate(const Individual& a, const GpConfig& cfg, RngStream& rng);

double regularized_fitness(double raw, const Individual& ind, double penalty_coeff);

bool satisfies_constraints(const Individual& ind, const GpConfig& cfg);

// Builds the next generation from an evaluated population (elites, then
// reproduction per the island's mix). Fitness of all individuals must be
// present.
Population step_generation(const Population& pop, const GpConfig& cfg, RngStream& rng);

GpResult run_gp(const GpConfig& cfg, const Evaluator& evaluator,
                const GenObserver& observer = {});

}  // namespace sympolicy
