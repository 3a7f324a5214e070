#pragma once

// Experiment presets and the run/replay/aggregate machinery behind the CLI.
// A run is fully determined by (config, seed): trials, noise, evolution and
// validation all derive their substreams from the run seed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sympolicy/evolution.hpp"
#include "sympolicy/policies.hpp"
#include "sympolicy/simulate.hpp"

namespace sympolicy {

enum class ExperimentId {
  kShoNoise,
  kShoPartial,
  kShoVarying,
  kAcrobotNoise,
  kAcrobotPartial,
  kAcrobotTwoControls,
  kCstr,
};

std::vector<ExperimentId> all_experiments();
const char* to_string(ExperimentId id);
ExperimentId experiment_from_string(const std::string& name);

enum class Method { kGpStatic, kGpDynamic, kRandomSearch, kNdeCmaes, kLqg };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

struct ExperimentPreset {
  ExperimentId id = ExperimentId::kShoNoise;
  int population = 500;
  int generations = 30;
  int latent = 2;
  int obs = 2;
  int control = 1;
  int target = 1;
  FunctionSet fset = FunctionSet::arithmetic();
  SimParams sim;
  int batch = 32;
};

ExperimentPreset preset_for(ExperimentId id);

struct ExperimentConfig {
  ExperimentId experiment = ExperimentId::kShoNoise;
  Method method = Method::kGpDynamic;
  int population = 0;   // 0: preset value
  int generations = 0;  // 0: preset value
  int latent = -1;      // -1: preset value
  int batch = 0;        // 0: preset value
  int runs = 1;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: no files
  double dt = 0.0;       // 0: preset value
  double horizon = 0.0;  // 0: preset value
  int validation_batch = 128;

  // resolved view (preset merged with overrides)
  ExperimentPreset resolved() const;
};

struct RunRecord {
  ExperimentConfig config;
  std::uint64_t run_seed = 0;
  int run_index = 0;
  std::vector<GenerationStats> history;
  std::string best_policy_text;  // expression grammar, or flat-array text for the NDE
  bool best_is_nde = false;
  double best_train_fitness = 0.0;
  std::vector<double> validation_fitness;
  double validation_mean = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure;
};

// Executes one run (config.runs is ignored here; the caller loops).
RunRecord run_experiment(const ExperimentConfig& cfg, int run_index = 0);

// All configured runs; when cfg.out_dir is set each run is persisted under
// <out_dir>/run_<i>/.
std::vector<RunRecord> run_experiment_batch(const ExperimentConfig& cfg);

struct ReplayResult {
  double mean_fitness = 0.0;
  std::vector<double> per_trial;
  int non_finite_trials = 0;
  int success_trials = 0;
};

// Replays a serialized policy (symbolic grammar or NDE array file content)
// on a fresh trial batch; optionally dumps the first trial's trajectory as
// CSV (t, x..., y..., u..., a...).
ReplayResult replay_policy_text(const std::string& policy_text, ExperimentId id,
                                std::uint64_t batch_seed, int batch,
                                const SimParams* sim_override = nullptr,
                                const std::string& trajectory_csv = "");

// Runs the LQG baseline on a fresh batch (linear oscillator experiments only).
ReplayResult run_lqg_baseline(ExperimentId id, std::uint64_t batch_seed, int batch,
                              const SimParams* sim_override = nullptr);

// --- persistence -------------------------------------------------------------

void write_results(const RunRecord& record, const std::string& dir);
RunRecord read_record(const std::string& dir);

// Re-evaluates the stored best policy on the record's validation stream;
// bit-identical to record.validation_fitness.
std::vector<double> revalidate(const RunRecord& record);

// --- aggregation --------------------------------------------------------------

struct AggregateSummary {
  ExperimentId experiment = ExperimentId::kShoNoise;
  Method method = Method::kGpDynamic;
  int runs = 0;
  std::vector<double> mean_best_per_generation;
  std::vector<double> validation_means;  // one per run
  int best_run = -1;
  double best_validation = 0.0;
  std::string best_policy_text;
};

AggregateSummary aggregate_runs(const std::vector<RunRecord>& records);
void write_aggregate_csv(const AggregateSummary& summary, const std::string& path);

}  // namespace sympolicy
