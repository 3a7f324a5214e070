// Command-line front end: run experiments, replay stored policies, and
// aggregate run directories. SYMPOLICY_THREADS caps worker parallelism.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sympolicy/experiment.hpp"

namespace fs = std::filesystem;
using namespace sympolicy;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_list_presets() {
  std::printf("%-14s %6s %6s %7s %8s %9s %7s  %s\n", "experiment", "pop", "gens", "latent",
              "horizon", "dt", "batch", "functions");
  for (ExperimentId id : all_experiments()) {
    const auto p = preset_for(id);
    std::string ops;
    for (Op op : p.fset.ops) {
      if (!ops.empty()) ops += ' ';
      ops += op_name(op);
    }
    std::printf("%-14s %6d %6d %7d %8.4g %9.4g %7d  %s\n", to_string(id), p.population,
                p.generations, p.latent, p.sim.horizon, p.sim.dt, p.batch, ops.c_str());
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const auto records = run_experiment_batch(cfg);
  bool any_failed = false;
  for (const auto& r : records) {
    if (r.failed) {
      any_failed = true;
      std::printf("run %d FAILED: %s\n", r.run_index, r.failure.c_str());
      continue;
    }
    std::printf("run %d: best train fitness %.4f, validation mean %.4f (%.1fs)\n", r.run_index,
                r.best_train_fitness, r.validation_mean, r.wall_seconds);
  }
  if (records.size() > 1 && !any_failed) {
    const auto summary = aggregate_runs(records);
    std::printf("best run: %d with validation %.4f\n", summary.best_run,
                summary.best_validation);
    if (!cfg.out_dir.empty()) {
      write_aggregate_csv(summary, cfg.out_dir + "/aggregate.csv");
    }
  }
  return any_failed ? 1 : 0;
}

int cmd_replay(const std::string& policy_path, const std::string& experiment,
               std::uint64_t seed, int batch, const std::string& out_csv, double dt,
               double horizon) {
  const ExperimentId id = experiment_from_string(experiment);
  SimParams sim = preset_for(id).sim;
  if (dt > 0) sim.dt = dt;
  if (horizon > 0) sim.horizon = horizon;
  const auto result =
      replay_policy_text(read_file(policy_path), id, seed, batch, &sim, out_csv);
  std::printf("mean fitness over %d trials: %.6f\n", batch, result.mean_fitness);
  if (result.success_trials > 0) std::printf("successful trials: %d\n", result.success_trials);
  if (result.non_finite_trials > 0) {
    std::printf("non-finite trials (floored): %d\n", result.non_finite_trials);
  }
  if (!out_csv.empty()) std::printf("trajectory written to %s\n", out_csv.c_str());
  return 0;
}

int cmd_aggregate(const std::string& dir, const std::string& out_csv) {
  std::vector<RunRecord> records;
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0) {
      run_dirs.push_back(entry.path());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  for (const auto& p : run_dirs) records.push_back(read_record(p.string()));
  if (records.empty()) {
    std::fprintf(stderr, "no run_* directories under %s\n", dir.c_str());
    return 1;
  }
  const auto summary = aggregate_runs(records);
  std::printf("%s / %s over %d runs\n", to_string(summary.experiment),
              to_string(summary.method), summary.runs);
  for (std::size_t r = 0; r < summary.validation_means.size(); ++r) {
    std::printf("  run %zu validation %.4f\n", r, summary.validation_means[r]);
  }
  std::printf("best run %d validation %.4f\n", summary.best_run, summary.best_validation);
  write_aggregate_csv(summary, out_csv.empty() ? dir + "/aggregate.csv" : out_csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symbolic control policy discovery"};
  app.require_subcommand(1);

  app.add_subcommand("list-presets", "show the built-in experiment presets");

  auto* run = app.add_subcommand("run", "run an experiment");
  std::string experiment, method, out_dir;
  int pop = 0, gens = 0, runs = 1, batch = 0, latent = -1, validation = 128;
  std::uint64_t seed = 0;
  double dt = 0.0, horizon = 0.0;
  run->add_option("--experiment", experiment, "experiment id (see list-presets)")->required();
  run->add_option("--method", method, "gp-static | gp-dynamic | random-search | nde-cmaes | lqg")
      ->required();
  run->add_option("--pop", pop, "population size (0: preset)");
  run->add_option("--gens", gens, "generations (0: preset)");
  run->add_option("--latent", latent, "latent dimension (-1: preset)");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--runs", runs, "independent runs");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--dt", dt, "integration step (0: preset)");
  run->add_option("--horizon", horizon, "trial horizon (0: preset)");
  run->add_option("--batch", batch, "trials per evaluation (0: preset)");
  run->add_option("--validation-batch", validation, "validation trials");

  auto* replay = app.add_subcommand("replay", "replay a stored policy");
  std::string policy_path, rep_experiment, rep_out;
  std::uint64_t rep_seed = 0;
  int rep_batch = 128;
  double rep_dt = 0.0, rep_horizon = 0.0;
  replay->add_option("--policy", policy_path, "policy file (.txt or .params)")->required();
  replay->add_option("--experiment", rep_experiment, "experiment id")->required();
  replay->add_option("--seed", rep_seed, "trial batch seed");
  replay->add_option("--batch", rep_batch, "number of trials");
  replay->add_option("--out", rep_out, "trajectory CSV for the first trial");
  replay->add_option("--dt", rep_dt, "integration step (0: preset)");
  replay->add_option("--horizon", rep_horizon, "trial horizon (0: preset)");

  auto* aggregate = app.add_subcommand("aggregate", "aggregate run directories");
  std::string agg_dir, agg_out;
  aggregate->add_option("--dir", agg_dir, "directory holding run_*/ results")->required();
  aggregate->add_option("--out", agg_out, "aggregate CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("list-presets")) return cmd_list_presets();
    if (app.got_subcommand("run")) {
      ExperimentConfig cfg;
      cfg.experiment = experiment_from_string(experiment);
      cfg.method = method_from_string(method);
      cfg.population = pop;
      cfg.generations = gens;
      cfg.latent = latent;
      cfg.batch = batch;
      cfg.runs = runs;
      cfg.seed = seed;
      cfg.out_dir = out_dir;
      cfg.dt = dt;
      cfg.horizon = horizon;
      cfg.validation_batch = validation;
      return cmd_run(cfg);
    }
    if (app.got_subcommand("replay")) {
      return cmd_replay(policy_path, rep_experiment, rep_seed, rep_batch, rep_out, rep_dt,
                        rep_horizon);
    }
    if (app.got_subcommand("aggregate")) return cmd_aggregate(agg_dir, agg_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
