#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sympolicy/experiment.hpp"

using namespace sympolicy;
namespace fs = std::filesystem;

#ifndef SYMPOLICY_TEST_DATA
#define SYMPOLICY_TEST_DATA "tests/data"
#endif

namespace {

std::string fixture(const std::string& name) {
  return std::string(SYMPOLICY_TEST_DATA) + "/reference_policies/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  const char* file;
  ExperimentId id;
};

const Fixture kFixtures[] = {
    {"sho_noise_static.txt", ExperimentId::kShoNoise},
    {"sho_noise_dynamic.txt", ExperimentId::kShoNoise},
    {"sho_partial_static.txt", ExperimentId::kShoPartial},
    {"sho_partial_dynamic.txt", ExperimentId::kShoPartial},
    {"sho_varying_static.txt", ExperimentId::kShoVarying},
    {"sho_varying_dynamic.txt", ExperimentId::kShoVarying},
    {"acrobot_noise_static.txt", ExperimentId::kAcrobotNoise},
    {"acrobot_noise_dynamic.txt", ExperimentId::kAcrobotNoise},
    {"acrobot_partial_dynamic.txt", ExperimentId::kAcrobotPartial},
    {"acrobot_two_u_static.txt", ExperimentId::kAcrobotTwoControls},
    {"acrobot_two_u_dynamic.txt", ExperimentId::kAcrobotTwoControls},
    {"cstr_static.txt", ExperimentId::kCstr},
    {"cstr_dynamic.txt", ExperimentId::kCstr},
};

ExperimentConfig desk_config(ExperimentId id, Method method, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.experiment = id;
  cfg.method = method;
  cfg.population = 24;
  cfg.generations = 3;
  cfg.batch = 8;
  cfg.validation_batch = 16;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("presets match the published hyperparameter rows") {
  struct Row {
    ExperimentId id;
    int pop, gens, latent;
    std::size_t ops;
  };
  const Row rows[] = {
      {ExperimentId::kShoNoise, 500, 30, 2, 5},
      {ExperimentId::kShoPartial, 500, 50, 2, 5},
      {ExperimentId::kShoVarying, 1000, 100, 2, 5},
      {ExperimentId::kAcrobotNoise, 500, 50, 2, 7},
      {ExperimentId::kAcrobotPartial, 500, 50, 2, 7},
      {ExperimentId::kAcrobotTwoControls, 1000, 50, 3, 7},
      {ExperimentId::kCstr, 1000, 100, 2, 7},
  };
  for (const auto& row : rows) {
    const auto p = preset_for(row.id);
    CHECK(p.population == row.pop);
    CHECK(p.generations == row.gens);
    CHECK(p.latent == row.latent);
    CHECK(p.fset.ops.size() == row.ops);
    CHECK(p.batch == 32);
  }
  CHECK(preset_for(ExperimentId::kAcrobotTwoControls).control == 2);
  CHECK(preset_for(ExperimentId::kShoPartial).obs == 1);
  CHECK(preset_for(ExperimentId::kCstr).obs == 2);
}

TEST_CASE("experiment and method names round trip") {
  for (ExperimentId id : all_experiments()) {
    CHECK(experiment_from_string(to_string(id)) == id);
  }
  CHECK_THROWS_AS(experiment_from_string("cartpole"), ConfigError);
  CHECK(method_from_string("gp-dynamic") == Method::kGpDynamic);
  CHECK_THROWS_AS(method_from_string("sgd"), ConfigError);
}

TEST_CASE("lqg method produces a single validation score and no history") {
  auto cfg = desk_config(ExperimentId::kShoNoise, Method::kLqg, 3);
  const auto record = run_experiment(cfg);
  REQUIRE(!record.failed);
  CHECK(record.history.empty());
  CHECK(record.validation_fitness.size() == 16);
  CHECK(std::isfinite(record.validation_mean));
}

TEST_CASE("lqg on a nonlinear environment is a configuration error") {
  auto cfg = desk_config(ExperimentId::kAcrobotNoise, Method::kLqg, 3);
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("gp-dynamic run produces history and a parseable policy") {
  auto cfg = desk_config(ExperimentId::kShoNoise, Method::kGpDynamic, 4);
  const auto record = run_experiment(cfg);
  REQUIRE(!record.failed);
  CHECK(record.history.size() == 3);
  const auto policy = policy_from_text(record.best_policy_text);
  REQUIRE(std::holds_alternative<DynamicTreePolicy>(policy));
  CHECK(std::get<DynamicTreePolicy>(policy).latent_dim() == 2);
  CHECK(record.validation_fitness.size() == 16);
}

TEST_CASE("random search history is a running best over samples") {
  auto cfg = desk_config(ExperimentId::kShoNoise, Method::kRandomSearch, 5);
  const auto record = run_experiment(cfg);
  REQUIRE(!record.failed);
  REQUIRE(record.history.size() == 3);
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& gen : record.history) {
    CHECK(gen.best_raw >= prev);
    prev = gen.best_raw;
  }
  const auto policy = policy_from_text(record.best_policy_text);
  CHECK(std::holds_alternative<DynamicTreePolicy>(policy));
}

TEST_CASE("nde-cmaes run trains a parameter vector") {
  auto cfg = desk_config(ExperimentId::kShoNoise, Method::kNdeCmaes, 6);
  cfg.population = 12;
  cfg.generations = 2;
  const auto record = run_experiment(cfg);
  REQUIRE(!record.failed);
  CHECK(record.best_is_nde);
  const auto policy = nde_from_text(record.best_policy_text);
  CHECK(policy.shape().obs == 2);
  CHECK(record.history.size() == 2);
}

TEST_CASE("results round trip through the file system") {
  const std::string dir = (fs::temp_directory_path() / "sympolicy_test_run").string();
  fs::remove_all(dir);
  auto cfg = desk_config(ExperimentId::kShoPartial, Method::kGpDynamic, 7);
  cfg.out_dir = dir;
  cfg.runs = 1;
  const auto records = run_experiment_batch(cfg);
  REQUIRE(records.size() == 1);
  REQUIRE(!records[0].failed);
  CHECK(fs::exists(dir + "/run_0/config.json"));
  CHECK(fs::exists(dir + "/run_0/history.csv"));
  CHECK(fs::exists(dir + "/run_0/best_policy.txt"));
  CHECK(fs::exists(dir + "/run_0/validation.csv"));

  const auto loaded = read_record(dir + "/run_0");
  CHECK(loaded.config.experiment == ExperimentId::kShoPartial);
  CHECK(loaded.config.method == Method::kGpDynamic);
  CHECK(loaded.run_seed == records[0].run_seed);
  REQUIRE(loaded.validation_fitness.size() == records[0].validation_fitness.size());
  for (std::size_t i = 0; i < loaded.validation_fitness.size(); ++i) {
    REQUIRE(loaded.validation_fitness[i] == records[0].validation_fitness[i]);
  }
  REQUIRE(loaded.history.size() == records[0].history.size());

  // replaying the stored policy reproduces the validation bit-exactly
  const auto revalidated = revalidate(loaded);
  REQUIRE(revalidated.size() == loaded.validation_fitness.size());
  for (std::size_t i = 0; i < revalidated.size(); ++i) {
    REQUIRE(revalidated[i] == loaded.validation_fitness[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("every reference policy replays with finite fitness") {
  for (const auto& fx : kFixtures) {
    CAPTURE(fx.file);
    const auto result = replay_policy_text(read_file(fixture(fx.file)), fx.id, 42, 8);
    CHECK(result.per_trial.size() == 8);
    CHECK(result.non_finite_trials == 0);
    for (double f : result.per_trial) REQUIRE(std::isfinite(f));
  }
}

TEST_CASE("replay is deterministic") {
  const auto text = read_file(fixture("sho_noise_dynamic.txt"));
  const auto a = replay_policy_text(text, ExperimentId::kShoNoise, 9, 16);
  const auto b = replay_policy_text(text, ExperimentId::kShoNoise, 9, 16);
  REQUIRE(a.per_trial.size() == b.per_trial.size());
  for (std::size_t i = 0; i < a.per_trial.size(); ++i) {
    REQUIRE(a.per_trial[i] == b.per_trial[i]);
  }
}

TEST_CASE("zero policy on the acrobot scores the horizon") {
  const std::string zero =
      "symbolic-policy v1\nkind static\nlatent 0\nobs 4\ncontrol 1\ntarget 1\nu1 = 0\n";
  const auto result = replay_policy_text(zero, ExperimentId::kAcrobotNoise, 11, 8);
  for (double f : result.per_trial) CHECK(f == -25.0);
}

TEST_CASE("trajectory dump matches the configured dimensions") {
  const std::string csv = (fs::temp_directory_path() / "sympolicy_traj.csv").string();
  replay_policy_text(read_file(fixture("sho_noise_dynamic.txt")), ExperimentId::kShoNoise, 1,
                     2, nullptr, csv);
  std::ifstream in(csv);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1,x2,y1,y2,u1,a1,a2");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 1501);
  fs::remove(csv);
}

TEST_CASE("aggregate_runs") {
  auto cfg = desk_config(ExperimentId::kShoNoise, Method::kRandomSearch, 12);
  const auto one = run_experiment(cfg, 0);
  REQUIRE(!one.failed);

  // single record: summary equals its own history
  const auto single = aggregate_runs({one});
  REQUIRE(single.mean_best_per_generation.size() == one.history.size());
  for (std::size_t g = 0; g < one.history.size(); ++g) {
    CHECK(single.mean_best_per_generation[g] == one.history[g].best_raw);
  }

  // two identical records: mean equals either
  const auto twice = aggregate_runs({one, one});
  for (std::size_t g = 0; g < one.history.size(); ++g) {
    CHECK(twice.mean_best_per_generation[g] == one.history[g].best_raw);
  }

  // synthetic histories: hand-computed average
  RunRecord a = one, b = one;
  for (std::size_t g = 0; g < a.history.size(); ++g) {
    a.history[g].best_raw = static_cast<double>(g);
    b.history[g].best_raw = static_cast<double>(2 * g);
  }
  const auto mixed = aggregate_runs({a, b});
  for (std::size_t g = 0; g < a.history.size(); ++g) {
    CHECK(mixed.mean_best_per_generation[g] == doctest::Approx(1.5 * g));
  }

  // mixed experiments are rejected
  RunRecord other = one;
  other.config.experiment = ExperimentId::kCstr;
  CHECK_THROWS_AS(aggregate_runs({one, other}), ConfigError);
}
