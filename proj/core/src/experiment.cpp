#include "sympolicy/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sympolicy/cmaes.hpp"
#include "sympolicy/parallel.hpp"

namespace sympolicy {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kRunTag = 0x52;
constexpr std::uint64_t kEvalTag = 0xeba1;  // must match run_gp's generation batches
constexpr std::uint64_t kValidationTag = 0x7a11d;
constexpr std::uint64_t kRsTag = 0x4453;
constexpr std::uint64_t kCmaTag = 0xc3a;

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ids, methods, presets

std::vector<ExperimentId> all_experiments() {
  return {ExperimentId::kShoNoise,        ExperimentId::kShoPartial,
          ExperimentId::kShoVarying,      ExperimentId::kAcrobotNoise,
          ExperimentId::kAcrobotPartial,  ExperimentId::kAcrobotTwoControls,
          ExperimentId::kCstr};
}

const char* to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::kShoNoise: return "sho-noise";
    case ExperimentId::kShoPartial: return "sho-partial";
    case ExperimentId::kShoVarying: return "sho-varying";
    case ExperimentId::kAcrobotNoise: return "acrobot-noise";
    case ExperimentId::kAcrobotPartial: return "acrobot-partial";
    case ExperimentId::kAcrobotTwoControls: return "acrobot-two-u";
    case ExperimentId::kCstr: return "cstr";
  }
  return "?";
}

ExperimentId experiment_from_string(const std::string& name) {
  for (ExperimentId id : all_experiments()) {
    if (name == to_string(id)) return id;
  }
  throw ConfigError("unknown experiment id: " + name);
}

const char* to_string(Method m) {
  switch (m) {
    case Method::kGpStatic: return "gp-static";
    case Method::kGpDynamic: return "gp-dynamic";
    case Method::kRandomSearch: return "random-search";
    case Method::kNdeCmaes: return "nde-cmaes";
    case Method::kLqg: return "lqg";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::kGpStatic, Method::kGpDynamic, Method::kRandomSearch,
                   Method::kNdeCmaes, Method::kLqg}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method: " + name);
}

ExperimentPreset preset_for(ExperimentId id) {
  ExperimentPreset p;
  p.id = id;
  switch (id) {
    case ExperimentId::kShoNoise:
      p.population = 500;
      p.generations = 30;
      p.latent = 2;
      p.obs = 2;
      p.fset = FunctionSet::arithmetic();
      p.sim = SimParams{30.0, 0.02, -1e6};
      break;
    case ExperimentId::kShoPartial:
      p.population = 500;
      p.generations = 50;
      p.latent = 2;
      p.obs = 1;
      p.fset = FunctionSet::arithmetic();
      p.sim = SimParams{30.0, 0.02, -1e6};
      break;
    case ExperimentId::kShoVarying:
      p.population = 1000;
      p.generations = 100;
      p.latent = 2;
      p.obs = 2;
      p.fset = FunctionSet::arithmetic();
      p.sim = SimParams{30.0, 0.02, -1e6};
      break;
    case ExperimentId::kAcrobotNoise:
      p.population = 500;
      p.generations = 50;
      p.latent = 2;
      p.obs = 4;
      p.fset = FunctionSet::arithmetic_trig();
      p.sim = SimParams{25.0, 0.01, -1e6};
      break;
    case ExperimentId::kAcrobotPartial:
      p.population = 500;
      p.generations = 50;
      p.latent = 2;
      p.obs = 2;
      p.fset = FunctionSet::arithmetic_trig();
      p.sim = SimParams{25.0, 0.01, -1e6};
      break;
    case ExperimentId::kAcrobotTwoControls:
      p.population = 1000;
      p.generations = 50;
      p.latent = 3;
      p.obs = 4;
      p.control = 2;
      p.fset = FunctionSet::arithmetic_trig();
      p.sim = SimParams{25.0, 0.01, -1e6};
      break;
    case ExperimentId::kCstr:
      p.population = 1000;
      p.generations = 100;
      p.latent = 2;
      p.obs = 2;
      p.fset = FunctionSet::arithmetic_exp_log();
      // explicit stepping must resolve the fastest reaction time scale
      // (k(500) ~ 1.8e3 / min), hence the small step
      p.sim = SimParams{40.0, 5e-4, -1e6};
      break;
  }
  return p;
}

ExperimentPreset ExperimentConfig::resolved() const {
  ExperimentPreset p = preset_for(experiment);
  if (population > 0) p.population = population;
  if (generations > 0) p.generations = generations;
  if (latent >= 0) p.latent = latent;
  if (batch > 0) p.batch = batch;
  if (dt > 0.0) p.sim.dt = dt;
  if (horizon > 0.0) p.sim.horizon = horizon;
  return p;
}

// ---------------------------------------------------------------------------
// environment dispatch

namespace {

bool is_sho(ExperimentId id) {
  return id == ExperimentId::kShoNoise || id == ExperimentId::kShoPartial ||
         id == ExperimentId::kShoVarying;
}

ShoEnv make_sho(ExperimentId id) {
  switch (id) {
    case ExperimentId::kShoNoise: return ShoEnv(ShoEnv::Variant::kNoise);
    case ExperimentId::kShoPartial: return ShoEnv(ShoEnv::Variant::kPartial);
    case ExperimentId::kShoVarying: return ShoEnv(ShoEnv::Variant::kVarying);
    default: throw ConfigError("not a linear-oscillator experiment");
  }
}

template <class Fn>
auto with_env(ExperimentId id, Fn&& fn) {
  switch (id) {
    case ExperimentId::kShoNoise:
    case ExperimentId::kShoPartial:
    case ExperimentId::kShoVarying: {
      const ShoEnv env = make_sho(id);
      return fn(env);
    }
    case ExperimentId::kAcrobotNoise: {
      const AcrobotEnv env(AcrobotEnv::Variant::kNoise);
      return fn(env);
    }
    case ExperimentId::kAcrobotPartial: {
      const AcrobotEnv env(AcrobotEnv::Variant::kPartial);
      return fn(env);
    }
    case ExperimentId::kAcrobotTwoControls: {
      const AcrobotEnv env(AcrobotEnv::Variant::kTwoControls);
      return fn(env);
    }
    case ExperimentId::kCstr: {
      const CstrEnv env;
      return fn(env);
    }
  }
  throw ConfigError("unknown experiment id");
}

StaticTreePolicy static_policy_from(const Individual& ind) {
  return StaticTreePolicy(ind.trees);
}

DynamicTreePolicy dynamic_policy_from(const Individual& ind, int latent) {
  std::vector<ExprTree> states(ind.trees.begin(), ind.trees.begin() + latent);
  std::vector<ExprTree> readouts(ind.trees.begin() + latent, ind.trees.end());
  return DynamicTreePolicy(std::move(states), std::move(readouts));
}

std::string individual_policy_text(const Individual& ind, bool dynamic, int latent) {
  if (dynamic) return policy_to_text(dynamic_policy_from(ind, latent));
  return policy_to_text(static_policy_from(ind));
}

ReplayResult summarize(const BatchResult& res) {
  ReplayResult out;
  out.per_trial = res.fitness;
  out.mean_fitness = res.mean_fitness();
  for (std::size_t i = 0; i < res.outcome.size(); ++i) {
    if (res.outcome[i] == TrialOutcome::kNonFinite) ++out.non_finite_trials;
    if (res.outcome[i] == TrialOutcome::kSuccess) ++out.success_trials;
  }
  return out;
}

void dump_trajectory_csv(const Trajectory& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t";
  for (int i = 0; i < rec.state_dim; ++i) out << ",x" << (i + 1);
  for (int i = 0; i < rec.obs_dim; ++i) out << ",y" << (i + 1);
  for (int i = 0; i < rec.control_dim; ++i) out << ",u" << (i + 1);
  for (int i = 0; i < rec.latent_dim; ++i) out << ",a" << (i + 1);
  out << "\n";
  for (int k = 0; k < rec.steps(); ++k) {
    out << fmt_double(rec.t[static_cast<std::size_t>(k)]);
    for (int i = 0; i < rec.state_dim; ++i) {
      out << ',' << fmt_double(rec.x[static_cast<std::size_t>(k * rec.state_dim + i)]);
    }
    for (int i = 0; i < rec.obs_dim; ++i) {
      out << ',' << fmt_double(rec.y[static_cast<std::size_t>(k * rec.obs_dim + i)]);
    }
    for (int i = 0; i < rec.control_dim; ++i) {
      out << ',' << fmt_double(rec.u[static_cast<std::size_t>(k * rec.control_dim + i)]);
    }
    for (int i = 0; i < rec.latent_dim; ++i) {
      out << ',' << fmt_double(rec.a[static_cast<std::size_t>(k * rec.latent_dim + i)]);
    }
    out << "\n";
  }
}

// Evaluates a symbolic or NDE policy over a batch; optionally records the
// first trial.
struct PolicyEvaluation {
  BatchResult result;
  std::vector<Trajectory> recordings;
};

template <class Policy>
PolicyEvaluation evaluate_on(ExperimentId id, const Policy& policy, std::uint64_t batch_seed,
                             int batch, const SimParams& sim, bool record) {
  return with_env(id, [&](const auto& env) {
    PolicyEvaluation ev;
    ev.result = simulate_trials(env, policy, batch_seed, batch, sim,
                                record ? &ev.recordings : nullptr);
    return ev;
  });
}

PolicyEvaluation evaluate_policy_text(const std::string& text, ExperimentId id,
                                      std::uint64_t batch_seed, int batch,
                                      const SimParams& sim, bool record) {
  if (text.rfind("nde-policy", 0) == 0) {
    const NdePolicy p = nde_from_text(text);
    return evaluate_on(id, p, batch_seed, batch, sim, record);
  }
  const SymbolicPolicy p = policy_from_text(text);
  if (std::holds_alternative<StaticTreePolicy>(p)) {
    return evaluate_on(id, std::get<StaticTreePolicy>(p), batch_seed, batch, sim, record);
  }
  return evaluate_on(id, std::get<DynamicTreePolicy>(p), batch_seed, batch, sim, record);
}

}  // namespace

// ---------------------------------------------------------------------------
// run_experiment

namespace {

GenerationStats single_island_stats(int generation, double best_raw, double best_reg,
                                    double mean_raw, std::string texts, double ever_raw,
                                    double ever_reg) {
  GenerationStats s;
  s.generation = generation;
  s.islands.resize(1);
  s.islands[0].best_raw = best_raw;
  s.islands[0].best_reg = best_reg;
  s.islands[0].mean_raw = mean_raw;
  s.islands[0].best_texts = std::move(texts);
  s.best_raw = best_raw;
  s.best_reg = best_reg;
  s.best_ever_raw = ever_raw;
  s.best_ever_reg = ever_reg;
  return s;
}

void run_gp_method(const ExperimentConfig& cfg, const ExperimentPreset& p,
                   std::uint64_t run_seed, bool dynamic, RunRecord& record) {
  GpConfig g;
  g.population_size = p.population;
  g.generations = p.generations;
  g.latent_dim = dynamic ? p.latent : 0;
  g.control_dim = p.control;
  g.obs_dim = p.obs;
  g.target_dim = p.target;
  g.fset = p.fset;
  g.batch_size = p.batch;
  g.seed = run_seed;
  g.finalize();

  const SimParams sim = p.sim;
  const int batch = p.batch;
  const int latent = g.latent_dim;
  const ExperimentId id = cfg.experiment;

  const Evaluator evaluator = [id, sim, batch, dynamic, latent](const Individual& ind,
                                                                std::uint64_t eval_seed) {
    return with_env(id, [&](const auto& env) {
      if (dynamic) {
        return evaluate_policy(env, dynamic_policy_from(ind, latent), eval_seed, batch, sim);
      }
      return evaluate_policy(env, static_policy_from(ind), eval_seed, batch, sim);
    });
  };

  const GpResult result = run_gp(g, evaluator);
  record.history = result.history;
  record.best_train_fitness = result.best_raw;
  record.best_policy_text = individual_policy_text(result.best, dynamic, latent);
}

void run_random_search(const ExperimentConfig& cfg, const ExperimentPreset& p,
                       std::uint64_t run_seed, RunRecord& record) {
  const ExperimentId id = cfg.experiment;
  const SimParams sim = p.sim;
  RngStream rng(derive_seed(run_seed, kRsTag));
  double best_fitness = -std::numeric_limits<double>::infinity();
  DynamicTreePolicy best;
  for (int g = 0; g < p.generations; ++g) {
    const std::uint64_t eval_seed = derive_seed(run_seed, kEvalTag, static_cast<std::uint64_t>(g));
    // sampling stays on the sequential stream; evaluation parallelizes
    std::vector<DynamicTreePolicy> chunk;
    chunk.reserve(static_cast<std::size_t>(p.population));
    for (int i = 0; i < p.population; ++i) {
      chunk.push_back(sample_random_policy(p.fset, p.latent, p.obs, p.control, p.target, rng));
    }
    std::vector<double> fitness(chunk.size());
    parallel_for(static_cast<int>(chunk.size()), [&](int i) {
      fitness[static_cast<std::size_t>(i)] = with_env(id, [&](const auto& env) {
        return evaluate_policy(env, chunk[static_cast<std::size_t>(i)], eval_seed, p.batch, sim);
      });
    });
    double chunk_mean = 0.0;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      chunk_mean += fitness[i];
      if (fitness[i] > best_fitness) {
        best_fitness = fitness[i];
        best = chunk[i];
      }
    }
    chunk_mean /= static_cast<double>(chunk.size());
    std::string texts;
    for (const auto& t : best.state_trees()) {
      if (!texts.empty()) texts += ';';
      texts += render(t);
    }
    for (const auto& t : best.readouts()) {
      texts += ';';
      texts += render(t);
    }
    record.history.push_back(single_island_stats(g, best_fitness, best_fitness, chunk_mean,
                                                 std::move(texts), best_fitness, best_fitness));
  }
  record.best_train_fitness = best_fitness;
  record.best_policy_text = policy_to_text(best);
}

void run_nde_cmaes(const ExperimentConfig& cfg, const ExperimentPreset& p,
                   std::uint64_t run_seed, RunRecord& record) {
  const ExperimentId id = cfg.experiment;
  const SimParams sim = p.sim;
  NdeShape shape;
  shape.obs = p.obs;
  shape.control = p.control;
  shape.target = p.target;

  CmaesConfig cc;
  cc.dimension = shape.param_count();
  cc.lambda = p.population;  // equal evaluation budget with the GP methods
  cc.sigma0 = 0.5;
  CmaEs es(cc);
  RngStream rng(derive_seed(run_seed, kCmaTag));

  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  for (int g = 0; g < p.generations; ++g) {
    const std::uint64_t eval_seed = derive_seed(run_seed, kEvalTag, static_cast<std::uint64_t>(g));
    const auto candidates = es.ask(rng);
    std::vector<double> fitness(candidates.size());
    parallel_for(static_cast<int>(candidates.size()), [&](int i) {
      const NdePolicy policy(shape, candidates[static_cast<std::size_t>(i)]);
      fitness[static_cast<std::size_t>(i)] = with_env(id, [&](const auto& env) {
        return evaluate_policy(env, policy, eval_seed, p.batch, sim);
      });
    });
    double gen_best = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      mean += fitness[i];
      gen_best = std::max(gen_best, fitness[i]);
      if (fitness[i] > best_fitness) {
        best_fitness = fitness[i];
        best_params = candidates[i];
      }
    }
    mean /= static_cast<double>(candidates.size());
    es.tell(candidates, fitness);
    record.history.push_back(single_island_stats(g, gen_best, gen_best, mean, "", best_fitness,
                                                 best_fitness));
  }
  record.best_train_fitness = best_fitness;
  record.best_policy_text = nde_to_text(NdePolicy(shape, best_params));
  record.best_is_nde = true;
}

}  // namespace

ReplayResult run_lqg_baseline(ExperimentId id, std::uint64_t batch_seed, int batch,
                              const SimParams* sim_override) {
  if (!is_sho(id)) {
    throw ConfigError("the lqg baseline is defined for the linear oscillator only");
  }
  const ShoEnv env = make_sho(id);
  const SimParams sim = sim_override ? *sim_override : preset_for(id).sim;
  const auto trials = make_trials(env, batch_seed, batch);
  const LqgPolicy policy(env, std::span<const ShoEnv::Trial>(trials.data(), trials.size()));
  return summarize(simulate_batch(
      env, policy, std::span<const ShoEnv::Trial>(trials.data(), trials.size()), sim));
}

RunRecord run_experiment(const ExperimentConfig& cfg, int run_index) {
  const ExperimentPreset p = cfg.resolved();
  if (cfg.method == Method::kLqg && !is_sho(cfg.experiment)) {
    throw ConfigError("the lqg baseline is defined for the linear oscillator only");
  }

  RunRecord record;
  record.config = cfg;
  record.run_index = run_index;
  record.run_seed = derive_seed(cfg.seed, kRunTag, static_cast<std::uint64_t>(run_index));

  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (cfg.method) {
      case Method::kGpStatic:
        run_gp_method(cfg, p, record.run_seed, false, record);
        break;
      case Method::kGpDynamic:
        run_gp_method(cfg, p, record.run_seed, true, record);
        break;
      case Method::kRandomSearch:
        run_random_search(cfg, p, record.run_seed, record);
        break;
      case Method::kNdeCmaes:
        run_nde_cmaes(cfg, p, record.run_seed, record);
        break;
      case Method::kLqg:
        break;  // no training phase
    }

    const std::uint64_t validation_seed = derive_seed(record.run_seed, kValidationTag);
    if (cfg.method == Method::kLqg) {
      const ReplayResult r =
          run_lqg_baseline(cfg.experiment, validation_seed, cfg.validation_batch, &p.sim);
      record.validation_fitness = r.per_trial;
      record.validation_mean = r.mean_fitness;
      record.best_train_fitness = r.mean_fitness;
    } else {
      const PolicyEvaluation ev = evaluate_policy_text(
          record.best_policy_text, cfg.experiment, validation_seed, cfg.validation_batch,
          p.sim, false);
      record.validation_fitness = ev.result.fitness;
      record.validation_mean = ev.result.mean_fitness();
    }
  } catch (const std::exception& e) {
    record.failed = true;
    record.failure = e.what();
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

std::vector<RunRecord> run_experiment_batch(const ExperimentConfig& cfg) {
  std::vector<RunRecord> records;
  for (int r = 0; r < cfg.runs; ++r) {
    RunRecord record = run_experiment(cfg, r);
    if (!cfg.out_dir.empty()) {
      write_results(record, cfg.out_dir + "/run_" + std::to_string(r));
    }
    records.push_back(std::move(record));
  }
  return records;
}

ReplayResult replay_policy_text(const std::string& policy_text, ExperimentId id,
                                std::uint64_t batch_seed, int batch,
                                const SimParams* sim_override, const std::string& trajectory_csv) {
  const SimParams sim = sim_override ? *sim_override : preset_for(id).sim;
  const bool record = !trajectory_csv.empty();
  const PolicyEvaluation ev = evaluate_policy_text(policy_text, id, batch_seed, batch, sim, record);
  if (record && !ev.recordings.empty()) {
    dump_trajectory_csv(ev.recordings.front(), trajectory_csv);
  }
  return summarize(ev.result);
}

// ---------------------------------------------------------------------------
// persistence

void write_results(const RunRecord& record, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  const ExperimentPreset p = record.config.resolved();
  {
    json j;
    j["experiment"] = to_string(record.config.experiment);
    j["method"] = to_string(record.config.method);
    j["population"] = p.population;
    j["generations"] = p.generations;
    j["latent"] = p.latent;
    j["obs"] = p.obs;
    j["control"] = p.control;
    j["target"] = p.target;
    j["batch"] = p.batch;
    j["validation_batch"] = record.config.validation_batch;
    j["horizon"] = p.sim.horizon;
    j["dt"] = p.sim.dt;
    j["floor_penalty"] = p.sim.floor_penalty;
    j["seed"] = record.config.seed;
    j["run_index"] = record.run_index;
    j["run_seed"] = record.run_seed;
    j["runs"] = record.config.runs;
    std::ofstream out(dir + "/config.json");
    if (!out) throw IoError("cannot write " + dir + "/config.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/history.csv");
    if (!out) throw IoError("cannot write " + dir + "/history.csv");
    out << "generation,subpopulation,best_fitness,mean_fitness,best_expression_texts\n";
    for (const auto& gen : record.history) {
      for (std::size_t s = 0; s < gen.islands.size(); ++s) {
        const auto& isl = gen.islands[s];
        out << gen.generation << ',' << s << ',' << fmt_double(isl.best_raw) << ','
            << fmt_double(isl.mean_raw) << ',' << csv_quote(isl.best_texts) << "\n";
      }
    }
  }
  if (!record.best_policy_text.empty()) {
    const std::string name = record.best_is_nde ? "/best_policy.params" : "/best_policy.txt";
    std::ofstream out(dir + name);
    if (!out) throw IoError("cannot write " + dir + name);
    out << record.best_policy_text;
  }
  {
    std::ofstream out(dir + "/validation.csv");
    if (!out) throw IoError("cannot write " + dir + "/validation.csv");
    out << "trial,fitness\n";
    for (std::size_t i = 0; i < record.validation_fitness.size(); ++i) {
      out << i << ',' << fmt_double(record.validation_fitness[i]) << "\n";
    }
  }
  {
    // wall-clock and failure state live in the sidecar, outside the
    // reproducible artifact set
    json meta;
    meta["wall_seconds"] = record.wall_seconds;
    meta["failed"] = record.failed;
    if (record.failed) meta["failure"] = record.failure;
    meta["best_train_fitness"] = record.best_train_fitness;
    meta["validation_mean"] = record.validation_mean;
    std::ofstream out(dir + "/meta.json");
    out << meta.dump(2) << "\n";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

RunRecord read_record(const std::string& dir) {
  RunRecord record;
  {
    std::ifstream in(dir + "/config.json");
    if (!in) throw IoError("cannot read " + dir + "/config.json");
    json j;
    in >> j;
    record.config.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    record.config.method = method_from_string(j.at("method").get<std::string>());
    record.config.population = j.at("population").get<int>();
    record.config.generations = j.at("generations").get<int>();
    record.config.latent = j.at("latent").get<int>();
    record.config.batch = j.at("batch").get<int>();
    record.config.validation_batch = j.at("validation_batch").get<int>();
    record.config.horizon = j.at("horizon").get<double>();
    record.config.dt = j.at("dt").get<double>();
    record.config.seed = j.at("seed").get<std::uint64_t>();
    record.config.runs = j.at("runs").get<int>();
    record.run_index = j.at("run_index").get<int>();
    record.run_seed = j.at("run_seed").get<std::uint64_t>();
  }
  {
    const std::string txt = dir + "/best_policy.txt";
    const std::string params = dir + "/best_policy.params";
    std::ifstream in(txt);
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      record.best_policy_text = ss.str();
    } else {
      std::ifstream pin(params);
      if (pin) {
        std::stringstream ss;
        ss << pin.rdbuf();
        record.best_policy_text = ss.str();
        record.best_is_nde = true;
      }
    }
  }
  {
    std::ifstream in(dir + "/validation.csv");
    if (in) {
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() >= 2) record.validation_fitness.push_back(std::stod(fields[1]));
      }
      double sum = 0;
      for (double f : record.validation_fitness) sum += f;
      record.validation_mean = record.validation_fitness.empty()
                                   ? 0.0
                                   : sum / static_cast<double>(record.validation_fitness.size());
    }
  }
  {
    std::ifstream in(dir + "/history.csv");
    if (in) {
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 5) continue;
        const int gen = std::stoi(fields[0]);
        const std::size_t island = static_cast<std::size_t>(std::stoul(fields[1]));
        if (record.history.size() <= static_cast<std::size_t>(gen)) {
          record.history.resize(static_cast<std::size_t>(gen) + 1);
          record.history[static_cast<std::size_t>(gen)].generation = gen;
        }
        auto& stats = record.history[static_cast<std::size_t>(gen)];
        if (stats.islands.size() <= island) stats.islands.resize(island + 1);
        stats.islands[island].best_raw = std::stod(fields[2]);
        stats.islands[island].mean_raw = std::stod(fields[3]);
        stats.islands[island].best_texts = fields[4];
        stats.best_raw = std::max(stats.best_raw, stats.islands[island].best_raw);
      }
      for (auto& stats : record.history) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& isl : stats.islands) best = std::max(best, isl.best_raw);
        stats.best_raw = best;
      }
    }
  }
  return record;
}

std::vector<double> revalidate(const RunRecord& record) {
  const ExperimentPreset p = record.config.resolved();
  const std::uint64_t validation_seed = derive_seed(record.run_seed, kValidationTag);
  if (record.config.method == Method::kLqg) {
    return run_lqg_baseline(record.config.experiment, validation_seed,
                            record.config.validation_batch, &p.sim)
        .per_trial;
  }
  return evaluate_policy_text(record.best_policy_text, record.config.experiment,
                              validation_seed, record.config.validation_batch, p.sim, false)
      .result.fitness;
}

// ---------------------------------------------------------------------------
// aggregation

AggregateSummary aggregate_runs(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ConfigError("no runs to aggregate");
  AggregateSummary summary;
  summary.experiment = records.front().config.experiment;
  summary.method = records.front().config.method;
  summary.runs = static_cast<int>(records.size());
  std::size_t gens = 0;
  for (const auto& r : records) {
    if (r.config.experiment != summary.experiment || r.config.method != summary.method) {
      throw ConfigError("aggregate over mixed experiments or methods");
    }
    gens = std::max(gens, r.history.size());
  }
  summary.mean_best_per_generation.assign(gens, 0.0);
  std::vector<int> counts(gens, 0);
  for (const auto& r : records) {
    for (std::size_t g = 0; g < r.history.size(); ++g) {
      summary.mean_best_per_generation[g] += r.history[g].best_raw;
      counts[g] += 1;
    }
  }
  for (std::size_t g = 0; g < gens; ++g) {
    if (counts[g] > 0) summary.mean_best_per_generation[g] /= counts[g];
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    summary.validation_means.push_back(records[i].validation_mean);
    if (summary.best_run < 0 || records[i].validation_mean > summary.best_validation) {
      summary.best_run = static_cast<int>(i);
      summary.best_validation = records[i].validation_mean;
      summary.best_policy_text = records[i].best_policy_text;
    }
  }
  return summary;
}

void write_aggregate_csv(const AggregateSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# experiment=" << to_string(summary.experiment)
      << " method=" << to_string(summary.method) << " runs=" << summary.runs << "\n";
  out << "generation,mean_best_fitness\n";
  for (std::size_t g = 0; g < summary.mean_best_per_generation.size(); ++g) {
    out << g << ',' << fmt_double(summary.mean_best_per_generation[g]) << "\n";
  }
  out << "run,validation_mean\n";
  for (std::size_t r = 0; r < summary.validation_means.size(); ++r) {
    out << r << ',' << fmt_double(summary.validation_means[r]) << "\n";
  }
  out << "best_run,best_validation\n";
  out << summary.best_run << ',' << fmt_double(summary.best_validation) << "\n";
}

}  // namespace sympolicy
