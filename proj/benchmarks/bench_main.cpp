#include <benchmark/benchmark.h>

#include "sympolicy/experiment.hpp"
#include "sympolicy/simulate.hpp"

using namespace sympolicy;

namespace {

ExprTree bench_tree() {
  const auto sig = Signature::dynamic_state(2, 2, 1, 1);
  return parse("2*a2-0.5*a1+1.3*y1*cos(a1)-0.2*y2+xstar", sig);
}

DynamicTreePolicy bench_policy(int obs) {
  const auto ssig = Signature::dynamic_state(2, obs, 1, 1);
  const auto rsig = Signature::dynamic_readout(2, 1);
  std::vector<ExprTree> st = {parse("2*a2-0.5*a1+1.3*y1", ssig),
                              parse("a1-0.2*a2+xstar", ssig)};
  std::vector<ExprTree> rd = {parse("-2*a1+2.6*a2+xstar", rsig)};
  return DynamicTreePolicy(std::move(st), std::move(rd));
}

void BM_TreeEvaluateScalar(benchmark::State& state) {
  const ExprTree t = bench_tree();
  const std::vector<double> in = {0.1, -0.3, 0.7, 1.1, 0.4, -2.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(t.evaluate(in));
  }
  state.SetItemsProcessed(state.iterations() * t.node_count());
}
BENCHMARK(BM_TreeEvaluateScalar);

void BM_TreeEvaluateLanes(benchmark::State& state) {
  const ExprTree t = bench_tree();
  const int lanes = static_cast<int>(state.range(0));
  std::vector<double> rows(static_cast<std::size_t>(6 * lanes), 0.25);
  const double* row_ptrs[6];
  for (int s = 0; s < 6; ++s) row_ptrs[s] = rows.data() + s * lanes;
  std::vector<double> out(static_cast<std::size_t>(lanes));
  std::vector<double> scratch(static_cast<std::size_t>(t.depth() + 1) * lanes);
  for (auto _ : state) {
    t.evaluate_lanes(row_ptrs, lanes, out.data(), scratch.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * t.node_count() * lanes);
}
BENCHMARK(BM_TreeEvaluateLanes)->Arg(8)->Arg(32)->Arg(128);

void BM_EvaluateShoBatch(benchmark::State& state) {
  const ShoEnv env(ShoEnv::Variant::kNoise);
  const auto policy = bench_policy(2);
  const SimParams sp = preset_for(ExperimentId::kShoNoise).sim;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_policy(env, policy, seed++, 32, sp));
  }
}
BENCHMARK(BM_EvaluateShoBatch)->Unit(benchmark::kMillisecond);

void BM_EvaluateAcrobotBatch(benchmark::State& state) {
  const AcrobotEnv env(AcrobotEnv::Variant::kPartial);
  const auto policy = bench_policy(2);
  const SimParams sp = preset_for(ExperimentId::kAcrobotPartial).sim;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_policy(env, policy, seed++, 32, sp));
  }
}
BENCHMARK(BM_EvaluateAcrobotBatch)->Unit(benchmark::kMillisecond);

void BM_SampleTree(benchmark::State& state) {
  const auto sig = Signature::dynamic_state(2, 2, 1, 1);
  const FunctionSet fset = FunctionSet::arithmetic_trig();
  RngStream rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_tree(fset, sig, 4, SampleMode::kGrow, rng));
  }
}
BENCHMARK(BM_SampleTree);

void BM_Simplify(benchmark::State& state) {
  const auto sig = Signature::dynamic_state(2, 2, 1, 1);
  const FunctionSet fset = FunctionSet::arithmetic();
  RngStream rng(4);
  std::vector<ExprTree> trees;
  for (int i = 0; i < 64; ++i) {
    trees.push_back(sample_tree(fset, sig, 6, SampleMode::kGrow, rng));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simplify(trees[i++ % trees.size()]));
  }
}
BENCHMARK(BM_Simplify);

}  // namespace

BENCHMARK_MAIN();
