#include "sympolicy/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sympolicy/parallel.hpp"

namespace sympolicy {

namespace {

constexpr int kConstraintRetries = 10;

int latent_slots(const TreeRole& role) { return role.signature->latent_count(); }

bool tree_ok(const ExprTree& tree, const TreeRole& role, int max_depth) {
  if (tree.depth() > max_depth) return false;
  if (role.requires_latent_ref && !tree.references_slot_in(0, latent_slots(role))) return false;
  return true;
}

// Path depth of a node (root = 1).
int node_depth(const ExprTree& tree, int node_id) {
  int depth = 1;
  int cursor = tree.root_id();
  while (cursor != node_id) {
    const auto nodes = tree.nodes();
    int child_end = cursor - 1;
    for (;;) {
      const auto& child = nodes[static_cast<std::size_t>(child_end)];
      const int child_first = child_end - child.subtree_size + 1;
      if (node_id >= child_first && node_id <= child_end) {
        cursor = child_end;
        ++depth;
        break;
      }
      child_end = child_first - 1;
    }
  }
  return depth;
}

ExprTree sample_role_tree(const GpConfig& cfg, const TreeRole& role, RngStream& rng) {
  const int depth = 2 + static_cast<int>(rng.uniform_index(
                            static_cast<std::uint64_t>(std::max(1, cfg.init_depth - 1))));
  const SampleMode mode = rng.bernoulli(0.5) ? SampleMode::kFull : SampleMode::kGrow;
  for (int tries = 0;; ++tries) {
    ExprTree t = sample_tree(cfg.fset, role.signature, depth, mode, rng);
    if (tree_ok(t, role, cfg.max_depth)) return t;
    if (tries > 10000) throw EngineError("tree sampling cannot satisfy the constraints");
  }
}

Individual sample_individual(const GpConfig& cfg, RngStream& rng) {
  Individual ind;
  ind.trees.reserve(cfg.roles.size());
  for (const auto& role : cfg.roles) ind.trees.push_back(sample_role_tree(cfg, role, rng));
  return ind;
}

Individual clone_unevaluated(const Individual& ind) {
  Individual c;
  c.trees = ind.trees;
  return c;
}

std::vector<int> sorted_by_reg_fitness(const std::vector<Individual>& island) {
  std::vector<int> order(island.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = *island[static_cast<std::size_t>(a)].regularized_fitness;
    const double fb = *island[static_cast<std::size_t>(b)].regularized_fitness;
    if (fa != fb) return fa > fb;
    return a < b;
  });
  return order;
}

void require_evaluated(const Individual& ind) {
  if (!ind.fitness || !ind.regularized_fitness) {
    throw EngineError("individual reached selection without a fitness");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

void GpConfig::finalize() {
  roles.clear();
  if (is_dynamic()) {
    const auto state_sig =
        Signature::dynamic_state(latent_dim, obs_dim, control_dim, target_dim);
    const auto readout_sig = Signature::dynamic_readout(latent_dim, target_dim);
    for (int i = 0; i < latent_dim; ++i) roles.push_back({state_sig, false});
    for (int j = 0; j < control_dim; ++j) roles.push_back({readout_sig, true});
  } else {
    const auto sig = Signature::static_readout(obs_dim, target_dim);
    for (int j = 0; j < control_dim; ++j) roles.push_back({sig, false});
  }
  if (mixes.empty()) mixes = graded_mixes(subpopulations);
  validate();
}

void GpConfig::validate() const {
  if (population_size < 1 || generations < 1) {
    throw ConfigError("population and generations must be positive");
  }
  if (!(elite_fraction > 0.0 && elite_fraction < 1.0)) {
    throw ConfigError("elite fraction must lie in (0, 1)");
  }
  if (subpopulations < 1 || population_size < subpopulations) {
    throw ConfigError("need at least one individual per subpopulation");
  }
  if (static_cast<int>(mixes.size()) != subpopulations) {
    throw ConfigError("one reproduction mix per subpopulation required");
  }
  for (const auto& m : mixes) {
    if (std::abs(m.crossover + m.mutation + m.simplify + m.sample - 1.0) > 1e-9) {
      throw ConfigError("reproduction probabilities must sum to one");
    }
    if (std::abs(m.cx_subtree + m.cx_uniform + m.cx_tree_swap - 1.0) > 1e-9) {
      throw ConfigError("crossover variant probabilities must sum to one");
    }
  }
  if (tournament_size < 1) throw ConfigError("tournament size must be at least 1");
  if (init_depth < 2 || max_depth < init_depth) throw ConfigError("bad depth bounds");
  if (roles.empty()) throw ConfigError("config not finalized");
  fset.validate();
}

std::vector<ReproductionMix> GpConfig::graded_mixes(int islands) {
  std::vector<ReproductionMix> mixes(static_cast<std::size_t>(islands));
  if (islands == 1) return mixes;
  for (int i = 0; i < islands; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(islands - 1);
    auto& m = mixes[static_cast<std::size_t>(i)];
    m.mutation = 0.15 + t * (0.35 - 0.15);
    m.sample = 0.05 + t * (0.20 - 0.05);
    m.simplify = 0.05;
    m.crossover = 1.0 - m.mutation - m.sample - m.simplify;
  }
  return mixes;
}

// ---------------------------------------------------------------------------
// initialization and selection

Population init_population(const GpConfig& cfg, RngStream& rng) {
  Population pop;
  pop.islands.resize(static_cast<std::size_t>(cfg.subpopulations));
  const int base = cfg.population_size / cfg.subpopulations;
  const int extra = cfg.population_size % cfg.subpopulations;
  for (int s = 0; s < cfg.subpopulations; ++s) {
    const int count = base + (s < extra ? 1 : 0);
    auto& island = pop.islands[static_cast<std::size_t>(s)];
    island.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) island.push_back(sample_individual(cfg, rng));
  }
  return pop;
}

const Individual& tournament_select(std::span<const Individual> pool, int k, RngStream& rng) {
  if (pool.empty()) throw EngineError("tournament over an empty pool");
  if (k < 1) throw EngineError("tournament size must be at least 1");
  const Individual* best = nullptr;
  for (int i = 0; i < k; ++i) {
    const Individual& cand = pool[rng.uniform_index(pool.size())];
    require_evaluated(cand);
    if (!best || *cand.regularized_fitness > *best->regularized_fitness) best = &cand;
  }
  return *best;
}

double regularized_fitness(double raw, const Individual& ind, double penalty_coeff) {
  return raw - penalty_coeff * static_cast<double>(ind.total_nodes());
}

bool satisfies_constraints(const Individual& ind, const GpConfig& cfg) {
  if (ind.trees.size() != cfg.roles.size()) return false;
  for (std::size_t i = 0; i < ind.trees.size(); ++i) {
    if (!tree_ok(ind.trees[i], cfg.roles[i], cfg.max_depth)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// crossover

namespace {

using Pair = std::pair<Individual, Individual>;

Pair clones(const Individual& a, const Individual& b) {
  return {clone_unevaluated(a), clone_unevaluated(b)};
}

void check_arity(const Individual& a, const Individual& b, const GpConfig& cfg) {
  if (a.trees.size() != b.trees.size() || a.trees.size() != cfg.roles.size()) {
    throw EngineError("crossover between incompatible individuals");
  }
}

// swaps op/leaf payloads at aligned nodes of equal arity with prob. 1/2
void uniform_swap_walk(std::vector<ExprNode>& na, int ida, std::vector<ExprNode>& nb, int idb,
                       RngStream& rng) {
  ExprNode& A = na[static_cast<std::size_t>(ida)];
  ExprNode& B = nb[static_cast<std::size_t>(idb)];
  const int arity_a = op_arity(A.op);
  const int arity_b = op_arity(B.op);
  if (arity_a == arity_b && rng.bernoulli(0.5)) {
    std::swap(A.op, B.op);
    std::swap(A.slot, B.slot);
    std::swap(A.value, B.value);
  }
  const int common = std::min(arity_a, arity_b);
  int ca = ida - 1;
  int cb = idb - 1;
  for (int k = 0; k < common; ++k) {
    uniform_swap_walk(na, ca, nb, cb, rng);
    ca -= na[static_cast<std::size_t>(ca)].subtree_size;
    cb -= nb[static_cast<std::size_t>(cb)].subtree_size;
  }
}

}  // namespace

std::pair<Individual, Individual> crossover_subtree(const Individual& a, const Individual& b,
                                                    const GpConfig& cfg, RngStream& rng) {
  check_arity(a, b, cfg);
  for (int attempt = 0; attempt < kConstraintRetries; ++attempt) {
    const auto pos = rng.uniform_index(a.trees.size());
    const ExprTree& ta = a.trees[pos];
    const ExprTree& tb = b.trees[pos];
    const int ia = static_cast<int>(rng.uniform_index(ta.node_count()));
    const int ib = static_cast<int>(rng.uniform_index(tb.node_count()));
    const ExprTree sub_a = ta.subtree(ia);
    const ExprTree sub_b = tb.subtree(ib);
    Individual ca = clone_unevaluated(a);
    Individual cb = clone_unevaluated(b);
    ca.trees[pos] = ta.with_subtree_replaced(ia, sub_b);
    cb.trees[pos] = tb.with_subtree_replaced(ib, sub_a);
    if (tree_ok(ca.trees[pos], cfg.roles[pos], cfg.max_depth) &&
        tree_ok(cb.trees[pos], cfg.roles[pos], cfg.max_depth)) {
      return {std::move(ca), std::move(cb)};
    }
  }
  return clones(a, b);
}

std::pair<Individual, Individual> crossover_uniform(const Individual& a, const Individual& b,
                                                    const GpConfig& cfg, RngStream& rng) {
  check_arity(a, b, cfg);
  for (int attempt = 0; attempt < kConstraintRetries; ++attempt) {
    const auto pos = rng.uniform_index(a.trees.size());
    std::vector<ExprNode> na(a.trees[pos].nodes().begin(), a.trees[pos].nodes().end());
    std::vector<ExprNode> nb(b.trees[pos].nodes().begin(), b.trees[pos].nodes().end());
    uniform_swap_walk(na, static_cast<int>(na.size()) - 1, nb,
                      static_cast<int>(nb.size()) - 1, rng);
    Individual ca = clone_unevaluated(a);
    Individual cb = clone_unevaluated(b);
    ca.trees[pos] = ExprTree::from_postorder(std::move(na), a.trees[pos].signature());
    cb.trees[pos] = ExprTree::from_postorder(std::move(nb), b.trees[pos].signature());
    if (tree_ok(ca.trees[pos], cfg.roles[pos], cfg.max_depth) &&
        tree_ok(cb.trees[pos], cfg.roles[pos], cfg.max_depth)) {
      return {std::move(ca), std::move(cb)};
    }
  }
  return clones(a, b);
}

std::pair<Individual, Individual> crossover_tree_swap(const Individual& a, const Individual& b,
                                                      const GpConfig& cfg, RngStream& rng) {
  check_arity(a, b, cfg);
  for (int attempt = 0; attempt < kConstraintRetries; ++attempt) {
    const auto pos = rng.uniform_index(a.trees.size());
    Individual ca = clone_unevaluated(a);
    Individual cb = clone_unevaluated(b);
    std::swap(ca.trees[pos], cb.trees[pos]);
    if (tree_ok(ca.trees[pos], cfg.roles[pos], cfg.max_depth) &&
        tree_ok(cb.trees[pos], cfg.roles[pos], cfg.max_depth)) {
      return {std::move(ca), std::move(cb)};
    }
  }
  return clones(a, b);
}

// ---------------------------------------------------------------------------
// mutation

namespace {

enum class MutationKind { kRelabel, kSubtreeReplace, kLeafPerturb, kInsert, kDelete };

std::vector<int> nodes_matching(const ExprTree& t, bool internal) {
  std::vector<int> ids;
  const auto nodes = t.nodes();
  for (int i = 0; i < t.node_count(); ++i) {
    const bool leaf = is_leaf(nodes[static_cast<std::size_t>(i)].op);
    if (leaf != internal) ids.push_back(i);
  }
  return ids;
}

ExprTree leaf_tree(const FunctionSet& fset, const SignaturePtr& sig, RngStream& rng) {
  const int slots = sig->arity();
  const auto pick = rng.uniform_index(static_cast<std::uint64_t>(slots) + 1);
  if (pick < static_cast<std::uint64_t>(slots)) {
    return ExprTree::variable(static_cast<int>(pick), sig);
  }
  return ExprTree::constant(rng.uniform(fset.constant_low, fset.constant_high), sig);
}

// applies one mutation kind to the tree; empty optional when inapplicable
std::optional<ExprTree> apply_mutation(const ExprTree& t, MutationKind kind,
                                       const GpConfig& cfg, const SignaturePtr& sig,
                                       RngStream& rng) {
  switch (kind) {
    case MutationKind::kRelabel: {
      const auto internal = nodes_matching(t, true);
      if (internal.empty()) return std::nullopt;
      const int id = internal[rng.uniform_index(internal.size())];
      const Op current = t.nodes()[static_cast<std::size_t>(id)].op;
      std::vector<Op> options;
      for (Op op : cfg.fset.ops) {
        if (op != current && op_arity(op) == op_arity(current)) options.push_back(op);
      }
      if (options.empty()) return std::nullopt;
      std::vector<ExprNode> nodes(t.nodes().begin(), t.nodes().end());
      nodes[static_cast<std::size_t>(id)].op = options[rng.uniform_index(options.size())];
      return ExprTree::from_postorder(std::move(nodes), sig);
    }
    case MutationKind::kSubtreeReplace: {
      const int id = static_cast<int>(rng.uniform_index(t.node_count()));
      const int budget = std::max(1, cfg.max_depth - node_depth(t, id) + 1);
      const int depth = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
                                std::min(budget, cfg.init_depth))));
      ExprTree fresh =
          sample_tree(cfg.fset, sig, std::min(depth, budget), SampleMode::kGrow, rng);
      return t.with_subtree_replaced(id, fresh);
    }
    case MutationKind::kLeafPerturb: {
      const auto leaves = nodes_matching(t, false);
      if (leaves.empty()) return std::nullopt;
      const int id = leaves[rng.uniform_index(leaves.size())];
      std::vector<ExprNode> nodes(t.nodes().begin(), t.nodes().end());
      auto& n = nodes[static_cast<std::size_t>(id)];
      if (n.op == Op::kConst) {
        n.value += rng.normal();
      } else {
        const int slots = sig->arity();
        if (slots < 2) return std::nullopt;
        std::int32_t next = n.slot;
        while (next == n.slot) {
          next =
              static_cast<std::int32_t>(rng.uniform_index(static_cast<std::uint64_t>(slots)));
        }
        n.slot = next;
      }
      return ExprTree::from_postorder(std::move(nodes), sig);
    }
    case MutationKind::kInsert: {
      const int id = static_cast<int>(rng.uniform_index(t.node_count()));
      const Op op = cfg.fset.ops[rng.uniform_index(cfg.fset.ops.size())];
      ExprTree child = t.subtree(id);
      ExprTree wrapped =
          op_arity(op) == 1
              ? ExprTree::unary(op, std::move(child))
              : (rng.bernoulli(0.5)
                     ? ExprTree::binary(op, std::move(child), leaf_tree(cfg.fset, sig, rng))
                     : ExprTree::binary(op, leaf_tree(cfg.fset, sig, rng), std::move(child)));
      return t.with_subtree_replaced(id, wrapped);
    }
    case MutationKind::kDelete: {
      const auto internal = nodes_matching(t, true);
      if (internal.empty()) return std::nullopt;
      const int id = internal[rng.uniform_index(internal.size())];
      const auto nodes = t.nodes();
      std::vector<int> child_roots;
      int cursor = id - 1;
      const int first = id - nodes[static_cast<std::size_t>(id)].subtree_size + 1;
      while (cursor >= first) {
        child_roots.push_back(cursor);
        cursor -= nodes[static_cast<std::size_t>(cursor)].subtree_size;
      }
      const int chosen = child_roots[rng.uniform_index(child_roots.size())];
      return t.with_subtree_replaced(id, t.subtree(chosen));
    }
  }
  return std::nullopt;
}

}  // namespace

Individual mutate(const Individual& a, const GpConfig& cfg, RngStream& rng) {
  for (int attempt = 0; attempt < kConstraintRetries; ++attempt) {
    const auto pos = rng.uniform_index(a.trees.size());
    const auto& role = cfg.roles[pos];
    const auto kind = static_cast<MutationKind>(rng.uniform_index(5));
    const auto mutated = apply_mutation(a.trees[pos], kind, cfg, role.signature, rng);
    if (!mutated) continue;  // kind not applicable to this tree
    if (!tree_ok(*mutated, role, cfg.max_depth)) continue;
    Individual child = clone_unevaluated(a);
    child.trees[pos] = *mutated;
    return child;
  }
  return clone_unevaluated(a);
}

// ---------------------------------------------------------------------------
// generation step

Population step_generation(const Population& pop, const GpConfig& cfg, RngStream& rng) {
  Population next;
  next.generation = pop.generation + 1;
  next.islands.resize(pop.islands.size());
  for (std::size_t s = 0; s < pop.islands.size(); ++s) {
    const auto& island = pop.islands[s];
    const auto& mix = cfg.mixes[s];
    for (const auto& ind : island) require_evaluated(ind);
    const auto order = sorted_by_reg_fitness(island);

    auto& out = next.islands[s];
    const int island_size = static_cast<int>(island.size());
    out.reserve(static_cast<std::size_t>(island_size));

    const int elite_count = std::min<int>(
        island_size,
        std::max<int>(1, static_cast<int>(std::llround(cfg.elite_fraction * island_size))));
    for (int e = 0; e < elite_count; ++e) {
      out.push_back(island[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]);
    }

    const std::span<const Individual> pool(island.data(), island.size());
    while (static_cast<int>(out.size()) < island_size) {
      const double pick = rng.uniform01();
      if (pick < mix.crossover) {
        const Individual& p1 = tournament_select(pool, cfg.tournament_size, rng);
        const Individual& p2 = tournament_select(pool, cfg.tournament_size, rng);
        const double variant = rng.uniform01();
        Individual c1, c2;
        if (variant < mix.cx_subtree) {
          std::tie(c1, c2) = crossover_subtree(p1, p2, cfg, rng);
        } else if (variant < mix.cx_subtree + mix.cx_uniform) {
          std::tie(c1, c2) = crossover_uniform(p1, p2, cfg, rng);
        } else {
          std::tie(c1, c2) = crossover_tree_swap(p1, p2, cfg, rng);
        }
        out.push_back(std::move(c1));
        if (static_cast<int>(out.size()) < island_size) out.push_back(std::move(c2));
      } else if (pick < mix.crossover + mix.mutation) {
        out.push_back(mutate(tournament_select(pool, cfg.tournament_size, rng), cfg, rng));
      } else if (pick < mix.crossover + mix.mutation + mix.simplify) {
        const Individual& parent = tournament_select(pool, cfg.tournament_size, rng);
        Individual child = clone_unevaluated(parent);
        for (auto& t : child.trees) t = simplify(t);
        if (!satisfies_constraints(child, cfg)) child = clone_unevaluated(parent);
        out.push_back(std::move(child));
      } else {
        out.push_back(sample_individual(cfg, rng));
      }
    }
  }
  return next;
}

// ---------------------------------------------------------------------------
// full run

GpResult run_gp(const GpConfig& cfg, const Evaluator& evaluator, const GenObserver& observer) {
  cfg.validate();
  RngStream rng(derive_seed(cfg.seed, 0x9b0a));
  Population pop = init_population(cfg, rng);

  GpResult result;
  bool have_best = false;

  for (int g = 0; g < cfg.generations; ++g) {
    const std::uint64_t eval_seed = derive_seed(cfg.seed, 0xeba1, static_cast<std::uint64_t>(g));

    std::vector<Individual*> flat;
    flat.reserve(static_cast<std::size_t>(pop.size()));
    for (auto& island : pop.islands) {
      for (auto& ind : island) flat.push_back(&ind);
    }
    parallel_for(static_cast<int>(flat.size()), [&](int i) {
      Individual& ind = *flat[static_cast<std::size_t>(i)];
      const double raw = evaluator(ind, eval_seed);
      ind.fitness = raw;
      ind.regularized_fitness = regularized_fitness(raw, ind, cfg.size_penalty);
    });

    GenerationStats stats;
    stats.generation = g;
    stats.islands.resize(pop.islands.size());
    double gen_best_reg = -std::numeric_limits<double>::infinity();
    double gen_best_raw = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < pop.islands.size(); ++s) {
      const auto& island = pop.islands[s];
      auto& is_stats = stats.islands[s];
      double mean = 0.0;
      const Individual* best = nullptr;
      for (const auto& ind : island) {
        mean += *ind.fitness;
        if (!best || *ind.regularized_fitness > *best->regularized_fitness) best = &ind;
      }
      is_stats.mean_raw = island.empty() ? 0.0 : mean / static_cast<double>(island.size());
      is_stats.best_raw = *best->fitness;
      is_stats.best_reg = *best->regularized_fitness;
      std::string texts;
      for (const auto& t : best->trees) {
        if (!texts.empty()) texts += ';';
        texts += render(t);
      }
      is_stats.best_texts = std::move(texts);
      if (is_stats.best_reg > gen_best_reg) {
        gen_best_reg = is_stats.best_reg;
        gen_best_raw = is_stats.best_raw;
      }
      if (!have_best || *best->regularized_fitness > result.best_reg) {
        result.best = *best;
        result.best_reg = *best->regularized_fitness;
        result.best_raw = *best->fitness;
        have_best = true;
      }
    }
    stats.best_raw = gen_best_raw;
    stats.best_reg = gen_best_reg;
    stats.best_ever_raw = result.best_raw;
    stats.best_ever_reg = result.best_reg;
    result.history.push_back(stats);
    if (observer) observer(pop, stats);

    if (g + 1 == cfg.generations) break;

    // ring migration of elites
    if (cfg.subpopulations > 1 && cfg.migration_interval > 0 &&
        (g + 1) % cfg.migration_interval == 0) {
      const int k = cfg.subpopulations;
      std::vector<std::vector<Individual>> migrants(static_cast<std::size_t>(k));
      for (int s = 0; s < k; ++s) {
        const auto order = sorted_by_reg_fitness(pop.islands[static_cast<std::size_t>(s)]);
        const int count = std::min<int>(cfg.migration_count, static_cast<int>(order.size()));
        for (int m = 0; m < count; ++m) {
          migrants[static_cast<std::size_t>(s)].push_back(
              pop.islands[static_cast<std::size_t>(
                  s)][static_cast<std::size_t>(order[static_cast<std::size_t>(m)])]);
        }
      }
      for (int s = 0; s < k; ++s) {
        auto& target = pop.islands[static_cast<std::size_t>((s + 1) % k)];
        const auto order = sorted_by_reg_fitness(target);
        const auto& arriving = migrants[static_cast<std::size_t>(s)];
        for (std::size_t m = 0; m < arriving.size() && m < order.size(); ++m) {
          const int victim = order[order.size() - 1 - m];
          target[static_cast<std::size_t>(victim)] = arriving[m];
        }
      }
    }

    pop = step_generation(pop, cfg, rng);
  }
  return result;
}

}  // namespace sympolicy
