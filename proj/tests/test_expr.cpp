#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "sympolicy/expr.hpp"

using namespace sympolicy;

namespace {

SignaturePtr sho_static_sig() { return Signature::static_readout(2, 1); }  // y1 y2 xstar

ExprTree random_tree(const FunctionSet& fset, const SignaturePtr& sig, RngStream& rng) {
  const int depth = 2 + static_cast<int>(rng.uniform_index(5));
  const SampleMode mode = rng.bernoulli(0.5) ? SampleMode::kFull : SampleMode::kGrow;
  return sample_tree(fset, sig, depth, mode, rng);
}

}  // namespace

TEST_CASE("signature layout and aliases") {
  auto sig = Signature::dynamic_state(2, 2, 1, 1);  // a1 a2 y1 y2 u1 xstar
  CHECK(sig->arity() == 6);
  CHECK(sig->name(0) == "a1");
  CHECK(sig->name(4) == "u1");
  CHECK(sig->name(5) == "xstar");
  CHECK(sig->find("u") == 4);  // bare alias for the single control
  CHECK(sig->find("a2") == 1);
  CHECK(!sig->find("q7").has_value());
  CHECK(sig->latent_count() == 2);
}

TEST_CASE("sample_tree full mode forces leaves at max depth") {
  FunctionSet fset;
  fset.ops = {Op::kAdd};
  auto sig = sho_static_sig();
  RngStream rng(1);
  for (int i = 0; i < 200; ++i) {
    const ExprTree t = sample_tree(fset, sig, 2, SampleMode::kFull, rng);
    CHECK(t.node_count() == 3);  // op(leaf, leaf)
    CHECK(t.depth() == 2);
    CHECK(t.nodes()[2].op == Op::kAdd);
  }
}

TEST_CASE("sample_tree depth 1 grow is a single leaf") {
  auto sig = sho_static_sig();
  RngStream rng(2);
  for (int i = 0; i < 100; ++i) {
    const ExprTree t = sample_tree(FunctionSet::arithmetic(), sig, 1, SampleMode::kGrow, rng);
    CHECK(t.node_count() == 1);
    CHECK(t.depth() == 1);
  }
}

TEST_CASE("sample_tree grow depth histogram stays within bound") {
  auto sig = sho_static_sig();
  RngStream rng(3);
  int max_depth = 0;
  bool saw_shallower = false;
  for (int i = 0; i < 10000; ++i) {
    const ExprTree t = sample_tree(FunctionSet::arithmetic(), sig, 4, SampleMode::kGrow, rng);
    const int d = t.depth();
    CHECK(d <= 4);
    max_depth = std::max(max_depth, d);
    saw_shallower |= d < 4;
  }
  CHECK(max_depth == 4);
  CHECK(saw_shallower);
}

TEST_CASE("sample_tree rejects an empty function set") {
  FunctionSet empty;
  auto sig = sho_static_sig();
  RngStream rng(4);
  CHECK_THROWS_AS(sample_tree(empty, sig, 3, SampleMode::kGrow, rng), ConfigError);
}

TEST_CASE("evaluate: direct arithmetic") {
  auto sig = sho_static_sig();
  // y1 + 2*y2
  const ExprTree t = parse("y1+2*y2", sig);
  const double v = t.evaluate(std::vector<double>{1.0, 3.0, 0.0});
  CHECK(v == 7.0);
}

TEST_CASE("evaluate: sin identity") {
  auto sig = sho_static_sig();
  const ExprTree t = ExprTree::unary(Op::kSin, ExprTree::constant(0.0, sig));
  CHECK(t.evaluate(std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("evaluate: published static oscillator policy") {
  auto sig = sho_static_sig();
  const ExprTree t = parse("-0.61*y2+xstar", sig);
  CHECK(t.evaluate(std::vector<double>{0.0, 1.0, 0.0}) == doctest::Approx(-0.61).epsilon(1e-12));
}

TEST_CASE("protected operators keep everything finite") {
  auto sig = sho_static_sig();
  RngStream rng(5);
  FunctionSet sets[3] = {FunctionSet::arithmetic(), FunctionSet::arithmetic_trig(),
                         FunctionSet::arithmetic_exp_log()};
  int pairs = 0;
  for (int i = 0; i < 12000 && pairs < 1000000; ++i) {
    const ExprTree t = random_tree(sets[i % 3], sig, rng);
    for (int j = 0; j < 100; ++j, ++pairs) {
      double scale = 1.0;
      switch (j % 4) {
        case 0: scale = 1.0; break;
        case 1: scale = 1e6; break;
        case 2: scale = 1e-8; break;
        case 3: scale = 1e29; break;
      }
      const std::vector<double> in = {rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                                      rng.uniform(-scale, scale)};
      const double v = t.evaluate(in);
      REQUIRE(std::isfinite(v));
    }
  }
  CHECK(pairs >= 1000000);
}

TEST_CASE("protected division matches its definition") {
  auto sig = sho_static_sig();
  const ExprTree t = parse("y1/y2", sig);
  CHECK(t.evaluate(std::vector<double>{1.0, 2.0, 0.0}) == 0.5);
  CHECK(t.evaluate(std::vector<double>{1.0, 1e-12, 0.0}) == doctest::Approx(1e9));
  CHECK(t.evaluate(std::vector<double>{1.0, -1e-12, 0.0}) == doctest::Approx(-1e9));
}

TEST_CASE("measure") {
  auto sig = sho_static_sig();
  const ExprTree leaf = ExprTree::constant(1.0, sig);
  CHECK(measure(leaf).depth == 1);
  CHECK(measure(leaf).node_count == 1);

  const ExprTree pair = ExprTree::binary(Op::kAdd, ExprTree::constant(1.0, sig),
                                         ExprTree::variable(0, sig));
  CHECK(measure(pair).depth == 2);
  CHECK(measure(pair).node_count == 3);

  // -2*a1 + 2.60*a2 + xstar over the dynamic readout signature: counted by
  // hand as add(add(mul(-2,a1), mul(2.6,a2)), xstar) = 9 nodes, depth 4.
  auto dsig = Signature::dynamic_readout(2, 1);
  const ExprTree policy = parse("-2*a1+2.60*a2+xstar", dsig);
  CHECK(measure(policy).node_count == 9);
  CHECK(measure(policy).depth == 4);
}

TEST_CASE("simplify: cancellation and folding") {
  auto sig = sho_static_sig();
  const ExprTree cancel = parse("y1-y1", sig);
  const ExprTree s1 = simplify(cancel);
  CHECK(s1.node_count() == 1);
  CHECK(s1.nodes()[0].op == Op::kConst);
  CHECK(s1.nodes()[0].value == 0.0);

  const ExprTree fold = parse("(2*3)*y1", sig);
  const ExprTree s2 = simplify(fold);
  CHECK(s2.node_count() == 3);
  CHECK(render(s2) == "6*y1");
}

TEST_CASE("simplify: identities") {
  auto sig = sho_static_sig();
  CHECK(render(simplify(parse("y1+0", sig))) == "y1");
  CHECK(render(simplify(parse("1*y2", sig))) == "y2");
  CHECK(render(simplify(parse("y2*0", sig))) == "0");
  CHECK(render(simplify(parse("y1/y1", sig))) == "1");
  CHECK(render(simplify(parse("y1/1", sig))) == "y1");
  CHECK(render(simplify(parse("y1^1", sig))) == "y1");
  CHECK(render(simplify(parse("0-(0-y1)", sig))) == "y1");
  CHECK(render(simplify(parse("-(-y1)", sig))) == "y1");
}

TEST_CASE("simplify is sound away from protected points and never grows") {
  auto sig = sho_static_sig();
  RngStream rng(6);
  FunctionSet sets[3] = {FunctionSet::arithmetic(), FunctionSet::arithmetic_trig(),
                         FunctionSet::arithmetic_exp_log()};
  int checked_points = 0;
  for (int i = 0; i < 1000; ++i) {
    const ExprTree t = random_tree(sets[i % 3], sig, rng);
    const ExprTree s = simplify(t);
    REQUIRE(s.node_count() <= t.node_count());
    REQUIRE(s.depth() <= t.depth());
    for (int j = 0; j < 100; ++j) {
      const std::vector<double> in = {rng.uniform(-10, 10), rng.uniform(-10, 10),
                                      rng.uniform(-10, 10)};
      bool prot = false;
      const double v0 = t.evaluate_flagged(in, &prot);
      if (prot) continue;  // protected-domain point
      const double v1 = s.evaluate(in);
      REQUIRE(std::abs(v0 - v1) < 1e-9);
      ++checked_points;
    }
  }
  CHECK(checked_points > 50000);
}

TEST_CASE("render basics") {
  auto sig = Signature::dynamic_readout(1, 1);  // a1 xstar
  CHECK(render(ExprTree::constant(1.5, sig)) == "1.5");
  CHECK(render(ExprTree::binary(Op::kMul, ExprTree::constant(2.0, sig),
                                ExprTree::variable(0, sig))) == "2*a1");
}

TEST_CASE("parse examples") {
  auto sig = Signature::dynamic_readout(1, 1);
  const ExprTree t = parse("0.45*(a1+xstar)", sig);
  CHECK(t.evaluate(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.9).epsilon(1e-15));

  CHECK_THROWS_AS(parse("sin(", sig), ParseError);
  CHECK_THROWS_AS(parse("q7", sho_static_sig()), ParseError);
  try {
    parse("y1++y2", sho_static_sig());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() >= 2);
  }
}

TEST_CASE("parse/render round trip is value-exact") {
  auto sig = sho_static_sig();
  RngStream rng(7);
  FunctionSet sets[3] = {FunctionSet::arithmetic(), FunctionSet::arithmetic_trig(),
                         FunctionSet::arithmetic_exp_log()};
  for (int i = 0; i < 300; ++i) {
    const ExprTree t = random_tree(sets[i % 3], sig, rng);
    const std::string text = render(t);
    const ExprTree back = parse(text, sig);
    for (int j = 0; j < 100; ++j) {
      const std::vector<double> in = {rng.uniform(-50, 50), rng.uniform(-50, 50),
                                      rng.uniform(-50, 50)};
      const double v0 = t.evaluate(in);
      const double v1 = back.evaluate(in);
      REQUIRE(v0 == v1);  // bit-exact
    }
    // rendering reaches a fixed point after one round trip
    CHECK(render(parse(render(back), sig)) == render(back));
  }
}

TEST_CASE("subtree replacement keeps arenas consistent") {
  auto sig = sho_static_sig();
  RngStream rng(8);
  for (int i = 0; i < 500; ++i) {
    const ExprTree t = random_tree(FunctionSet::arithmetic_trig(), sig, rng);
    const int id = static_cast<int>(rng.uniform_index(t.node_count()));
    const ExprTree sub = t.subtree(id);
    const ExprTree repl = sample_tree(FunctionSet::arithmetic(), sig, 2, SampleMode::kGrow, rng);
    const ExprTree swapped = t.with_subtree_replaced(id, repl);
    // re-validate through from_postorder
    std::vector<ExprNode> nodes(swapped.nodes().begin(), swapped.nodes().end());
    CHECK_NOTHROW(ExprTree::from_postorder(std::move(nodes), sig));
    // replacing back restores the original
    int new_id = id - sub.node_count() + repl.node_count();
    const ExprTree restored = swapped.with_subtree_replaced(new_id, sub);
    CHECK(restored.identical_to(t));
  }
}

TEST_CASE("lane evaluation matches scalar evaluation") {
  auto sig = sho_static_sig();
  RngStream rng(9);
  constexpr int kLanes = 32;
  for (int i = 0; i < 200; ++i) {
    const ExprTree t = random_tree(FunctionSet::arithmetic_exp_log(), sig, rng);
    std::vector<double> y1(kLanes), y2(kLanes), xs(kLanes), out(kLanes);
    for (int l = 0; l < kLanes; ++l) {
      y1[l] = rng.uniform(-100, 100);
      y2[l] = rng.uniform(-100, 100);
      xs[l] = rng.uniform(-100, 100);
    }
    const double* rows[3] = {y1.data(), y2.data(), xs.data()};
    std::vector<double> scratch(static_cast<std::size_t>(t.depth() + 1) * kLanes);
    t.evaluate_lanes(rows, kLanes, out.data(), scratch.data());
    for (int l = 0; l < kLanes; ++l) {
      const double ref = t.evaluate(std::vector<double>{y1[l], y2[l], xs[l]});
      REQUIRE(out[l] == ref);
    }
  }
}

TEST_CASE("structure hash distinguishes trees") {
  auto sig = sho_static_sig();
  const ExprTree a = parse("y1+y2", sig);
  const ExprTree b = parse("y1-y2", sig);
  const ExprTree c = parse("y1+y2", sig);
  CHECK(a.structure_hash() == c.structure_hash());
  CHECK(a.structure_hash() != b.structure_hash());
}

TEST_CASE("references_slot_in sees latent usage") {
  auto sig = Signature::dynamic_readout(2, 1);
  CHECK(parse("a2*3", sig).references_slot_in(0, 2));
  CHECK(!parse("xstar*3", sig).references_slot_in(0, 2));
}
