#include <cmath>
#include <vector>

#include "doctest.h"
#include "sympolicy/policies.hpp"

using namespace sympolicy;

namespace {

StaticTreePolicy static_policy(const std::vector<std::string>& exprs, int obs_dim) {
  const auto sig = Signature::static_readout(obs_dim, 1);
  std::vector<ExprTree> trees;
  for (const auto& e : exprs) trees.push_back(parse(e, sig));
  return StaticTreePolicy(std::move(trees));
}

DynamicTreePolicy dynamic_policy(const std::vector<std::string>& states,
                                 const std::vector<std::string>& readouts, int obs_dim) {
  const int H = static_cast<int>(states.size());
  const int C = static_cast<int>(readouts.size());
  const auto ssig = Signature::dynamic_state(H, obs_dim, C, 1);
  const auto rsig = Signature::dynamic_readout(H, 1);
  std::vector<ExprTree> st, rd;
  for (const auto& e : states) st.push_back(parse(e, ssig));
  for (const auto& e : readouts) rd.push_back(parse(e, rsig));
  return DynamicTreePolicy(std::move(st), std::move(rd));
}

}  // namespace

TEST_CASE("static readout") {
  const auto p = static_policy({"-0.61*y2+xstar"}, 2);
  const std::vector<double> y = {0.0, 2.0};
  const std::vector<double> tgt = {1.0};
  CHECK(p.control_scalar(y, tgt)[0] == doctest::Approx(-0.22).epsilon(1e-12));

  const auto zero = static_policy({"0"}, 2);
  CHECK(zero.control_scalar(y, tgt)[0] == 0.0);

  const auto pass = static_policy({"y1"}, 2);
  CHECK(pass.control_scalar(std::vector<double>{3.5, 0.0}, tgt)[0] == 3.5);
}

TEST_CASE("dynamic state derivative") {
  const auto p = dynamic_policy({"y2", "-u1+xstar"}, {"a1"}, 2);
  const std::vector<double> a = {0.0, 0.0};
  const std::vector<double> y = {0.0, 1.0};
  const std::vector<double> u = {0.5};
  const std::vector<double> tgt = {1.0};
  const auto adot = p.derivative_scalar(a, y, u, tgt);
  CHECK(adot[0] == 1.0);
  CHECK(adot[1] == 0.5);

  const auto frozen = dynamic_policy({"0", "0"}, {"a1"}, 2);
  const auto fz = frozen.derivative_scalar(a, y, u, tgt);
  CHECK(fz[0] == 0.0);
  CHECK(fz[1] == 0.0);
}

TEST_CASE("dynamic readout") {
  const auto p = dynamic_policy({"0", "0"}, {"-2*a1+2.60*a2+xstar"}, 2);
  CHECK(p.control_scalar(std::vector<double>{0.0, 0.0}, std::vector<double>{2.0})[0] == 2.0);

  const auto q = dynamic_policy({"0"}, {"0.45*(a1+xstar)"}, 2);
  CHECK(q.control_scalar(std::vector<double>{-2.0}, std::vector<double>{2.0})[0] == 0.0);

  const auto r = dynamic_policy({"0", "0"}, {"2*a2-cos(2*a1)"}, 2);
  CHECK(r.control_scalar(std::vector<double>{0.0, 0.0}, std::vector<double>{1.5})[0] == -1.0);
}

TEST_CASE("latent-reference constraint on dynamic readouts") {
  CHECK_NOTHROW(dynamic_policy({"y1", "y1"}, {"a2"}, 2));
  // construction does not enforce it (the evolution engine does), but the
  // reference test must see it
  const auto rsig = Signature::dynamic_readout(2, 1);
  CHECK(parse("a2", rsig).references_slot_in(0, 2));
  CHECK(!parse("xstar", rsig).references_slot_in(0, 2));
}

TEST_CASE("nde derivative and readout") {
  NdeShape shape;
  shape.obs = 2;
  shape.control = 1;
  std::vector<double> params(static_cast<std::size_t>(shape.param_count()), 0.0);
  const NdePolicy zero(shape, params);

  const std::vector<double> a(5, 0.3), y = {1.0, -2.0}, u = {0.5}, tgt = {1.0};
  for (double v : zero.derivative_scalar(a, y, u, tgt)) CHECK(v == 0.0);
  for (double v : zero.control_scalar(a, tgt)) CHECK(v == 0.0);

  // tanh keeps derivatives inside (-1, 1)
  RngStream rng(5);
  for (double& v : params) v = rng.uniform(-3, 3);
  const NdePolicy dense(shape, params);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> aa(5), yy(2);
    for (double& v : aa) v = rng.uniform(-100, 100);
    for (double& v : yy) v = rng.uniform(-100, 100);
    const std::vector<double> uu = {rng.uniform(-5, 5)};
    const std::vector<double> tt = {rng.uniform(-3, 3)};
    for (double v : dense.derivative_scalar(aa, yy, uu, tt)) {
      // tanh saturates to exactly +-1.0 in double precision
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }

  // first-order behaviour for a tiny state matrix
  const double eps = 1e-7;
  std::vector<double> tiny(static_cast<std::size_t>(shape.param_count()), 0.0);
  for (int k = 0; k < shape.z_dim(); ++k) tiny[static_cast<std::size_t>(k)] = eps;
  const NdePolicy lin(shape, tiny);
  const auto adot = lin.derivative_scalar(a, y, u, tgt);
  double zsum = 0.3 * 5 + 1.0 - 2.0 + 0.5 + 1.0 + 1.0;
  CHECK(adot[0] == doctest::Approx(eps * zsum).epsilon(1e-6));
  for (int i = 1; i < 5; ++i) CHECK(adot[static_cast<std::size_t>(i)] == 0.0);

  // readout against a direct matrix product
  const auto got = dense.control_scalar(a, tgt);
  const Mat& B = dense.readout_matrix();
  std::vector<double> v(a.begin(), a.end());
  v.push_back(tgt[0]);
  v.push_back(1.0);
  double want = 0.0;
  for (int m = 0; m < B.cols; ++m) want += B(0, m) * v[static_cast<std::size_t>(m)];
  CHECK(got[0] == doctest::Approx(want).epsilon(1e-15));

  // readout that selects the constant slot
  std::vector<double> sel(static_cast<std::size_t>(shape.param_count()), 0.0);
  sel[static_cast<std::size_t>(shape.latent * shape.z_dim() + shape.v_dim() - 1)] = 4.25;
  const NdePolicy constant(shape, sel);
  CHECK(constant.control_scalar(a, tgt)[0] == 4.25);
  CHECK(constant.control_scalar(std::vector<double>(5, -7.0), tgt)[0] == 4.25);

  // round trip through the parameter vector
  const auto flat = dense.flatten();
  CHECK(flat == params);
}

TEST_CASE("random-search policies satisfy the structural contract") {
  RngStream rng(6);
  const FunctionSet fset = FunctionSet::arithmetic_trig();
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_random_policy(fset, 2, 2, 1, 1, rng);
    CHECK(p.latent_dim() == 2);
    CHECK(p.control_dim() == 1);
    for (const auto& t : p.state_trees()) CHECK(t.depth() <= 7);
    for (const auto& t : p.readouts()) {
      CHECK(t.depth() <= 7);
      CHECK(t.references_slot_in(0, 2));
    }
  }
}

TEST_CASE("lqg: estimate at a zero target produces zero control") {
  ShoEnv env(ShoEnv::Variant::kNoise);
  ShoEnv::Trial trial;
  trial.target_pos = 0.0;
  LqgController ctl(env, trial);
  // with xhat = x* = 0 and y = 0 the filter stays at the origin
  for (int i = 0; i < 5; ++i) {
    const double u = ctl.step(std::vector<double>{0.0, 0.0}, 0.02);
    CHECK(u == 0.0);
  }
}

TEST_CASE("lqg: feedforward cancels the spring force at the target") {
  ShoEnv env(ShoEnv::Variant::kNoise);
  ShoEnv::Trial trial;
  trial.target_pos = 2.0;
  const LqgPolicy policy(env, std::span<const ShoEnv::Trial>(&trial, 1));
  CHECK(policy.gains(0).u_ff == doctest::Approx(2.0));  // omega * target
  CHECK(policy.gains(0).K[0] == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-8));
}

TEST_CASE("symbolic policy text round trip") {
  const auto p = dynamic_policy({"y2", "-u1+xstar"}, {"-2*a1+2.6*a2+xstar"}, 2);
  const std::string text = policy_to_text(p);
  const auto back = policy_from_text(text);
  REQUIRE(std::holds_alternative<DynamicTreePolicy>(back));
  const auto& q = std::get<DynamicTreePolicy>(back);
  CHECK(q.latent_dim() == 2);
  CHECK(q.obs_dim() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(q.state_trees()[static_cast<std::size_t>(i)].identical_to(
        p.state_trees()[static_cast<std::size_t>(i)]));
  }
  CHECK(q.readouts()[0].identical_to(p.readouts()[0]));

  const auto s = static_policy({"-0.61*y2+xstar"}, 2);
  const auto back2 = policy_from_text(policy_to_text(s));
  REQUIRE(std::holds_alternative<StaticTreePolicy>(back2));
  CHECK(std::get<StaticTreePolicy>(back2).readouts()[0].identical_to(s.readouts()[0]));
}

TEST_CASE("nde text round trip") {
  NdeShape shape;
  shape.obs = 4;
  shape.control = 2;
  RngStream rng(7);
  std::vector<double> params(static_cast<std::size_t>(shape.param_count()));
  for (double& v : params) v = rng.uniform(-2, 2);
  const NdePolicy p(shape, params);
  const NdePolicy q = nde_from_text(nde_to_text(p));
  CHECK(q.shape().obs == 4);
  CHECK(q.shape().control == 2);
  const auto fp = p.flatten(), fq = q.flatten();
  REQUIRE(fp.size() == fq.size());
  for (std::size_t i = 0; i < fp.size(); ++i) CHECK(fp[i] == fq[i]);
}
