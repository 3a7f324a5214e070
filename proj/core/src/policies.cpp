#include "sympolicy/policies.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "sympolicy/riccati.hpp"

namespace sympolicy {

namespace {

constexpr int kMaxSlots = 32;

struct SlotGroups {
  int latent = 0;
  int obs = 0;
  int control = 0;
  int target = 0;
};

// Signatures are generated with fixed group prefixes (a, y, u, xstar), so
// the layout can be recovered by prefix counting.
SlotGroups slot_groups(const Signature& sig) {
  SlotGroups g;
  for (int i = 0; i < sig.arity(); ++i) {
    const std::string& n = sig.name(i);
    if (n.rfind("xstar", 0) == 0) {
      ++g.target;
    } else if (n[0] == 'a') {
      ++g.latent;
    } else if (n[0] == 'y') {
      ++g.obs;
    } else if (n[0] == 'u') {
      ++g.control;
    } else {
      throw ConfigError("unrecognized slot name: " + n);
    }
  }
  return g;
}

int max_scratch_rows(const std::vector<ExprTree>& trees) {
  int rows = 1;
  for (const auto& t : trees) rows = std::max(rows, t.depth() + 1);
  return rows;
}

void check_same_signature(const std::vector<ExprTree>& trees, const char* what) {
  if (trees.empty()) throw ConfigError(std::string(what) + ": no trees");
  for (const auto& t : trees) {
    if (t.empty() || !t.signature()) throw ConfigError(std::string(what) + ": empty tree");
    if (!(*t.signature() == *trees.front().signature())) {
      throw ConfigError(std::string(what) + ": signatures differ");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// StaticTreePolicy

StaticTreePolicy::StaticTreePolicy(std::vector<ExprTree> readouts)
    : readouts_(std::move(readouts)) {
  check_same_signature(readouts_, "static policy");
  const SlotGroups g = slot_groups(*readouts_.front().signature());
  if (g.latent != 0 || g.control != 0) {
    throw ConfigError("static policy readouts must use (y, xstar) inputs only");
  }
  obs_dim_ = g.obs;
  target_dim_ = g.target;
  scratch_rows_ = max_scratch_rows(readouts_);
}

void StaticTreePolicy::control(const LaneBlock& io) const {
  const double* rows[kMaxSlots];
  int r = 0;
  for (int i = 0; i < obs_dim_; ++i) rows[r++] = io.obs[i];
  for (int i = 0; i < target_dim_; ++i) rows[r++] = io.target[i];
  for (std::size_t j = 0; j < readouts_.size(); ++j) {
    readouts_[j].evaluate_lanes(rows, io.lanes, io.out[j], io.scratch);
  }
}

std::vector<double> StaticTreePolicy::control_scalar(std::span<const double> y,
                                                     std::span<const double> target) const {
  std::vector<double> in(y.begin(), y.end());
  in.insert(in.end(), target.begin(), target.end());
  std::vector<double> u(readouts_.size());
  for (std::size_t j = 0; j < readouts_.size(); ++j) u[j] = readouts_[j].evaluate(in);
  return u;
}

// ---------------------------------------------------------------------------
// DynamicTreePolicy

DynamicTreePolicy::DynamicTreePolicy(std::vector<ExprTree> state_trees,
                                     std::vector<ExprTree> readouts)
    : state_trees_(std::move(state_trees)), readouts_(std::move(readouts)) {
  check_same_signature(state_trees_, "dynamic policy state");
  check_same_signature(readouts_, "dynamic policy readout");
  const SlotGroups sg = slot_groups(*state_trees_.front().signature());
  const SlotGroups rg = slot_groups(*readouts_.front().signature());
  const int H = static_cast<int>(state_trees_.size());
  const int C = static_cast<int>(readouts_.size());
  if (sg.latent != H || rg.latent != H || sg.control != C || rg.obs != 0 || rg.control != 0 ||
      sg.target != rg.target) {
    throw ConfigError("dynamic policy signatures do not match tree counts");
  }
  obs_dim_ = sg.obs;
  target_dim_ = sg.target;
  scratch_rows_ = std::max(max_scratch_rows(state_trees_), max_scratch_rows(readouts_));
}

void DynamicTreePolicy::control(const LaneBlock& io) const {
  const double* rows[kMaxSlots];
  int r = 0;
  const int H = latent_dim();
  for (int i = 0; i < H; ++i) rows[r++] = io.latent[i];
  for (int i = 0; i < target_dim_; ++i) rows[r++] = io.target[i];
  for (std::size_t j = 0; j < readouts_.size(); ++j) {
    readouts_[j].evaluate_lanes(rows, io.lanes, io.out[j], io.scratch);
  }
}

void DynamicTreePolicy::latent_derivative(const LaneBlock& io) const {
  const double* rows[kMaxSlots];
  int r = 0;
  const int H = latent_dim();
  const int C = control_dim();
  for (int i = 0; i < H; ++i) rows[r++] = io.latent[i];
  for (int i = 0; i < obs_dim_; ++i) rows[r++] = io.obs[i];
  for (int i = 0; i < C; ++i) rows[r++] = io.u_prev[i];
  for (int i = 0; i < target_dim_; ++i) rows[r++] = io.target[i];
  for (std::size_t i = 0; i < state_trees_.size(); ++i) {
    state_trees_[i].evaluate_lanes(rows, io.lanes, io.out[i], io.scratch);
  }
}

std::vector<double> DynamicTreePolicy::control_scalar(std::span<const double> a,
                                                      std::span<const double> target) const {
  std::vector<double> in(a.begin(), a.end());
  in.insert(in.end(), target.begin(), target.end());
  std::vector<double> u(readouts_.size());
  for (std::size_t j = 0; j < readouts_.size(); ++j) u[j] = readouts_[j].evaluate(in);
  return u;
}

std::vector<double> DynamicTreePolicy::derivative_scalar(std::span<const double> a,
                                                         std::span<const double> y,
                                                         std::span<const double> u_prev,
                                                         std::span<const double> target) const {
  std::vector<double> in(a.begin(), a.end());
  in.insert(in.end(), y.begin(), y.end());
  in.insert(in.end(), u_prev.begin(), u_prev.end());
  in.insert(in.end(), target.begin(), target.end());
  std::vector<double> adot(state_trees_.size());
  for (std::size_t i = 0; i < state_trees_.size(); ++i) adot[i] = state_trees_[i].evaluate(in);
  return adot;
}

// ---------------------------------------------------------------------------
// NdePolicy

NdePolicy::NdePolicy(NdeShape shape, const std::vector<double>& params) : shape_(shape) {
  if (static_cast<int>(params.size()) != shape_.param_count()) {
    throw ConfigError("nde parameter vector has the wrong length");
  }
  A_ = Mat(shape_.latent, shape_.z_dim());
  B_ = Mat(shape_.control, shape_.v_dim());
  std::size_t p = 0;
  for (double& v : A_.a) v = params[p++];
  for (double& v : B_.a) v = params[p++];
}

std::vector<double> NdePolicy::flatten() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(shape_.param_count()));
  out.insert(out.end(), A_.a.begin(), A_.a.end());
  out.insert(out.end(), B_.a.begin(), B_.a.end());
  return out;
}

void NdePolicy::control(const LaneBlock& io) const {
  const int H = shape_.latent, P = shape_.target, C = shape_.control;
  double v[kMaxSlots];
  for (int l = 0; l < io.lanes; ++l) {
    int k = 0;
    for (int i = 0; i < H; ++i) v[k++] = io.latent[i][l];
    for (int i = 0; i < P; ++i) v[k++] = io.target[i][l];
    v[k++] = 1.0;
    for (int j = 0; j < C; ++j) {
      double s = 0.0;
      for (int m = 0; m < B_.cols; ++m) s += B_(j, m) * v[m];
      io.out[j][l] = s;
    }
  }
}

void NdePolicy::latent_derivative(const LaneBlock& io) const {
  const int H = shape_.latent, M = shape_.obs, C = shape_.control, P = shape_.target;
  double z[kMaxSlots];
  for (int l = 0; l < io.lanes; ++l) {
    int k = 0;
    for (int i = 0; i < H; ++i) z[k++] = io.latent[i][l];
    for (int i = 0; i < M; ++i) z[k++] = io.obs[i][l];
    for (int i = 0; i < C; ++i) z[k++] = io.u_prev[i][l];
    for (int i = 0; i < P; ++i) z[k++] = io.target[i][l];
    z[k++] = 1.0;
    for (int i = 0; i < H; ++i) {
      double s = 0.0;
      for (int m = 0; m < A_.cols; ++m) s += A_(i, m) * z[m];
      io.out[i][l] = std::tanh(s);
    }
  }
}

std::vector<double> NdePolicy::control_scalar(std::span<const double> a,
                                              std::span<const double> target) const {
  std::vector<double> v(a.begin(), a.end());
  v.insert(v.end(), target.begin(), target.end());
  v.push_back(1.0);
  std::vector<double> u(static_cast<std::size_t>(shape_.control));
  for (int j = 0; j < shape_.control; ++j) {
    double s = 0.0;
    for (int m = 0; m < B_.cols; ++m) s += B_(j, m) * v[static_cast<std::size_t>(m)];
    u[static_cast<std::size_t>(j)] = s;
  }
  return u;
}

std::vector<double> NdePolicy::derivative_scalar(std::span<const double> a,
                                                 std::span<const double> y,
                                                 std::span<const double> u_prev,
                                                 std::span<const double> target) const {
  std::vector<double> z(a.begin(), a.end());
  z.insert(z.end(), y.begin(), y.end());
  z.insert(z.end(), u_prev.begin(), u_prev.end());
  z.insert(z.end(), target.begin(), target.end());
  z.push_back(1.0);
  std::vector<double> adot(static_cast<std::size_t>(shape_.latent));
  for (int i = 0; i < shape_.latent; ++i) {
    double s = 0.0;
    for (int m = 0; m < A_.cols; ++m) s += A_(i, m) * z[static_cast<std::size_t>(m)];
    adot[static_cast<std::size_t>(i)] = std::tanh(s);
  }
  return adot;
}

// ---------------------------------------------------------------------------
// Random search

DynamicTreePolicy sample_random_policy(const FunctionSet& fset, int latent_dim, int obs_dim,
                                       int control_dim, int target_dim, RngStream& rng) {
  const auto state_sig = Signature::dynamic_state(latent_dim, obs_dim, control_dim, target_dim);
  const auto readout_sig = Signature::dynamic_readout(latent_dim, target_dim);
  std::vector<ExprTree> state_trees, readouts;
  for (int i = 0; i < latent_dim; ++i) {
    state_trees.push_back(sample_tree(fset, state_sig, 7, SampleMode::kGrow, rng));
  }
  for (int j = 0; j < control_dim; ++j) {
    for (int tries = 0;; ++tries) {
      ExprTree t = sample_tree(fset, readout_sig, 7, SampleMode::kGrow, rng);
      if (t.references_slot_in(0, latent_dim)) {
        readouts.push_back(std::move(t));
        break;
      }
      if (tries > 10000) throw EngineError("could not satisfy the latent-reference constraint");
    }
  }
  return DynamicTreePolicy(std::move(state_trees), std::move(readouts));
}

// ---------------------------------------------------------------------------
// LQG

namespace {

LqgPolicy::Gains solve_gains(const ShoEnv& env, double omega, double zeta) {
  Mat A(2, 2);
  A(0, 1) = 1.0;
  A(1, 0) = -omega;
  A(1, 1) = -zeta;
  const std::vector<double> b = {0.0, 1.0};
  Mat Q(2, 2);
  Q(0, 0) = 0.5;  // matches the quadratic fitness weights
  const double r = 0.5;

  const Mat P = solve_control_riccati(A, b, Q, r);
  const auto K = lqr_gain(P, b, r);

  LqgPolicy::Gains g;
  g.omega = omega;
  g.zeta = zeta;
  g.K = {K[0], K[1]};
  const auto& obs = env.obs_model();
  for (std::size_t j = 0; j < obs.noise_var.size(); ++j) {
    g.sigma_inv[j] = obs.noise_var[j] > 0.0 ? 1.0 / obs.noise_var[j] : 0.0;
  }
  return g;
}

// Kalman-Bucy update shared by the batch and scalar paths. State layout:
// (xhat1, xhat2, p11, p12, p22); y has M entries observed through D = I
// (M = 2) or D = [1 0] (M = 1).
struct LqgDerivative {
  double dxhat[2];
  double dP[3];
};

inline LqgDerivative lqg_rhs(const LqgPolicy::Gains& g, int M, const double* state,
                             const double* y, double u_prev) {
  const double x0 = state[0], x1 = state[1];
  const double p11 = state[2], p12 = state[3], p22 = state[4];

  // L = P D' Sigma^{-1}; columns of D' pick estimate components
  double L[2][2] = {{0, 0}, {0, 0}};
  L[0][0] = p11 * g.sigma_inv[0];
  L[1][0] = p12 * g.sigma_inv[0];
  if (M > 1) {
    L[0][1] = p12 * g.sigma_inv[1];
    L[1][1] = p22 * g.sigma_inv[1];
  }
  double innov[2] = {y[0] - x0, 0.0};
  if (M > 1) innov[1] = y[1] - x1;

  LqgDerivative d;
  d.dxhat[0] = x1 + L[0][0] * innov[0] + L[0][1] * innov[1];
  d.dxhat[1] =
      -g.omega * x0 - g.zeta * x1 + u_prev + L[1][0] * innov[0] + L[1][1] * innov[1];

  // dP = A P + P A' - P D' Sigma^{-1} D P + V V'
  const double a10 = -g.omega, a11 = -g.zeta;
  const double ap11 = 2.0 * p12;
  const double ap12 = p22 + a10 * p11 + a11 * p12;
  const double ap22 = 2.0 * (a10 * p12 + a11 * p22);
  double q11 = p11 * p11 * g.sigma_inv[0];
  double q12 = p11 * p12 * g.sigma_inv[0];
  double q22 = p12 * p12 * g.sigma_inv[0];
  if (M > 1) {
    q11 += p12 * p12 * g.sigma_inv[1];
    q12 += p12 * p22 * g.sigma_inv[1];
    q22 += p22 * p22 * g.sigma_inv[1];
  }
  d.dP[0] = ap11 - q11;
  d.dP[1] = ap12 - q12;
  d.dP[2] = ap22 - q22 + LqgPolicy::kProcessVar;
  return d;
}

}  // namespace

LqgPolicy::LqgPolicy(const ShoEnv& env, std::span<const ShoEnv::Trial> trials)
    : obs_dim_(env.obs_dim()) {
  std::map<std::pair<double, double>, Gains> cache;
  gains_.reserve(trials.size());
  for (const auto& trial : trials) {
    const auto key = std::make_pair(trial.omega, trial.zeta);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, solve_gains(env, trial.omega, trial.zeta)).first;
    }
    Gains g = it->second;
    g.target = env.target_state(trial);
    // steady-state feedforward: b u_ff = -A x*
    g.u_ff = trial.omega * trial.target_pos;
    gains_.push_back(std::move(g));
  }
}

void LqgPolicy::initial_latent(int, double* out) const {
  out[0] = 0.0;
  out[1] = 0.0;
  out[2] = kPriorVarPos;
  out[3] = 0.0;
  out[4] = kPriorVarVel;
}

void LqgPolicy::control(const LaneBlock& io) const {
  for (int l = 0; l < io.lanes; ++l) {
    const Gains& g = gains_[static_cast<std::size_t>(l)];
    const double e0 = io.latent[0][l] - g.target[0];
    const double e1 = io.latent[1][l] - g.target[1];
    io.out[0][l] = -g.K[0] * e0 - g.K[1] * e1 + g.u_ff;
  }
}

void LqgPolicy::latent_derivative(const LaneBlock& io) const {
  const int M = obs_dim_;
  for (int l = 0; l < io.lanes; ++l) {
    const Gains& g = gains_[static_cast<std::size_t>(l)];
    const double state[kLatentDim] = {io.latent[0][l], io.latent[1][l], io.latent[2][l],
                                      io.latent[3][l], io.latent[4][l]};
    const double y[2] = {io.obs[0][l], M > 1 ? io.obs[1][l] : 0.0};
    const LqgDerivative d = lqg_rhs(g, M, state, y, io.u_prev[0][l]);
    io.out[0][l] = d.dxhat[0];
    io.out[1][l] = d.dxhat[1];
    io.out[2][l] = d.dP[0];
    io.out[3][l] = d.dP[1];
    io.out[4][l] = d.dP[2];
  }
}

LqgController::LqgController(const ShoEnv& env, const ShoEnv::Trial& trial)
    : obs_dim_(env.obs_dim()) {
  const LqgPolicy policy(env, std::span<const ShoEnv::Trial>(&trial, 1));
  gains_ = policy.gains(0);
  policy.initial_latent(0, state_.data());
}

double LqgController::step(std::span<const double> y, double dt) {
  const LqgDerivative d = lqg_rhs(gains_, obs_dim_, state_.data(), y.data(), u_prev_);
  state_[0] += dt * d.dxhat[0];
  state_[1] += dt * d.dxhat[1];
  state_[2] += dt * d.dP[0];
  state_[3] += dt * d.dP[1];
  state_[4] += dt * d.dP[2];
  const double u = -gains_.K[0] * (state_[0] - gains_.target[0]) -
                   gains_.K[1] * (state_[1] - gains_.target[1]) + gains_.u_ff;
  u_prev_ = u;
  return u;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void emit_header(std::ostringstream& out, const char* kind, int latent, int obs, int control,
                 int target) {
  out << "symbolic-policy v1\n";
  out << "kind " << kind << "\n";
  out << "latent " << latent << "\n";
  out << "obs " << obs << "\n";
  out << "control " << control << "\n";
  out << "target " << target << "\n";
}

}  // namespace

std::string policy_to_text(const StaticTreePolicy& policy) {
  std::ostringstream out;
  emit_header(out, "static", 0, policy.obs_dim(), policy.control_dim(), policy.target_dim());
  for (int j = 0; j < policy.control_dim(); ++j) {
    out << "u" << (j + 1) << " = " << render(policy.readouts()[static_cast<std::size_t>(j)])
        << "\n";
  }
  return out.str();
}

std::string policy_to_text(const DynamicTreePolicy& policy) {
  std::ostringstream out;
  emit_header(out, "dynamic", policy.latent_dim(), policy.obs_dim(), policy.control_dim(),
              policy.target_dim());
  for (int i = 0; i < policy.latent_dim(); ++i) {
    out << "adot" << (i + 1) << " = "
        << render(policy.state_trees()[static_cast<std::size_t>(i)]) << "\n";
  }
  for (int j = 0; j < policy.control_dim(); ++j) {
    out << "u" << (j + 1) << " = " << render(policy.readouts()[static_cast<std::size_t>(j)])
        << "\n";
  }
  return out.str();
}

SymbolicPolicy policy_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string kind;
  int latent = -1, obs = -1, control = -1, target = -1;
  std::vector<std::pair<std::string, std::string>> exprs;
  bool seen_magic = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_magic) {
      if (line.rfind("symbolic-policy", 0) != 0) {
        throw IoError("not a symbolic policy file");
      }
      seen_magic = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream kv(line);
      std::string key;
      kv >> key;
      if (key == "kind") {
        kv >> kind;
      } else if (key == "latent") {
        kv >> latent;
      } else if (key == "obs") {
        kv >> obs;
      } else if (key == "control") {
        kv >> control;
      } else if (key == "target") {
        kv >> target;
      } else {
        throw IoError("unknown policy header field: " + key);
      }
      continue;
    }
    std::string name = line.substr(0, eq);
    std::string expr = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    trim(name);
    trim(expr);
    exprs.emplace_back(name, expr);
  }
  if (kind.empty() || latent < 0 || obs < 0 || control < 1 || target < 1) {
    throw IoError("incomplete policy header");
  }

  auto find_expr = [&exprs](const std::string& name) -> const std::string& {
    for (const auto& [n, e] : exprs) {
      if (n == name) return e;
    }
    throw IoError("policy file is missing the definition of " + name);
  };

  if (kind == "static") {
    const auto sig = Signature::static_readout(obs, target);
    std::vector<ExprTree> readouts;
    for (int j = 0; j < control; ++j) {
      readouts.push_back(parse(find_expr("u" + std::to_string(j + 1)), sig));
    }
    return StaticTreePolicy(std::move(readouts));
  }
  if (kind == "dynamic") {
    const auto state_sig = Signature::dynamic_state(latent, obs, control, target);
    const auto readout_sig = Signature::dynamic_readout(latent, target);
    std::vector<ExprTree> states, readouts;
    for (int i = 0; i < latent; ++i) {
      states.push_back(parse(find_expr("adot" + std::to_string(i + 1)), state_sig));
    }
    for (int j = 0; j < control; ++j) {
      readouts.push_back(parse(find_expr("u" + std::to_string(j + 1)), readout_sig));
    }
    return DynamicTreePolicy(std::move(states), std::move(readouts));
  }
  throw IoError("unknown policy kind: " + kind);
}

std::string nde_to_text(const NdePolicy& policy) {
  std::ostringstream out;
  const auto& s = policy.shape();
  out << "nde-policy v1\n";
  out << "latent " << s.latent << "\nobs " << s.obs << "\ncontrol " << s.control << "\ntarget "
      << s.target << "\n";
  out.precision(17);
  for (double v : policy.flatten()) out << v << "\n";
  return out.str();
}

NdePolicy nde_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::getline(in, magic);
  if (magic.rfind("nde-policy", 0) != 0) throw IoError("not an nde policy file");
  NdeShape shape;
  for (int i = 0; i < 4; ++i) {
    std::string key;
    int value = 0;
    in >> key >> value;
    if (key == "latent") {
      shape.latent = value;
    } else if (key == "obs") {
      shape.obs = value;
    } else if (key == "control") {
      shape.control = value;
    } else if (key == "target") {
      shape.target = value;
    } else {
      throw IoError("unknown nde header field: " + key);
    }
  }
  std::vector<double> params;
  double v;
  while (in >> v) params.push_back(v);
  return NdePolicy(shape, params);
}

}  // namespace sympolicy
