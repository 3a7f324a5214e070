#include "sympolicy/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sympolicy {

const char* op_name(Op op) {
  switch (op) {
    case Op::kAdd: return "+";
    case Op::kSub: return "-";
    case Op::kMul: return "*";
    case Op::kDiv: return "/";
    case Op::kPow: return "^";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kVar: return "var";
    case Op::kConst: return "const";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Signature

std::shared_ptr<const Signature> Signature::make(const std::vector<Group>& groups,
                                                 int latent_count) {
  auto sig = std::make_shared<Signature>();
  for (const auto& g : groups) {
    if (g.count < 0) throw ConfigError("negative slot group count");
    if (g.count == 1) {
      // Scalar target keeps the bare name; other scalar groups stay indexed
      // but accept the bare name as an alias.
      if (g.prefix == "xstar") {
        sig->names_.push_back(g.prefix);
      } else {
        sig->names_.push_back(g.prefix + "1");
        sig->aliases_.emplace_back(g.prefix, static_cast<int>(sig->names_.size()) - 1);
      }
    } else {
      for (int i = 0; i < g.count; ++i) {
        sig->names_.push_back(g.prefix + std::to_string(i + 1));
      }
    }
  }
  sig->latent_count_ = latent_count;
  return sig;
}

std::shared_ptr<const Signature> Signature::static_readout(int obs_dim, int target_dim) {
  return make({{"y", obs_dim}, {"xstar", target_dim}}, 0);
}

std::shared_ptr<const Signature> Signature::dynamic_state(int latent_dim, int obs_dim,
                                                          int control_dim, int target_dim) {
  return make({{"a", latent_dim}, {"y", obs_dim}, {"u", control_dim}, {"xstar", target_dim}},
              latent_dim);
}

std::shared_ptr<const Signature> Signature::dynamic_readout(int latent_dim, int target_dim) {
  return make({{"a", latent_dim}, {"xstar", target_dim}}, latent_dim);
}

std::optional<int> Signature::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  for (const auto& [alias, slot] : aliases_) {
    if (alias == name) return slot;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ExprTree construction

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw EngineError(what);
}

}  // namespace

ExprTree ExprTree::constant(double value, SignaturePtr sig) {
  ExprTree t;
  t.sig_ = std::move(sig);
  t.nodes_.push_back(ExprNode{Op::kConst, 1, 0, value});
  return t;
}

ExprTree ExprTree::variable(int slot, SignaturePtr sig) {
  require(sig != nullptr, "variable leaf needs a signature");
  require(slot >= 0 && slot < sig->arity(), "variable slot outside signature");
  ExprTree t;
  t.sig_ = std::move(sig);
  t.nodes_.push_back(ExprNode{Op::kVar, 1, slot, 0.0});
  return t;
}

ExprTree ExprTree::unary(Op op, ExprTree child) {
  require(is_unary(op), "unary() needs a unary operator");
  ExprTree t = std::move(child);
  t.nodes_.push_back(ExprNode{op, static_cast<std::int32_t>(t.nodes_.size()) + 1, 0, 0.0});
  require(t.depth() <= kMaxEvalDepth, "tree too deep");
  return t;
}

ExprTree ExprTree::binary(Op op, ExprTree lhs, ExprTree rhs) {
  require(is_binary(op), "binary() needs a binary operator");
  require(lhs.sig_ == rhs.sig_ || (lhs.sig_ && rhs.sig_ && *lhs.sig_ == *rhs.sig_),
          "operand signatures differ");
  ExprTree t = std::move(lhs);
  t.nodes_.insert(t.nodes_.end(), rhs.nodes_.begin(), rhs.nodes_.end());
  t.nodes_.push_back(ExprNode{op, static_cast<std::int32_t>(t.nodes_.size()) + 1, 0, 0.0});
  require(t.depth() <= kMaxEvalDepth, "tree too deep");
  return t;
}

ExprTree ExprTree::from_postorder(std::vector<ExprNode> nodes, SignaturePtr sig) {
  require(!nodes.empty(), "empty node arena");
  // Validate stack discipline and subtree sizes in one pass.
  std::vector<std::int32_t> size_stack;
  size_stack.reserve(16);
  for (const auto& n : nodes) {
    const int arity = op_arity(n.op);
    require(static_cast<int>(size_stack.size()) >= arity, "malformed postorder arena");
    std::int32_t sz = 1;
    for (int k = 0; k < arity; ++k) {
      sz += size_stack.back();
      size_stack.pop_back();
    }
    require(sz == n.subtree_size, "inconsistent subtree size");
    if (n.op == Op::kVar) {
      require(sig != nullptr && n.slot >= 0 && n.slot < sig->arity(),
              "variable slot outside signature");
    }
    size_stack.push_back(sz);
  }
  require(size_stack.size() == 1, "arena does not form a single tree");
  ExprTree t;
  t.nodes_ = std::move(nodes);
  t.sig_ = std::move(sig);
  require(t.depth() <= kMaxEvalDepth, "tree too deep");
  return t;
}

int ExprTree::depth() const {
  if (nodes_.empty()) return 0;
  int stack[kMaxEvalDepth + 2];
  int top = 0;
  for (const auto& n : nodes_) {
    const int arity = op_arity(n.op);
    int d = 0;
    for (int k = 0; k < arity; ++k) d = std::max(d, stack[--top]);
    if (top >= kMaxEvalDepth + 1) throw EngineError("tree too deep");
    stack[top++] = d + 1;
  }
  return stack[0];
}

ExprTree ExprTree::subtree(int node_id) const {
  const auto [first, last] = subtree_range(node_id);
  ExprTree t;
  t.sig_ = sig_;
  t.nodes_.assign(nodes_.begin() + first, nodes_.begin() + last + 1);
  return t;
}

ExprTree ExprTree::with_subtree_replaced(int node_id, const ExprTree& replacement) const {
  require(!replacement.empty(), "empty replacement");
  const auto [first, last] = subtree_range(node_id);
  const std::int32_t delta =
      replacement.node_count() - nodes_[static_cast<std::size_t>(node_id)].subtree_size;
  ExprTree t;
  t.sig_ = sig_;
  t.nodes_.reserve(nodes_.size() + static_cast<std::size_t>(std::max<std::int32_t>(delta, 0)));
  t.nodes_.insert(t.nodes_.end(), nodes_.begin(), nodes_.begin() + first);
  t.nodes_.insert(t.nodes_.end(), replacement.nodes_.begin(), replacement.nodes_.end());
  for (std::size_t j = static_cast<std::size_t>(node_id) + 1; j < nodes_.size(); ++j) {
    ExprNode n = nodes_[j];
    const std::int32_t j_first = static_cast<std::int32_t>(j) - n.subtree_size + 1;
    if (j_first <= first) n.subtree_size += delta;  // ancestor of the spliced range
    t.nodes_.push_back(n);
  }
  require(t.depth() <= kMaxEvalDepth, "tree too deep");
  return t;
}

// ---------------------------------------------------------------------------
// Evaluation

double ExprTree::evaluate(std::span<const double> inputs) const {
  require(sig_ == nullptr || static_cast<int>(inputs.size()) == sig_->arity(),
          "input arity mismatch");
  double stack[kMaxEvalDepth + 2];
  int top = 0;
  for (const auto& n : nodes_) {
    switch (n.op) {
      case Op::kConst: stack[top++] = n.value; break;
      case Op::kVar: stack[top++] = inputs[static_cast<std::size_t>(n.slot)]; break;
      case Op::kAdd: --top; stack[top - 1] = protected_ops::add(stack[top - 1], stack[top]); break;
      case Op::kSub: --top; stack[top - 1] = protected_ops::sub(stack[top - 1], stack[top]); break;
      case Op::kMul: --top; stack[top - 1] = protected_ops::mul(stack[top - 1], stack[top]); break;
      case Op::kDiv: --top; stack[top - 1] = protected_ops::div(stack[top - 1], stack[top]); break;
      case Op::kPow: --top; stack[top - 1] = protected_ops::pow(stack[top - 1], stack[top]); break;
      case Op::kSin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::kCos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::kExp: stack[top - 1] = protected_ops::exp(stack[top - 1]); break;
      case Op::kLog: stack[top - 1] = protected_ops::log(stack[top - 1]); break;
    }
  }
  return stack[0];
}

double ExprTree::evaluate_flagged(std::span<const double> inputs, bool* protection_hit) const {
  using namespace protected_ops;
  bool hit = false;
  double stack[kMaxEvalDepth + 2];
  int top = 0;
  auto checked = [&hit](double v) {
    if (v > 0.9 * kMagnitudeLimit || v < -0.9 * kMagnitudeLimit) hit = true;
    return clamp_mag(v);
  };
  for (const auto& n : nodes_) {
    switch (n.op) {
      case Op::kConst: stack[top++] = n.value; break;
      case Op::kVar: stack[top++] = inputs[static_cast<std::size_t>(n.slot)]; break;
      case Op::kAdd: --top; stack[top - 1] = checked(stack[top - 1] + stack[top]); break;
      case Op::kSub: --top; stack[top - 1] = checked(stack[top - 1] - stack[top]); break;
      case Op::kMul: --top; stack[top - 1] = checked(stack[top - 1] * stack[top]); break;
      case Op::kDiv:
        --top;
        if (std::abs(stack[top]) < 1e-6) hit = true;
        stack[top - 1] = div(stack[top - 1], stack[top]);
        break;
      case Op::kPow:
        --top;
        if (std::abs(stack[top]) > 4.9) hit = true;
        if (stack[top] < 0.0 && std::abs(stack[top - 1]) < 1e-6) hit = true;
        stack[top - 1] = pow(stack[top - 1], stack[top]);
        break;
      case Op::kSin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::kCos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::kExp:
        if (std::abs(stack[top - 1]) > 49.0) hit = true;
        stack[top - 1] = exp(stack[top - 1]);
        break;
      case Op::kLog:
        if (std::abs(stack[top - 1]) < 1e-6) hit = true;
        stack[top - 1] = log(stack[top - 1]);
        break;
    }
  }
  if (protection_hit) *protection_hit = hit;
  return stack[0];
}

void ExprTree::evaluate_lanes(const double* const* input_rows, int lanes, double* out,
                              double* scratch) const {
  using namespace protected_ops;
  double* stack_rows[kMaxEvalDepth + 2];
  int top = 0;
  auto row = [&](int r) { return scratch + static_cast<std::ptrdiff_t>(r) * lanes; };
  for (const auto& n : nodes_) {
    switch (n.op) {
      case Op::kConst: {
        double* dst = row(top);
        stack_rows[top++] = dst;
        const double v = n.value;
        for (int l = 0; l < lanes; ++l) dst[l] = v;
        break;
      }
      case Op::kVar: {
        double* dst = row(top);
        stack_rows[top++] = dst;
        const double* src = input_rows[n.slot];
        for (int l = 0; l < lanes; ++l) dst[l] = src[l];
        break;
      }
      case Op::kAdd: {
        --top;
        double* a = stack_rows[top - 1];
        const double* b = stack_rows[top];
        for (int l = 0; l < lanes; ++l) a[l] = add(a[l], b[l]);
        break;
      }
      case Op::kSub: {
        --top;
        double* a = stack_rows[top - 1];
        const double* b = stack_rows[top];
        for (int l = 0; l < lanes; ++l) a[l] = sub(a[l], b[l]);
        break;
      }
      case Op::kMul: {
        --top;
        double* a = stack_rows[top - 1];
        const double* b = stack_rows[top];
        for (int l = 0; l < lanes; ++l) a[l] = mul(a[l], b[l]);
        break;
      }
      case Op::kDiv: {
        --top;
        double* a = stack_rows[top - 1];
        const double* b = stack_rows[top];
        for (int l = 0; l < lanes; ++l) a[l] = div(a[l], b[l]);
        break;
      }
      case Op::kPow: {
        --top;
        double* a = stack_rows[top - 1];
        const double* b = stack_rows[top];
        for (int l = 0; l < lanes; ++l) a[l] = pow(a[l], b[l]);
        break;
      }
      case Op::kSin: {
        double* a = stack_rows[top - 1];
        for (int l = 0; l < lanes; ++l) a[l] = std::sin(a[l]);
        break;
      }
      case Op::kCos: {
        double* a = stack_rows[top - 1];
        for (int l = 0; l < lanes; ++l) a[l] = std::cos(a[l]);
        break;
      }
      case Op::kExp: {
        double* a = stack_rows[top - 1];
        for (int l = 0; l < lanes; ++l) a[l] = exp(a[l]);
        break;
      }
      case Op::kLog: {
        double* a = stack_rows[top - 1];
        for (int l = 0; l < lanes; ++l) a[l] = log(a[l]);
        break;
      }
    }
  }
  const double* res = stack_rows[0];
  for (int l = 0; l < lanes; ++l) out[l] = res[l];
}

// ---------------------------------------------------------------------------
// Structure utilities

std::uint64_t ExprTree::structure_hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (const auto& n : nodes_) {
    mix(static_cast<std::uint64_t>(n.op));
    if (n.op == Op::kVar) {
      mix(static_cast<std::uint64_t>(n.slot));
    } else if (n.op == Op::kConst) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(n.value));
      std::memcpy(&bits, &n.value, sizeof(bits));
      mix(bits);
    }
  }
  return h;
}

bool ExprTree::references_slot_in(int lo, int hi) const {
  for (const auto& n : nodes_) {
    if (n.op == Op::kVar && n.slot >= lo && n.slot < hi) return true;
  }
  return false;
}

bool ExprTree::identical_to(const ExprTree& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.op != b.op) return false;
    if (a.op == Op::kVar && a.slot != b.slot) return false;
    if (a.op == Op::kConst && a.value != b.value) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// FunctionSet and sampling

FunctionSet FunctionSet::arithmetic() {
  FunctionSet f;
  f.ops = {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv, Op::kPow};
  return f;
}

FunctionSet FunctionSet::arithmetic_trig() {
  FunctionSet f = arithmetic();
  f.ops.push_back(Op::kSin);
  f.ops.push_back(Op::kCos);
  return f;
}

FunctionSet FunctionSet::arithmetic_exp_log() {
  FunctionSet f = arithmetic();
  f.ops.push_back(Op::kExp);
  f.ops.push_back(Op::kLog);
  return f;
}

void FunctionSet::validate() const {
  if (ops.empty()) throw ConfigError("function set has no operators");
  for (Op op : ops) {
    if (is_leaf(op)) throw ConfigError("leaf kinds do not belong in the operator set");
  }
  if (!(constant_low < constant_high)) throw ConfigError("bad constant range");
}

namespace {

void sample_leaf(const FunctionSet& fset, const SignaturePtr& sig, RngStream& rng,
                 std::vector<ExprNode>& out) {
  const int slots = sig ? sig->arity() : 0;
  const std::uint64_t pick = rng.uniform_index(static_cast<std::uint64_t>(slots) + 1);
  if (pick < static_cast<std::uint64_t>(slots)) {
    out.push_back(ExprNode{Op::kVar, 1, static_cast<std::int32_t>(pick), 0.0});
  } else {
    out.push_back(
        ExprNode{Op::kConst, 1, 0, rng.uniform(fset.constant_low, fset.constant_high)});
  }
}

// Appends a subtree in postorder; returns its node count.
std::int32_t sample_rec(const FunctionSet& fset, const SignaturePtr& sig, int depth_left,
                        SampleMode mode, RngStream& rng, std::vector<ExprNode>& out) {
  const int slots = sig ? sig->arity() : 0;
  bool make_leaf;
  if (depth_left <= 1) {
    make_leaf = true;
  } else if (mode == SampleMode::kFull) {
    make_leaf = false;
  } else {
    // grow: leaf probability equals the leaf share of the symbol set
    const double leaves = static_cast<double>(slots) + 1.0;
    make_leaf = rng.uniform01() < leaves / (leaves + static_cast<double>(fset.ops.size()));
  }
  if (make_leaf) {
    sample_leaf(fset, sig, rng, out);
    return 1;
  }
  const Op op = fset.ops[rng.uniform_index(fset.ops.size())];
  std::int32_t size = 1;
  for (int k = 0; k < op_arity(op); ++k) {
    size += sample_rec(fset, sig, depth_left - 1, mode, rng, out);
  }
  out.push_back(ExprNode{op, size, 0, 0.0});
  return size;
}

}  // namespace

ExprTree sample_tree(const FunctionSet& fset, const SignaturePtr& sig, int depth,
                     SampleMode mode, RngStream& rng) {
  fset.validate();
  if (depth < 1) throw ConfigError("sample_tree needs depth >= 1");
  std::vector<ExprNode> nodes;
  sample_rec(fset, sig, depth, mode, rng, nodes);
  return ExprTree::from_postorder(std::move(nodes), sig);
}

TreeMeasure measure(const ExprTree& tree) {
  return TreeMeasure{tree.depth(), tree.node_count()};
}

}  // namespace sympolicy
