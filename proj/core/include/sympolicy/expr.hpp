#pragma once

// Symbolic expression trees: the genetic material. Trees are immutable after
// construction; all structural operations return new trees. Nodes are stored
// in postorder in a flat arena, so evaluation is a single linear pass with a
// value stack and subtrees are contiguous ranges.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sympolicy/errors.hpp"
#include "sympolicy/rng.hpp"

namespace sympolicy {

enum class Op : std::uint8_t {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kSin,
  kCos,
  kExp,
  kLog,
  kVar,
  kConst,
};

inline int op_arity(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kPow:
      return 2;
    case Op::kSin:
    case Op::kCos:
    case Op::kExp:
    case Op::kLog:
      return 1;
    default:
      return 0;
  }
}

inline bool is_binary(Op op) { return op_arity(op) == 2; }
inline bool is_unary(Op op) { return op_arity(op) == 1; }
inline bool is_leaf(Op op) { return op_arity(op) == 0; }

const char* op_name(Op op);

// Protected operator semantics: every operation maps finite inputs to a
// finite result. Division clamps the divisor magnitude at 1e-9, log takes
// |x| + 1e-9, exp clamps its argument to [-50, 50], and pow is
// sign(a) * |a|^clamp(b, -5, 5) with |a| floored at 1e-9 for negative
// exponents. Each result is additionally clamped to +-1e30 so that chained
// products and powers cannot overflow.
namespace protected_ops {

constexpr double kDivisorFloor = 1e-9;
constexpr double kExpArgLimit = 50.0;
constexpr double kPowExpLimit = 5.0;
constexpr double kMagnitudeLimit = 1e30;

inline double clamp_mag(double v) {
  if (v > kMagnitudeLimit) return kMagnitudeLimit;
  if (v < -kMagnitudeLimit) return -kMagnitudeLimit;
  return v;
}

inline double add(double a, double b) { return clamp_mag(a + b); }
inline double sub(double a, double b) { return clamp_mag(a - b); }
inline double mul(double a, double b) { return clamp_mag(a * b); }

inline double div(double a, double b) {
  if (b > -kDivisorFloor && b < kDivisorFloor) {
    return clamp_mag(a * (b < 0.0 ? -1.0 : 1.0) / kDivisorFloor);
  }
  return clamp_mag(a / b);
}

inline double pow(double a, double b) {
  double e = b;
  if (e > kPowExpLimit) e = kPowExpLimit;
  if (e < -kPowExpLimit) e = -kPowExpLimit;
  double m = a < 0.0 ? -a : a;
  if (e < 0.0 && m < kDivisorFloor) m = kDivisorFloor;
  const double r = std::pow(m, e);
  return clamp_mag(a < 0.0 ? -r : r);
}

inline double exp(double x) {
  if (x > kExpArgLimit) x = kExpArgLimit;
  if (x < -kExpArgLimit) x = -kExpArgLimit;
  return std::exp(x);
}

inline double log(double x) { return std::log((x < 0.0 ? -x : x) + kDivisorFloor); }

}  // namespace protected_ops

// Ordered, named input slots of a tree. Slot groups follow the policy
// conventions: latent variables a1..aH first (when present), then
// observations y1..yM, previous controls u1..uC, and the target (named
// "xstar" when scalar). Bare group names ("u", "y", "a") resolve as aliases
// when the group has a single slot.
class Signature {
public:
  Signature() = default;

  struct Group {
    std::string prefix;
    int count = 0;
  };

  static std::shared_ptr<const Signature> make(const std::vector<Group>& groups,
                                               int latent_count = 0);

  // (y1..yM, xstar..): static readout input
  static std::shared_ptr<const Signature> static_readout(int obs_dim, int target_dim);
  // (a1..aH, y1..yM, u1..uC, xstar..): dynamic state-equation input
  static std::shared_ptr<const Signature> dynamic_state(int latent_dim, int obs_dim,
                                                        int control_dim, int target_dim);
  // (a1..aH, xstar..): dynamic readout input
  static std::shared_ptr<const Signature> dynamic_readout(int latent_dim, int target_dim);

  int arity() const { return static_cast<int>(names_.size()); }
  const std::string& name(int slot) const { return names_[static_cast<std::size_t>(slot)]; }
  std::optional<int> find(std::string_view name) const;
  // Latent variables occupy slots [0, latent_count).
  int latent_count() const { return latent_count_; }
  bool operator==(const Signature& other) const {
    return names_ == other.names_ && latent_count_ == other.latent_count_;
  }

private:
  std::vector<std::string> names_;
  std::vector<std::pair<std::string, int>> aliases_;
  int latent_count_ = 0;
};

using SignaturePtr = std::shared_ptr<const Signature>;

struct ExprNode {
  Op op = Op::kConst;
  std::int32_t subtree_size = 1;  // nodes in the rooted subtree, incl. self
  std::int32_t slot = 0;          // kVar only
  double value = 0.0;             // kConst only
};

struct TreeMeasure {
  int depth = 0;
  int node_count = 0;
};

class ExprTree {
public:
  // Deepest tree evaluate() accepts; enforced at construction.
  static constexpr int kMaxEvalDepth = 48;

  ExprTree() = default;

  static ExprTree constant(double value, SignaturePtr sig);
  static ExprTree variable(int slot, SignaturePtr sig);
  static ExprTree unary(Op op, ExprTree child);
  static ExprTree binary(Op op, ExprTree lhs, ExprTree rhs);
  static ExprTree from_postorder(std::vector<ExprNode> nodes, SignaturePtr sig);

  bool empty() const { return nodes_.empty(); }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int depth() const;
  const SignaturePtr& signature() const { return sig_; }
  std::span<const ExprNode> nodes() const { return nodes_; }

  // Node ids are postorder indices; the root is node_count() - 1.
  int root_id() const { return node_count() - 1; }
  std::pair<int, int> subtree_range(int node_id) const {
    const auto& n = nodes_[static_cast<std::size_t>(node_id)];
    return {node_id - n.subtree_size + 1, node_id};
  }
  ExprTree subtree(int node_id) const;
  ExprTree with_subtree_replaced(int node_id, const ExprTree& replacement) const;

  double evaluate(std::span<const double> inputs) const;
  // Same value as evaluate(); additionally reports whether any protected
  // branch fired within a safety margin of its threshold.
  double evaluate_flagged(std::span<const double> inputs, bool* protection_hit) const;

  // Evaluates the tree once per lane. input_rows[slot] points at `lanes`
  // doubles; out receives `lanes` results; scratch must hold at least
  // (depth() + 1) * lanes doubles.
  void evaluate_lanes(const double* const* input_rows, int lanes, double* out,
                      double* scratch) const;

  std::uint64_t structure_hash() const;
  bool references_slot_in(int lo, int hi) const;
  bool identical_to(const ExprTree& other) const;

private:
  std::vector<ExprNode> nodes_;
  SignaturePtr sig_;
};

struct FunctionSet {
  std::vector<Op> ops;
  double constant_low = -5.0;
  double constant_high = 5.0;

  static FunctionSet arithmetic();           // + - * / pow
  static FunctionSet arithmetic_trig();      // + - * / pow sin cos
  static FunctionSet arithmetic_exp_log();   // + - * / pow exp log

  void validate() const;
};

enum class SampleMode { kFull, kGrow };

// Random tree generation. In full mode leaves appear only at the requested
// depth; in grow mode a leaf may be drawn at any depth >= 1 with probability
// proportional to the leaf share of the combined symbol set.
ExprTree sample_tree(const FunctionSet& fset, const SignaturePtr& sig, int depth,
                     SampleMode mode, RngStream& rng);

TreeMeasure measure(const ExprTree& tree);

// Infix text with minimal parentheses; parse(render(t)) evaluates bit-
// identically to t. Constants use shortest round-trip formatting.
std::string render(const ExprTree& tree);
ExprTree parse(std::string_view text, SignaturePtr sig);

// Semantics-preserving rewriting (constant folding, identity elimination,
// cancellation, canonical ordering of commutative operands). Never increases
// the node count; equivalence holds away from protected-domain points.
ExprTree simplify(const ExprTree& tree);

}  // namespace sympolicy
