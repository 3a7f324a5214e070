#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sympolicy/expr.hpp"

// Rewrite rules, applied bottom-up to a fixpoint:
//   * constant folding through the protected operators (bit-exact with
//     runtime evaluation),
//   * additive / multiplicative identities (x+0, x*1, x*0, x/1, 0/x, x^1,
//     1^x),
//   * cancellation x-x -> 0 and x/x -> 1,
//   * double negation 0-(0-x) -> x and (-1)*((-1)*x) -> x,
//   * commutative operands ordered by rendered text.
// Every rule is value-exact under the protected semantics except x/x -> 1,
// which differs only where the divisor protection fires.

namespace sympolicy {

namespace {

struct SNode {
  Op op = Op::kConst;
  double value = 0.0;
  std::int32_t slot = 0;
  std::vector<SNode> kids;

  bool is_const(double v) const { return op == Op::kConst && value == v; }
  bool is_const() const { return op == Op::kConst; }
};

SNode build(const ExprTree& tree, int node_id) {
  const auto& n = tree.nodes()[static_cast<std::size_t>(node_id)];
  SNode s;
  s.op = n.op;
  s.value = n.value;
  s.slot = n.slot;
  const int arity = op_arity(n.op);
  if (arity == 1) {
    s.kids.push_back(build(tree, node_id - 1));
  } else if (arity == 2) {
    const int right = node_id - 1;
    const int left =
        right - tree.nodes()[static_cast<std::size_t>(right)].subtree_size;
    s.kids.push_back(build(tree, left));
    s.kids.push_back(build(tree, right));
  }
  return s;
}

std::int32_t flatten(const SNode& s, std::vector<ExprNode>& out) {
  std::int32_t size = 1;
  for (const auto& k : s.kids) size += flatten(k, out);
  out.push_back(ExprNode{s.op, size, s.slot, s.value});
  return size;
}

ExprTree to_tree(const SNode& s, const SignaturePtr& sig) {
  std::vector<ExprNode> nodes;
  flatten(s, nodes);
  return ExprTree::from_postorder(std::move(nodes), sig);
}

int count_nodes(const SNode& s) {
  int n = 1;
  for (const auto& k : s.kids) n += count_nodes(k);
  return n;
}

bool equal(const SNode& a, const SNode& b) {
  if (a.op != b.op) return false;
  if (a.op == Op::kConst && a.value != b.value) return false;
  if (a.op == Op::kVar && a.slot != b.slot) return false;
  for (std::size_t i = 0; i < a.kids.size(); ++i) {
    if (!equal(a.kids[i], b.kids[i])) return false;
  }
  return true;
}

double fold_op(Op op, const SNode& n) {
  using namespace protected_ops;
  switch (op) {
    case Op::kAdd: return add(n.kids[0].value, n.kids[1].value);
    case Op::kSub: return sub(n.kids[0].value, n.kids[1].value);
    case Op::kMul: return mul(n.kids[0].value, n.kids[1].value);
    case Op::kDiv: return div(n.kids[0].value, n.kids[1].value);
    case Op::kPow: return pow(n.kids[0].value, n.kids[1].value);
    case Op::kSin: return std::sin(n.kids[0].value);
    case Op::kCos: return std::cos(n.kids[0].value);
    case Op::kExp: return exp(n.kids[0].value);
    case Op::kLog: return log(n.kids[0].value);
    default: return n.value;
  }
}

bool is_neg_of(const SNode& n, const SNode** inner) {
  // matches 0 - x and (-1) * x
  if (n.op == Op::kSub && n.kids[0].is_const(0.0)) {
    *inner = &n.kids[1];
    return true;
  }
  if (n.op == Op::kMul && n.kids[0].is_const(-1.0)) {
    *inner = &n.kids[1];
    return true;
  }
  return false;
}

// One bottom-up pass; sets *changed when any rewrite fired.
SNode pass(SNode n, const SignaturePtr& sig, bool* changed) {
  for (auto& k : n.kids) k = pass(std::move(k), sig, changed);

  const int arity = op_arity(n.op);
  if (arity == 0) return n;

  bool all_const = true;
  for (const auto& k : n.kids) all_const &= k.is_const();
  if (all_const) {
    SNode folded;
    folded.op = Op::kConst;
    folded.value = fold_op(n.op, n);
    *changed = true;
    return folded;
  }

  auto take = [changed](SNode& k) {
    *changed = true;
    return std::move(k);
  };
  auto constant = [changed](double v) {
    *changed = true;
    SNode c;
    c.op = Op::kConst;
    c.value = v;
    return c;
  };

  switch (n.op) {
    case Op::kAdd:
      if (n.kids[0].is_const(0.0)) return take(n.kids[1]);
      if (n.kids[1].is_const(0.0)) return take(n.kids[0]);
      break;
    case Op::kSub: {
      if (n.kids[1].is_const(0.0)) return take(n.kids[0]);
      if (equal(n.kids[0], n.kids[1])) return constant(0.0);
      const SNode* inner = nullptr;
      if (n.kids[0].is_const(0.0) && is_neg_of(n.kids[1], &inner)) {
        SNode x = *inner;
        *changed = true;
        return x;
      }
      break;
    }
    case Op::kMul: {
      if (n.kids[0].is_const(1.0)) return take(n.kids[1]);
      if (n.kids[1].is_const(1.0)) return take(n.kids[0]);
      if (n.kids[0].is_const(0.0) || n.kids[1].is_const(0.0)) return constant(0.0);
      const SNode* inner = nullptr;
      if (n.kids[0].is_const(-1.0) && is_neg_of(n.kids[1], &inner)) {
        SNode x = *inner;
        *changed = true;
        return x;
      }
      break;
    }
    case Op::kDiv:
      if (n.kids[1].is_const(1.0)) return take(n.kids[0]);
      if (n.kids[0].is_const(0.0)) return constant(0.0);
      if (equal(n.kids[0], n.kids[1])) return constant(1.0);
      break;
    case Op::kPow:
      if (n.kids[1].is_const(1.0)) return take(n.kids[0]);
      if (n.kids[0].is_const(1.0)) return constant(1.0);
      break;
    default:
      break;
  }

  // canonical operand order for commutative operators
  if (n.op == Op::kAdd || n.op == Op::kMul) {
    const std::string l = render(to_tree(n.kids[0], sig));
    const std::string r = render(to_tree(n.kids[1], sig));
    if (r < l) {
      std::swap(n.kids[0], n.kids[1]);
      *changed = true;
    }
  }
  return n;
}

}  // namespace

ExprTree simplify(const ExprTree& tree) {
  if (tree.empty()) return tree;
  SNode root = build(tree, tree.root_id());
  for (int iter = 0; iter < 16; ++iter) {
    bool changed = false;
    root = pass(std::move(root), tree.signature(), &changed);
    if (!changed) break;
  }
  if (count_nodes(root) > tree.node_count()) return tree;  // never grow
  return to_tree(root, tree.signature());
}

}  // namespace sympolicy
