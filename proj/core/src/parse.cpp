#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "sympolicy/expr.hpp"

// Expression grammar (also used by the result files):
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' signed)*          (left associative)
//   signed := '-' signed | atom
//   atom   := number | name | name '(' expr ')' | '(' expr ')'
//
// Unary minus folds into constant literals and otherwise becomes
// multiplication by -1. The renderer emits minimal parentheses while
// preserving the tree structure bit-exactly through a parse round trip:
// right operands of equal precedence are parenthesized (no reassociation),
// and so is any right operand whose text starts with '-'.

namespace sympolicy {

namespace {

int precedence(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
      return 1;
    case Op::kMul:
    case Op::kDiv:
      return 2;
    case Op::kPow:
      return 3;
    default:
      return 4;  // leaves and function calls
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Renderer {
  const ExprTree& tree;

  std::string node_text(int id) const {
    const auto& n = tree.nodes()[static_cast<std::size_t>(id)];
    switch (n.op) {
      case Op::kConst:
        return format_double(n.value);
      case Op::kVar:
        return tree.signature()->name(n.slot);
      case Op::kSin:
      case Op::kCos:
      case Op::kExp:
      case Op::kLog:
        return std::string(op_name(n.op)) + "(" + node_text(id - 1) + ")";
      default:
        break;
    }
    // binary: children tile [first, id-1]; the right child ends at id-1
    const auto nodes = tree.nodes();
    const int right = id - 1;
    const int left = right - nodes[static_cast<std::size_t>(right)].subtree_size;
    const Op lop = nodes[static_cast<std::size_t>(left)].op;
    const Op rop = nodes[static_cast<std::size_t>(right)].op;

    // -x shorthand for (-1) * leaf-or-call
    if (n.op == Op::kMul && lop == Op::kConst &&
        nodes[static_cast<std::size_t>(left)].value == -1.0 && precedence(rop) == 4 &&
        !(rop == Op::kConst && nodes[static_cast<std::size_t>(right)].value < 0.0)) {
      return "-" + node_text(right);
    }

    std::string ls = node_text(left);
    std::string rs = node_text(right);
    if (precedence(lop) < precedence(n.op) || (n.op == Op::kPow && ls[0] == '-')) {
      ls = "(" + ls + ")";
    }
    if (precedence(rop) <= precedence(n.op) || rs[0] == '-') rs = "(" + rs + ")";
    return ls + op_name(n.op) + rs;
  }
};

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  SignaturePtr sig;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos); }

  ExprTree parse_expr() {
    ExprTree lhs = parse_term();
    for (;;) {
      skip_ws();
      if (eat('+')) {
        lhs = ExprTree::binary(Op::kAdd, std::move(lhs), parse_term());
      } else if (eat('-')) {
        lhs = ExprTree::binary(Op::kSub, std::move(lhs), parse_term());
      } else {
        return lhs;
      }
    }
  }

  ExprTree parse_term() {
    ExprTree lhs = parse_unary();
    for (;;) {
      skip_ws();
      if (eat('*')) {
        lhs = ExprTree::binary(Op::kMul, std::move(lhs), parse_unary());
      } else if (eat('/')) {
        lhs = ExprTree::binary(Op::kDiv, std::move(lhs), parse_unary());
      } else {
        return lhs;
      }
    }
  }

  ExprTree parse_unary() {
    if (eat('-')) return negate(parse_unary());
    return parse_power();
  }

  ExprTree parse_power() {
    ExprTree lhs = parse_atom();
    while (eat('^')) {
      lhs = ExprTree::binary(Op::kPow, std::move(lhs), parse_signed_atom());
    }
    return lhs;
  }

  ExprTree parse_signed_atom() {
    if (eat('-')) return negate(parse_signed_atom());
    return parse_atom();
  }

  ExprTree negate(ExprTree t) {
    if (t.node_count() == 1 && t.nodes()[0].op == Op::kConst) {
      return ExprTree::constant(-t.nodes()[0].value, sig);
    }
    return ExprTree::binary(Op::kMul, ExprTree::constant(-1.0, sig), std::move(t));
  }

  ExprTree parse_atom() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression");
    const char c = text[pos];
    if (c == '(') {
      ++pos;
      ExprTree inner = parse_expr();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprTree parse_number() {
    double value = 0.0;
    const char* begin = text.data() + pos;
    const char* end = text.data() + text.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{}) fail("malformed number");
    pos += static_cast<std::size_t>(res.ptr - begin);
    return ExprTree::constant(value, sig);
  }

  ExprTree parse_name() {
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
      ++pos;
    }
    const std::string_view name = text.substr(start, pos - start);
    skip_ws();
    if (pos < text.size() && text[pos] == '(') {
      Op op;
      if (name == "sin") {
        op = Op::kSin;
      } else if (name == "cos") {
        op = Op::kCos;
      } else if (name == "exp") {
        op = Op::kExp;
      } else if (name == "log") {
        op = Op::kLog;
      } else {
        pos = start;
        fail("unknown function '" + std::string(name) + "'");
      }
      ++pos;  // '('
      ExprTree arg = parse_expr();
      if (!eat(')')) fail("expected ')'");
      return ExprTree::unary(op, std::move(arg));
    }
    if (!sig) {
      pos = start;
      fail("variable '" + std::string(name) + "' without a signature");
    }
    const auto slot = sig->find(name);
    if (!slot) {
      pos = start;
      fail("unknown variable '" + std::string(name) + "'");
    }
    return ExprTree::variable(*slot, sig);
  }
};

}  // namespace

std::string render(const ExprTree& tree) {
  if (tree.empty()) throw EngineError("render of empty tree");
  return Renderer{tree}.node_text(tree.root_id());
}

ExprTree parse(std::string_view text, SignaturePtr sig) {
  Parser p{text, 0, std::move(sig)};
  ExprTree t = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return t;
}

}  // namespace sympolicy
