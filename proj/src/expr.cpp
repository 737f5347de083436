#include "fpl/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "fpl/common.hpp"

namespace fpl {

namespace {

// name -> arity for the function catalog.
const std::map<std::string, int>& function_catalog() {
  static const std::map<std::string, int> catalog = {
      {"neg", 1}, {"abs", 1}, {"sign", 1}, {"sin", 1}, {"cos", 1},
      {"exp", 1}, {"log", 1}, {"sqrt", 1}, {"psi", 2},
  };
  return catalog;
}

bool is_variable(const std::string& name) {
  return name == "t" || name == "x" || name == "lambda";
}

ExprPtr make_number(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::number;
  n->value = v;
  return n;
}

ExprPtr make_variable(std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::variable;
  n->name = std::move(name);
  return n;
}

ExprPtr make_binary(char op, ExprPtr a, ExprPtr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::binary;
  n->op = op;
  n->args = {std::move(a), std::move(b)};
  return n;
}

ExprPtr make_call(std::string name, std::vector<ExprPtr> args) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::call;
  n->name = std::move(name);
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : src_(src) {}

  ExprPtr run() {
    skip_space();
    if (pos_ >= src_.size()) throw SyntaxError("empty expression", pos_ + 1);
    ExprPtr e = expr();
    skip_space();
    if (pos_ < src_.size()) throw SyntaxError("unexpected trailing input", pos_ + 1);
    return e;
  }

 private:
  // expr := term (('+' | '-') term)*
  ExprPtr expr() {
    ExprPtr e = term();
    while (true) {
      skip_space();
      if (peek() == '+' || peek() == '-') {
        const char op = take();
        e = make_binary(op, std::move(e), term());
      } else {
        return e;
      }
    }
  }

  // term := factor (('*' | '/') factor)*
  ExprPtr term() {
    ExprPtr e = factor();
    while (true) {
      skip_space();
      if (peek() == '*' || peek() == '/') {
        const char op = take();
        e = make_binary(op, std::move(e), factor());
      } else {
        return e;
      }
    }
  }

  // factor := unary ('^' factor)?   -- right-associative power
  ExprPtr factor() {
    ExprPtr base = unary();
    skip_space();
    if (peek() == '^') {
      take();
      return make_binary('^', std::move(base), factor());
    }
    return base;
  }

  // unary := ('-')* primary
  ExprPtr unary() {
    skip_space();
    if (peek() == '-') {
      take();
      return make_call("neg", {unary()});
    }
    return primary();
  }

  // primary := number | ident | ident '(' args ')' | '(' expr ')'
  ExprPtr primary() {
    skip_space();
    if (pos_ >= src_.size()) throw SyntaxError("unexpected end of expression", pos_ + 1);
    const char c = peek();
    if (c == '(') {
      take();
      ExprPtr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw SyntaxError(std::string("unexpected character '") + c + "'", pos_ + 1);
  }

  ExprPtr number() {
    const size_t start = pos_;
    char* end = nullptr;
    const double v = std::strtod(src_.c_str() + start, &end);
    if (end == src_.c_str() + start) throw SyntaxError("malformed number", start + 1);
    pos_ = end - src_.c_str();
    return make_number(v);
  }

  ExprPtr identifier() {
    const size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string name = src_.substr(start, pos_ - start);
    skip_space();
    if (peek() == '(') {
      auto it = function_catalog().find(name);
      if (it == function_catalog().end())
        throw SyntaxError("unknown function '" + name + "'", start + 1);
      take();
      std::vector<ExprPtr> args;
      skip_space();
      if (peek() == ')') throw SyntaxError("missing argument to '" + name + "'", pos_ + 1);
      args.push_back(expr());
      while (true) {
        skip_space();
        if (peek() == ',') {
          take();
          args.push_back(expr());
        } else {
          break;
        }
      }
      expect(')');
      if (int(args.size()) != it->second)
        throw SyntaxError("'" + name + "' expects " + std::to_string(it->second) +
                              " argument(s), got " + std::to_string(args.size()),
                          start + 1);
      return make_call(std::move(name), std::move(args));
    }
    if (!is_variable(name)) throw SyntaxError("unknown identifier '" + name + "'", start + 1);
    return make_variable(std::move(name));
  }

  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
  char take() { return src_[pos_++]; }
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  void expect(char c) {
    skip_space();
    if (peek() != c)
      throw SyntaxError(std::string("expected '") + c + "'", pos_ + 1);
    take();
  }

  const std::string& src_;
  size_t pos_ = 0;
};

double eval_call(const std::string& name, const std::vector<double>& a) {
  if (name == "neg") return -a[0];
  if (name == "abs") return std::abs(a[0]);
  if (name == "sign") return a[0] > 0.0 ? 1.0 : (a[0] < 0.0 ? -1.0 : 0.0);
  if (name == "sin") return std::sin(a[0]);
  if (name == "cos") return std::cos(a[0]);
  if (name == "exp") return std::exp(a[0]);
  if (name == "log") {
    if (!(a[0] > 0.0)) throw EvalError("log of a non-positive value");
    return std::log(a[0]);
  }
  if (name == "sqrt") {
    if (a[0] < 0.0) throw EvalError("sqrt of a negative value");
    return std::sqrt(a[0]);
  }
  if (name == "psi") return power_map(a[0], a[1]);
  throw EvalError("unknown function '" + name + "'");
}

double eval_node(const ExprNode& n, const EvalContext& ctx) {
  switch (n.kind) {
    case ExprNode::Kind::number:
      return n.value;
    case ExprNode::Kind::variable:
      if (n.name == "t") return ctx.t;
      if (n.name == "x") return ctx.x;
      return ctx.lambda;
    case ExprNode::Kind::binary: {
      const double a = eval_node(*n.args[0], ctx);
      const double b = eval_node(*n.args[1], ctx);
      switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/':
          if (b == 0.0) throw EvalError("division by zero");
          return a / b;
        case '^': {
          const double r = std::pow(a, b);
          if (!std::isfinite(r)) throw EvalError("power result out of domain");
          return r;
        }
      }
      throw EvalError("corrupt AST: bad operator");
    }
    case ExprNode::Kind::call: {
      std::vector<double> a;
      a.reserve(n.args.size());
      for (const auto& arg : n.args) a.push_back(eval_node(*arg, ctx));
      return eval_call(n.name, a);
    }
  }
  throw EvalError("corrupt AST: bad node kind");
}

void print_node(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case ExprNode::Kind::number: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    }
    case ExprNode::Kind::variable:
      out += n.name;
      return;
    case ExprNode::Kind::binary:
      out += '(';
      print_node(*n.args[0], out);
      out += n.op;
      print_node(*n.args[1], out);
      out += ')';
      return;
    case ExprNode::Kind::call:
      out += n.name;
      out += '(';
      for (size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ',';
        print_node(*n.args[i], out);
      }
      out += ')';
      return;
  }
}

bool nodes_equal(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  if (a.kind == ExprNode::Kind::number && a.value != b.value) return false;
  if (a.name != b.name || a.op != b.op) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!nodes_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

}  // namespace

double ExprAst::evaluate(const EvalContext& ctx) const {
  if (!root_) throw EvalError("evaluating an empty expression");
  return eval_node(*root_, ctx);
}

std::string ExprAst::str() const {
  if (!root_) return "";
  std::string out;
  print_node(*root_, out);
  return out;
}

bool ExprAst::same_as(const ExprAst& other) const {
  if (!root_ || !other.root_) return root_ == other.root_;
  return nodes_equal(*root_, *other.root_);
}

ExprAst parse_scalar_function(const std::string& src) {
  return ExprAst(Parser(src).run());
}

}  // namespace fpl
