#pragma once

#include <memory>
#include <string>
#include <vector>

#include <stdexcept>

namespace fpl {

// Scalar-expression language for nonlinearities and weights. Variables:
// t, x, lambda. Functions: neg, abs, sign, sin, cos, exp, log, sqrt and the
// builtin psi(t, p) = |t|^{p-2} t. Operators: + - * / ^ ('^' right-assoc).
// Parse failure; `position` is 1-based (end-of-input errors point one past
// the last character).
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& what, size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position(position) {}
  size_t position;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind { number, variable, binary, call };
  Kind kind = Kind::number;
  double value = 0.0;     // number
  std::string name;       // variable or function name
  char op = 0;            // binary operator
  std::vector<ExprPtr> args;
};

struct EvalContext {
  double t = 0.0;
  double x = 0.0;
  double lambda = 0.0;
};

class ExprAst {
 public:
  ExprAst() = default;
  explicit ExprAst(ExprPtr root) : root_(std::move(root)) {}

  bool empty() const { return !root_; }
  const ExprPtr& root() const { return root_; }

  double evaluate(const EvalContext& ctx) const;
  double operator()(double t, double x = 0.0, double lambda = 0.0) const {
    return evaluate({t, x, lambda});
  }

  // Canonical fully-parenthesized form; parse(str()) reproduces the AST.
  std::string str() const;

  bool same_as(const ExprAst& other) const;

 private:
  ExprPtr root_;
};

ExprAst parse_scalar_function(const std::string& src);

}  // namespace fpl
