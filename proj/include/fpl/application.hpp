#pragma once

#include "fpl/bifurcation.hpp"

namespace fpl {

// Validated nonlinearity g(t) crossing lambda_1: the ratio g / Psi_p tends to
// lambda_under below lambda_1 at 0 and stays above lambda_1 for large |t|.
struct CrossingNonlinearity {
  ExprAst g;
  double p = 2.0;
  double lambda_under = 0.0;       // limit of g / Psi_p at t = 0
  double lambda_over_probe = 0.0;  // min of g / Psi_p over |t| in [T, 10T]
  double bound = 0.0;              // sup |g / Psi_p| over the sampled range
  double probe_T = 1e3;

  // f(t) = g(t) - lambda_under Psi_p(t); g = lambda_under Psi_p + f exactly.
  Nonlinearity shifted_f() const;
};

// Numerical check of assumptions A1 (bounded ratio) and A2 (ordering
// lambda_under < lambda1 < liminf proxy). The limit at 0 is Aitken-accelerated
// from t = +-1e-3, 1e-4, 1e-5 and both one-sided limits must agree to 1e-3;
// the liminf is approximated by a min over the probe window [T, 10T].
// Throws std::invalid_argument when any condition fails.
CrossingNonlinearity validate_crossing(const ExprAst& g, double p, double lambda1,
                                       double probe_T = 1e3);

// Raised when the continuation stops before lambda reaches lambda_under; the
// traced part of the branch is attached for diagnosis.
class ExistenceError : public std::runtime_error {
 public:
  ExistenceError(const std::string& what, Branch partial)
      : std::runtime_error(what), partial_branch(std::move(partial)) {}
  Branch partial_branch;
};

struct CrossingOptions {
  ContinuationOptions continuation = [] {
    ContinuationOptions c;
    c.max_steps = 4000;
    c.max_amplitude = 100.0;
    return c;
  }();
};

struct CrossingSolution {
  DiscreteFunction u;       // nontrivial constant-sign solution of L u = g(u)
  double lambda_under = 0.0;
  double residual = 0.0;    // max-norm of the original g-problem residual
  double branch_lambda_max = 0.0;  // largest lambda seen on the branch (a priori bound monitor)
  Branch branch;            // the traced branch, last point at lambda_under
};

// Constructive existence solve: trace the branch of the shifted problem from
// (lambda_1, 0) until lambda brackets lambda_under, interpolate, and polish
// with Newton at lambda = lambda_under exactly. The reported residual is
// evaluated against the original g (independent path, no reuse of the shift).
CrossingSolution solve_crossing(const CrossingNonlinearity& g, const KernelWeights& w,
                                const CrossingOptions& opts, int start_direction = +1);

}  // namespace fpl
