#pragma once

#include <functional>
#include <limits>

#include "fpl/eigen.hpp"
#include "fpl/expr.hpp"

namespace fpl {

// Nonlinearity f(x, t, lambda), Caratheodory with f(x, t, lambda) = o(|t|^{p-1})
// at t = 0 (hence f(x, 0, lambda) = 0). Both conditions are checked
// numerically by validate().
class Nonlinearity {
 public:
  using Fn = std::function<double(double x, double t, double lambda)>;

  explicit Nonlinearity(ExprAst expr)
      : fn_([e = std::move(expr)](double x, double t, double lambda) {
          return e.evaluate({t, x, lambda});
        }) {}
  explicit Nonlinearity(Fn fn) : fn_(std::move(fn)) {}

  static Nonlinearity zero() {
    return Nonlinearity(Fn([](double, double, double) { return 0.0; }));
  }

  double operator()(double x, double t, double lambda) const { return fn_(x, t, lambda); }

  // Checks f(x, 0, lambda) = 0 on sampled (x, lambda) and that
  // |f| / |t|^{p-1} decreases along t = 1e-3, 1e-4, 1e-5 (both signs).
  // Throws std::invalid_argument on failure.
  void validate(const Grid1D& grid, double p) const;

 private:
  Fn fn_;
};

enum class SignClass { positive, negative, sign_changing, zero };

struct BranchPoint {
  double lambda = 0.0;
  DiscreteFunction u;
  double amplitude = 0.0;  // sign(sum u) * Lp norm
  double residual = 0.0;
  SignClass sign_class = SignClass::zero;
};

enum class Termination { max_amplitude, max_steps, lambda_bound, newton_failure };

struct Branch {
  std::vector<BranchPoint> points;
  double lambda_start = 0.0;  // lambda_1 estimate at the trivial seed
  Termination termination = Termination::max_steps;
};

struct ContinuationOptions {
  double ds = 0.02;            // arclength step
  int max_steps = 400;
  double newton_tol = 1e-10;   // max-norm of G at accepted points
  int max_newton = 30;
  double max_amplitude = 1.0;
  double lambda_min = -std::numeric_limits<double>::infinity();
  double lambda_max = std::numeric_limits<double>::infinity();
  double t0_seed = 1e-3;       // seed amplitude along the first eigenfunction
  double fd_step = 1e-6;       // for f-derivatives in the Jacobian
  SolverOptions solver;        // inner eigen/dirichlet solves
};

// G(u, lambda)_i = bbm (grad [u]^p / p)_i
//                  - cell_measure (lambda Psi_p(u_i) + f(x_i, u_i, lambda)).
DiscreteFunction residual_map(const DiscreteFunction& u, double lambda, const KernelWeights& w,
                              const Nonlinearity& f);

// N x (N+1) matrix: [dG/du | dG/dlambda]. Psi_p parts analytic (with
// epsilon-regularized curvature for p < 2), f parts by central differences.
Matrix jacobian(const DiscreteFunction& u, double lambda, const KernelWeights& w,
                const Nonlinearity& f, double fd_step, double epsilon_reg);

// Pseudo-arclength continuation of the nontrivial branch seeded at
// (lambda_1, start_direction * t0 * phi_1).
Branch continue_branch(const KernelWeights& w, const Nonlinearity& f, int start_direction,
                       const ContinuationOptions& opts);

SignClass classify_sign(const DiscreteFunction& u);

struct SignScanReport {
  int violations = 0;
  int first_violation_index = -1;  // index into branch.points, -1 if none
  bool all_constant_sign = false;
};

// Asserts every non-start branch point has constant sign.
SignScanReport branch_sign_scan(const Branch& branch);

// lambda-intercept of the branch as amplitude -> 0: least-squares fit of
// lambda against amplitude^2 over the first points (pitchfork scaling).
double branch_intercept(const Branch& branch);

// Finite-dimensional Leray-Schauder index (-1)^{#{k : lambda_k < lambda}}.
// Throws std::domain_error when lambda is within 1e-9 of an eigenvalue.
int leray_schauder_index_p2(double lambda, const SpectrumP2& spectrum);

}  // namespace fpl
