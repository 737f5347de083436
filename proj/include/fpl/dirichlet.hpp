#pragma once

#include <optional>

#include "fpl/energy.hpp"

namespace fpl {

struct SolverOptions {
  double grad_tol = 1e-10;     // max-norm stationarity tolerance, scaled by data
  int max_iter = 400000;
  double epsilon_reg = 1e-8;   // curvature regularization for p < 2 (Hessian only)
  double ls_shrink = 0.5;
  double ls_decrease = 1e-4;
};

// Minimizes J(v) = (bbm_factor / p) [v]^p - <load, v> over cell values.
// Conjugate-gradient descent for the quadratic p = 2 case, regularized
// Newton with backtracking (gradient fallback on non-decrease) otherwise.
// `initial` overrides the default zero start (used by uniqueness tests).
DiscreteFunction solve_dirichlet(const KernelWeights& w, const DiscreteFunction& load,
                                 const SolverOptions& opts,
                                 const std::optional<Vector>& initial = std::nullopt);

// R_{s,p}(load) with zero exterior datum. s = 1 dispatches to the local
// p-Laplacian solve over local_energy; 0 < s < 1 assembles the nonlocal kernel
// with BBM constant K.
DiscreteFunction resolvent(double s, double p, const DiscreteFunction& load, const Grid1D& grid,
                           double K, const SolverOptions& opts);

namespace detail {

// Generic convex objective for the descent machinery.
struct ConvexObjective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;  // may be null for p <= 2
};

Vector minimize_convex(const ConvexObjective& f, Vector x0, double p, double tol_abs,
                       const SolverOptions& opts);

// Objective for the local (s = 1) Dirichlet problem.
ConvexObjective local_dirichlet_objective(const Grid1D& grid, double p, const Vector& load,
                                          double epsilon_reg);

// Objective for the nonlocal Dirichlet problem.
ConvexObjective nonlocal_dirichlet_objective(const KernelWeights& w, const Vector& load,
                                             double epsilon_reg);

}  // namespace detail

}  // namespace fpl
