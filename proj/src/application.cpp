#include "fpl/application.hpp"

#include <cmath>

namespace fpl {

namespace {

double ratio(const ExprAst& g, double t, double p) {
  return g(t) / power_map(t, p);
}

// Aitken delta-squared acceleration of r(1e-3), r(1e-4), r(1e-5).
double limit_at_zero(const ExprAst& g, double sign, double p) {
  const double r1 = ratio(g, sign * 1e-3, p);
  const double r2 = ratio(g, sign * 1e-4, p);
  const double r3 = ratio(g, sign * 1e-5, p);
  const double denom = (r3 - r2) - (r2 - r1);
  if (std::abs(denom) < 1e-14 * std::max({1.0, std::abs(r1), std::abs(r3)})) return r3;
  return r3 - (r3 - r2) * (r3 - r2) / denom;
}

}  // namespace

Nonlinearity CrossingNonlinearity::shifted_f() const {
  return Nonlinearity(Nonlinearity::Fn(
      [g = g, lu = lambda_under, pp = p](double x, double t, double lambda) {
        return g(t, x, lambda) - lu * power_map(t, pp);
      }));
}

CrossingNonlinearity validate_crossing(const ExprAst& g, double p, double lambda1,
                                       double probe_T) {
  if (p <= 1.0) throw std::invalid_argument("validate_crossing: p must exceed 1");
  if (probe_T <= 0.0) throw std::invalid_argument("validate_crossing: probe_T must be positive");
  if (std::abs(g(0.0)) > 1e-12)
    throw std::invalid_argument("validate_crossing: g(0) != 0");

  CrossingNonlinearity out;
  out.g = g;
  out.p = p;
  out.probe_T = probe_T;

  // Two-sided limit at 0 (the lambda_under of the decomposition).
  const double lim_plus = limit_at_zero(g, +1.0, p);
  const double lim_minus = limit_at_zero(g, -1.0, p);
  const double agree = std::abs(lim_plus - lim_minus);
  if (!(agree <= 1e-3 * std::max(1.0, std::abs(lim_plus))))
    throw std::invalid_argument(
        "validate_crossing: one-sided limits of g / Psi_p at 0 disagree");
  out.lambda_under = 0.5 * (lim_plus + lim_minus);

  // A1: |g / Psi_p| bounded, sampled log-spaced over |t| in [1e-6, 1e6].
  const int n_samples = 241;
  double bound = 0.0;
  double r_e4 = 0.0, r_e5 = 0.0, r_e6 = 0.0;
  for (double sign : {1.0, -1.0}) {
    for (int k = 0; k < n_samples; ++k) {
      const double t = sign * std::pow(10.0, -6.0 + 12.0 * k / (n_samples - 1));
      const double r = std::abs(ratio(g, t, p));
      if (!std::isfinite(r))
        throw std::invalid_argument("validate_crossing: A1 violated (ratio not finite)");
      bound = std::max(bound, r);
    }
    r_e4 = std::max(r_e4, std::abs(ratio(g, sign * 1e4, p)));
    r_e5 = std::max(r_e5, std::abs(ratio(g, sign * 1e5, p)));
    r_e6 = std::max(r_e6, std::abs(ratio(g, sign * 1e6, p)));
  }
  // A ratio still growing decade over decade at the top of the window is an
  // unbounded-ratio detection, not just a large bound.
  if (r_e5 > 5.0 * r_e4 || r_e6 > 5.0 * r_e5)
    throw std::invalid_argument(
        "validate_crossing: A1 violated (g / Psi_p keeps growing at large |t|)");
  out.bound = bound;

  // A2 liminf proxy: min of the signed ratio over |t| in [T, 10T].
  double probe = std::numeric_limits<double>::infinity();
  for (double sign : {1.0, -1.0})
    for (int k = 0; k <= 100; ++k) {
      const double t = sign * probe_T * std::pow(10.0, k / 100.0);
      probe = std::min(probe, ratio(g, t, p));
    }
  out.lambda_over_probe = probe;

  if (!(out.lambda_under < lambda1))
    throw std::invalid_argument(
        "validate_crossing: A2 violated (lambda_under >= lambda_1)");
  if (!(lambda1 < out.lambda_over_probe))
    throw std::invalid_argument(
        "validate_crossing: A2 violated (liminf proxy <= lambda_1)");
  return out;
}

CrossingSolution solve_crossing(const CrossingNonlinearity& g, const KernelWeights& w,
                                const CrossingOptions& opts, int start_direction) {
  if (g.p != w.p)
    throw std::invalid_argument("solve_crossing: nonlinearity and kernel disagree on p");
  const Grid1D& grid = w.grid;
  const int n = grid.n_cells;
  const double m = grid.cell_measure();
  const Nonlinearity f = g.shifted_f();

  // Trace the shifted branch from (lambda_1, 0) downward until it crosses
  // lambda_under; the lambda_min bound makes the continuation stop on the
  // first point past the target.
  ContinuationOptions copts = opts.continuation;
  copts.lambda_min = g.lambda_under;
  Branch branch = continue_branch(w, f, start_direction, copts);

  double lambda_max = branch.lambda_start;
  for (const BranchPoint& pt : branch.points) lambda_max = std::max(lambda_max, pt.lambda);

  if (branch.termination != Termination::lambda_bound || branch.points.size() < 2)
    throw ExistenceError(
        "solve_crossing: branch terminated before reaching lambda_under", std::move(branch));

  // Bracketing points around lambda = lambda_under.
  const BranchPoint& after = branch.points.back();
  const BranchPoint& before = branch.points[branch.points.size() - 2];
  double theta = 0.0;
  if (after.lambda != before.lambda)
    theta = (g.lambda_under - before.lambda) / (after.lambda - before.lambda);
  theta = std::clamp(theta, 0.0, 1.0);
  Vector u = before.u.values + theta * (after.u.values - before.u.values);

  // Newton polish on G(u, lambda_under) = 0 at fixed lambda.
  const double tol = copts.newton_tol;
  bool polished = false;
  for (int it = 0; it < copts.max_newton; ++it) {
    Vector G = residual_map(DiscreteFunction(grid, u), g.lambda_under, w, f).values;
    if (G.lpNorm<Eigen::Infinity>() <= tol) {
      polished = true;
      break;
    }
    Matrix J = jacobian(DiscreteFunction(grid, u), g.lambda_under, w, f, copts.fd_step,
                        copts.solver.epsilon_reg)
                   .leftCols(n);
    Vector d = J.colPivHouseholderQr().solve(-G);
    if (!d.allFinite()) break;
    u += d;
  }
  if (!polished)
    throw ExistenceError("solve_crossing: Newton polish at lambda_under failed",
                         std::move(branch));

  CrossingSolution sol;
  sol.u = DiscreteFunction(grid, u);
  sol.lambda_under = g.lambda_under;
  sol.branch_lambda_max = lambda_max;

  // Residual of the ORIGINAL problem L u = g(u): g is evaluated directly from
  // its own expression, not reconstructed from the shift.
  Vector R = (w.bbm_factor / w.p) * energy_gradient(sol.u, w).values;
  for (int i = 0; i < n; ++i) R[i] -= m * g.g(u[i], grid.cell_centers[i], g.lambda_under);
  sol.residual = R.lpNorm<Eigen::Infinity>();

  sol.branch = std::move(branch);
  return sol;
}

}  // namespace fpl
