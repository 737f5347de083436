#include "fpl/bifurcation.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace fpl {

void Nonlinearity::validate(const Grid1D& grid, double p) const {
  const double lambdas[] = {0.0, 0.5, 1.0, 5.0};
  std::vector<double> xs;
  for (int k = 0; k < 7; ++k)
    xs.push_back(grid.cell_centers[(grid.n_cells - 1) * k / 6]);

  for (double x : xs)
    for (double lam : lambdas)
      if (std::abs(fn_(x, 0.0, lam)) > 1e-12)
        throw std::invalid_argument("Nonlinearity: f(x, 0, lambda) != 0");

  // o(|t|^{p-1}) at 0: the ratio |f| / |t|^{p-1} must genuinely decrease
  // along t = 1e-3, 1e-4, 1e-5, on both sides (10% slack per decade, so a
  // constant ratio such as f = Psi_p itself is rejected).
  for (double sign : {1.0, -1.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double mag : {1e-3, 1e-4, 1e-5}) {
      const double t = sign * mag;
      double ratio = 0.0;
      for (double x : xs)
        for (double lam : lambdas)
          ratio = std::max(ratio, std::abs(fn_(x, t, lam)) / std::pow(mag, p - 1.0));
      if (ratio > prev * 0.9 + 1e-12)
        throw std::invalid_argument("Nonlinearity: f is not o(|t|^{p-1}) at t = 0");
      prev = ratio;
    }
  }
}

DiscreteFunction residual_map(const DiscreteFunction& u, double lambda, const KernelWeights& w,
                              const Nonlinearity& f) {
  if (!u.grid.same_as(w.grid)) throw std::invalid_argument("residual_map: grid mismatch");
  const Grid1D& g = u.grid;
  const double m = g.cell_measure();
  const double p = w.p;
  Vector G = (w.bbm_factor / p) * energy_gradient(u, w).values;
  for (int i = 0; i < g.n_cells; ++i)
    G[i] -= m * (lambda * power_map(u.values[i], p) + f(g.cell_centers[i], u.values[i], lambda));
  return DiscreteFunction(g, std::move(G));
}

Matrix jacobian(const DiscreteFunction& u, double lambda, const KernelWeights& w,
                const Nonlinearity& f, double fd_step, double epsilon_reg) {
  if (fd_step <= 0.0) throw std::invalid_argument("jacobian: fd_step must be positive");
  const Grid1D& g = u.grid;
  const int n = g.n_cells;
  const double m = g.cell_measure();
  const double p = w.p;
  const double eps = p < 2.0 ? epsilon_reg : 0.0;

  Matrix J(n, n + 1);
  // Psi_p parts: the energy Hessian is shared with the Dirichlet solver.
  auto obj = detail::nonlocal_dirichlet_objective(w, Vector::Zero(n), epsilon_reg);
  J.leftCols(n) = obj.hessian(u.values);

  for (int i = 0; i < n; ++i) {
    const double x = g.cell_centers[i];
    const double t = u.values[i];
    J(i, i) -= m * lambda * (p - 1.0) * power_weight(t, p, eps);

    const double dt = fd_step * std::max(1.0, std::abs(t));
    J(i, i) -= m * (f(x, t + dt, lambda) - f(x, t - dt, lambda)) / (2.0 * dt);

    const double dl = fd_step * std::max(1.0, std::abs(lambda));
    J(i, n) = -m * (power_map(t, p) +
                    (f(x, t, lambda + dl) - f(x, t, lambda - dl)) / (2.0 * dl));
  }
  return J;
}

SignClass classify_sign(const DiscreteFunction& u) {
  bool pos = false, neg = false;
  for (int i = 0; i < u.grid.n_cells; ++i) {
    if (u.values[i] > 0.0) pos = true;
    if (u.values[i] < 0.0) neg = true;
  }
  if (pos && neg) return SignClass::sign_changing;
  if (pos) return SignClass::positive;
  if (neg) return SignClass::negative;
  return SignClass::zero;
}

namespace {

double signed_amplitude(const DiscreteFunction& u, double p) {
  const double lp =
      std::pow(u.grid.cell_measure() * u.values.array().abs().pow(p).sum(), 1.0 / p);
  return u.values.sum() < 0.0 ? -lp : lp;
}

struct CorrectorResult {
  bool converged = false;
  double residual = 0.0;
};

// Newton on [G(u, lambda); tau . ((u, lambda) - predictor)] = 0.
CorrectorResult correct(Vector& u, double& lambda, const Vector& pred_u, double pred_lambda,
                        const Vector& tau_u, double tau_l, const KernelWeights& w,
                        const Nonlinearity& f, const ContinuationOptions& opts) {
  const int n = int(u.size());
  const Grid1D& g = w.grid;
  for (int it = 0; it < opts.max_newton; ++it) {
    Vector G = residual_map(DiscreteFunction(g, u), lambda, w, f).values;
    const double c = tau_u.dot(u - pred_u) + tau_l * (lambda - pred_lambda);
    const double res = G.lpNorm<Eigen::Infinity>();
    if (res <= opts.newton_tol && std::abs(c) <= opts.newton_tol) return {true, res};

    Matrix M(n + 1, n + 1);
    M.topRows(n) =
        jacobian(DiscreteFunction(g, u), lambda, w, f, opts.fd_step, opts.solver.epsilon_reg);
    M.bottomRows(1).leftCols(n) = tau_u.transpose();
    M(n, n) = tau_l;

    Vector rhs(n + 1);
    rhs.head(n) = -G;
    rhs[n] = -c;

    // Rank-revealing QR doubles as the least-squares fallback when the
    // augmented matrix is singular to working precision.
    Vector delta = M.colPivHouseholderQr().solve(rhs);
    if (!delta.allFinite()) return {false, res};
    u += delta.head(n);
    lambda += delta[n];
  }
  Vector G = residual_map(DiscreteFunction(g, u), lambda, w, f).values;
  const double res = G.lpNorm<Eigen::Infinity>();
  const double c = tau_u.dot(u - pred_u) + tau_l * (lambda - pred_lambda);
  return {res <= opts.newton_tol && std::abs(c) <= opts.newton_tol, res};
}

BranchPoint make_point(const Grid1D& g, const Vector& u, double lambda, double residual,
                       double p) {
  BranchPoint pt;
  pt.lambda = lambda;
  pt.u = DiscreteFunction(g, u);
  pt.amplitude = signed_amplitude(pt.u, p);
  pt.residual = residual;
  pt.sign_class = classify_sign(pt.u);
  return pt;
}

}  // namespace

Branch continue_branch(const KernelWeights& w, const Nonlinearity& f, int start_direction,
                       const ContinuationOptions& opts) {
  if (opts.ds <= 0.0) throw std::invalid_argument("continue_branch: ds must be positive");
  const Grid1D& g = w.grid;
  const int n = g.n_cells;
  const double p = w.p;
  const double dir = start_direction < 0 ? -1.0 : 1.0;
  f.validate(g, p);

  EigenPair eig = first_eigenpair(w, WeightFunction::one(g), opts.solver);

  Branch branch;
  branch.lambda_start = eig.lambda;

  Vector phi = eig.u.values;
  Vector tau_u = dir * phi / phi.norm();
  double tau_l = 0.0;

  // Correct the seed (lambda_1, dir t0 phi_1) onto the branch. The corrector
  // always works on the arclength-augmented system: at the seed the plain
  // Jacobian is degenerate for p != 2.
  Vector u = dir * opts.t0_seed * phi;
  double lambda = eig.lambda;
  CorrectorResult seed = correct(u, lambda, u, lambda, tau_u, tau_l, w, f, opts);
  if (!seed.converged) {
    branch.termination = Termination::newton_failure;
    return branch;
  }
  branch.points.push_back(make_point(g, u, lambda, seed.residual, p));

  Vector u_prev = Vector::Zero(n);
  double lambda_prev = eig.lambda;
  double ds = opts.ds;

  for (int step = 1; step < opts.max_steps; ++step) {
    // Tangent from the secant, kept pointing forward.
    Vector du = u - u_prev;
    double dl = lambda - lambda_prev;
    const double norm = std::sqrt(du.squaredNorm() + dl * dl);
    if (norm > 0.0) {
      du /= norm;
      dl /= norm;
      if (du.dot(tau_u) + dl * tau_l < 0.0) {
        du = -du;
        dl = -dl;
      }
      tau_u = du;
      tau_l = dl;
    }

    Vector u_next;
    double lambda_next = 0.0;
    CorrectorResult r;
    bool accepted = false;
    double trial_ds = ds;
    for (int halving = 0; halving <= 5; ++halving) {
      u_next = u + trial_ds * tau_u;
      lambda_next = lambda + trial_ds * tau_l;
      const Vector pred_u = u_next;
      const double pred_l = lambda_next;
      r = correct(u_next, lambda_next, pred_u, pred_l, tau_u, tau_l, w, f, opts);
      if (r.converged) {
        accepted = true;
        break;
      }
      trial_ds *= 0.5;
    }
    if (!accepted) {
      branch.termination = Termination::newton_failure;
      return branch;
    }

    u_prev = u;
    lambda_prev = lambda;
    u = u_next;
    lambda = lambda_next;
    ds = std::min(opts.ds, trial_ds * 2.0);

    branch.points.push_back(make_point(g, u, lambda, r.residual, p));
    const BranchPoint& pt = branch.points.back();
    if (std::abs(pt.amplitude) >= opts.max_amplitude) {
      branch.termination = Termination::max_amplitude;
      return branch;
    }
    if (pt.lambda < opts.lambda_min || pt.lambda > opts.lambda_max) {
      branch.termination = Termination::lambda_bound;
      return branch;
    }
  }
  branch.termination = Termination::max_steps;
  return branch;
}

SignScanReport branch_sign_scan(const Branch& branch) {
  SignScanReport rep;
  for (size_t i = 0; i < branch.points.size(); ++i) {
    const SignClass c = branch.points[i].sign_class;
    if (c != SignClass::positive && c != SignClass::negative) {
      ++rep.violations;
      if (rep.first_violation_index < 0) rep.first_violation_index = int(i);
    }
  }
  rep.all_constant_sign = rep.violations == 0 && !branch.points.empty();
  return rep;
}

double branch_intercept(const Branch& branch) {
  const size_t k = std::min<size_t>(branch.points.size(), 10);
  if (k < 2) throw std::invalid_argument("branch_intercept: need at least 2 points");
  // Least squares lambda = c0 + c1 A^2 over the first k points.
  Matrix X(k, 2);
  Vector y(k);
  for (size_t i = 0; i < k; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = branch.points[i].amplitude * branch.points[i].amplitude;
    y[i] = branch.points[i].lambda;
  }
  Vector c = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  return c[0];
}

int leray_schauder_index_p2(double lambda, const SpectrumP2& spectrum) {
  int below = 0;
  for (double mu : spectrum.eigenvalues) {
    if (std::abs(lambda - mu) < 1e-9)
      throw std::domain_error("leray_schauder_index_p2: lambda coincides with an eigenvalue");
    if (mu < lambda) ++below;
  }
  return below % 2 == 0 ? 1 : -1;
}

}  // namespace fpl
