#include "fpl/eigen.hpp"

#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>

namespace fpl {

WeightFunction::WeightFunction(DiscreteFunction h) : h_(std::move(h)) {
  sup_norm_ = h_.values.lpNorm<Eigen::Infinity>();
  int positive_cells = 0;
  for (int i = 0; i < h_.grid.n_cells; ++i)
    if (h_.values[i] > 0.0) ++positive_cells;
  positive_measure_ = h_.grid.cell_measure() * positive_cells;
  if (positive_measure_ <= 0.0)
    throw std::invalid_argument("WeightFunction: h must be positive on a set of positive measure");
}

namespace {

double weighted_lp(const WeightFunction& h, const Vector& u, double p) {
  return h.values().grid.cell_measure() *
         (h.values().values.array() * u.array().abs().pow(p)).sum();
}

Vector weighted_psi(const WeightFunction& h, const Vector& u, double p) {
  Vector r(u.size());
  for (int i = 0; i < u.size(); ++i) r[i] = h.values().values[i] * power_map(u[i], p);
  return r;
}

// Inverse-power engine shared by the nonlocal and local (s = 1) problems.
// `energy` evaluates bbm [u]^p (resp. the local energy), `energy_grad` its
// gradient divided by p, and `resolve` the Dirichlet solve for a given load.
EigenPair inverse_power(
    const Grid1D& grid, double p, const WeightFunction& h,
    const std::function<double(const Vector&)>& energy,
    const std::function<Vector(const Vector&)>& energy_grad,
    const std::function<Vector(const Vector&, const Vector&)>& resolve,
    const std::optional<Vector>& start) {
  const int n = grid.n_cells;
  const double m = grid.cell_measure();

  Vector u = start ? *start : Vector::Ones(n);
  if (weighted_lp(h, u, p) <= 0.0) {
    // A constant (or caller) start outside the admissible cone: fall back to
    // the indicator of {h > 0}.
    u = (h.values().values.array() > 0.0).cast<double>().matrix();
  }
  double norm = weighted_lp(h, u, p);
  if (norm <= 0.0) throw std::invalid_argument("first_eigenpair: inadmissible start");
  u /= std::pow(norm, 1.0 / p);

  double lambda = energy(u);
  const int max_outer = 1000;
  int it = 0;
  for (; it < max_outer; ++it) {
    Vector load = lambda * weighted_psi(h, u, p);
    Vector next = resolve(load, u);
    const double denom = weighted_lp(h, next, p);
    if (denom <= 0.0)
      throw std::runtime_error("first_eigenpair: iterate left the admissible cone");
    next /= std::pow(denom, 1.0 / p);

    const double lambda_next = energy(next);
    if (lambda_next > lambda * (1.0 + 1e-9) + 1e-12)
      throw std::runtime_error("first_eigenpair: non-monotone Rayleigh step (solver fault)");
    const bool done = std::abs(lambda - lambda_next) <= 1e-13 * std::max(1.0, lambda_next);
    u = std::move(next);
    lambda = lambda_next;
    if (done) break;
  }
  if (it == max_outer)
    throw ConvergenceError("first_eigenpair: max outer iterations", u, lambda);

  if (u.sum() < 0.0) u = -u;
  EigenPair pair;
  pair.lambda = lambda;
  pair.u = DiscreteFunction(grid, u);
  pair.normalization = weighted_lp(h, u, p);
  pair.residual =
      (energy_grad(u) - lambda * m * weighted_psi(h, u, p)).lpNorm<Eigen::Infinity>();
  pair.iterations = it + 1;
  return pair;
}

Matrix local_stiffness_p2(const Grid1D& grid) {
  const int n = grid.n_cells;
  const double h = grid.cell_width;
  Matrix T = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    T(i, i) = 2.0 / h;
    if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = -1.0 / h;
  }
  return T;
}

SpectrumP2 generalized_spectrum(const Matrix& A, const WeightFunction& h, const Grid1D& grid,
                                int count) {
  const int n = grid.n_cells;
  if (count < 1 || count > n) throw std::invalid_argument("spectrum: count out of range");
  if (h.values().values.minCoeff() <= 0.0)
    throw std::invalid_argument("spectrum: requires h > 0 everywhere (definite mass matrix)");
  Matrix B = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) B(i, i) = grid.cell_measure() * h.values().values[i];

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(A, B);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolve failed");

  SpectrumP2 spec;
  for (int k = 0; k < count; ++k) {
    spec.eigenvalues.push_back(solver.eigenvalues()[k]);
    Vector v = solver.eigenvectors().col(k);
    if (v.sum() < 0.0) v = -v;
    spec.eigenvectors.emplace_back(grid, std::move(v));
  }
  return spec;
}

}  // namespace

double rayleigh_quotient(const DiscreteFunction& u, const KernelWeights& w,
                         const WeightFunction& h) {
  if (!u.grid.same_as(w.grid) || !u.grid.same_as(h.values().grid))
    throw std::invalid_argument("rayleigh_quotient: grid mismatch");
  const double denom = weighted_lp(h, u.values, w.p);
  if (denom <= 0.0) throw std::domain_error("rayleigh_quotient: integral(h|u|^p) not positive");
  return w.bbm_factor * gagliardo_energy(u, w).seminorm_p / denom;
}

EigenPair first_eigenpair(const KernelWeights& w, const WeightFunction& h,
                          const SolverOptions& opts, const std::optional<Vector>& start) {
  if (!h.values().grid.same_as(w.grid))
    throw std::invalid_argument("first_eigenpair: grid mismatch");
  const Grid1D grid = w.grid;
  const double p = w.p;
  auto energy = [&w, grid](const Vector& v) {
    return w.bbm_factor * gagliardo_energy(DiscreteFunction(grid, v), w).seminorm_p;
  };
  auto energy_grad = [&w, grid, p](const Vector& v) -> Vector {
    return (w.bbm_factor / p) * energy_gradient(DiscreteFunction(grid, v), w).values;
  };
  auto resolve = [&w, &opts, grid](const Vector& load, const Vector& warm) -> Vector {
    return solve_dirichlet(w, DiscreteFunction(grid, load), opts, warm).values;
  };
  return inverse_power(grid, p, h, energy, energy_grad, resolve, start);
}

EigenPair first_eigenpair_local(const Grid1D& grid, double p, const WeightFunction& h,
                                const SolverOptions& opts, const std::optional<Vector>& start) {
  if (!h.values().grid.same_as(grid))
    throw std::invalid_argument("first_eigenpair_local: grid mismatch");
  auto energy = [grid, p](const Vector& v) {
    return local_energy(DiscreteFunction(grid, v), p);
  };
  auto energy_grad = [grid, p](const Vector& v) -> Vector {
    return local_energy_gradient(DiscreteFunction(grid, v), p).values / p;
  };
  auto resolve = [grid, p, &opts](const Vector& load, const Vector& warm) -> Vector {
    auto f = detail::local_dirichlet_objective(grid, p, load, opts.epsilon_reg);
    const double tol =
        opts.grad_tol * std::max(1.0, load.lpNorm<Eigen::Infinity>() * grid.cell_measure());
    return detail::minimize_convex(f, warm, p, tol, opts);
  };
  return inverse_power(grid, p, h, energy, energy_grad, resolve, start);
}

SpectrumP2 full_spectrum_p2(const KernelWeights& w, const WeightFunction& h, int count) {
  if (w.p != 2.0) throw UnsupportedOperation("full_spectrum_p2: only available at p = 2");
  if (!h.values().grid.same_as(w.grid))
    throw std::invalid_argument("full_spectrum_p2: grid mismatch");
  return generalized_spectrum(w.bbm_factor * stiffness_matrix_p2(w), h, w.grid, count);
}

std::vector<CurvePoint> lambda1_curve(const std::vector<double>& s_values, double p,
                                      const WeightFunction& h, const Grid1D& grid, double K,
                                      const SolverOptions& opts) {
  std::vector<CurvePoint> curve;
  for (double s : s_values) {
    CurvePoint pt;
    pt.s = s;
    try {
      EigenPair pair = s == 1.0 ? first_eigenpair_local(grid, p, h, opts)
                                : first_eigenpair(assemble_kernel(grid, s, p, K), h, opts);
      pt.lambda1 = pair.lambda;
      pt.residual = pair.residual;
      pt.iterations = pair.iterations;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    curve.push_back(std::move(pt));
  }
  return curve;
}

bool positivity_check(const DiscreteFunction& u) {
  Vector v = u.values;
  if (v.sum() < 0.0) v = -v;
  return v.size() > 0 && v.minCoeff() > 0.0;
}

std::pair<double, double> nodal_measure(const DiscreteFunction& u) {
  int pos = 0, neg = 0;
  for (int i = 0; i < u.grid.n_cells; ++i) {
    if (u.values[i] > 0.0) ++pos;
    if (u.values[i] < 0.0) ++neg;
  }
  return {u.grid.cell_measure() * pos, u.grid.cell_measure() * neg};
}

double isolation_gap(const KernelWeights& w, const WeightFunction& h) {
  SpectrumP2 spec = full_spectrum_p2(w, h, 2);
  return spec.eigenvalues[1] - spec.eigenvalues[0];
}

std::vector<GapPoint> isolation_gap_sweep(const std::vector<double>& s_values,
                                          const WeightFunction& h, const Grid1D& grid, double K) {
  std::vector<GapPoint> out;
  for (double s : s_values) {
    SpectrumP2 spec =
        s == 1.0 ? generalized_spectrum(local_stiffness_p2(grid), h, grid, 2)
                 : full_spectrum_p2(assemble_kernel(grid, s, 2.0, K), h, 2);
    GapPoint g;
    g.s = s;
    g.lambda1 = spec.eigenvalues[0];
    g.lambda2 = spec.eigenvalues[1];
    g.gap = g.lambda2 - g.lambda1;
    out.push_back(g);
  }
  return out;
}

}  // namespace fpl
