#include "fpl/dirichlet.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Cholesky>

namespace fpl {
namespace detail {

namespace {

Vector psi_vec(const Eigen::ArrayXd& d, double p) {
  if (p == 2.0) return d.matrix();
  return (d.abs().pow(p - 1.0) * d.sign()).matrix();
}

}  // namespace

ConvexObjective nonlocal_dirichlet_objective(const KernelWeights& w, const Vector& load,
                                             double epsilon_reg) {
  const double p = w.p;
  const double bbm = w.bbm_factor;
  const double m = w.grid.cell_measure();
  const int n = w.grid.n_cells;

  ConvexObjective f;
  if (p == 2.0) {
    // Quadratic fast path: J = 1/2 v^T A v - m <load, v> with A = bbm * L.
    auto A = std::make_shared<Matrix>(bbm * stiffness_matrix_p2(w));
    f.value = [A, load, m](const Vector& v) {
      return 0.5 * v.dot(*A * v) - m * load.dot(v);
    };
    f.gradient = [A, load, m](const Vector& v) -> Vector { return *A * v - m * load; };
    f.hessian = [A](const Vector&) { return *A; };
    return f;
  }

  auto weights = std::make_shared<KernelWeights>(w);
  f.value = [weights, load, p, bbm, m, n](const Vector& v) {
    double pair = 0.0, ext = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::ArrayXd d = v[i] - v.array();
      pair += (weights->interior.row(i).transpose().array() * d.abs().pow(p)).sum();
      ext += weights->exterior[i] * std::pow(std::abs(v[i]), p);
    }
    return (bbm / p) * (pair + 2.0 * ext) - m * load.dot(v);
  };
  f.gradient = [weights, load, p, bbm, m, n](const Vector& v) -> Vector {
    Vector g(n);
    for (int i = 0; i < n; ++i) {
      Eigen::ArrayXd d = v[i] - v.array();
      double acc = (weights->interior.row(i).transpose().array() * psi_vec(d, p).array()).sum();
      acc += weights->exterior[i] * power_map(v[i], p);
      g[i] = bbm * 2.0 * acc;
    }
    return g - m * load;
  };
  f.hessian = [weights, p, bbm, epsilon_reg, n](const Vector& v) {
    const double eps = p < 2.0 ? epsilon_reg : 0.0;
    Matrix H = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double diag = weights->exterior[i] * power_weight(v[i], p, eps);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double phi = weights->interior(i, j) * power_weight(v[i] - v[j], p, eps);
        H(i, j) = -phi;
        diag += phi;
      }
      H(i, i) = diag;
    }
    return Matrix(2.0 * bbm * (p - 1.0) * H);
  };
  return f;
}

ConvexObjective local_dirichlet_objective(const Grid1D& grid, double p, const Vector& load,
                                          double epsilon_reg) {
  const double m = grid.cell_measure();
  ConvexObjective f;
  f.value = [grid, p, m, load](const Vector& v) {
    return local_energy(DiscreteFunction(grid, v), p) / p - m * load.dot(v);
  };
  f.gradient = [grid, p, m, load](const Vector& v) -> Vector {
    return local_energy_gradient(DiscreteFunction(grid, v), p).values / p - m * load;
  };
  f.hessian = [grid, p, epsilon_reg](const Vector& v) {
    const int n = grid.n_cells;
    const double h = grid.cell_width;
    const double eps = p < 2.0 ? epsilon_reg : 0.0;
    auto slope = [&](int k) {
      const double lo = k > 0 ? v[k - 1] : 0.0;
      const double hi = k < n ? v[k] : 0.0;
      return (hi - lo) / h;
    };
    Matrix H = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      const double a = power_weight(slope(i), p, eps);
      const double b = power_weight(slope(i + 1), p, eps);
      H(i, i) = (p - 1.0) / h * (a + b);
      if (i + 1 < n) H(i, i + 1) = H(i + 1, i) = -(p - 1.0) / h * b;
    }
    return H;
  };
  return f;
}

namespace {

// Conjugate-gradient descent for the quadratic p = 2 objective. Curvature is
// probed through gradient differences only (A d = g(x + d) - g(x), exact for
// a quadratic), so it shares no code with the direct-solve oracle. Restarted
// every n steps to shed rounding drift.
Vector minimize_cg_quadratic(const ConvexObjective& f, Vector x, double tol_abs,
                             const SolverOptions& opts) {
  const int n = int(x.size());
  Vector g = f.gradient(x);
  Vector d = -g;
  double gg = g.squaredNorm();
  for (int it = 0; it < opts.max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= tol_abs) return x;
    if (it % n == 0 && it > 0) {
      g = f.gradient(x);  // fresh gradient at restart
      d = -g;
      gg = g.squaredNorm();
    }
    Vector Ad = f.gradient(x + d) - g;
    const double dAd = d.dot(Ad);
    if (!(dAd > 0.0)) {
      // Curvature lost to rounding: finish with a plain gradient step.
      x -= (gg / std::max(dAd, 1e-300)) * g;
      g = f.gradient(x);
      d = -g;
      gg = g.squaredNorm();
      continue;
    }
    const double alpha = -g.dot(d) / dAd;
    x += alpha * d;
    g += alpha * Ad;
    const double gg_new = g.squaredNorm();
    d = -g + (gg_new / gg) * d;
    gg = gg_new;
  }
  g = f.gradient(x);
  if (g.lpNorm<Eigen::Infinity>() <= tol_abs) return x;
  throw ConvergenceError("conjugate gradient: max_iter exceeded", x,
                         g.lpNorm<Eigen::Infinity>());
}

// Damped Newton with Levenberg ridge and backtracking; gradient fallback.
Vector minimize_newton(const ConvexObjective& f, Vector x, double tol_abs, const SolverOptions& opts) {
  const int n = int(x.size());
  double fx = f.value(x);
  int iters = 0;
  int stalled = 0;
  while (iters++ < opts.max_iter) {
    Vector g = f.gradient(x);
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= tol_abs) return x;

    Matrix H = f.hessian(x);
    const double dmax = H.diagonal().cwiseAbs().maxCoeff();
    double mu = dmax > 0.0 ? 1e-12 * dmax : 1.0;
    Vector d;
    bool have_dir = false;
    for (int tries = 0; tries < 40; ++tries) {
      Matrix Hm = H + mu * Matrix::Identity(n, n);
      Eigen::LDLT<Matrix> ldlt(Hm);
      if (ldlt.info() == Eigen::Success) {
        d = ldlt.solve(-g);
        if (d.allFinite() && g.dot(d) < 0.0) {
          have_dir = true;
          break;
        }
      }
      mu *= 10.0;
    }
    if (!have_dir) d = -g;

    // For p < 2 the minimizer can sit at a kink of |t|^{p-1} (coincident
    // neighbor values); there the gradient has a floating-point floor that may
    // exceed tol_abs. The Newton model still localizes the minimizer: once the
    // full step is below rounding scale of the iterate, x is converged in
    // x-space and further gradient reduction is not representable.
    if (have_dir && d.lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>()))
      return x;

    const double slope = g.dot(d);
    double t = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 80; ++ls) {
      x_new = x + t * d;
      f_new = f.value(x_new);
      if (f_new <= fx + opts.ls_decrease * t * slope) {
        accepted = true;
        break;
      }
      t *= opts.ls_shrink;
    }
    if (!accepted) {
      // Non-decrease along the Newton direction: fall back to a gradient step.
      d = -g;
      t = 1.0 / std::max(1.0, g.norm());
      for (int ls = 0; ls < 80; ++ls) {
        x_new = x + t * d;
        f_new = f.value(x_new);
        if (f_new < fx) {
          accepted = true;
          break;
        }
        t *= opts.ls_shrink;
      }
      if (!accepted) throw ConvergenceError("newton: line search failed", x, gnorm);
    }
    // Accepted steps whose decrease is below rounding scale cannot make
    // representable progress; after a few of them in a row the iterate is as
    // converged as double precision allows (p < 2 kink floor, see above).
    if (fx - f_new <= 1e-15 * (1.0 + std::abs(fx))) {
      if (++stalled >= 10) return x_new;
    } else {
      stalled = 0;
    }
    x = std::move(x_new);
    fx = f_new;
  }
  Vector g = f.gradient(x);
  throw ConvergenceError("newton: max_iter exceeded", x, g.lpNorm<Eigen::Infinity>());
}

}  // namespace

Vector minimize_convex(const ConvexObjective& f, Vector x0, double p, double tol_abs,
                       const SolverOptions& opts) {
  // p = 2: the objective is quadratic and conjugate-gradient descent reaches
  // tight stationarity even on refined meshes. p != 2: plain first-order
  // descent crawls (degenerate curvature of |t|^{p-2}t at coincident values),
  // so Newton with the epsilon-regularized curvature is used; the
  // regularization never enters the gradient or the stopping test.
  if (p == 2.0) return minimize_cg_quadratic(f, std::move(x0), tol_abs, opts);
  return minimize_newton(f, std::move(x0), tol_abs, opts);
}

}  // namespace detail

DiscreteFunction solve_dirichlet(const KernelWeights& w, const DiscreteFunction& load,
                                 const SolverOptions& opts, const std::optional<Vector>& initial) {
  if (!load.grid.same_as(w.grid)) throw std::invalid_argument("solve_dirichlet: grid mismatch");
  const double m = w.grid.cell_measure();
  const double tol_abs =
      opts.grad_tol * std::max(1.0, load.values.lpNorm<Eigen::Infinity>() * m);
  auto f = detail::nonlocal_dirichlet_objective(w, load.values, opts.epsilon_reg);
  Vector x0 = initial ? *initial : Vector::Zero(w.grid.n_cells);
  return DiscreteFunction(w.grid, detail::minimize_convex(f, std::move(x0), w.p, tol_abs, opts));
}

DiscreteFunction resolvent(double s, double p, const DiscreteFunction& load, const Grid1D& grid,
                           double K, const SolverOptions& opts) {
  if (!load.grid.same_as(grid)) throw std::invalid_argument("resolvent: grid mismatch");
  if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("resolvent: requires 0 < s <= 1");
  if (s == 1.0) {
    const double m = grid.cell_measure();
    const double tol_abs = opts.grad_tol * std::max(1.0, load.values.lpNorm<Eigen::Infinity>() * m);
    auto f = detail::local_dirichlet_objective(grid, p, load.values, opts.epsilon_reg);
    return DiscreteFunction(grid,
                            detail::minimize_convex(f, Vector::Zero(grid.n_cells), p, tol_abs, opts));
  }
  KernelWeights w = assemble_kernel(grid, s, p, K);
  return solve_dirichlet(w, load, opts);
}

}  // namespace fpl
