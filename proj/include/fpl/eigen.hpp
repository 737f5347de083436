#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpl/dirichlet.hpp"

namespace fpl {

// Admissible weight h: bounded, positive on a set of positive measure.
class WeightFunction {
 public:
  explicit WeightFunction(DiscreteFunction h);

  static WeightFunction one(const Grid1D& g) {
    return WeightFunction(DiscreteFunction(g, Vector::Ones(g.n_cells)));
  }

  const DiscreteFunction& values() const { return h_; }
  double sup_norm() const { return sup_norm_; }
  double positive_measure() const { return positive_measure_; }

 private:
  DiscreteFunction h_;
  double sup_norm_ = 0.0;
  double positive_measure_ = 0.0;
};

struct EigenPair {
  double lambda = 0.0;
  DiscreteFunction u;
  double normalization = 0.0;  // integral of h |u|^p, target 1
  double residual = 0.0;       // max-norm of the weak-form residual
  int iterations = 0;
};

struct SpectrumP2 {
  std::vector<double> eigenvalues;          // ascending
  std::vector<DiscreteFunction> eigenvectors;  // M_h-normalized
};

// Rayleigh quotient bbm [u]^p / integral(h |u|^p). Throws std::domain_error
// when the denominator is not positive.
double rayleigh_quotient(const DiscreteFunction& u, const KernelWeights& w,
                         const WeightFunction& h);

// First eigenpair by inverse-power iteration on the resolvent:
// u <- R_{s,p}(lambda h Psi_p(u)), renormalized so integral(h|u|^p) = 1;
// the Rayleigh value decreases monotonically (asserted). Sign-normalized so
// the cell sum is positive. `start` overrides the default positive start.
EigenPair first_eigenpair(const KernelWeights& w, const WeightFunction& h,
                          const SolverOptions& opts,
                          const std::optional<Vector>& start = std::nullopt);

// Local (s = 1) analogue over local_energy.
EigenPair first_eigenpair_local(const Grid1D& grid, double p, const WeightFunction& h,
                                const SolverOptions& opts,
                                const std::optional<Vector>& start = std::nullopt);

// Dense generalized symmetric eigensolve (bbm L) x = lambda (m diag(h)) x.
// Only meaningful at p = 2; requires h strictly positive so the mass matrix
// is definite. Returns the lowest `count` pairs.
SpectrumP2 full_spectrum_p2(const KernelWeights& w, const WeightFunction& h, int count);

struct CurvePoint {
  double s = 0.0;
  double lambda1 = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::string error;  // nonempty when this point's solve failed
};

// lambda_1(s) on a shared mesh for s in (0, 1]; s = 1 dispatches to the
// local eigensolve. Per-point failures are recorded, not fatal.
std::vector<CurvePoint> lambda1_curve(const std::vector<double>& s_values, double p,
                                      const WeightFunction& h, const Grid1D& grid, double K,
                                      const SolverOptions& opts);

// True iff u is strictly one-signed on every cell (after flipping so the
// cell sum is positive).
bool positivity_check(const DiscreteFunction& u);

// (measure of {u > 0}, measure of {u < 0}).
std::pair<double, double> nodal_measure(const DiscreteFunction& u);

// Spectral gap lambda_2 - lambda_1 at p = 2.
double isolation_gap(const KernelWeights& w, const WeightFunction& h);

struct GapPoint {
  double s = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double gap = 0.0;
};

// Gap sweep over s in (0, 1] at p = 2 on a shared mesh; s = 1 uses the local
// tridiagonal spectrum.
std::vector<GapPoint> isolation_gap_sweep(const std::vector<double>& s_values,
                                          const WeightFunction& h, const Grid1D& grid, double K);

}  // namespace fpl
