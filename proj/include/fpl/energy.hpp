#pragma once

#include <functional>
#include <vector>

#include "fpl/grid.hpp"

namespace fpl {

struct SobolevExponents {
  double s = 0.5;
  double p = 2.0;
  int n = 1;
  // np / (n - sp) when sp < n, +infinity otherwise.
  double p_star() const {
    if (s * p >= n) return std::numeric_limits<double>::infinity();
    return n * p / (n - s * p);
  }
};

struct EnergyReport {
  double seminorm_p = 0.0;      // [u]^p including the exterior term
  double normalized = 0.0;      // bbm_factor * seminorm_p
  double lp_norm_p = 0.0;       // cell_measure * sum |u_i|^p
  double exterior_share = 0.0;  // (2 sum zeta_i |u_i|^p) / seminorm_p, 0 for u == 0
};

EnergyReport gagliardo_energy(const DiscreteFunction& u, const KernelWeights& w);

// Gradient of seminorm_p with respect to the cell values:
//   g_i = 2p [ sum_{j != i} w_ij psi_p(u_i - u_j) + zeta_i psi_p(u_i) ].
DiscreteFunction energy_gradient(const DiscreteFunction& u, const KernelWeights& w);

// Interior-only seminorm sum_{i != j} w_ij |u_i - u_j|^p (no exterior term),
// used by the inequality suite as |u|_{W^{s,p}(Omega)}^p.
double interior_seminorm(const DiscreteFunction& u, const KernelWeights& w);

// First-order discretization of int |u'|^p over the N+1 cell interfaces,
// including both boundary interfaces against the zero exterior.
double local_energy(const DiscreteFunction& u, double p);

// Gradient of local_energy.
DiscreteFunction local_energy_gradient(const DiscreteFunction& u, double p);

struct BbmEstimate {
  double constant = 0.0;        // K-hat
  double spread = 0.0;          // relative spread across probes
  std::vector<double> per_probe;
};

// Fixes K through lim_{s->1} K (1-s) [u]^p = |u|_{W^{1,p}}^p, by Richardson
// extrapolation of (1-s) * seminorm_p in (1-s) over the given probes.
// Throws std::invalid_argument on a zero probe, std::runtime_error when the
// per-probe spread exceeds 5% (under-resolved mesh).
BbmEstimate estimate_bbm_constant(double p, const std::vector<DiscreteFunction>& probes,
                                  const std::vector<double>& s_values);

struct InequalityResult {
  std::string name;
  int sample = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  double margin() const { return rhs - lhs; }
};

struct InequalityReport {
  std::vector<InequalityResult> rows;
  double lemma22_constant = 0.0;   // calibrated C(n,p), already inflated x1.5
  double mazya_constant = 0.0;     // calibrated C(n,p) for the Sobolev bound
  bool poincare_flagged = false;   // a Poincare-bound violation (omega_1 = 2 normalization)
  int violations = 0;
};

// Runs the fractional-Sobolev inequality suite on a batch of functions.
// w and w_prime share the grid and p, with w.s < w_prime.s. The first
// `train_count` samples calibrate the free constants; the rest are asserted.
InequalityReport check_inequalities(const std::vector<DiscreteFunction>& samples,
                                    const KernelWeights& w, const KernelWeights& w_prime,
                                    int train_count);

}  // namespace fpl
