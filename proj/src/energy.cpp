#include "fpl/energy.hpp"

#include <cmath>

namespace fpl {

namespace {

void require_same_grid(const DiscreteFunction& u, const KernelWeights& w) {
  if (!u.grid.same_as(w.grid)) throw std::invalid_argument("grid mismatch between function and kernel weights");
}

}  // namespace

EnergyReport gagliardo_energy(const DiscreteFunction& u, const KernelWeights& w) {
  require_same_grid(u, w);
  const int n = u.grid.n_cells;
  const double p = w.p;
  const Vector& v = u.values;

  double pair_sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      pair_sum += w.interior(i, j) * std::pow(std::abs(v[i] - v[j]), p);
  pair_sum *= 2.0;  // ordered pairs

  double ext_sum = 0.0;
  double lp = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = std::pow(std::abs(v[i]), p);
    ext_sum += w.exterior[i] * a;
    lp += a;
  }
  ext_sum *= 2.0;

  EnergyReport r;
  r.seminorm_p = pair_sum + ext_sum;
  r.normalized = w.bbm_factor * r.seminorm_p;
  r.lp_norm_p = u.grid.cell_measure() * lp;
  r.exterior_share = r.seminorm_p > 0.0 ? ext_sum / r.seminorm_p : 0.0;
  return r;
}

double interior_seminorm(const DiscreteFunction& u, const KernelWeights& w) {
  require_same_grid(u, w);
  const int n = u.grid.n_cells;
  const double p = w.p;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      sum += w.interior(i, j) * std::pow(std::abs(u.values[i] - u.values[j]), p);
  return 2.0 * sum;
}

DiscreteFunction energy_gradient(const DiscreteFunction& u, const KernelWeights& w) {
  require_same_grid(u, w);
  const int n = u.grid.n_cells;
  const double p = w.p;
  const Vector& v = u.values;

  Vector g = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = w.exterior[i] * power_map(v[i], p);
    for (int j = 0; j < n; ++j)
      if (j != i) acc += w.interior(i, j) * power_map(v[i] - v[j], p);
    g[i] = 2.0 * p * acc;
  }
  return DiscreteFunction(u.grid, std::move(g));
}

double local_energy(const DiscreteFunction& u, double p) {
  if (!(p > 1.0)) throw std::invalid_argument("local_energy: requires p > 1");
  const int n = u.grid.n_cells;
  const double h = u.grid.cell_width;
  double sum = 0.0;
  double prev = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double next = i < n ? u.values[i] : 0.0;
    sum += h * std::pow(std::abs(next - prev) / h, p);
    prev = next;
  }
  return sum;
}

DiscreteFunction local_energy_gradient(const DiscreteFunction& u, double p) {
  const int n = u.grid.n_cells;
  const double h = u.grid.cell_width;
  // E = sum_k h |d_k|^p with d_k = (u_k - u_{k-1}) / h; dE/du_i = p (psi(d_i) - psi(d_{i+1})).
  Vector g(n);
  auto slope = [&](int k) {
    const double lo = k > 0 ? u.values[k - 1] : 0.0;
    const double hi = k < n ? u.values[k] : 0.0;
    return (hi - lo) / h;
  };
  for (int i = 0; i < n; ++i)
    g[i] = p * (power_map(slope(i), p) - power_map(slope(i + 1), p));
  return DiscreteFunction(u.grid, std::move(g));
}

BbmEstimate estimate_bbm_constant(double p, const std::vector<DiscreteFunction>& probes,
                                  const std::vector<double>& s_values) {
  if (probes.empty()) throw std::invalid_argument("estimate_bbm_constant: no probes");
  if (s_values.size() < 2) throw std::invalid_argument("estimate_bbm_constant: need at least two s values");
  for (size_t i = 1; i < s_values.size(); ++i)
    if (!(s_values[i] > s_values[i - 1]) || !(s_values[i] < 1.0))
      throw std::invalid_argument("estimate_bbm_constant: s values must increase toward 1");

  BbmEstimate est;
  for (const auto& u : probes) {
    const double loc = local_energy(u, p);
    if (loc == 0.0) throw std::invalid_argument("estimate_bbm_constant: degenerate probe (zero local energy)");

    std::vector<double> r(s_values.size());
    for (size_t k = 0; k < s_values.size(); ++k) {
      KernelWeights w = assemble_kernel(u.grid, s_values[k], p, 1.0);
      r[k] = (1.0 - s_values[k]) * gagliardo_energy(u, w).seminorm_p;
    }
    // Richardson in (1-s) with the two finest points: r(s) = A + B (1-s) + ...
    const double e1 = 1.0 - s_values[s_values.size() - 2];
    const double e2 = 1.0 - s_values[s_values.size() - 1];
    const double limit = (e1 * r.back() - e2 * r[r.size() - 2]) / (e1 - e2);
    if (!(limit > 0.0)) throw std::runtime_error("estimate_bbm_constant: extrapolated seminorm not positive");
    est.per_probe.push_back(loc / limit);
  }

  double lo = est.per_probe[0], hi = est.per_probe[0], sum = 0.0;
  for (double k : est.per_probe) {
    lo = std::min(lo, k);
    hi = std::max(hi, k);
    sum += k;
  }
  est.constant = sum / est.per_probe.size();
  est.spread = (hi - lo) / est.constant;
  if (est.spread > 0.05)
    throw std::runtime_error("estimate_bbm_constant: probe spread exceeds 5% (mesh under-resolved)");
  return est;
}

InequalityReport check_inequalities(const std::vector<DiscreteFunction>& samples,
                                    const KernelWeights& w, const KernelWeights& w_prime,
                                    int train_count) {
  if (!w.grid.same_as(w_prime.grid) || w.p != w_prime.p)
    throw std::invalid_argument("check_inequalities: kernels must share grid and p");
  if (!(w.s < w_prime.s)) throw std::invalid_argument("check_inequalities: requires w.s < w_prime.s");
  if (train_count < 0 || train_count > int(samples.size()))
    throw std::invalid_argument("check_inequalities: bad train_count");

  const double s = w.s, sp = w_prime.s, p = w.p;
  const double n_dim = 1.0;
  const double omega = 2.0;  // measure of S^0 = {-1, +1}
  const double domain_measure = w.grid.measure();
  const double diam = w.grid.diameter();
  const double h = w.grid.cell_measure();
  const bool subcritical = s * p < n_dim;
  const double p_star = subcritical ? p / (n_dim - s * p) : 0.0;

  struct Quantities {
    double lp, lpstar, int_s, int_sp, full_s, full_sp;
  };
  auto compute = [&](const DiscreteFunction& u) {
    Quantities q{};
    q.lp = h * u.values.array().abs().pow(p).sum();
    if (subcritical) q.lpstar = std::pow(h * u.values.array().abs().pow(p_star).sum(), p / p_star);
    q.int_s = interior_seminorm(u, w);
    q.int_sp = interior_seminorm(u, w_prime);
    q.full_s = gagliardo_energy(u, w).seminorm_p;
    q.full_sp = gagliardo_energy(u, w_prime).seminorm_p;
    return q;
  };

  // Calibration pass: smallest admissible constants on the training slice.
  double c22 = 0.0, c_mazya = 0.0;
  for (int t = 0; t < train_count; ++t) {
    const Quantities q = compute(samples[t]);
    if (q.lp == 0.0) continue;
    c22 = std::max(c22, (q.int_s - q.int_sp) / ((1.0 / (s * p) - 1.0 / (sp * p)) * q.lp));
    if (subcritical && q.full_s > 0.0)
      c_mazya = std::max(c_mazya, q.lpstar / (s * (1.0 - s) / std::pow(n_dim - s * p, p - 1.0) * q.full_s));
  }

  InequalityReport rep;
  rep.lemma22_constant = std::max(c22, 0.0) * 1.5;
  rep.mazya_constant = c_mazya * 1.5;

  const double poincare_const = s * p * std::pow(domain_measure, s * p / n_dim) /
                                (2.0 * std::pow(omega, s * p / n_dim + 1.0));

  auto push = [&](const std::string& name, int idx, double lhs, double rhs) {
    InequalityResult r;
    r.name = name;
    r.sample = idx;
    r.lhs = lhs;
    r.rhs = rhs;
    r.pass = lhs <= rhs * (1.0 + 1e-12) + 1e-300;
    if (!r.pass) ++rep.violations;
    rep.rows.push_back(r);
    return r.pass;
  };

  for (int t = train_count; t < int(samples.size()); ++t) {
    const Quantities q = compute(samples[t]);
    const int idx = t - train_count;
    // seminorm comparison across s with the calibrated constant.
    push("lemma22", idx, q.int_s,
         q.int_sp + rep.lemma22_constant * (1.0 / (s * p) - 1.0 / (sp * p)) * q.lp);
    // Poincare with the omega_1 = 2 reading; a violation flags the
    // normalization question instead of silently passing.
    if (!push("poincare", idx, q.lp, poincare_const * q.full_s)) rep.poincare_flagged = true;
    // Maz'ya-type Sobolev bound (only when sp < n).
    if (subcritical)
      push("mazya", idx, q.lpstar,
           rep.mazya_constant * s * (1.0 - s) / std::pow(n_dim - s * p, p - 1.0) * q.full_s);
    // Seminorm comparison across s with the explicit constant (no free constant).
    push("seminorm_s_compare", idx, (1.0 - s) * q.int_s,
         std::pow(2.0, (1.0 - s) * p) * std::pow(diam, (sp - s) * p) * (1.0 - sp) * q.full_sp);
  }
  return rep;
}

}  // namespace fpl
