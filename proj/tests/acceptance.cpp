// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Oracles are independent of the library code paths (adaptive
// quadrature, dense factorizations, closed-form classical constants).
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "fpl/application.hpp"
#include "fpl/cli.hpp"
#include "oracles.hpp"

using namespace fpl;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmtd(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

double align_distance(const Vector& a, const Vector& b) {
  const double scale = std::max(1e-300, b.lpNorm<Eigen::Infinity>());
  return std::min((a - b).lpNorm<Eigen::Infinity>(), (a + b).lpNorm<Eigen::Infinity>()) / scale;
}

DiscreteFunction bump(const Grid1D& g, double center, double width) {
  Vector v(g.n_cells);
  for (int i = 0; i < g.n_cells; ++i) {
    const double t = (g.cell_centers[i] - center) / width;
    v[i] = std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
  }
  return DiscreteFunction(g, std::move(v));
}

// --------------------------------------------------------------------------
// criteria

std::string criterion_kernel_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Grid1D g = build_grid(0.0, 1.0, 64);
  double worst = 0.0;
  for (double s : {0.25, 0.5, 0.75})
    for (double p : {1.5, 2.0, 3.0}) {
      KernelWeights w = assemble_kernel(g, s, p, 1.0);
      for (int k = 1; k < 64; ++k)
        worst = std::max(worst,
                         rel_err(w.interior(0, k), oracle::pair_weight(g.cell_width, k, s, p)));
      for (int i = 0; i < 64; ++i)
        worst = std::max(
            worst, rel_err(w.exterior[i], oracle::exterior_cell_weight(g.cell_width, i, 64, s, p)));
    }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (worst > 1e-9) return "max relative error " + fmtd(worst) + " > 1e-9";
  if (secs > 60.0) return "runtime " + fmtd(secs) + "s > 60s";
  return "";
}

std::string criterion_dirichlet_oracle() {
  Grid1D g = build_grid(0.0, 1.0, 128);
  KernelWeights w = assemble_kernel(g, 0.5, 2.0, 1.0);
  Vector load(g.n_cells);
  for (int i = 0; i < g.n_cells; ++i)
    load[i] = std::sin(kPi * g.cell_centers[i]) + 0.3 * std::cos(3.0 * kPi * g.cell_centers[i]);

  DiscreteFunction u = solve_dirichlet(w, DiscreteFunction(g, load), SolverOptions{});
  Matrix A = w.bbm_factor * stiffness_matrix_p2(w);
  Vector direct = A.ldlt().solve(g.cell_measure() * load);
  const double err =
      (u.values - direct).lpNorm<Eigen::Infinity>() / direct.lpNorm<Eigen::Infinity>();
  if (err > 1e-8) return "max-norm relative error " + fmtd(err) + " > 1e-8";
  return "";
}

std::string criterion_eigen_oracle() {
  Grid1D g = build_grid(0.0, 1.0, 128);
  KernelWeights w = assemble_kernel(g, 0.5, 2.0, 1.0);
  WeightFunction h = WeightFunction::one(g);
  EigenPair pair = first_eigenpair(w, h, SolverOptions{});
  SpectrumP2 spec = full_spectrum_p2(w, h, 1);
  const double err = rel_err(pair.lambda, spec.eigenvalues[0]);
  if (err > 1e-8) return "lambda_1 relative error " + fmtd(err) + " > 1e-8";

  std::mt19937 rng(11);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 10; ++trial) {
    Vector start(g.n_cells);
    for (int i = 0; i < g.n_cells; ++i) start[i] = dist(rng);
    EigenPair other = first_eigenpair(w, h, SolverOptions{}, start);
    const double d = align_distance(other.u.values, pair.u.values);
    if (d > 1e-6) return "simplicity: start " + std::to_string(trial) + " strays " + fmtd(d);
  }
  return "";
}

std::string criterion_bbm_local_limit() {
  Grid1D g = build_grid(0.0, 1.0, 512);
  const std::vector<double> s_vals{0.9, 0.95, 0.975, 0.99};
  BbmEstimate K = estimate_bbm_constant(2.0, {bump(g, 0.5, 0.35), bump(g, 0.4, 0.25)}, s_vals);

  KernelWeights w = assemble_kernel(g, 0.99, 2.0, K.constant);
  EigenPair near_one = first_eigenpair(w, WeightFunction::one(g), SolverOptions{});
  const double pi2 = kPi * kPi;
  if (rel_err(near_one.lambda, pi2) > 0.05)
    return "lambda_1(0.99, 2) = " + fmtd(near_one.lambda) + " vs pi^2, error " +
           fmtd(rel_err(near_one.lambda, pi2)) + " > 5%";

  EigenPair local2 = first_eigenpair_local(g, 2.0, WeightFunction::one(g), SolverOptions{});
  if (rel_err(local2.lambda, pi2) > 0.01)
    return "lambda_1(1, 2) = " + fmtd(local2.lambda) + " vs pi^2, error " +
           fmtd(rel_err(local2.lambda, pi2)) + " > 1%";

  const double p = 3.0;
  const double pi_p = 2.0 * kPi / (p * std::sin(kPi / p));
  const double classical = (p - 1.0) * std::pow(pi_p, p);
  Grid1D g3 = build_grid(0.0, 1.0, 256);
  EigenPair local3 = first_eigenpair_local(g3, p, WeightFunction::one(g3), SolverOptions{});
  if (rel_err(local3.lambda, classical) > 0.02)
    return "lambda_1(1, 3) = " + fmtd(local3.lambda) + " vs " + fmtd(classical) + ", error " +
           fmtd(rel_err(local3.lambda, classical)) + " > 2%";
  return "";
}

std::string criterion_positivity() {
  Grid1D g = build_grid(0.0, 1.0, 64);
  int violations = 0;
  for (double s : {0.25, 0.5, 0.75})
    for (double p : {1.5, 2.0, 3.0}) {
      KernelWeights w = assemble_kernel(g, s, p, 1.0);
      EigenPair pair = first_eigenpair(w, WeightFunction::one(g), SolverOptions{});
      if (!positivity_check(pair.u)) ++violations;
    }
  if (violations != 0) return std::to_string(violations) + " sign violation(s) in the 3x3 matrix";
  return "";
}

std::string criterion_isolation() {
  const std::vector<double> s_values{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  Grid1D g128 = build_grid(0.0, 1.0, 128);
  Grid1D g256 = build_grid(0.0, 1.0, 256);
  WeightFunction h128 = WeightFunction::one(g128);
  WeightFunction h256 = WeightFunction::one(g256);
  std::vector<GapPoint> coarse = isolation_gap_sweep(s_values, h128, g128, 1.0);
  std::vector<GapPoint> fine = isolation_gap_sweep(s_values, h256, g256, 1.0);
  for (size_t i = 0; i < s_values.size(); ++i) {
    if (coarse[i].gap <= 0.1 * coarse[i].lambda1)
      return "gap at s = " + fmtd(s_values[i]) + " is " + fmtd(coarse[i].gap) +
             " <= 0.1 lambda_1";
    const double drift = std::abs(fine[i].gap - coarse[i].gap) / coarse[i].gap;
    if (drift > 0.02)
      return "gap at s = " + fmtd(s_values[i]) + " drifts " + fmtd(drift) + " under refinement";
  }
  return "";
}

std::string criterion_degree() {
  Grid1D g = build_grid(0.0, 1.0, 64);
  for (double s : {0.3, 0.5, 0.7, 0.9}) {
    SpectrumP2 spec = full_spectrum_p2(assemble_kernel(g, s, 2.0, 1.0), WeightFunction::one(g), 2);
    const double l1 = spec.eigenvalues[0], l2 = spec.eigenvalues[1];
    if (leray_schauder_index_p2(0.5 * l1, spec) != 1)
      return "index below lambda_1 != +1 at s = " + fmtd(s);
    if (leray_schauder_index_p2(0.5 * (l1 + l2), spec) != -1)
      return "index in (lambda_1, lambda_2) != -1 at s = " + fmtd(s);
  }
  return "";
}

std::string criterion_bifurcation() {
  Grid1D g = build_grid(0.0, 1.0, 128);
  KernelWeights w = assemble_kernel(g, 0.75, 2.0, 1.0);
  ContinuationOptions opts;
  opts.max_steps = 60;
  Branch br = continue_branch(w, Nonlinearity(parse_scalar_function("neg(t^3)")), +1, opts);
  if (br.points.size() < 40)
    return "only " + std::to_string(br.points.size()) + " branch points (< 40)";
  SignScanReport scan = branch_sign_scan(br);
  if (scan.violations != 0)
    return std::to_string(scan.violations) + " constant-sign violation(s) on the branch";
  const double err = rel_err(branch_intercept(br), br.lambda_start);
  if (err > 0.01) return "intercept error " + fmtd(err) + " > 1%";
  return "";
}

std::string criterion_application() {
  Grid1D g = build_grid(0.0, 1.0, 128);
  KernelWeights w = assemble_kernel(g, 0.75, 2.0, 1.0);
  EigenPair eig = first_eigenpair(w, WeightFunction::one(g), SolverOptions{});
  ExprAst gexpr = parse_scalar_function("psi(t,2)*(2 + 28*t^2/(1+t^2))");
  CrossingNonlinearity crossing = validate_crossing(gexpr, 2.0, eig.lambda);

  CrossingSolution sol = solve_crossing(crossing, w, CrossingOptions{}, +1);
  if (classify_sign(sol.u) != SignClass::positive) return "solution is not positive";
  double load_scale = 0.0;
  for (int i = 0; i < g.n_cells; ++i)
    load_scale = std::max(load_scale, g.cell_measure() * std::abs(gexpr(sol.u.values[i])));
  if (sol.residual > 1e-6 * load_scale)
    return "relative residual " + fmtd(sol.residual / load_scale) + " > 1e-6";

  CrossingSolution mirror = solve_crossing(crossing, w, CrossingOptions{}, -1);
  if (classify_sign(mirror.u) != SignClass::negative) return "mirror solution is not negative";
  if ((mirror.u.values + sol.u.values).lpNorm<Eigen::Infinity>() >
      1e-6 * sol.u.values.lpNorm<Eigen::Infinity>())
    return "mirror solution is not the negative of the positive one";
  return "";
}

std::string criterion_inequalities() {
  Grid1D g = build_grid(0.0, 1.0, 64);
  KernelWeights w = assemble_kernel(g, 0.4, 2.0, 1.0);
  KernelWeights w_prime = assemble_kernel(g, 0.6, 2.0, 1.0);
  std::mt19937 rng(17);
  std::normal_distribution<double> dist;
  std::vector<DiscreteFunction> samples;
  for (int k = 0; k < 260; ++k) {
    Vector v(g.n_cells);
    for (int i = 0; i < g.n_cells; ++i) v[i] = dist(rng);
    samples.emplace_back(g, v);
  }
  InequalityReport rep = check_inequalities(samples, w, w_prime, 60);
  if (rep.violations != 0)
    return std::to_string(rep.violations) + " violation(s) on the 200-sample test set";
  if (rep.poincare_flagged) return "Poincare bound flagged (omega_1 = 2 normalization)";
  return "";
}

std::string criterion_fd_checks() {
  Grid1D g = build_grid(0.0, 1.0, 24);
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution coin(0.5);
  Nonlinearity f(parse_scalar_function("lambda*t^3/(1+t^2) + x*psi(t,3)"));

  for (double p : {1.5, 2.0, 3.0}) {
    KernelWeights w = assemble_kernel(g, 0.6, p, 1.0);
    Vector u(g.n_cells);
    for (int i = 0; i < g.n_cells; ++i) u[i] = (coin(rng) ? 1.0 : -1.0) * mag(rng);
    DiscreteFunction uf(g, u);

    // energy gradient vs central differences
    Vector grad = energy_gradient(uf, w).values;
    const double gscale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < g.n_cells; ++i) {
      const double d = 1e-6;
      Vector up = u, dn = u;
      up[i] += d;
      dn[i] -= d;
      const double fd = (gagliardo_energy(DiscreteFunction(g, up), w).seminorm_p -
                         gagliardo_energy(DiscreteFunction(g, dn), w).seminorm_p) /
                        (2.0 * d);
      if (std::abs(fd - grad[i]) > 1e-6 * gscale)
        return "energy gradient FD mismatch at p = " + fmtd(p);
    }

    // Jacobian columns vs central differences of the residual map
    const double lam = 3.7;
    Matrix J = jacobian(uf, lam, w, f, 1e-6, 1e-8);
    const double jscale = std::max(1.0, J.cwiseAbs().maxCoeff());
    for (int j = 0; j <= g.n_cells; ++j) {
      Vector ref;
      if (j < g.n_cells) {
        const double d = 1e-6 * std::max(1.0, std::abs(u[j]));
        Vector up = u, dn = u;
        up[j] += d;
        dn[j] -= d;
        ref = (residual_map(DiscreteFunction(g, up), lam, w, f).values -
               residual_map(DiscreteFunction(g, dn), lam, w, f).values) /
              (2.0 * d);
      } else {
        const double d = 1e-6 * std::max(1.0, lam);
        ref = (residual_map(uf, lam + d, w, f).values -
               residual_map(uf, lam - d, w, f).values) /
              (2.0 * d);
      }
      if ((J.col(j) - ref).lpNorm<Eigen::Infinity>() > 1e-5 * jscale)
        return "Jacobian FD mismatch in column " + std::to_string(j) + " at p = " + fmtd(p);
    }
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FPL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string criterion_determinism() {
  fs::path dir = fs::temp_directory_path() / ("fpl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "[domain]\nn = 64\n"
           "[problem]\ns = 0.5\np = 2\nf = \"neg(t^3)\"\n"
           "[continuation]\nmax_steps = 30\n"
           "[run]\nseed = 5\n";
  }
  const std::string base = "--config " + (dir / "run.cfg").string();
  struct Job {
    const char* cmd;
    const char* file;
  };
  for (const Job job : {Job{"eigen", "eigen.csv"}, Job{"branch", "branch.csv"}}) {
    std::vector<std::string> contents;
    int run_id = 0;
    for (const char* threads : {"1", "4", "1", "4"}) {
      const fs::path out = dir / (std::string(job.cmd) + "_" + std::to_string(run_id++));
      const int rc =
          run_cli(base + " --out " + out.string() + " --threads " + threads + " " + job.cmd);
      if (rc != 0)
        return std::string(job.cmd) + " run exited with code " + std::to_string(rc);
      contents.push_back(slurp(out / job.file));
      if (contents.back().empty()) return std::string(job.file) + " is empty";
    }
    for (size_t i = 1; i < contents.size(); ++i)
      if (contents[i] != contents[0])
        return std::string(job.file) + " differs between runs/thread counts";
  }
  return "";
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<std::string()> run;
  };
  const std::vector<Criterion> criteria = {
      {"criterion-01 kernel-oracle", criterion_kernel_oracle},
      {"criterion-02 dirichlet-oracle", criterion_dirichlet_oracle},
      {"criterion-03 eigen-oracle-simplicity", criterion_eigen_oracle},
      {"criterion-04 bbm-local-limit", criterion_bbm_local_limit},
      {"criterion-05 positivity", criterion_positivity},
      {"criterion-06 isolation-gap", criterion_isolation},
      {"criterion-07 degree-values", criterion_degree},
      {"criterion-08 bifurcation-branch", criterion_bifurcation},
      {"criterion-09 application-crossing", criterion_application},
      {"criterion-10 inequality-suite", criterion_inequalities},
      {"criterion-11 fd-checks", criterion_fd_checks},
      {"criterion-12 determinism", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (detail.empty()) {
      std::printf("PASS %s (%.1fs)\n", c.name, secs);
    } else {
      std::printf("FAIL %s (%.1fs): %s\n", c.name, secs, detail.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
