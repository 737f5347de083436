#include "fpl/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Cholesky>
#include <json.hpp>

namespace fpl::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// formatting

constexpr const char* kArtifact = "fplap";
constexpr const char* kVersion = "0.1.0";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// ---------------------------------------------------------------------------
// SHA-256 (manifest content hashes)

constexpr uint32_t kSha256K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

// ---------------------------------------------------------------------------
// config parsing

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::string unquote(const std::string& value) {
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
    return value.substr(1, value.size() - 2);
  return value;
}

void parse_expression_key(const std::string& key, const std::string& src) {
  try {
    parse_scalar_function(src);
  } catch (const SyntaxError& e) {
    throw ConfigError("config: key '" + key + "' does not parse: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// run context: collected outputs + manifest

struct RunContext {
  RunConfig cfg;
  bool verify = false;
  int threads = 1;
  std::string out_dir;
  std::string command;
  json extra = json::object();  // command-specific manifest fields
  std::vector<std::pair<std::string, std::string>> outputs;  // file -> content

  void emit(const std::string& name, const std::string& content) {
    outputs.emplace_back(name, content);
  }
};

json config_echo(const RunConfig& c) {
  json j;
  j["domain.a"] = fmt(c.a);
  j["domain.b"] = fmt(c.b);
  j["domain.n"] = c.n;
  json s = json::array();
  for (double v : c.s_values) s.push_back(fmt(v));
  j["problem.s"] = s;
  j["problem.p"] = fmt(c.p);
  j["problem.K"] = fmt(c.bbm_constant);
  j["problem.h"] = c.weight_h;
  j["problem.load"] = c.load;
  j["problem.f"] = c.f;
  j["problem.g"] = c.g;
  j["solver.grad_tol"] = fmt(c.solver.grad_tol);
  j["solver.max_iter"] = c.solver.max_iter;
  j["solver.epsilon_reg"] = fmt(c.solver.epsilon_reg);
  j["solver.ls_shrink"] = fmt(c.solver.ls_shrink);
  j["solver.ls_decrease"] = fmt(c.solver.ls_decrease);
  j["continuation.ds"] = fmt(c.continuation.ds);
  j["continuation.max_steps"] = c.continuation.max_steps;
  j["continuation.newton_tol"] = fmt(c.continuation.newton_tol);
  j["continuation.max_newton"] = c.continuation.max_newton;
  j["continuation.max_amplitude"] = fmt(c.continuation.max_amplitude);
  j["continuation.t0_seed"] = fmt(c.continuation.t0_seed);
  j["continuation.fd_step"] = fmt(c.continuation.fd_step);
  j["continuation.start_direction"] = c.start_direction;
  j["run.seed"] = c.seed;
  j["run.output_dir"] = c.output_dir;
  j["run.spectrum_count"] = c.spectrum_count;
  j["run.probe_T"] = fmt(c.probe_T);
  j["run.full_spectrum"] = c.full_spectrum;
  return j;
}

void flush_outputs(RunContext& ctx, int exit_code, double elapsed_ms) {
  namespace fs = std::filesystem;
  fs::create_directories(ctx.out_dir);
  json manifest;
  manifest["artifact"] = kArtifact;
  manifest["version"] = kVersion;
  manifest["command"] = ctx.command;
  manifest["threads"] = ctx.threads;
  manifest["verify"] = ctx.verify;
  manifest["exit_code"] = exit_code;
  manifest["config"] = config_echo(ctx.cfg);
  manifest["timings_ms"] = {{"total", elapsed_ms}};
  manifest["results"] = ctx.extra;
  json files = json::array();
  for (const auto& [name, content] : ctx.outputs) {
    std::ofstream out(fs::path(ctx.out_dir) / name, std::ios::binary);
    out.write(content.data(), std::streamsize(content.size()));
    files.push_back({{"file", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }
  manifest["outputs"] = files;
  std::ofstream mout(fs::path(ctx.out_dir) / "manifest.json", std::ios::binary);
  mout << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// shared helpers

Vector eval_on_grid(const std::string& src, const Grid1D& g) {
  ExprAst e = parse_scalar_function(src);
  Vector v(g.n_cells);
  for (int i = 0; i < g.n_cells; ++i) v[i] = e(0.0, g.cell_centers[i], 0.0);
  return v;
}

void require_single_s(const RunConfig& cfg, const std::string& cmd) {
  if (cfg.s_values.size() != 1)
    throw ConfigError("config: command '" + cmd + "' expects a single s value");
}

void require_nonlocal_s(double s, const std::string& cmd) {
  if (s >= 1.0)
    throw ConfigError("config: command '" + cmd + "' requires s < 1 (no kernel at s = 1)");
}

const char* sign_name(SignClass c) {
  switch (c) {
    case SignClass::positive: return "positive";
    case SignClass::negative: return "negative";
    case SignClass::sign_changing: return "sign_changing";
    case SignClass::zero: return "zero";
  }
  return "unknown";
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::max_amplitude: return "max_amplitude";
    case Termination::max_steps: return "max_steps";
    case Termination::lambda_bound: return "lambda_bound";
    case Termination::newton_failure: return "newton_failure";
  }
  return "unknown";
}

std::string branch_csv(const Branch& br) {
  std::ostringstream csv;
  csv << "step,lambda,amplitude,residual,sign_class\r\n";
  for (size_t i = 0; i < br.points.size(); ++i) {
    const BranchPoint& pt = br.points[i];
    csv << i << "," << fmt(pt.lambda) << "," << fmt(pt.amplitude) << "," << fmt(pt.residual)
        << "," << csv_field(sign_name(pt.sign_class)) << "\r\n";
  }
  return csv.str();
}

std::string function_csv(const DiscreteFunction& u, const char* value_header) {
  std::ostringstream csv;
  csv << "x," << value_header << "\r\n";
  for (int i = 0; i < u.grid.n_cells; ++i)
    csv << fmt(u.grid.cell_centers[i]) << "," << fmt(u.values[i]) << "\r\n";
  return csv.str();
}

// ---------------------------------------------------------------------------
// commands

int cmd_assemble(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  std::ostringstream csv;
  csv << "s,p,n,bbm_factor,min_interior_weight,max_interior_weight,"
         "min_exterior_weight,max_exterior_weight,symmetry_error\r\n";
  bool ok = true;
  for (double s : cfg.s_values) {
    require_nonlocal_s(s, "assemble");
    KernelWeights w = assemble_kernel(g, s, cfg.p, cfg.bbm_constant);
    double min_int = std::numeric_limits<double>::infinity(), max_int = 0.0;
    for (int i = 0; i < g.n_cells; ++i)
      for (int j = 0; j < g.n_cells; ++j)
        if (i != j) {
          min_int = std::min(min_int, w.interior(i, j));
          max_int = std::max(max_int, w.interior(i, j));
        }
    const double sym = (w.interior - w.interior.transpose()).cwiseAbs().maxCoeff();
    csv << fmt(s) << "," << fmt(cfg.p) << "," << g.n_cells << "," << fmt(w.bbm_factor) << ","
        << fmt(min_int) << "," << fmt(max_int) << "," << fmt(w.exterior.minCoeff()) << ","
        << fmt(w.exterior.maxCoeff()) << "," << fmt(sym) << "\r\n";
    if (ctx.verify && (sym != 0.0 || min_int <= 0.0 || w.exterior.minCoeff() <= 0.0)) ok = false;
  }
  ctx.emit("kernel.csv", csv.str());
  std::cout << "assembled " << cfg.s_values.size() << " kernel(s) at N = " << g.n_cells << "\n";
  return ok ? 0 : 4;
}

int cmd_dirichlet(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  require_single_s(cfg, "dirichlet");
  const double s = cfg.s();
  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  DiscreteFunction load(g, eval_on_grid(cfg.load, g));
  DiscreteFunction u = resolvent(s, cfg.p, load, g, cfg.bbm_constant, cfg.solver);

  double residual;
  if (s < 1.0) {
    KernelWeights w = assemble_kernel(g, s, cfg.p, cfg.bbm_constant);
    residual = detail::nonlocal_dirichlet_objective(w, load.values, cfg.solver.epsilon_reg)
                   .gradient(u.values)
                   .lpNorm<Eigen::Infinity>();
  } else {
    residual = detail::local_dirichlet_objective(g, cfg.p, load.values, cfg.solver.epsilon_reg)
                   .gradient(u.values)
                   .lpNorm<Eigen::Infinity>();
  }

  std::ostringstream csv;
  csv << "x,load,u\r\n";
  for (int i = 0; i < g.n_cells; ++i)
    csv << fmt(g.cell_centers[i]) << "," << fmt(load.values[i]) << "," << fmt(u.values[i])
        << "\r\n";
  ctx.emit("dirichlet.csv", csv.str());
  ctx.extra["residual"] = fmt(residual);
  std::cout << "dirichlet solve: residual = " << fmt(residual) << "\n";

  if (ctx.verify && cfg.p == 2.0 && s < 1.0) {
    KernelWeights w = assemble_kernel(g, s, cfg.p, cfg.bbm_constant);
    Matrix A = w.bbm_factor * stiffness_matrix_p2(w);
    Vector direct = A.ldlt().solve(g.cell_measure() * load.values);
    const double err = (u.values - direct).lpNorm<Eigen::Infinity>() /
                       std::max(1e-300, direct.lpNorm<Eigen::Infinity>());
    ctx.extra["oracle_error"] = fmt(err);
    if (err > 1e-8) {
      std::cout << "VERIFY FAIL dirichlet-oracle: error = " << fmt(err) << "\n";
      return 4;
    }
    std::cout << "VERIFY PASS dirichlet-oracle: error = " << fmt(err) << "\n";
  }
  return 0;
}

int cmd_eigen(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  require_single_s(cfg, "eigen");
  const double s = cfg.s();
  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  WeightFunction h(DiscreteFunction(g, eval_on_grid(cfg.weight_h, g)));

  EigenPair pair;
  std::optional<KernelWeights> w;
  if (s < 1.0) {
    w = assemble_kernel(g, s, cfg.p, cfg.bbm_constant);
    pair = first_eigenpair(*w, h, cfg.solver);
  } else {
    pair = first_eigenpair_local(g, cfg.p, h, cfg.solver);
  }

  std::ostringstream csv;
  csv << "s,p,lambda1,normalization,residual,iterations\r\n";
  csv << fmt(s) << "," << fmt(cfg.p) << "," << fmt(pair.lambda) << ","
      << fmt(pair.normalization) << "," << fmt(pair.residual) << "," << pair.iterations
      << "\r\n";
  ctx.emit("eigen.csv", csv.str());
  ctx.emit("eigenfunction.csv", function_csv(pair.u, "u"));
  ctx.extra["lambda1"] = fmt(pair.lambda);
  std::cout << "lambda1 = " << fmt(pair.lambda) << " (" << pair.iterations << " iterations)\n";

  if (cfg.full_spectrum) {
    if (cfg.p != 2.0 || s >= 1.0)
      throw ConfigError("config: --full-spectrum requires p = 2 and s < 1");
    SpectrumP2 spec = full_spectrum_p2(*w, h, cfg.spectrum_count);
    std::ostringstream sp;
    sp << "k,lambda\r\n";
    for (size_t k = 0; k < spec.eigenvalues.size(); ++k)
      sp << (k + 1) << "," << fmt(spec.eigenvalues[k]) << "\r\n";
    ctx.emit("spectrum.csv", sp.str());
  }

  if (ctx.verify) {
    if (!positivity_check(pair.u)) {
      std::cout << "VERIFY FAIL eigen-positivity\n";
      return 4;
    }
    if (cfg.p == 2.0 && s < 1.0) {
      SpectrumP2 spec = full_spectrum_p2(*w, h, 1);
      const double err = std::abs(pair.lambda - spec.eigenvalues[0]) / spec.eigenvalues[0];
      ctx.extra["oracle_error"] = fmt(err);
      if (err > 1e-8) {
        std::cout << "VERIFY FAIL eigen-oracle: error = " << fmt(err) << "\n";
        return 4;
      }
      std::cout << "VERIFY PASS eigen-oracle: error = " << fmt(err) << "\n";
    }
  }
  return 0;
}

int cmd_sweep(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  WeightFunction h(DiscreteFunction(g, eval_on_grid(cfg.weight_h, g)));

  // One point per s; worker threads pull indices, results land in slot order
  // and are serialized by a single writer, so output is thread-count
  // independent.
  std::vector<CurvePoint> points(cfg.s_values.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < cfg.s_values.size(); i = next.fetch_add(1)) {
      std::vector<CurvePoint> one =
          lambda1_curve({cfg.s_values[i]}, cfg.p, h, g, cfg.bbm_constant, cfg.solver);
      points[i] = one.front();
    }
  };
  const int k = std::min<int>(ctx.threads, int(cfg.s_values.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "s,lambda1,residual,iterations,error\r\n";
  bool failed = false;
  for (const CurvePoint& pt : points) {
    csv << fmt(pt.s) << "," << fmt(pt.lambda1) << "," << fmt(pt.residual) << ","
        << pt.iterations << "," << csv_field(pt.error) << "\r\n";
    if (!pt.error.empty()) failed = true;
  }
  ctx.emit("lambda1_curve.csv", csv.str());
  std::cout << "swept " << points.size() << " value(s) of s\n";
  return failed ? 3 : 0;
}

int cmd_branch(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  require_single_s(cfg, "branch");
  require_nonlocal_s(cfg.s(), "branch");
  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  KernelWeights w = assemble_kernel(g, cfg.s(), cfg.p, cfg.bbm_constant);

  ContinuationOptions copts = cfg.continuation;
  copts.solver = cfg.solver;
  Branch br = continue_branch(w, Nonlinearity(parse_scalar_function(cfg.f)),
                              cfg.start_direction, copts);

  ctx.emit("branch.csv", branch_csv(br));
  ctx.extra["lambda_start"] = fmt(br.lambda_start);
  ctx.extra["termination"] = termination_name(br.termination);
  ctx.extra["points"] = br.points.size();
  std::cout << "branch: " << br.points.size() << " points from lambda_1 = "
            << fmt(br.lambda_start) << ", termination = " << termination_name(br.termination)
            << "\n";
  if (br.termination == Termination::newton_failure && br.points.size() < 2) {
    ConvergenceError err("branch: continuation failed at the seed", Vector(), 0.0);
    throw err;
  }
  return 0;
}

int cmd_apply(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  require_single_s(cfg, "apply");
  require_nonlocal_s(cfg.s(), "apply");
  if (cfg.g.empty()) throw ConfigError("config: command 'apply' requires problem.g");

  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  KernelWeights w = assemble_kernel(g, cfg.s(), cfg.p, cfg.bbm_constant);
  EigenPair eig = first_eigenpair(w, WeightFunction::one(g), cfg.solver);

  CrossingNonlinearity crossing;
  try {
    crossing = validate_crossing(parse_scalar_function(cfg.g), cfg.p, eig.lambda, cfg.probe_T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: problem.g rejected: ") + e.what());
  }

  CrossingOptions opts;
  opts.continuation = cfg.continuation;
  opts.continuation.solver = cfg.solver;
  // The existence argument needs the branch to travel all the way down to
  // lambda_under; enforce floors over the (branch-oriented) config defaults.
  opts.continuation.max_steps = std::max(cfg.continuation.max_steps, 4000);
  opts.continuation.max_amplitude = std::max(cfg.continuation.max_amplitude, 100.0);
  CrossingSolution sol = solve_crossing(crossing, w, opts, cfg.start_direction);

  ctx.emit("apply.csv", function_csv(sol.u, "u"));
  ctx.emit("apply_branch.csv", branch_csv(sol.branch));
  ctx.extra["lambda_under"] = fmt(sol.lambda_under);
  ctx.extra["lambda_over_probe"] = fmt(crossing.lambda_over_probe);
  ctx.extra["lambda1"] = fmt(eig.lambda);
  ctx.extra["residual"] = fmt(sol.residual);
  ctx.extra["branch_lambda_max"] = fmt(sol.branch_lambda_max);
  std::cout << "crossing: lambda_under = " << fmt(sol.lambda_under)
            << ", lambda1 = " << fmt(eig.lambda)
            << ", probe = " << fmt(crossing.lambda_over_probe)
            << ", residual = " << fmt(sol.residual) << "\n";

  if (ctx.verify && !positivity_check(sol.u) && classify_sign(sol.u) != SignClass::negative) {
    std::cout << "VERIFY FAIL apply-constant-sign\n";
    return 4;
  }
  return 0;
}

// property suite for `check`; bbm_scale != 1 is the negative-control hook.
int cmd_check(RunContext& ctx, double bbm_scale) {
  const RunConfig& cfg = ctx.cfg;
  const double s = std::min(cfg.s(), 0.95);
  const double p = cfg.p;
  Grid1D g = build_grid(cfg.a, cfg.b, cfg.n);
  std::mt19937 rng(static_cast<unsigned>(cfg.seed));

  auto assemble_scaled = [&](const Grid1D& grid, double sv) {
    KernelWeights w = assemble_kernel(grid, sv, p, cfg.bbm_constant);
    w.bbm_factor *= bbm_scale;
    return w;
  };

  struct Check {
    std::string name;
    std::function<std::string()> run;  // empty string = pass, else detail
  };
  std::vector<Check> checks;

  checks.push_back({"kernel-structure", [&]() -> std::string {
    KernelWeights w = assemble_scaled(g, s);
    if ((w.interior - w.interior.transpose()).cwiseAbs().maxCoeff() != 0.0)
      return "interior weights not symmetric";
    for (int k2 = 2; k2 < g.n_cells; ++k2)
      if (w.interior(0, k2) >= w.interior(0, k2 - 1)) return "weights not decaying";
    const double expected = cfg.bbm_constant * (1.0 - s);
    if (std::abs(w.bbm_factor - expected) > 1e-12 * expected)
      return "bbm_factor != K (1 - s): got " + fmt(w.bbm_factor) + ", expected " +
             fmt(expected);
    return "";
  }});

  checks.push_back({"energy-gradient-fd", [&]() -> std::string {
    KernelWeights w = assemble_scaled(g, s);
    std::normal_distribution<double> dist;
    Vector u(g.n_cells);
    for (int i = 0; i < g.n_cells; ++i) u[i] = dist(rng);
    Vector grad = energy_gradient(DiscreteFunction(g, u), w).values;
    const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < g.n_cells; i += std::max(1, g.n_cells / 16)) {
      const double d = 1e-6;
      Vector up = u, dn = u;
      up[i] += d;
      dn[i] -= d;
      const double fd = (gagliardo_energy(DiscreteFunction(g, up), w).seminorm_p -
                         gagliardo_energy(DiscreteFunction(g, dn), w).seminorm_p) /
                        (2.0 * d);
      if (std::abs(fd - grad[i]) > 1e-6 * scale)
        return "gradient mismatch at cell " + std::to_string(i);
    }
    return "";
  }});

  checks.push_back({"dirichlet-stationarity", [&]() -> std::string {
    KernelWeights w = assemble_scaled(g, s);
    Vector load = eval_on_grid("sin(3.141592653589793*x)+1", g);
    DiscreteFunction u = solve_dirichlet(w, DiscreteFunction(g, load), cfg.solver);
    const double res = detail::nonlocal_dirichlet_objective(w, load, cfg.solver.epsilon_reg)
                           .gradient(u.values)
                           .lpNorm<Eigen::Infinity>();
    const double tol = 100.0 * cfg.solver.grad_tol *
                       std::max(1.0, load.lpNorm<Eigen::Infinity>() * g.cell_measure());
    if (res > tol) return "stationarity residual " + fmt(res);
    return "";
  }});

  checks.push_back({"eigen-positivity", [&]() -> std::string {
    KernelWeights w = assemble_scaled(g, s);
    EigenPair pair = first_eigenpair(w, WeightFunction::one(g), cfg.solver);
    if (!positivity_check(pair.u)) return "first eigenfunction changes sign";
    if (std::abs(pair.normalization - 1.0) > 1e-8) return "normalization off";
    return "";
  }});

  checks.push_back({"local-limit", [&]() -> std::string {
    // lambda_1(0.99, p) must sit near the classical local constant
    // (p - 1) pi_p^p; a wrong bbm_factor shifts it proportionally.
    Grid1D fine = build_grid(cfg.a, cfg.b, std::max(cfg.n, 256));
    KernelWeights w = assemble_scaled(fine, 0.99);
    EigenPair pair = first_eigenpair(w, WeightFunction::one(fine), cfg.solver);
    const double pi = 3.14159265358979323846;
    const double pi_p = 2.0 * pi / (p * std::sin(pi / p));
    const double classical =
        (p - 1.0) * std::pow(pi_p / fine.measure(), p);
    const double rel = std::abs(pair.lambda - classical) / classical;
    if (rel > 0.10)
      return "lambda1(0.99) = " + fmt(pair.lambda) + " vs classical " + fmt(classical);
    return "";
  }});

  if (p == 2.0) {
    checks.push_back({"isolation-gap", [&]() -> std::string {
      KernelWeights w = assemble_scaled(g, s);
      const double gap = isolation_gap(w, WeightFunction::one(g));
      SpectrumP2 spec = full_spectrum_p2(w, WeightFunction::one(g), 1);
      if (gap <= 0.1 * spec.eigenvalues[0]) return "gap too small: " + fmt(gap);
      return "";
    }});
    checks.push_back({"degree-pattern", [&]() -> std::string {
      KernelWeights w = assemble_scaled(g, s);
      SpectrumP2 spec = full_spectrum_p2(w, WeightFunction::one(g), 2);
      const double l1 = spec.eigenvalues[0], l2 = spec.eigenvalues[1];
      if (leray_schauder_index_p2(0.5 * l1, spec) != 1) return "index below lambda_1 != +1";
      if (leray_schauder_index_p2(0.5 * (l1 + l2), spec) != -1)
        return "index in (lambda_1, lambda_2) != -1";
      return "";
    }});
  }

  checks.push_back({"inequalities", [&]() -> std::string {
    KernelWeights w_lo = assemble_scaled(g, 0.4);
    KernelWeights w_hi = assemble_scaled(g, 0.6);
    std::normal_distribution<double> dist;
    std::vector<DiscreteFunction> samples;
    for (int k2 = 0; k2 < 60; ++k2) {
      Vector v(g.n_cells);
      for (int i = 0; i < g.n_cells; ++i) v[i] = dist(rng);
      samples.emplace_back(g, v);
    }
    InequalityReport rep = check_inequalities(samples, w_lo, w_hi, 20);
    if (rep.violations != 0)
      return std::to_string(rep.violations) + " inequality violation(s)";
    return "";
  }});

  std::ostringstream csv;
  csv << "name,passed,detail\r\n";
  int failures = 0;
  for (const Check& c : checks) {
    std::string detail;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const bool pass = detail.empty();
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name;
    if (!pass) std::cout << ": " << detail;
    std::cout << "\n";
    csv << csv_field(c.name) << "," << (pass ? "true" : "false") << "," << csv_field(detail)
        << "\r\n";
  }
  ctx.emit("check.csv", csv.str());
  ctx.extra["failures"] = failures;
  return failures == 0 ? 0 : 4;
}

}  // namespace

// ---------------------------------------------------------------------------
// public helpers

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\r\n") == std::string::npos) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string sha256_hex(const std::string& data) {
  uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                   0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  std::string msg = data;
  const uint64_t bitlen = uint64_t(data.size()) * 8;
  msg += char(0x80);
  while (msg.size() % 64 != 56) msg += char(0);
  for (int i = 7; i >= 0; --i) msg += char((bitlen >> (8 * i)) & 0xff);

  for (size_t off = 0; off < msg.size(); off += 64) {
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(uint8_t(msg[off + 4 * i])) << 24) |
             (uint32_t(uint8_t(msg[off + 4 * i + 1])) << 16) |
             (uint32_t(uint8_t(msg[off + 4 * i + 2])) << 8) |
             uint32_t(uint8_t(msg[off + 4 * i + 3]));
    for (int i = 16; i < 64; ++i) {
      const uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3];
    uint32_t e = h[4], f = h[5], gg = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const uint32_t ch = (e & f) ^ (~e & gg);
      const uint32_t t1 = hh + S1 + ch + kSha256K[i] + w[i];
      const uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const uint32_t t2 = S0 + maj;
      hh = gg; gg = f; f = e; e = d + t1;
      d = c; c = b; b = a; a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += gg; h[7] += hh;
  }
  char buf[65];
  for (int i = 0; i < 8; ++i) std::snprintf(buf + 8 * i, 9, "%08x", h[i]);
  return std::string(buf, 64);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  bool saw_s = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "domain.a") cfg.a = parse_double(key, value);
    else if (key == "domain.b") cfg.b = parse_double(key, value);
    else if (key == "domain.n") cfg.n = int(parse_long(key, value));
    else if (key == "problem.s") {
      cfg.s_values.clear();
      saw_s = true;
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ','))
        cfg.s_values.push_back(parse_double(key, trim(item)));
      if (cfg.s_values.empty())
        throw ConfigError("config: key 'problem.s' expects at least one value");
    }
    else if (key == "problem.p") cfg.p = parse_double(key, value);
    else if (key == "problem.K") cfg.bbm_constant = parse_double(key, value);
    else if (key == "problem.h") cfg.weight_h = unquote(value);
    else if (key == "problem.load") cfg.load = unquote(value);
    else if (key == "problem.f") cfg.f = unquote(value);
    else if (key == "problem.g") cfg.g = unquote(value);
    else if (key == "solver.grad_tol") cfg.solver.grad_tol = parse_double(key, value);
    else if (key == "solver.max_iter") cfg.solver.max_iter = int(parse_long(key, value));
    else if (key == "solver.epsilon_reg") cfg.solver.epsilon_reg = parse_double(key, value);
    else if (key == "solver.ls_shrink") cfg.solver.ls_shrink = parse_double(key, value);
    else if (key == "solver.ls_decrease") cfg.solver.ls_decrease = parse_double(key, value);
    else if (key == "continuation.ds") cfg.continuation.ds = parse_double(key, value);
    else if (key == "continuation.max_steps")
      cfg.continuation.max_steps = int(parse_long(key, value));
    else if (key == "continuation.newton_tol")
      cfg.continuation.newton_tol = parse_double(key, value);
    else if (key == "continuation.max_newton")
      cfg.continuation.max_newton = int(parse_long(key, value));
    else if (key == "continuation.max_amplitude")
      cfg.continuation.max_amplitude = parse_double(key, value);
    else if (key == "continuation.lambda_min")
      cfg.continuation.lambda_min = parse_double(key, value);
    else if (key == "continuation.lambda_max")
      cfg.continuation.lambda_max = parse_double(key, value);
    else if (key == "continuation.t0_seed") cfg.continuation.t0_seed = parse_double(key, value);
    else if (key == "continuation.fd_step") cfg.continuation.fd_step = parse_double(key, value);
    else if (key == "continuation.start_direction")
      cfg.start_direction = int(parse_long(key, value));
    else if (key == "run.seed") cfg.seed = static_cast<unsigned long>(parse_long(key, value));
    else if (key == "run.output_dir") cfg.output_dir = unquote(value);
    else if (key == "run.spectrum_count") cfg.spectrum_count = int(parse_long(key, value));
    else if (key == "run.probe_T") cfg.probe_T = parse_double(key, value);
    else if (key == "run.full_spectrum") cfg.full_spectrum = parse_bool(key, value);
    else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                           "'");
  }

  if (!(cfg.a < cfg.b)) throw ConfigError("config: domain requires a < b");
  if (cfg.n < 2) throw ConfigError("config: domain.n must be at least 2");
  if (!(cfg.p > 1.0)) throw ConfigError("config: problem.p must exceed 1");
  if (!saw_s && cfg.s_values.empty()) cfg.s_values = {0.5};
  for (double s : cfg.s_values)
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("config: problem.s must lie in (0, 1]");
  if (!(cfg.bbm_constant > 0.0)) throw ConfigError("config: problem.K must be positive");
  if (cfg.spectrum_count < 1) throw ConfigError("config: run.spectrum_count must be positive");
  if (cfg.start_direction != 1 && cfg.start_direction != -1)
    throw ConfigError("config: continuation.start_direction must be +1 or -1");
  parse_expression_key("problem.h", cfg.weight_h);
  parse_expression_key("problem.load", cfg.load);
  parse_expression_key("problem.f", cfg.f);
  if (!cfg.g.empty()) parse_expression_key("problem.g", cfg.g);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"fplap: fractional p-Laplacian discretization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  bool verify = false;
  int threads = 1;
  double inject_bbm_scale = 1.0;
  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--out", out_override, "output directory (overrides run.output_dir)");
  app.add_flag("--verify", verify, "enable oracle cross-checks");
  app.add_option("--threads", threads, "worker threads for sweeps");

  CLI::App* sub_assemble = app.add_subcommand("assemble", "kernel statistics");
  CLI::App* sub_dirichlet = app.add_subcommand("dirichlet", "Dirichlet resolvent solve");
  CLI::App* sub_eigen = app.add_subcommand("eigen", "first eigenpair");
  bool full_spectrum_flag = false;
  sub_eigen->add_flag("--full-spectrum", full_spectrum_flag, "dense spectrum (p = 2 only)");
  CLI::App* sub_sweep = app.add_subcommand("sweep-s", "lambda_1(s) curve");
  CLI::App* sub_branch = app.add_subcommand("branch", "bifurcation branch CSV");
  CLI::App* sub_apply = app.add_subcommand("apply", "crossing-nonlinearity existence solve");
  CLI::App* sub_check = app.add_subcommand("check", "property suites");
  sub_check->add_option("--inject-bbm-scale", inject_bbm_scale,
                        "test hook: scale the assembled bbm_factor");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunContext ctx;
  int code = 0;
  try {
    ctx.cfg = load_config(config_path);
    ctx.verify = verify;
    ctx.threads = std::max(1, threads);
    ctx.out_dir = out_override.empty() ? ctx.cfg.output_dir : out_override;
    if (full_spectrum_flag) ctx.cfg.full_spectrum = true;

    if (sub_assemble->parsed()) ctx.command = "assemble", code = cmd_assemble(ctx);
    else if (sub_dirichlet->parsed()) ctx.command = "dirichlet", code = cmd_dirichlet(ctx);
    else if (sub_eigen->parsed()) ctx.command = "eigen", code = cmd_eigen(ctx);
    else if (sub_sweep->parsed()) ctx.command = "sweep-s", code = cmd_sweep(ctx);
    else if (sub_branch->parsed()) ctx.command = "branch", code = cmd_branch(ctx);
    else if (sub_apply->parsed()) ctx.command = "apply", code = cmd_apply(ctx);
    else if (sub_check->parsed()) ctx.command = "check", code = cmd_check(ctx, inject_bbm_scale);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SyntaxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedOperation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const ExistenceError& e) {
    std::cerr << "solver failure: " << e.what() << " (partial branch of "
              << e.partial_branch.points.size() << " points)\n";
    return 3;
  }

  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  flush_outputs(ctx, code, elapsed_ms);
  return code;
}

}  // namespace fpl::cli
