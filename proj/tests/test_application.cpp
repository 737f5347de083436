#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fpl/application.hpp"

using namespace fpl;

namespace {

// g / Psi_2 runs from 2 at t = 0 to 30 at infinity, straddling lambda_1.
const char* kCrossingSrc = "psi(t,2)*(2 + 28*t^2/(1+t^2))";

}  // namespace

TEST_CASE("validate_crossing accepts the straddling example") {
  ExprAst g = parse_scalar_function(kCrossingSrc);
  CrossingNonlinearity c = validate_crossing(g, 2.0, 9.87);
  CHECK(std::abs(c.lambda_under - 2.0) <= 1e-6);
  CHECK(c.lambda_over_probe == doctest::Approx(30.0).epsilon(1e-4));
  CHECK(c.bound <= 30.0 + 1e-9);
  CHECK(c.bound >= 29.0);
  CHECK(c.p == 2.0);
}

TEST_CASE("validate_crossing rejections") {
  // A1: ratio g / Psi_p = t is unbounded
  CHECK_THROWS_AS(validate_crossing(parse_scalar_function("psi(t,2)*t"), 2.0, 9.87),
                  std::invalid_argument);
  // A2: constant ratio below lambda_1 never crosses
  CHECK_THROWS_AS(validate_crossing(parse_scalar_function("psi(t,2)*4.935"), 2.0, 9.87),
                  std::invalid_argument);
  // A2: b = 5 stays below lambda_1
  CHECK_THROWS_AS(
      validate_crossing(parse_scalar_function("psi(t,2)*(2 + 3*t^2/(1+t^2))"), 2.0, 9.87),
      std::invalid_argument);
  // A2: limit at zero already above lambda_1
  CHECK_THROWS_AS(
      validate_crossing(parse_scalar_function("psi(t,2)*(20 + 28*t^2/(1+t^2))"), 2.0, 9.87),
      std::invalid_argument);
  // g(0) != 0
  CHECK_THROWS_AS(validate_crossing(parse_scalar_function("1 + t"), 2.0, 9.87),
                  std::invalid_argument);
  // one-sided limits disagree
  CHECK_THROWS_AS(
      validate_crossing(parse_scalar_function("psi(t,2)*(2 + sign(t) + 28*t^2/(1+t^2))"), 2.0,
                        9.87),
      std::invalid_argument);
  // parameter validation
  ExprAst g = parse_scalar_function(kCrossingSrc);
  CHECK_THROWS_AS(validate_crossing(g, 1.0, 9.87), std::invalid_argument);
  CHECK_THROWS_AS(validate_crossing(g, 2.0, 9.87, 0.0), std::invalid_argument);
}

TEST_CASE("decomposition g = lambda_under Psi_p + f is exact") {
  ExprAst g = parse_scalar_function(kCrossingSrc);
  CrossingNonlinearity c = validate_crossing(g, 2.0, 9.87);
  Nonlinearity f = c.shifted_f();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double t = dist(rng);
    const double reconstructed = c.lambda_under * power_map(t, c.p) + f(0.3, t, 1.0);
    CHECK(std::abs(reconstructed - g(t)) <= 1e-12 * std::max(1.0, std::abs(g(t))));
  }
}

TEST_CASE("solve_crossing finds a constant-sign solution of L u = g(u)") {
  Grid1D grid = build_grid(0.0, 1.0, 128);
  KernelWeights w = assemble_kernel(grid, 0.75, 2.0, 1.0);
  EigenPair eig = first_eigenpair(w, WeightFunction::one(grid), SolverOptions{});
  REQUIRE(eig.lambda > 2.0);
  REQUIRE(eig.lambda < 30.0);

  ExprAst g = parse_scalar_function(kCrossingSrc);
  CrossingNonlinearity c = validate_crossing(g, 2.0, eig.lambda);
  CrossingOptions opts;
  CrossingSolution sol = solve_crossing(c, w, opts, +1);

  // nontrivial, constant sign, branch reached lambda_under
  CHECK(sol.u.values.lpNorm<Eigen::Infinity>() > 1e-3);
  CHECK(positivity_check(sol.u));
  CHECK(sol.lambda_under == c.lambda_under);
  CHECK(sol.branch.termination == Termination::lambda_bound);
  CHECK(std::isfinite(sol.branch_lambda_max));
  CHECK(sol.branch_lambda_max <= sol.branch.lambda_start * (1.0 + 1e-6));

  // residual of the original problem, relative to the g-load scale
  const double m = grid.cell_measure();
  double load_scale = 0.0;
  for (int i = 0; i < grid.n_cells; ++i)
    load_scale = std::max(load_scale, m * std::abs(g(sol.u.values[i])));
  CHECK(sol.residual <= 1e-6 * load_scale);

  // mirror solution in the negative direction (g is odd)
  CrossingSolution neg = solve_crossing(c, w, opts, -1);
  CHECK(classify_sign(neg.u) == SignClass::negative);
  CHECK((neg.u.values + sol.u.values).lpNorm<Eigen::Infinity>() <=
        1e-6 * sol.u.values.lpNorm<Eigen::Infinity>());
}

TEST_CASE("branch that cannot reach lambda_under raises ExistenceError") {
  Grid1D grid = build_grid(0.0, 1.0, 48);
  KernelWeights w = assemble_kernel(grid, 0.6, 2.0, 1.0);
  EigenPair eig = first_eigenpair(w, WeightFunction::one(grid), SolverOptions{});
  ExprAst g = parse_scalar_function(kCrossingSrc);
  CrossingNonlinearity c = validate_crossing(g, 2.0, eig.lambda);

  CrossingOptions opts;
  opts.continuation.max_steps = 5;  // give up almost immediately
  bool threw = false;
  try {
    solve_crossing(c, w, opts, +1);
  } catch (const ExistenceError& e) {
    threw = true;
    CHECK(e.partial_branch.points.size() <= 5);
    CHECK(e.partial_branch.termination == Termination::max_steps);
  }
  CHECK(threw);
}

TEST_CASE("solve_crossing validates p agreement") {
  Grid1D grid = build_grid(0.0, 1.0, 16);
  KernelWeights w = assemble_kernel(grid, 0.5, 3.0, 1.0);
  ExprAst g = parse_scalar_function(kCrossingSrc);
  CrossingNonlinearity c = validate_crossing(g, 2.0, 9.87);
  CHECK_THROWS_AS(solve_crossing(c, w, CrossingOptions{}, +1), std::invalid_argument);
}
