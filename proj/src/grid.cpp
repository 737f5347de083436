#include "fpl/grid.hpp"

#include <cmath>

namespace fpl {

Grid1D build_grid(double a, double b, int n_cells) {
  if (!(a < b)) throw std::invalid_argument("build_grid: requires a < b");
  if (n_cells < 2) throw std::invalid_argument("build_grid: requires at least 2 cells");
  Grid1D g;
  g.a = a;
  g.b = b;
  g.n_cells = n_cells;
  g.cell_width = (b - a) / n_cells;
  g.cell_centers.resize(n_cells);
  for (int i = 0; i < n_cells; ++i) g.cell_centers[i] = a + (i + 0.5) * g.cell_width;
  return g;
}

namespace detail {

namespace {

constexpr double kLogBranchTol = 1e-12;

// Second antiderivative of r^{-(1+alpha)}: q''(r) = r^{-(1+alpha)}.
double second_antiderivative(double t, double alpha) {
  if (std::abs(alpha - 1.0) < kLogBranchTol) return -std::log(t);
  return std::pow(t, 1.0 - alpha) / (alpha * (alpha - 1.0));
}

// int_1^2 r^{-alpha} dr, log branch at alpha = 1.
double unit_gap_moment(double alpha) {
  if (std::abs(alpha - 1.0) < kLogBranchTol) return std::log(2.0);
  return (std::pow(2.0, 1.0 - alpha) - 1.0) / (1.0 - alpha);
}

}  // namespace

double near_field_coefficient(double alpha, double p) {
  // Kernel mass of the range |x - y| < h against the linear interface model:
  // int_{|r|<h} |r|^{p-1-alpha} dr = 2 h^{p-alpha} / (p - alpha), distributed
  // as c_h |du|^p per interface with c_h = 2 h^{1-alpha} / (p - alpha).
  return 2.0 / (p - alpha);
}

double interior_offset_weight(int k, double alpha, double p) {
  if (k >= 2) {
    // Exact double integral over the cell pair (separation >= h everywhere):
    // second difference of the second antiderivative.
    return second_antiderivative(k + 1.0, alpha) - 2.0 * second_antiderivative(double(k), alpha) +
           second_antiderivative(k - 1.0, alpha);
  }
  // Adjacent pair: exact integral over the far triangle {y - x >= h},
  //   int_h^{2h} (2h - r) r^{-(1+alpha)} dr,
  // plus half of the sub-cell interface coefficient (the pair term appears
  // twice in the ordered sum).
  double far = 2.0 * (1.0 - std::pow(2.0, -alpha)) / alpha - unit_gap_moment(alpha);
  return far + 0.5 * near_field_coefficient(alpha, p);
}

}  // namespace detail

namespace {

void check_kernel_params(double s, double p) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("kernel: requires 0 < s < 1");
  if (!(p > 1.0)) throw std::invalid_argument("kernel: requires p > 1");
}

double exterior_offset_weight(int dist_cells, double alpha, double p) {
  // Kernel mass between a cell and one infinite tail, dist_cells cells away.
  if (dist_cells == 0) {
    // Boundary cell: exact integral over {x - y >= h} is h^{1-alpha}/alpha;
    // the sub-cell boundary layer enters through the boundary interface.
    return 1.0 / alpha + 0.5 * detail::near_field_coefficient(alpha, p);
  }
  // Exact: int_{d h}^{(d+1) h} x^{-alpha} / alpha dx.
  double d = dist_cells;
  if (std::abs(alpha - 1.0) < 1e-12) return std::log((d + 1.0) / d) / alpha;
  return (std::pow(d + 1.0, 1.0 - alpha) - std::pow(d, 1.0 - alpha)) / (alpha * (1.0 - alpha));
}

}  // namespace

double cell_pair_weight(const Grid1D& grid, int i, int j, double s, double p) {
  check_kernel_params(s, p);
  if (i == j) throw std::invalid_argument("cell_pair_weight: i == j (same-cell difference is zero)");
  if (i < 0 || j < 0 || i >= grid.n_cells || j >= grid.n_cells)
    throw std::invalid_argument("cell_pair_weight: index out of range");
  const double alpha = s * p;
  return std::pow(grid.cell_width, 1.0 - alpha) * detail::interior_offset_weight(std::abs(i - j), alpha, p);
}

double exterior_weight(const Grid1D& grid, int i, double s, double p) {
  check_kernel_params(s, p);
  if (i < 0 || i >= grid.n_cells) throw std::invalid_argument("exterior_weight: index out of range");
  const double alpha = s * p;
  const double scale = std::pow(grid.cell_width, 1.0 - alpha);
  return scale * (exterior_offset_weight(i, alpha, p) +
                  exterior_offset_weight(grid.n_cells - 1 - i, alpha, p));
}

KernelWeights assemble_kernel(const Grid1D& grid, double s, double p, double bbm_constant) {
  check_kernel_params(s, p);
  const int n = grid.n_cells;
  const double alpha = s * p;
  const double scale = std::pow(grid.cell_width, 1.0 - alpha);

  KernelWeights w;
  w.grid = grid;
  w.s = s;
  w.p = p;
  w.bbm_factor = bbm_constant * (1.0 - s);

  // One value per offset; mirrored fill keeps symmetry exact.
  Vector by_offset(n);
  by_offset[0] = 0.0;
  for (int k = 1; k < n; ++k) by_offset[k] = scale * detail::interior_offset_weight(k, alpha, p);

  w.interior = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      w.interior(i, j) = by_offset[j - i];
      w.interior(j, i) = by_offset[j - i];
    }

  w.exterior.resize(n);
  for (int i = 0; i < n; ++i)
    w.exterior[i] = scale * (exterior_offset_weight(i, alpha, p) +
                             exterior_offset_weight(n - 1 - i, alpha, p));
  return w;
}

Matrix stiffness_matrix_p2(const KernelWeights& w) {
  const int n = w.grid.n_cells;
  Matrix L = -2.0 * w.interior;
  for (int i = 0; i < n; ++i) L(i, i) = 2.0 * (w.interior.row(i).sum() + w.exterior[i]);
  return L;
}

}  // namespace fpl
