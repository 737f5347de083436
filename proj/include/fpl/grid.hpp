#pragma once

#include "fpl/common.hpp"

namespace fpl {

// Uniform partition of Omega = (a, b) into n_cells cells. Functions are
// represented by one value per cell and extend by zero outside [a, b].
struct Grid1D {
  double a = 0.0;
  double b = 1.0;
  int n_cells = 0;
  double cell_width = 0.0;
  Vector cell_centers;

  double cell_measure() const { return cell_width; }
  double measure() const { return b - a; }
  double diameter() const { return b - a; }

  bool same_as(const Grid1D& o) const {
    return a == o.a && b == o.b && n_cells == o.n_cells;
  }
};

Grid1D build_grid(double a, double b, int n_cells);

// Per-cell values of u in the zero-extension class: u = values[i] on cell i,
// u = 0 on R \ (a, b).
struct DiscreteFunction {
  Grid1D grid;
  Vector values;

  DiscreteFunction() = default;
  DiscreteFunction(Grid1D g, Vector v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.n_cells)
      throw std::invalid_argument("DiscreteFunction: value count != cell count");
  }

  static DiscreteFunction zero(const Grid1D& g) {
    return DiscreteFunction(g, Vector::Zero(g.n_cells));
  }
};

// Kernel weights of |x-y|^{-(1+sp)} for the cell-pair energy
//   E(u) = sum_{i != j} w_ij |u_i - u_j|^p  +  2 sum_i zeta_i |u_i|^p.
// Separations of at least one cell are integrated exactly against the
// piecewise-constant representation; the sub-cell range |x-y| < h carries its
// kernel mass through interface differences (gradient model), which is what
// makes (1-s) * E reproduce the local |u'|^p energy as s -> 1. The sub-cell
// mass is folded into the adjacent weight and the boundary exterior weights,
// so the pairwise form above is exact by construction.
struct KernelWeights {
  Grid1D grid;
  double s = 0.5;
  double p = 2.0;
  double bbm_factor = 0.0;  // K * (1 - s)
  Matrix interior;          // symmetric, zero diagonal
  Vector exterior;          // zeta_i > 0

  double weight(int i, int j) const { return interior(i, j); }
};

// Interior cell-pair weight w_ij (i != j), closed form.
double cell_pair_weight(const Grid1D& grid, int i, int j, double s, double p);

// Exterior weight zeta_i (both tails), closed form.
double exterior_weight(const Grid1D& grid, int i, double s, double p);

KernelWeights assemble_kernel(const Grid1D& grid, double s, double p, double bbm_constant);

// p = 2 stiffness matrix L with u^T L u = E(u): off-diagonal -2 w_ij,
// diagonal 2 (sum_j w_ij + zeta_i).
Matrix stiffness_matrix_p2(const KernelWeights& w);

namespace detail {
// Offset-indexed pieces, in units of cell_width^{1-sp}; k = |i - j|.
double interior_offset_weight(int k, double alpha, double p);
double near_field_coefficient(double alpha, double p);  // 2 / (p - alpha)
}  // namespace detail

}  // namespace fpl
