#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fpl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown when an iterative solver exhausts its budget. Carries the last
// iterate so callers can inspect or restart.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Vector last_iterate, double residual)
      : std::runtime_error(what),
        last_iterate(std::move(last_iterate)),
        residual(residual) {}

  Vector last_iterate;
  double residual = 0.0;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// |t|^{p-2} t, extended continuously by 0 at t = 0 for p < 2.
inline double power_map(double t, double p) {
  if (t == 0.0) return 0.0;
  return std::pow(std::abs(t), p - 2.0) * t;
}

// |t|^{p-2}, optionally regularized as (t^2 + eps^2)^{(p-2)/2} for curvature
// terms when p < 2.
inline double power_weight(double t, double p, double eps = 0.0) {
  if (eps > 0.0) return std::pow(t * t + eps * eps, 0.5 * (p - 2.0));
  if (t == 0.0) return p > 2.0 ? 0.0 : (p == 2.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return std::pow(std::abs(t), p - 2.0);
}

}  // namespace fpl
