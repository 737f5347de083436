#pragma once

#include <string>
#include <vector>

#include "fpl/application.hpp"

namespace fpl::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key = value configuration with bracketed section headers; expression
// values are double-quoted. Unknown keys are rejected.
struct RunConfig {
  // [domain]
  double a = 0.0;
  double b = 1.0;
  int n = 64;

  // [problem]
  std::vector<double> s_values = {0.5};
  double p = 2.0;
  double bbm_constant = 1.0;  // key K
  std::string weight_h = "1";
  std::string load = "1";
  std::string f = "0";
  std::string g;

  // [solver]
  SolverOptions solver;

  // [continuation]
  ContinuationOptions continuation;
  int start_direction = 1;

  // [run]
  unsigned long seed = 1;
  std::string output_dir = ".";
  int spectrum_count = 6;
  double probe_T = 1e3;
  bool full_spectrum = false;

  double s() const { return s_values.front(); }
};

// Throws ConfigError on syntax errors, unknown keys, out-of-range values, or
// expressions that do not parse.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// RFC-4180 field quoting and 17-significant-digit float formatting.
std::string csv_field(const std::string& raw);
std::string fmt(double v);

// SHA-256 of a byte string, lowercase hex (manifest content hashes).
std::string sha256_hex(const std::string& data);

// Full command-line entry point. Exit codes: 0 success, 2 configuration or
// usage error, 3 solver convergence failure, 4 property-suite violation.
int run(int argc, const char* const* argv);

}  // namespace fpl::cli
