#pragma once

// Independent oracles for the identities and properties the library is
// expected to satisfy. Each check rebuilds its reference value by a route
// that does not share code with the quantity under test where possible.

#include <cstdint>
#include <string>
#include <vector>

#include "isasc/system_model.hpp"

namespace isasc::validation {

struct OracleResult {
  std::string name;
  double observed = 0.0;
  double tolerance = 0.0;
  bool at_least = false;  // pass when observed >= tolerance instead of <=
  bool pass = false;
  double seconds = 0.0;
  std::string note;
};

/// Closed-form CRB vs inverse of the 3x3 FIM on `instances` draws (M=4, N=6).
OracleResult crb_identity(std::uint64_t seed, int instances = 100);
/// Analytic echo derivative vs central differences in theta.
OracleResult echo_derivative(std::uint64_t seed);
/// FIM vs a finite-difference Jacobian of the noiseless echo.
OracleResult fim_jacobian(std::uint64_t seed);
/// Asymptotes and midpoint of the logistic similarity.
OracleResult logistic_shape();
OracleResult threshold_roundtrip(std::uint64_t seed, int samples = 100);
/// CRB(c R) = CRB(R) / c for c in {0.5, 2, 10}.
OracleResult power_scaling(std::uint64_t seed);

/// Recovered objective never above the relaxed one (worst excess) and the
/// median recovery ratio, over `instances` SP1 solves.
std::vector<OracleResult> sp1_relaxation(std::uint64_t seed, int instances = 50);

OracleResult polarization_identity(std::uint64_t seed, int probes = 100);
OracleResult tangent_minorization(std::uint64_t seed, int probes = 100);
/// Largest relative drop of the SCA surrogate over `runs` SP2 solves.
OracleResult surrogate_monotone(std::uint64_t seed, int runs = 20);
/// Worst ratio of the SP2 objective to an exhaustive 16^3 phase grid (N=3,
/// constraints disabled).
OracleResult phase_grid(std::uint64_t seed, int runs = 20);

/// Golden-section search on a V-shaped stub, error relative to the width.
OracleResult gss_stub();
/// r_th interval against the analytic bounds for epsilon = 5000.
OracleResult rth_bounds();

/// All of the above.
std::vector<OracleResult> run_all(std::uint64_t seed);

}  // namespace isasc::validation
