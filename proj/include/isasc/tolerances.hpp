#pragma once

// Numerical tolerances shared across the library. Everything that compares
// floating point quantities against a structural property refers to this
// table rather than to a local literal.

namespace isasc::tol {

/// Relative slack when checking a block for positive semidefiniteness:
/// min eigenvalue >= -kPsdSlack * trace.
inline constexpr double kPsdSlack = 1e-9;

/// Relative agreement required between two algebraic routes to one value.
inline constexpr double kIdentity = 1e-10;

/// Allowed deviation of |v_n| from one for a phase profile.
inline constexpr double kUnitModulus = 1e-9;

/// Absolute slack on the transmit power budget (watts).
inline constexpr double kPowerBudget = 1e-6;

/// Relative slack accepted for SINR/power feasibility of recovered
/// rank-one candidates.
inline constexpr double kCandidateFeasibility = 1e-6;

/// Schur complement of the FIM (relative to f_thetatheta) at or below which
/// the angle is reported as non-identifiable.
inline constexpr double kIdentifiability = 1e-12;

}  // namespace isasc::tol
