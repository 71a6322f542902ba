#pragma once

// Beamforming and phase-shift design: the beamformer SDP (SP1), the
// phase-shift SCA-SDP (SP2), alternating optimization between the two, the
// golden-section search over the leakage rate r_th and the epsilon sweep
// that traces the CRB / secrecy trade-off, plus the four baselines.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isasc/metrics.hpp"
#include "isasc/rank_one.hpp"
#include "isasc/sdp.hpp"
#include "isasc/system_model.hpp"

namespace isasc::opt {

/// Channels plus everything needed to score a design on them.
struct Scenario {
  model::SystemConfig config;
  model::ChannelSet channels;
  metrics::SemanticModel semantic;

  [[nodiscard]] metrics::NoisePowers noise() const { return {config.sigma_c2, config.sigma_e2}; }
};

enum class Scheme { proposed, bl1, bl2, bl3, bl4 };
const char* to_string(Scheme s);
std::optional<Scheme> scheme_from_string(const std::string& name);

enum class Status { ok, infeasible, degenerate, solver_failure, grm_failure };
const char* to_string(Status s);

// ---------------------------------------------------------------------------
// SP1

struct Sp1Result {
  Status status = Status::solver_failure;
  conic::SdpStatus sdp_status = conic::SdpStatus::failed;
  int sdp_iterations = 0;
  metrics::CovarianceSet relaxed;  // SDP solution (watts)
  metrics::BeamformerSet beams;    // rank-one recovery
  metrics::CovarianceSet cov;      // covariances of `beams`
  double j_relaxed = 0.0;
  double j_recovered = 0.0;
  double ratio = 0.0;  // j_recovered / j_relaxed
};

/// Maximizes J over the transmit covariances for fixed v. BL2 and BL3 fix
/// the beam directions and optimize powers only; BL1 drops the sensing and
/// noise streams. `grm_seed` drives the randomization.
Sp1Result solve_sp1(const Scenario& sc, const model::PhaseProfile& v, const metrics::ThresholdPair& th,
                    double p_max, const conic::SolverSettings& settings, Scheme scheme = Scheme::proposed,
                    std::uint64_t grm_seed = 1);

/// BL2 matched-filter directions (unit norm) or BL3 all-ones / M_t, in the
/// order K communication, sensing, noise.
std::vector<CVec> baseline_directions(const model::ChannelSet& ch, const model::PhaseProfile& v, Scheme scheme);

// ---------------------------------------------------------------------------
// SP2

struct Sp2Precomp {
  CMat r1;      // A^H G_r^H G_r A
  CMat r2;      // A^H conj(G_t) conj(R_x) G_t^T A
  CMat r1_pad;  // zero padded to N + 1
  CMat r2_pad;
  CMat d_pad;   // diag(0, 1, ..., N-1, 0)
  std::vector<CMat> c_com;
  std::vector<double> rhs_com;
  std::vector<CMat> c_eve;  // empty when the eavesdropper threshold is infinite
  std::vector<double> rhs_eve;
  double geometric_scale = 0.0;  // |j 2 pi (d / lambda) cos theta|^2

  [[nodiscard]] int n_irs() const { return static_cast<int>(r1.rows()); }
};

Sp2Precomp sp2_precompute(const model::ChannelSet& ch, const metrics::CovarianceSet& cov,
                          const metrics::ThresholdPair& th, const metrics::NoisePowers& noise);

/// Same precomputation with R1, R2 and D rescaled to unit size; J values
/// scale by `scale` (returned) and constraints are row-normalized.
Sp2Precomp normalize_for_sca(const Sp2Precomp& pre, double& scale);

struct ScaParts {
  double j1_bar = 0.0;   // convex part
  double j2_bar = 0.0;   // concave part
  double j_tilde = 0.0;  // J~1 + J~2 at V (no slack)
  std::array<double, 2> u_match{};  // Rayleigh ratios |t_i|^2 / q_i at V
};

/// Empty when tr(R~_i V) <= 0 for some i (degenerate echo).
std::optional<ScaParts> sca_objective_parts(const Sp2Precomp& pre, const CMat& v_gram,
                                            const std::array<double, 2>& u);

/// J~1 + J~2 for a vector profile, straight from the vector forms.
double sca_vector_objective(const Sp2Precomp& pre, const model::PhaseProfile& v);

struct ScaState {
  CMat v_gram;
  std::array<double, 2> u{};
  int r = 0;
  double surrogate = 0.0;
};

/// First-order expansion of J1_bar around the state, evaluated at (V, u).
double sca_tangent(const Sp2Precomp& pre, const ScaState& anchor, const CMat& v_gram,
                   const std::array<double, 2>& u);

struct Sp2Surrogate {
  conic::SdpModel model;
  conic::HermitianVar v;
  conic::ScalarVar u1;
  conic::ScalarVar u2;
  conic::AffineExpr tangent;  // J1_hat
};

/// Surrogate SDP: maximize J1_hat + J2_bar over V >= 0 with unit diagonal,
/// slack Schur blocks and the lifted SINR constraints.
Sp2Surrogate sca_linearize(const Sp2Precomp& pre, const ScaState& state);

struct Sp2Result {
  Status status = Status::ok;
  model::PhaseProfile v;
  std::vector<double> surrogate_trace;  // J~ at each SCA iterate (J units)
  int sca_iterations = 0;
  double j_initial = 0.0;
  double j_final = 0.0;
  bool grm_feasible = false;
  double grm_ratio = 0.0;
  bool kept_initial = false;
};

Sp2Result solve_sp2(const Scenario& sc, const metrics::CovarianceSet& cov, const metrics::ThresholdPair& th,
                    const model::PhaseProfile& v_init, const conic::SolverSettings& settings,
                    std::uint64_t grm_seed = 2);

// ---------------------------------------------------------------------------
// alternating optimization

struct AoResult {
  Status status = Status::infeasible;
  metrics::BeamformerSet beams;
  metrics::CovarianceSet cov;
  model::PhaseProfile v;
  double crb = 0.0;  // rad^2
  double j = 0.0;
  double ssr = 0.0;  // worst-case secrecy rate (suts/s)
  std::vector<double> crb_trace;
  int iterations = 0;
  double sp1_ratio = 0.0;

  [[nodiscard]] bool feasible() const { return status == Status::ok; }
};

/// CRB of a design; empty when the angle is not identifiable.
std::optional<double> design_crb(const Scenario& sc, const model::PhaseProfile& v, const metrics::CovarianceSet& cov);

AoResult alternating_optimize(const Scenario& sc, const metrics::ThresholdPair& th,
                              const conic::SolverSettings& settings, const model::PhaseProfile& v0,
                              Scheme scheme = Scheme::proposed);

/// Baselines: BL1-BL3 run the alternating loop with their SP1 variant, BL4
/// keeps v0 (a random profile) and solves SP1 once.
AoResult solve_baseline(Scheme kind, const Scenario& sc, const metrics::ThresholdPair& th,
                        const conic::SolverSettings& settings, const model::PhaseProfile& v0);

// ---------------------------------------------------------------------------
// golden-section search over r_th

inline constexpr double kGoldenTau = 0.61803398874989484820;  // (sqrt(5) - 1) / 2

struct ScalarGssResult {
  double x = 0.0;                // returned point
  double f = 0.0;
  double a = 0.0;                // final bracket
  double b = 0.0;
  int evaluations = 0;
  bool feasible = false;
  bool fallback_used = false;    // grid scan after both probes failed
  bool non_unimodal = false;     // evaluated values were not valley shaped
  std::vector<double> widths;    // bracket width after each evaluation
  std::vector<std::pair<double, double>> probes;
};

/// Minimizes f on [a, b]; +inf marks an infeasible probe. Stops once the
/// bracket is at most rel_tol times the initial width and then evaluates
/// the midpoint, returning it unless a probe was better.
ScalarGssResult golden_section_minimize(const std::function<double(double)>& f, double a, double b, double rel_tol);

/// [rate_scale A1, rate_scale A2 - epsilon]
std::pair<double, double> rth_interval(const metrics::SemanticModel& model, double epsilon);

struct GssResult {
  bool feasible = false;
  double epsilon = 0.0;
  double r_th_opt = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int evaluations = 0;
  bool fallback_used = false;
  bool non_unimodal = false;
  AoResult best;
};

/// Each probe runs the scheme's solver at thresholds (r_th, epsilon). For
/// the alternating schemes a probe starts from whichever of v0 and the
/// previous feasible probe's profile gives the better first SP1.
GssResult golden_section_rth(const Scenario& sc, double epsilon, const conic::SolverSettings& settings,
                             const model::PhaseProfile& v0, Scheme scheme = Scheme::proposed);

struct ParetoPoint {
  double epsilon = 0.0;
  double r_th_opt = 0.0;
  double crb = 0.0;
  double ssr = 0.0;
  bool feasible = false;
  bool carried = false;  // design taken from a larger epsilon
  int evaluations = 0;
  bool fallback_used = false;
  int ao_iterations = 0;
  Status status = Status::infeasible;
  model::PhaseProfile v;  // selected design, feasible points only
  metrics::CovarianceSet cov;
};

/// One golden-section search per epsilon (ascending grid). A design found
/// for a larger epsilon also meets every smaller one, so a point whose CRB
/// is beaten by a larger-epsilon design adopts that design (`carried`).
std::vector<ParetoPoint> pareto_sweep(const Scenario& sc, const std::vector<double>& eps_grid,
                                      const conic::SolverSettings& settings, const model::PhaseProfile& v0,
                                      Scheme scheme = Scheme::proposed);

/// Default epsilon grid: `points` values from 0 to 0.95 of the SSR ceiling.
std::vector<double> default_eps_grid(const metrics::SemanticModel& model, int points = 12);

}  // namespace isasc::opt
