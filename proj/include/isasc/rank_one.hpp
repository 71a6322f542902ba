#pragma once

// Gaussian randomization for rank-one recovery of relaxed covariance and
// phase Gram matrices, plus an independent feasibility check.

#include <cstdint>
#include <functional>
#include <vector>

#include "isasc/metrics.hpp"
#include "isasc/system_model.hpp"

namespace isasc::conic {

/// One SINR requirement on stream `stream` seen through row channel h:
///   lower: h W h^H >= gamma (h (R - W) h^H + noise)
///   upper: h W h^H <= gamma (h (R - W) h^H + noise)
/// An infinite gamma on an upper row is vacuous.
struct SinrRow {
  CRow h;
  int stream = 0;
  double gamma = 0.0;
  double noise = 0.0;
  bool upper = false;
};

struct BeamConstraints {
  std::vector<SinrRow> rows;
  double p_max = 1.0;
};

/// Relative violation of one row (<= 0 when satisfied).
double row_violation(const SinrRow& row, const CMat& w_stream, const CMat& r_x);
/// Largest relative violation over rows and the power budget.
double beam_violation(const BeamConstraints& cons, const std::vector<CMat>& blocks);

struct RankOneW {
  std::vector<CVec> beams;  // same order as the input blocks
  bool feasible = false;
  double objective = 0.0;
  double relaxed_objective = 0.0;
  double ratio = 0.0;
  double violation = 0.0;
  int trials_used = 0;
};

/// Objective evaluated on the transmit covariance.
using CovObjective = std::function<double(const CMat& r_x)>;

/// blocks: the first k_users entries are communication covariances, the
/// rest are sensing-type covariances (dedicated sensing, artificial noise)
/// that enter every constraint only through their sum. Retries with
/// 2x and 4x the trial count before reporting failure; on failure the
/// least-violating candidate is returned with feasible = false.
RankOneW randomize_rank_one_w(const std::vector<CMat>& blocks, int k_users, const BeamConstraints& cons,
                              const CovObjective& objective, double relaxed_objective, int trials,
                              std::uint64_t seed);

/// Quadratic requirement on the augmented phase vector:
///   lower: v~^H C v~ >= rhs,  upper: v~^H C v~ <= rhs.
struct PhaseConstraint {
  CMat c;
  double rhs = 0.0;
  bool upper = false;
};

double phase_violation(const PhaseConstraint& pc, const CVec& v_aug);

struct RankOneV {
  model::PhaseProfile v;
  bool feasible = false;
  double objective = 0.0;
  double relaxed_objective = 0.0;
  double ratio = 0.0;
  double violation = 0.0;
  int trials_used = 0;
};

using PhaseObjective = std::function<double(const model::PhaseProfile& v)>;

/// Candidates from N(0, V) projected to unit modulus and rotated so that the
/// last augmented entry equals one. With an anchor, an infeasible candidate
/// is blended toward it (weights 1/2, 1/4, ... 1/32 on the candidate) and
/// the first feasible blend is scored instead.
RankOneV randomize_rank_one_v(const CMat& v_gram, const std::vector<PhaseConstraint>& cons,
                              const PhaseObjective& objective, double relaxed_objective, int trials,
                              std::uint64_t seed, const model::PhaseProfile* anchor = nullptr);

struct DesignConstraints {
  double gamma_com = 0.0;
  double gamma_eve = 0.0;
  double p_max = 1.0;
  double sigma_c2 = 1e-12;
  double sigma_e2 = 1e-12;
};

/// Signed violations (positive = violated).
struct FeasibilityReport {
  double power = 0.0;         // tr(R_x) - P_max
  double scu = 0.0;           // max_k gamma_com - SINR_k
  double eve = 0.0;           // max_k SINR_eve,k - gamma_eve
  double unit_modulus = 0.0;  // max_n ||v_n| - 1|
  double psd = 0.0;           // max over blocks of -lambda_min

  /// Feasible when every family is within `rel_tol` of its scale.
  [[nodiscard]] bool feasible(const DesignConstraints& d, double rel_tol) const;
};

/// Evaluates the constraints through the lifted-factor route, independent
/// of the metrics module.
FeasibilityReport validate_feasibility(const model::ChannelSet& ch, const model::PhaseProfile& v,
                                       const metrics::CovarianceSet& cov, const DesignConstraints& d);

}  // namespace isasc::conic
