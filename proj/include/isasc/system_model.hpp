#pragma once

// Scenario configuration, geometry, path loss, stochastic channel synthesis
// and the composite / cascaded channels derived from a phase profile.

#include <cstdint>
#include <utility>
#include <vector>

#include "isasc/types.hpp"

namespace isasc::model {

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);
double db_to_linear(double db);
double linear_to_db(double linear);

/// Table-level system parameters. Powers are linear watts; conversion from
/// dBm happens when a configuration file is ingested.
struct SystemConfig {
  int m_t = 4;
  int m_r = 4;
  int n_irs = 8;
  int k_users = 2;
  int segment_length = 256;    // L_s
  int kappa = 5;               // semantic symbols per segment
  double bandwidth_hz = 5e6;
  double semantic_info = 10.0; // suts per message
  double p_max = 1.0;          // W (30 dBm)
  double sigma_s2 = 1e-12;     // W (-90 dBm)
  double sigma_c2 = 1e-12;
  double sigma_e2 = 1e-12;
  double spacing_ratio = 0.5;  // d_IRS / lambda

  /// Semantic block length L = kappa * L_s (symbols).
  [[nodiscard]] int block_length() const { return kappa * segment_length; }

  /// Throws std::invalid_argument when a count is < 1 or a power <= 0.
  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point2& a, const Point2& b);

/// Angle of `to` as seen from a linear array at `from`, measured from the
/// array broadside. Arrays are laid out along the y axis, so
/// sin(angle) = dy / distance.
double array_angle(const Point2& from, const Point2& to);

/// Node positions in the plane (meters).
struct SceneLayout {
  Point2 bs{0.0, 0.0};
  Point2 irs{50.0, 10.0};
  std::vector<Point2> users;
  Point2 eve{45.0, -5.0};
  Point2 target{60.0, 15.0};

  /// Approximate reconstruction of the reference deployment: users are
  /// spread around (40, 0). Not ground truth coordinates.
  static SceneLayout default_layout(int k_users);

  /// DoA of the target at the IRS (radians).
  [[nodiscard]] double target_doa() const;

  /// Checks theta in (-pi/2, pi/2) and all pairwise distances > d0.
  void validate(int k_users, double d0) const;
};

struct PathLossModel {
  double k0 = 1e-3;  // gain at the reference distance (-30 dB)
  double d0 = 1.0;   // m
  double zeta_irs = 2.5;
  double zeta_direct = 3.5;
  double rician_beta_bi = 0.5;
  double rician_beta_ic = 0.5;
  double rician_beta_ie = 0.5;

  void validate() const;
};

/// K0 (d / d0)^(-zeta). Throws std::domain_error for d < d0.
double path_loss_gain(double d, double zeta, const PathLossModel& model);

struct SensingScene {
  double theta = 0.0;   // target DoA at the IRS (rad)
  Complex alpha{1.0, 0.0};
};

/// All channels of one realization. Dimensions follow SystemConfig:
/// g_t is N x M_t, g_r is M_r x N, h_d[k] and h_e are M_t, h_c[k] and g_e
/// are N.
struct ChannelSet {
  CMat g_t;
  CMat g_r;
  std::vector<CVec> h_d;
  std::vector<CVec> h_c;
  CVec h_e;
  CVec g_e;
  SensingScene scene;
  double spacing_ratio = 0.5;

  [[nodiscard]] int n_irs() const { return static_cast<int>(g_t.rows()); }
  [[nodiscard]] int m_t() const { return static_cast<int>(g_t.cols()); }
  [[nodiscard]] int m_r() const { return static_cast<int>(g_r.rows()); }
  [[nodiscard]] int k_users() const { return static_cast<int>(h_d.size()); }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void check_dimensions() const;
  void check_dimensions(const SystemConfig& config) const;
};

/// IRS reflection vector v (|v_n| = 1).
struct PhaseProfile {
  CVec v;

  PhaseProfile() = default;
  explicit PhaseProfile(CVec values) : v(std::move(values)) {}

  static PhaseProfile all_ones(int n);
  static PhaseProfile from_phases(const RVec& phases);
  /// Uniform phases in [0, 2 pi), seeded.
  static PhaseProfile random(int n, std::uint64_t seed);

  [[nodiscard]] int size() const { return static_cast<int>(v.size()); }
  /// [v; 1]
  [[nodiscard]] CVec augmented() const;
  /// [v; 1][v; 1]^H
  [[nodiscard]] CMat gram() const;
  [[nodiscard]] bool is_unit_modulus(double tol) const;
  /// Throws std::invalid_argument when some |v_n| deviates from one.
  void check_unit_modulus() const;
};

/// a(theta)_n = exp(j 2 pi s n sin(theta)), n = 0..N-1.
CVec steering_vector(double theta, int n, double spacing_ratio);

/// d a(theta) / d theta.
CVec steering_derivative(double theta, int n, double spacing_ratio);

/// Rician/Rayleigh channel synthesis. A pure function of its arguments.
ChannelSet synthesize_channels(const SystemConfig& config, const SceneLayout& layout,
                               const PathLossModel& pathloss, std::uint64_t seed);

/// Default echo coefficient: unit RCS, zero phase, round trip gain of the
/// IRS-target-IRS path.
Complex default_echo_coefficient(const SceneLayout& layout, const PathLossModel& pathloss);

/// h_c,k^H diag(v) G_t + h_d,k^H as a row vector. k is zero based.
CRow composite_scu_channel(const ChannelSet& ch, const PhaseProfile& v, int k);

/// g_e^H diag(v) G_t + h_e^H.
CRow composite_eve_channel(const ChannelSet& ch, const PhaseProfile& v);

/// Lifted factor G_hat with composite = [v; 1]^T G_hat, i.e. the rows are
/// diag(h_c,k^H) G_t followed by h_d,k^H. The reference derivation writes
/// the element-wise conjugate of this matrix.
CMat lifted_scu_factor(const ChannelSet& ch, int k);
CMat lifted_eve_factor(const ChannelSet& ch);

/// Target-path channel a(theta)^T diag(v) G_t (used for MRT sensing beams).
CRow composite_target_channel(const ChannelSet& ch, const PhaseProfile& v);

struct EchoChannel {
  CVec b;       // G_t^T Phi^T a
  CVec c;       // G_r Phi^T a
  CVec b_dot;
  CVec c_dot;
  CMat h;       // c b^T
  CMat h_dot;   // c_dot b^T + c b_dot^T
};

/// Cascaded BS-IRS-target-IRS-BS channel and its theta derivative.
EchoChannel cascaded_echo(const ChannelSet& ch, const PhaseProfile& v);

/// Same H_BB and its derivative assembled from the v-quadratic forms
/// G_r A v v^T A^T G_t and j 2 pi s cos(theta) G_r A (D v v^T + v v^T D) A^T G_t.
std::pair<CMat, CMat> cascaded_echo_lifted(const ChannelSet& ch, const PhaseProfile& v);

}  // namespace isasc::model
