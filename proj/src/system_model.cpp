#include "isasc/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "isasc/tolerances.hpp"

namespace isasc::model {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

void SystemConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("SystemConfig: ") + what);
  };
  require(m_t >= 1 && m_r >= 1, "antenna counts must be >= 1");
  require(n_irs >= 1, "IRS element count must be >= 1");
  require(k_users >= 1, "user count must be >= 1");
  require(segment_length >= 1 && kappa >= 1, "segment length and kappa must be >= 1");
  require(bandwidth_hz > 0 && semantic_info > 0, "bandwidth and semantic information must be > 0");
  require(p_max > 0, "p_max must be > 0");
  require(sigma_s2 > 0 && sigma_c2 > 0 && sigma_e2 > 0, "noise powers must be > 0");
  require(spacing_ratio > 0, "element spacing must be > 0");
}

double distance(const Point2& a, const Point2& b) { return std::hypot(b.x - a.x, b.y - a.y); }

double array_angle(const Point2& from, const Point2& to) {
  const double d = distance(from, to);
  if (d <= 0) throw std::invalid_argument("array_angle: coincident points");
  return std::asin(std::clamp((to.y - from.y) / d, -1.0, 1.0));
}

SceneLayout SceneLayout::default_layout(int k_users) {
  SceneLayout layout;
  layout.users.reserve(static_cast<std::size_t>(k_users));
  for (int k = 0; k < k_users; ++k) {
    // users on a small arc around (40, 0)
    const double offset = (k - 0.5 * (k_users - 1)) * 4.0;
    layout.users.push_back({40.0 + 0.5 * offset, offset});
  }
  return layout;
}

double SceneLayout::target_doa() const { return array_angle(irs, target); }

void SceneLayout::validate(int k_users, double d0) const {
  if (static_cast<int>(users.size()) != k_users) {
    throw std::invalid_argument("SceneLayout: user count does not match configuration");
  }
  std::vector<Point2> nodes{bs, irs, eve, target};
  nodes.insert(nodes.end(), users.begin(), users.end());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (distance(nodes[i], nodes[j]) <= d0) {
        throw std::invalid_argument("SceneLayout: nodes closer than the reference distance");
      }
    }
  }
  const double theta = target_doa();
  if (!(std::abs(theta) < kPi / 2 - 1e-9)) {
    throw std::invalid_argument("SceneLayout: target DoA must lie strictly inside (-pi/2, pi/2)");
  }
}

void PathLossModel::validate() const {
  if (!(k0 > 0) || !(d0 > 0)) throw std::invalid_argument("PathLossModel: K0 and d0 must be > 0");
  if (zeta_irs < 0 || zeta_direct < 0) throw std::invalid_argument("PathLossModel: negative exponent");
  if (rician_beta_bi < 0 || rician_beta_ic < 0 || rician_beta_ie < 0) {
    throw std::invalid_argument("PathLossModel: negative Rician factor");
  }
}

double path_loss_gain(double d, double zeta, const PathLossModel& model) {
  if (d < model.d0) {
    throw std::domain_error("path_loss_gain: distance below the reference distance");
  }
  return model.k0 * std::pow(d / model.d0, -zeta);
}

PhaseProfile PhaseProfile::all_ones(int n) { return PhaseProfile(CVec::Ones(n)); }

PhaseProfile PhaseProfile::from_phases(const RVec& phases) {
  CVec v(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) v(i) = std::polar(1.0, phases(i));
  return PhaseProfile(std::move(v));
}

PhaseProfile PhaseProfile::random(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  RVec phases(n);
  for (int i = 0; i < n; ++i) phases(i) = phase(rng);
  return from_phases(phases);
}

CVec PhaseProfile::augmented() const {
  CVec out(v.size() + 1);
  out.head(v.size()) = v;
  out(v.size()) = 1.0;
  return out;
}

CMat PhaseProfile::gram() const {
  const CVec a = augmented();
  return a * a.adjoint();
}

bool PhaseProfile::is_unit_modulus(double tol) const {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(std::abs(v(i)) - 1.0) > tol) return false;
  }
  return true;
}

void PhaseProfile::check_unit_modulus() const {
  if (!is_unit_modulus(tol::kUnitModulus)) {
    throw std::invalid_argument("PhaseProfile: entries must have unit modulus");
  }
}

CVec steering_vector(double theta, int n, double spacing_ratio) {
  CVec a(n);
  const double step = 2.0 * kPi * spacing_ratio * std::sin(theta);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, step * i);
  return a;
}

CVec steering_derivative(double theta, int n, double spacing_ratio) {
  CVec a = steering_vector(theta, n, spacing_ratio);
  const double factor = 2.0 * kPi * spacing_ratio * std::cos(theta);
  for (int i = 0; i < n; ++i) a(i) *= kJ * factor * static_cast<double>(i);
  return a;
}

void ChannelSet::check_dimensions() const {
  const int n = n_irs();
  const int mt = m_t();
  auto fail = [](const char* what) {
    throw std::invalid_argument(std::string("ChannelSet: ") + what);
  };
  if (n < 1 || mt < 1 || m_r() < 1) fail("empty channel matrices");
  if (g_r.cols() != n) fail("G_r column count must equal N");
  if (h_c.size() != h_d.size() || h_d.empty()) fail("per-user channel lists must be non-empty and equal");
  for (std::size_t k = 0; k < h_d.size(); ++k) {
    if (h_d[k].size() != mt) fail("h_d,k must have M_t entries");
    if (h_c[k].size() != n) fail("h_c,k must have N entries");
  }
  if (h_e.size() != mt) fail("h_e must have M_t entries");
  if (g_e.size() != n) fail("g_e must have N entries");
}

void ChannelSet::check_dimensions(const SystemConfig& config) const {
  check_dimensions();
  if (n_irs() != config.n_irs || m_t() != config.m_t || m_r() != config.m_r ||
      k_users() != config.k_users) {
    throw std::invalid_argument("ChannelSet: dimensions do not match the configuration");
  }
}

namespace {

class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed), normal_(0.0, std::sqrt(0.5)) {}

  Complex draw() {
    const double re = normal_(rng_);
    const double im = normal_(rng_);
    return {re, im};
  }

  CMat matrix(int rows, int cols) {
    CMat m(rows, cols);
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) m(r, c) = draw();
    }
    return m;
  }

  CVec vector(int n) { return matrix(n, 1).col(0); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

template <typename M>
M rician_mix(const M& los, const M& nlos, double beta, double gain) {
  const double los_w = std::sqrt(beta / (1.0 + beta));
  const double nlos_w = std::sqrt(1.0 / (1.0 + beta));
  return std::sqrt(gain) * (los_w * los + nlos_w * nlos);
}

}  // namespace

Complex default_echo_coefficient(const SceneLayout& layout, const PathLossModel& pathloss) {
  const double d = distance(layout.irs, layout.target);
  const double one_way = path_loss_gain(d, pathloss.zeta_irs, pathloss);
  return {std::sqrt(one_way * one_way), 0.0};
}

ChannelSet synthesize_channels(const SystemConfig& config, const SceneLayout& layout,
                               const PathLossModel& pathloss, std::uint64_t seed) {
  config.validate();
  pathloss.validate();
  layout.validate(config.k_users, pathloss.d0);

  const int n = config.n_irs;
  const int mt = config.m_t;
  const int mr = config.m_r;
  const double s = config.spacing_ratio;
  GaussianSource gauss(seed);

  ChannelSet ch;
  ch.spacing_ratio = s;

  // BS-IRS link; the BS array uses half-wavelength spacing.
  const double bs_to_irs = array_angle(layout.bs, layout.irs);
  const double irs_to_bs = array_angle(layout.irs, layout.bs);
  const double gain_bi = path_loss_gain(distance(layout.bs, layout.irs), pathloss.zeta_irs, pathloss);
  const CMat gt_los = steering_vector(irs_to_bs, n, s) * steering_vector(bs_to_irs, mt, 0.5).transpose();
  ch.g_t = rician_mix<CMat>(gt_los, gauss.matrix(n, mt), pathloss.rician_beta_bi, gain_bi);
  if (mt == mr) {
    ch.g_r = ch.g_t.transpose();
  } else {
    const CMat gr_los = steering_vector(bs_to_irs, mr, 0.5) * steering_vector(irs_to_bs, n, s).transpose();
    ch.g_r = rician_mix<CMat>(gr_los, gauss.matrix(mr, n), pathloss.rician_beta_bi, gain_bi);
  }

  for (int k = 0; k < config.k_users; ++k) {
    const Point2& user = layout.users[static_cast<std::size_t>(k)];
    const double gain = path_loss_gain(distance(layout.irs, user), pathloss.zeta_irs, pathloss);
    const CVec los = steering_vector(array_angle(layout.irs, user), n, s);
    ch.h_c.push_back(rician_mix<CVec>(los, gauss.vector(n), pathloss.rician_beta_ic, gain));
  }
  {
    const double gain = path_loss_gain(distance(layout.irs, layout.eve), pathloss.zeta_irs, pathloss);
    const CVec los = steering_vector(array_angle(layout.irs, layout.eve), n, s);
    ch.g_e = rician_mix<CVec>(los, gauss.vector(n), pathloss.rician_beta_ie, gain);
  }

  // direct links are Rayleigh
  for (int k = 0; k < config.k_users; ++k) {
    const Point2& user = layout.users[static_cast<std::size_t>(k)];
    const double gain = path_loss_gain(distance(layout.bs, user), pathloss.zeta_direct, pathloss);
    ch.h_d.push_back(std::sqrt(gain) * gauss.vector(mt));
  }
  {
    const double gain = path_loss_gain(distance(layout.bs, layout.eve), pathloss.zeta_direct, pathloss);
    ch.h_e = std::sqrt(gain) * gauss.vector(mt);
  }

  ch.scene.theta = layout.target_doa();
  ch.scene.alpha = default_echo_coefficient(layout, pathloss);
  return ch;
}

namespace {

void check_user(const ChannelSet& ch, int k) {
  if (k < 0 || k >= ch.k_users()) throw std::out_of_range("user index out of range");
}

void check_profile(const ChannelSet& ch, const PhaseProfile& v) {
  if (v.size() != ch.n_irs()) throw std::invalid_argument("phase profile length must equal N");
  v.check_unit_modulus();
}

}  // namespace

CRow composite_scu_channel(const ChannelSet& ch, const PhaseProfile& v, int k) {
  check_user(ch, k);
  check_profile(ch, v);
  const auto& hc = ch.h_c[static_cast<std::size_t>(k)];
  return (hc.adjoint() * v.v.asDiagonal()) * ch.g_t + ch.h_d[static_cast<std::size_t>(k)].adjoint();
}

CRow composite_eve_channel(const ChannelSet& ch, const PhaseProfile& v) {
  check_profile(ch, v);
  return (ch.g_e.adjoint() * v.v.asDiagonal()) * ch.g_t + ch.h_e.adjoint();
}

CRow composite_target_channel(const ChannelSet& ch, const PhaseProfile& v) {
  check_profile(ch, v);
  const CVec a = steering_vector(ch.scene.theta, ch.n_irs(), ch.spacing_ratio);
  return (a.transpose() * v.v.asDiagonal()) * ch.g_t;
}

namespace {

CMat lifted_factor(const CVec& reflect, const CVec& direct, const CMat& g_t) {
  const int n = static_cast<int>(g_t.rows());
  CMat out(n + 1, g_t.cols());
  out.topRows(n) = reflect.conjugate().asDiagonal() * g_t;
  out.row(n) = direct.adjoint();
  return out;
}

}  // namespace

CMat lifted_scu_factor(const ChannelSet& ch, int k) {
  check_user(ch, k);
  return lifted_factor(ch.h_c[static_cast<std::size_t>(k)], ch.h_d[static_cast<std::size_t>(k)], ch.g_t);
}

CMat lifted_eve_factor(const ChannelSet& ch) { return lifted_factor(ch.g_e, ch.h_e, ch.g_t); }

EchoChannel cascaded_echo(const ChannelSet& ch, const PhaseProfile& v) {
  check_profile(ch, v);
  const int n = ch.n_irs();
  const double theta = ch.scene.theta;
  const CVec a = steering_vector(theta, n, ch.spacing_ratio);
  const CVec a_dot = steering_derivative(theta, n, ch.spacing_ratio);
  // Phi^T = Phi for a diagonal reflection matrix
  const CVec pa = v.v.cwiseProduct(a);
  const CVec pa_dot = v.v.cwiseProduct(a_dot);

  EchoChannel e;
  e.b = ch.g_t.transpose() * pa;
  e.c = ch.g_r * pa;
  e.b_dot = ch.g_t.transpose() * pa_dot;
  e.c_dot = ch.g_r * pa_dot;
  e.h = e.c * e.b.transpose();
  e.h_dot = e.c_dot * e.b.transpose() + e.c * e.b_dot.transpose();
  return e;
}

std::pair<CMat, CMat> cascaded_echo_lifted(const ChannelSet& ch, const PhaseProfile& v) {
  check_profile(ch, v);
  const int n = ch.n_irs();
  const double theta = ch.scene.theta;
  const CVec a = steering_vector(theta, n, ch.spacing_ratio);
  const CMat a_diag = a.asDiagonal();
  RVec idx(n);
  for (int i = 0; i < n; ++i) idx(i) = i;
  const CMat d = idx.cast<Complex>().asDiagonal();
  const CMat vvt = v.v * v.v.transpose();
  const CMat h = ch.g_r * a_diag * vvt * a_diag.transpose() * ch.g_t;
  const Complex factor = kJ * 2.0 * kPi * ch.spacing_ratio * std::cos(theta);
  const CMat h_dot =
      factor * (ch.g_r * a_diag * (d * vvt + vvt * d.transpose()) * a_diag.transpose() * ch.g_t);
  return {h, h_dot};
}

}  // namespace isasc::model
