#include "isasc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "isasc/tolerances.hpp"

namespace isasc::metrics {

double BeamformerSet::total_power() const {
  double p = w_s.squaredNorm() + w_n.squaredNorm();
  for (const auto& w : w_c) p += w.squaredNorm();
  return p;
}

CovarianceSet CovarianceSet::from_blocks(std::vector<CMat> w_c, CMat w_s, CMat w_n) {
  if (w_c.empty()) throw std::invalid_argument("CovarianceSet: at least one communication block");
  const Eigen::Index m = w_c.front().rows();
  CovarianceSet cov;
  cov.r_x = CMat::Zero(m, m);
  for (const auto& w : w_c) {
    if (w.rows() != m || w.cols() != m) throw std::invalid_argument("CovarianceSet: block size mismatch");
    cov.r_x += w;
  }
  if (w_s.size() == 0) w_s = CMat::Zero(m, m);
  if (w_n.size() == 0) w_n = CMat::Zero(m, m);
  if (w_s.rows() != m || w_n.rows() != m) throw std::invalid_argument("CovarianceSet: block size mismatch");
  cov.r_x += w_s + w_n;
  cov.w_c = std::move(w_c);
  cov.w_s = std::move(w_s);
  cov.w_n = std::move(w_n);
  return cov;
}

CMat CovarianceSet::sensing_part() const { return w_s + w_n; }

CovarianceSet covariance_from_beamformers(const BeamformerSet& bf) {
  if (bf.w_c.empty()) throw std::invalid_argument("BeamformerSet: no communication beams");
  const Eigen::Index m = bf.w_c.front().size();
  auto outer = [m](const CVec& w) -> CMat {
    if (w.size() == 0) return CMat::Zero(m, m);
    if (w.size() != m) throw std::invalid_argument("BeamformerSet: inconsistent beam length");
    return w * w.adjoint();
  };
  std::vector<CMat> wc;
  wc.reserve(bf.w_c.size());
  for (const auto& w : bf.w_c) wc.push_back(outer(w));
  return CovarianceSet::from_blocks(std::move(wc), outer(bf.w_s), outer(bf.w_n));
}

double min_eigenvalue(const CMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool is_psd(const CMat& m, double slack) {
  const double scale = std::max(std::abs(m.trace().real()), 1e-300);
  return min_eigenvalue(m) >= -slack * scale;
}

double quad_form(const CRow& h, const CMat& x) { return (h * x * h.adjoint())(0, 0).real(); }

double sinr_scu(const model::ChannelSet& ch, const model::PhaseProfile& v, const CovarianceSet& cov,
                int k, double sigma_c2) {
  if (k < 0 || k >= cov.k_users()) throw std::out_of_range("sinr_scu: user index");
  const CRow h = model::composite_scu_channel(ch, v, k);
  const double signal = quad_form(h, cov.w_c[static_cast<std::size_t>(k)]);
  const double interference = quad_form(h, cov.r_x) - signal;
  return signal / (interference + sigma_c2);
}

double sinr_eve(const model::ChannelSet& ch, const model::PhaseProfile& v, const CovarianceSet& cov,
                int k, double sigma_e2) {
  if (k < 0 || k >= cov.k_users()) throw std::out_of_range("sinr_eve: stream index");
  const CRow h = model::composite_eve_channel(ch, v);
  const double signal = quad_form(h, cov.w_c[static_cast<std::size_t>(k)]);
  const double interference = quad_form(h, cov.r_x) - signal;
  return signal / (interference + sigma_e2);
}

FimMatrix fim_from_echo(const CMat& h, const CMat& h_dot, const CMat& r_x, int block_length,
                        double sigma_s2, Complex alpha) {
  const double scale = 2.0 * block_length / sigma_s2;
  const Complex t_hh = (h * r_x * h.adjoint()).trace();
  const Complex t_dd = (h_dot * r_x * h_dot.adjoint()).trace();
  const Complex t_hd = (h * r_x * h_dot.adjoint()).trace();
  const Complex cross = std::conj(alpha) * t_hd;

  FimMatrix fim;
  fim.f(0, 0) = scale * std::norm(alpha) * t_dd.real();
  fim.f(0, 1) = scale * cross.real();
  fim.f(0, 2) = scale * (cross * kJ).real();
  fim.f(1, 0) = fim.f(0, 1);
  fim.f(2, 0) = fim.f(0, 2);
  fim.f(1, 1) = scale * t_hh.real();
  fim.f(2, 2) = scale * t_hh.real();
  return fim;
}

FimMatrix fim_theta(const model::ChannelSet& ch, const model::PhaseProfile& v, const CMat& r_x,
                    int block_length, double sigma_s2, Complex alpha) {
  const auto echo = model::cascaded_echo(ch, v);
  return fim_from_echo(echo.h, echo.h_dot, r_x, block_length, sigma_s2, alpha);
}

std::optional<double> crb_theta_fim(const FimMatrix& fim) {
  const double faa = fim.f(1, 1);
  if (!(faa > 0.0)) return std::nullopt;
  const double coupling = (fim.f(0, 1) * fim.f(0, 1) + fim.f(0, 2) * fim.f(0, 2)) / faa;
  const double schur = fim.f(0, 0) - coupling;
  if (!(schur > tol::kIdentifiability * std::abs(fim.f(0, 0)))) return std::nullopt;
  return 1.0 / schur;
}

std::optional<double> sensing_j(const CMat& h, const CMat& h_dot, const CMat& r_x) {
  const double t_hh = (h * r_x * h.adjoint()).trace().real();
  if (!(t_hh > 0.0)) return std::nullopt;
  const double t_dd = (h_dot * r_x * h_dot.adjoint()).trace().real();
  const Complex t_hd = (h * r_x * h_dot.adjoint()).trace();
  const double j = t_dd - std::norm(t_hd) / t_hh;
  if (!(j > tol::kIdentifiability * std::abs(t_dd))) return std::nullopt;
  return j;
}

double crb_from_j(double j, int block_length, double sigma_s2, Complex alpha) {
  return sigma_s2 / (2.0 * block_length * std::norm(alpha) * j);
}

double j_from_crb(double crb, int block_length, double sigma_s2, Complex alpha) {
  return sigma_s2 / (2.0 * block_length * std::norm(alpha) * crb);
}

std::optional<double> crb_theta_closed(const model::ChannelSet& ch, const model::PhaseProfile& v,
                                       const CMat& r_x, int block_length, double sigma_s2,
                                       Complex alpha) {
  if (!(std::abs(alpha) > 0.0)) return std::nullopt;
  const auto echo = model::cascaded_echo(ch, v);
  const auto j = sensing_j(echo.h, echo.h_dot, r_x);
  if (!j) return std::nullopt;
  return crb_from_j(*j, block_length, sigma_s2, alpha);
}

SemanticModel SemanticModel::from_config(const model::SystemConfig& config) {
  SemanticModel m;
  m.kappa = config.kappa;
  m.segment_length = config.segment_length;
  m.bandwidth_hz = config.bandwidth_hz;
  m.semantic_info = config.semantic_info;
  return m;
}

double SemanticModel::rate_scale() const {
  return bandwidth_hz * semantic_info / (static_cast<double>(kappa) * segment_length);
}

double SemanticModel::ssr_ceiling() const { return rate_scale() * (a2 - a1); }

void SemanticModel::validate() const {
  if (!(0.0 < a1 && a1 < a2 && a2 <= 1.0)) {
    throw std::invalid_argument("SemanticModel: need 0 < A1 < A2 <= 1");
  }
  if (!(c1 > 0.0)) throw std::invalid_argument("SemanticModel: C1 must be > 0");
  if (kappa < 1 || segment_length < 1 || !(bandwidth_hz > 0) || !(semantic_info > 0)) {
    throw std::invalid_argument("SemanticModel: invalid rate parameters");
  }
}

double semantic_similarity(const SemanticModel& model, double gamma) {
  if (!(gamma > 0.0)) return model.a1;
  if (std::isinf(gamma)) return model.a2;
  const double gamma_db = 10.0 * std::log10(gamma);
  const double e = std::exp(-model.c1 * gamma_db - model.c2);
  if (std::isinf(e)) return model.a1;
  return model.a1 + (model.a2 - model.a1) / (1.0 + e);
}

double semantic_rate(const SemanticModel& model, double gamma) {
  return model.rate_scale() * semantic_similarity(model, gamma);
}

double inverse_similarity(const SemanticModel& model, double r_tilde) {
  if (!(r_tilde > model.a1 && r_tilde < model.a2)) {
    throw std::domain_error("inverse_similarity: normalized rate outside (A1, A2)");
  }
  const double gamma_db = -(model.c2 + std::log((model.a2 - r_tilde) / (r_tilde - model.a1))) / model.c1;
  return std::pow(10.0, gamma_db / 10.0);
}

std::vector<double> ssr_per_user(const model::ChannelSet& ch, const model::PhaseProfile& v,
                                 const CovarianceSet& cov, const SemanticModel& model,
                                 const NoisePowers& noise) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cov.k_users()));
  for (int k = 0; k < cov.k_users(); ++k) {
    const double sr_com = semantic_rate(model, sinr_scu(ch, v, cov, k, noise.sigma_c2));
    const double sr_eve = semantic_rate(model, sinr_eve(ch, v, cov, k, noise.sigma_e2));
    out.push_back(std::max(0.0, sr_com - sr_eve));
  }
  return out;
}

double ssr_worst(const model::ChannelSet& ch, const model::PhaseProfile& v, const CovarianceSet& cov,
                 const SemanticModel& model, const NoisePowers& noise) {
  const auto per_user = ssr_per_user(ch, v, cov, model, noise);
  return *std::min_element(per_user.begin(), per_user.end());
}

ThresholdPair sinr_thresholds(const SemanticModel& model, double r_th, double epsilon) {
  const double scale = model.rate_scale();
  ThresholdPair t;
  t.r_th = r_th;
  t.epsilon = epsilon;
  t.gamma_com = inverse_similarity(model, (r_th + epsilon) / scale);
  t.gamma_eve = inverse_similarity(model, r_th / scale);
  return t;
}

BcModel BcModel::default_lte() {
  BcModel bc;
  bc.cqi_table = {{-6.7, 0.1523}, {-4.7, 0.2344}, {-2.3, 0.3770}, {0.2, 0.6016},  {2.4, 0.8770},
                  {4.3, 1.1758},  {5.9, 1.4766},  {8.1, 1.9141},  {10.3, 2.4063}, {11.7, 2.7305},
                  {14.1, 3.3223}, {16.3, 3.9023}, {18.7, 4.5234}, {21.0, 5.1152}, {22.7, 5.5547}};
  return bc;
}

BcModel BcModel::from_csv_text(const std::string& text, double mu) {
  BcModel bc;
  bc.mu = mu;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("CQI table: expected `threshold_db,efficiency`");
    try {
      const double th = std::stod(line.substr(0, comma));
      const double eff = std::stod(line.substr(comma + 1));
      bc.cqi_table.emplace_back(th, eff);
    } catch (const std::logic_error&) {
      if (!first) throw std::invalid_argument("CQI table: malformed row `" + line + "`");
    }
    first = false;
  }
  bc.validate();
  return bc;
}

double BcModel::efficiency(double gamma) const {
  if (!(gamma > 0.0)) return 0.0;
  const double gamma_db = 10.0 * std::log10(gamma);
  double eff = 0.0;
  for (const auto& [th, e] : cqi_table) {
    if (th <= gamma_db) eff = e;
    else break;
  }
  return eff;
}

void BcModel::validate() const {
  if (!(mu > 0)) throw std::invalid_argument("BcModel: mu must be > 0");
  if (cqi_table.empty()) throw std::invalid_argument("BcModel: empty CQI table");
  for (std::size_t i = 1; i < cqi_table.size(); ++i) {
    if (!(cqi_table[i].first > cqi_table[i - 1].first) || !(cqi_table[i].second > cqi_table[i - 1].second)) {
      throw std::invalid_argument("BcModel: CQI thresholds and efficiencies must increase strictly");
    }
  }
}

double bc_rate(const BcModel& bc, double bandwidth_hz, double semantic_info, int segment_length,
               double gamma) {
  return bandwidth_hz * semantic_info / (bc.mu * segment_length) * bc.efficiency(gamma);
}

std::vector<double> bc_secrecy_per_user(const BcModel& bc, const model::SystemConfig& config,
                                        const model::ChannelSet& ch, const model::PhaseProfile& v,
                                        const CovarianceSet& cov) {
  std::vector<double> out;
  for (int k = 0; k < cov.k_users(); ++k) {
    const double g_com = sinr_scu(ch, v, cov, k, config.sigma_c2);
    const double g_eve = sinr_eve(ch, v, cov, k, config.sigma_e2);
    const double br_com = bc_rate(bc, config.bandwidth_hz, config.semantic_info, config.segment_length, g_com);
    const double br_eve = bc_rate(bc, config.bandwidth_hz, config.semantic_info, config.segment_length, g_eve);
    out.push_back(std::max(0.0, br_com - br_eve));
  }
  return out;
}

double bc_secrecy(const BcModel& bc, const model::SystemConfig& config, const model::ChannelSet& ch,
                  const model::PhaseProfile& v, const CovarianceSet& cov) {
  const auto per_user = bc_secrecy_per_user(bc, config, ch, v, cov);
  return *std::min_element(per_user.begin(), per_user.end());
}

}  // namespace isasc::metrics
