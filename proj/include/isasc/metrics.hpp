#pragma once

// Closed-form performance quantities: covariances, SINRs, Fisher
// information and CRB for the target angle, the logistic semantic model and
// the bit-oriented comparison rates.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isasc/system_model.hpp"
#include "isasc/types.hpp"

namespace isasc::metrics {

struct BeamformerSet {
  std::vector<CVec> w_c;  // one per SCU
  CVec w_s;               // dedicated sensing stream, may be empty
  CVec w_n;               // artificial noise, may be empty

  [[nodiscard]] double total_power() const;
};

struct CovarianceSet {
  std::vector<CMat> w_c;
  CMat w_s;
  CMat w_n;
  CMat r_x;

  /// Builds r_x as the sum of the blocks. Empty w_s / w_n count as zero.
  static CovarianceSet from_blocks(std::vector<CMat> w_c, CMat w_s, CMat w_n);

  [[nodiscard]] int m_t() const { return static_cast<int>(r_x.rows()); }
  [[nodiscard]] int k_users() const { return static_cast<int>(w_c.size()); }
  [[nodiscard]] double total_power() const { return r_x.trace().real(); }
  /// Sum of the sensing and noise blocks.
  [[nodiscard]] CMat sensing_part() const;
};

CovarianceSet covariance_from_beamformers(const BeamformerSet& bf);

/// Smallest eigenvalue of a Hermitian matrix.
double min_eigenvalue(const CMat& m);
/// min eigenvalue >= -slack * max(trace, 1e-300).
bool is_psd(const CMat& m, double slack);

double sinr_scu(const model::ChannelSet& ch, const model::PhaseProfile& v, const CovarianceSet& cov,
                int k, double sigma_c2);

/// Eavesdropper SINR when intercepting stream k (k-independent channel).
double sinr_eve(const model::ChannelSet& ch, const model::PhaseProfile& v, const CovarianceSet& cov,
                int k, double sigma_e2);

/// Quadratic form h X h^H for a row vector h.
double quad_form(const CRow& h, const CMat& x);

/// FIM over [theta, Re alpha, Im alpha].
struct FimMatrix {
  Eigen::Matrix3d f = Eigen::Matrix3d::Zero();

  [[nodiscard]] double f_thth() const { return f(0, 0); }
  [[nodiscard]] Eigen::RowVector2d f_thal() const { return f.block<1, 2>(0, 1); }
  [[nodiscard]] Eigen::Matrix2d f_alal() const { return f.block<2, 2>(1, 1); }
};

FimMatrix fim_theta(const model::ChannelSet& ch, const model::PhaseProfile& v, const CMat& r_x,
                    int block_length, double sigma_s2, Complex alpha);

/// Same as above with the FIM assembled from an explicit echo channel.
FimMatrix fim_from_echo(const CMat& h, const CMat& h_dot, const CMat& r_x, int block_length,
                        double sigma_s2, Complex alpha);

/// First diagonal entry of the inverse FIM. Empty when theta is not
/// identifiable (Schur complement at or below the tolerance).
std::optional<double> crb_theta_fim(const FimMatrix& fim);

/// J(R) = tr(Hd R Hd^H) - |tr(H R Hd^H)|^2 / tr(H R H^H). Empty when the
/// echo energy tr(H R H^H) vanishes.
std::optional<double> sensing_j(const CMat& h, const CMat& h_dot, const CMat& r_x);

std::optional<double> crb_theta_closed(const model::ChannelSet& ch, const model::PhaseProfile& v,
                                       const CMat& r_x, int block_length, double sigma_s2,
                                       Complex alpha);

/// sigma_s^2 / (2 L |alpha|^2 J)
double crb_from_j(double j, int block_length, double sigma_s2, Complex alpha);
/// Inverse of crb_from_j.
double j_from_crb(double crb, int block_length, double sigma_s2, Complex alpha);

struct SemanticModel {
  double a1 = 0.37;
  double a2 = 0.98;
  double c1 = 0.25;
  double c2 = -0.79;
  int kappa = 5;
  int segment_length = 256;
  double bandwidth_hz = 5e6;
  double semantic_info = 10.0;

  static SemanticModel from_config(const model::SystemConfig& config);

  /// B I / (kappa L_s), suts per second.
  [[nodiscard]] double rate_scale() const;
  /// rate_scale (A2 - A1): the largest achievable secrecy rate.
  [[nodiscard]] double ssr_ceiling() const;
  void validate() const;
};

double semantic_similarity(const SemanticModel& model, double gamma);
double semantic_rate(const SemanticModel& model, double gamma);
/// Linear SINR giving the normalized rate r_tilde in (A1, A2).
double inverse_similarity(const SemanticModel& model, double r_tilde);

struct NoisePowers {
  double sigma_c2 = 1e-12;
  double sigma_e2 = 1e-12;
};

/// Per-SCU [SR_com - SR_eve]^+.
std::vector<double> ssr_per_user(const model::ChannelSet& ch, const model::PhaseProfile& v,
                                 const CovarianceSet& cov, const SemanticModel& model,
                                 const NoisePowers& noise);
double ssr_worst(const model::ChannelSet& ch, const model::PhaseProfile& v, const CovarianceSet& cov,
                 const SemanticModel& model, const NoisePowers& noise);

struct ThresholdPair {
  double gamma_com = 0.0;
  double gamma_eve = 0.0;
  double r_th = 0.0;
  double epsilon = 0.0;
};

/// Throws std::domain_error when a normalized rate falls outside (A1, A2).
ThresholdPair sinr_thresholds(const SemanticModel& model, double r_th, double epsilon);

struct BcModel {
  double mu = 20.0;
  /// (SNR threshold in dB, spectral efficiency in bits per symbol)
  std::vector<std::pair<double, double>> cqi_table;

  /// 15-entry LTE CQI table from common link-level literature.
  static BcModel default_lte();
  /// Parses rows of `threshold_db,efficiency`; '#' starts a comment and a
  /// non-numeric first line is treated as a header.
  static BcModel from_csv_text(const std::string& text, double mu);

  /// Spectral efficiency of the highest threshold not above 10 log10(gamma).
  [[nodiscard]] double efficiency(double gamma) const;
  void validate() const;
};

double bc_rate(const BcModel& bc, double bandwidth_hz, double semantic_info, int segment_length,
               double gamma);

std::vector<double> bc_secrecy_per_user(const BcModel& bc, const model::SystemConfig& config,
                                        const model::ChannelSet& ch, const model::PhaseProfile& v,
                                        const CovarianceSet& cov);
double bc_secrecy(const BcModel& bc, const model::SystemConfig& config, const model::ChannelSet& ch,
                  const model::PhaseProfile& v, const CovarianceSet& cov);

}  // namespace isasc::metrics
