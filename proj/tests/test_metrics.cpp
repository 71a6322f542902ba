#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace isasc;
using namespace isasc::metrics;
using isasc::testing::make_channels;
using isasc::testing::random_beams;
using isasc::testing::rel_err;
using isasc::testing::small_config;

namespace {

// Eq.-(3)-style quotient built from beam vectors one term at a time.
double sinr_from_terms(const CRow& h, const BeamformerSet& bf, int k, double noise) {
  double interference = noise;
  for (std::size_t j = 0; j < bf.w_c.size(); ++j) {
    if (static_cast<int>(j) != k) interference += std::norm((h * bf.w_c[j])(0));
  }
  interference += std::norm((h * bf.w_s)(0)) + std::norm((h * bf.w_n)(0));
  return std::norm((h * bf.w_c[static_cast<std::size_t>(k)])(0)) / interference;
}

}  // namespace

TEST_CASE("covariance assembly") {
  BeamformerSet zero;
  zero.w_c = {CVec::Zero(3), CVec::Zero(3)};
  zero.w_s = CVec::Zero(3);
  zero.w_n = CVec::Zero(3);
  CHECK(covariance_from_beamformers(zero).r_x.norm() == 0.0);

  BeamformerSet single;
  single.w_c = {CVec::Zero(3)};
  single.w_s = CVec::Unit(3, 0);
  const auto cov1 = covariance_from_beamformers(single);
  CHECK(cov1.total_power() == 1.0);
  CHECK(cov1.r_x(0, 0) == Complex(1.0, 0.0));

  std::mt19937_64 rng(4);
  const auto bf = random_beams(4, 3, 2.5, rng);
  const auto cov = covariance_from_beamformers(bf);
  CHECK(std::abs(cov.total_power() - bf.total_power()) <= 1e-12 * bf.total_power());
  CHECK(is_psd(cov.r_x, 1e-9));
  Eigen::JacobiSVD<CMat> svd(cov.w_c[1]);
  CHECK(svd.singularValues()(1) <= 1e-12 * svd.singularValues()(0));
}

TEST_CASE("SCU and EVE SINR") {
  const auto cfg = small_config(4, 6);
  const auto ch = make_channels(cfg, 5);
  const auto v = model::PhaseProfile::random(6, 1);
  std::mt19937_64 rng(9);
  const auto bf = random_beams(4, 2, 1.0, rng);
  const auto cov = covariance_from_beamformers(bf);

  for (int k = 0; k < 2; ++k) {
    const double oracle = sinr_from_terms(model::composite_scu_channel(ch, v, k), bf, k, 1e-12);
    CHECK(rel_err(sinr_scu(ch, v, cov, k, 1e-12), oracle) <= 1e-12);
    const double oracle_e = sinr_from_terms(model::composite_eve_channel(ch, v), bf, k, 1e-12);
    CHECK(rel_err(sinr_eve(ch, v, cov, k, 1e-12), oracle_e) <= 1e-12);
  }

  SUBCASE("no interference") {
    auto solo = ch;
    solo.h_d.resize(1);
    solo.h_c.resize(1);
    BeamformerSet one;
    one.w_c = {bf.w_c[0]};
    const auto c1 = covariance_from_beamformers(one);
    const CRow h = model::composite_scu_channel(solo, v, 0);
    CHECK(rel_err(sinr_scu(solo, v, c1, 0, 1e-12), std::norm((h * bf.w_c[0])(0)) / 1e-12) <= 1e-12);
  }
  SUBCASE("silent stream") {
    auto muted = bf;
    muted.w_c[0].setZero();
    const auto c0 = covariance_from_beamformers(muted);
    CHECK(sinr_scu(ch, v, c0, 0, 1e-12) == 0.0);
    CHECK(sinr_eve(ch, v, c0, 0, 1e-12) == 0.0);
  }
  SUBCASE("noise dominated by artificial noise") {
    auto solo = ch;
    solo.h_d.resize(1);
    solo.h_c.resize(1);
    BeamformerSet one;
    one.w_c = {bf.w_c[0]};
    one.w_n = bf.w_n;
    const auto c1 = covariance_from_beamformers(one);
    const CRow he = model::composite_eve_channel(solo, v);
    const double limit = quad_form(he, c1.w_c[0]) / quad_form(he, c1.w_n);
    CHECK(rel_err(sinr_eve(solo, v, c1, 0, 1e-30), limit) <= 1e-9);
  }
  CHECK_THROWS_AS(sinr_scu(ch, v, cov, 2, 1e-12), std::out_of_range);
}

TEST_CASE("FIM structure and finite-difference Jacobian oracle") {
  const auto cfg = small_config(4, 6);
  const auto ch = make_channels(cfg, 12);
  const auto v = model::PhaseProfile::random(6, 2);
  std::mt19937_64 rng(3);
  const auto bf = random_beams(4, 2, 1.0, rng);
  const auto cov = covariance_from_beamformers(bf);
  const int l = 16;
  const double s2 = 1e-12;
  const Complex alpha(0.7e-3, -0.4e-3);

  const auto fim = fim_theta(ch, v, cov.r_x, l, s2, alpha);
  CHECK((fim.f - fim.f.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fim.f);
  CHECK(es.eigenvalues()(0) >= -1e-9 * fim.f.trace());
  CHECK(fim.f(1, 2) == 0.0);
  CHECK(fim.f(1, 1) == fim.f(2, 2));

  CHECK(fim_theta(ch, v, CMat::Zero(4, 4), l, s2, alpha).f.norm() == 0.0);
  const auto scaled = fim_theta(ch, v, 3.0 * cov.r_x, l, s2, alpha);
  CHECK(rel_err(CMat(scaled.f.cast<Complex>()), CMat((3.0 * fim.f).cast<Complex>())) <= 1e-14);

  // X with sample covariance R_x: columns sqrt(L) w_i padded to L samples.
  std::vector<CVec> beams = bf.w_c;
  beams.push_back(bf.w_s);
  beams.push_back(bf.w_n);
  CMat x = CMat::Zero(4, l);
  for (std::size_t i = 0; i < beams.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = std::sqrt(double(l)) * beams[i];
  CHECK(rel_err(CMat(x * x.adjoint() / double(l)), cov.r_x) <= 1e-13);

  auto mean = [&](double theta, Complex a) {
    auto shifted = ch;
    shifted.scene.theta = theta;
    const auto e = model::cascaded_echo(shifted, v);
    CMat hx = a * e.h * x;
    return CVec(Eigen::Map<CVec>(hx.data(), hx.size()));
  };
  const double h = 1e-6;
  const double th = ch.scene.theta;
  Eigen::Matrix<Complex, Eigen::Dynamic, 3> jac(4 * l, 3);
  jac.col(0) = (mean(th + h, alpha) - mean(th - h, alpha)) / (2 * h);
  const double ha = 1e-3 * std::abs(alpha);
  jac.col(1) = (mean(th, alpha + ha) - mean(th, alpha - ha)) / (2 * ha);
  jac.col(2) = (mean(th, alpha + kJ * ha) - mean(th, alpha - kJ * ha)) / (2 * ha);
  const Eigen::Matrix3d oracle = (2.0 / s2) * (jac.adjoint() * jac).real();
  CHECK((oracle - fim.f).norm() / fim.f.norm() <= 1e-4);
}

TEST_CASE("CRB from the FIM") {
  FimMatrix diag;
  diag.f.diagonal() << 4.0, 2.0, 2.0;
  CHECK(*crb_theta_fim(diag) == doctest::Approx(0.25).epsilon(1e-15));

  FimMatrix coupled;
  coupled.f << 5.0, 1.0, -0.5, 1.0, 2.0, 0.0, -0.5, 0.0, 2.0;
  CHECK(rel_err(*crb_theta_fim(coupled), coupled.f.inverse()(0, 0)) <= 1e-10);

  FimMatrix singular;
  singular.f << 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  CHECK_FALSE(crb_theta_fim(singular).has_value());
  CHECK_FALSE(crb_theta_fim(FimMatrix{}).has_value());
}

TEST_CASE("closed-form CRB agrees with the FIM route") {
  const auto cfg = small_config(4, 6);
  const int l = cfg.block_length();
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto ch = make_channels(cfg, s);
    const auto v = model::PhaseProfile::random(6, s + 7);
    std::mt19937_64 rng(s);
    const auto cov = covariance_from_beamformers(random_beams(4, 2, 1.0, rng));
    const auto closed = crb_theta_closed(ch, v, cov.r_x, l, cfg.sigma_s2, ch.scene.alpha);
    const auto via_fim = crb_theta_fim(fim_theta(ch, v, cov.r_x, l, cfg.sigma_s2, ch.scene.alpha));
    REQUIRE(closed.has_value());
    REQUIRE(via_fim.has_value());
    const Eigen::Matrix3d f = fim_theta(ch, v, cov.r_x, l, cfg.sigma_s2, ch.scene.alpha).f;
    worst = std::max({worst, rel_err(*closed, *via_fim), rel_err(*closed, f.inverse()(0, 0))});
  }
  CHECK(worst <= 1e-10);

  const auto ch = make_channels(cfg, 77);
  const auto v = model::PhaseProfile::random(6, 1);
  std::mt19937_64 rng(8);
  const auto cov = covariance_from_beamformers(random_beams(4, 2, 1.0, rng));
  const double base = *crb_theta_closed(ch, v, cov.r_x, l, cfg.sigma_s2, ch.scene.alpha);
  CHECK(*crb_theta_closed(ch, v, 2.0 * cov.r_x, l, cfg.sigma_s2, ch.scene.alpha) == base / 2.0);
  CHECK(rel_err(*crb_theta_closed(ch, v, cov.r_x, l, cfg.sigma_s2, 2.0 * ch.scene.alpha), base / 4.0) <=
        1e-15);
  CHECK_FALSE(crb_theta_closed(ch, v, CMat::Zero(4, 4), l, cfg.sigma_s2, ch.scene.alpha).has_value());
  CHECK_FALSE(crb_theta_closed(ch, v, cov.r_x, l, cfg.sigma_s2, Complex(0.0, 0.0)).has_value());
}

TEST_CASE("logistic semantic model") {
  const SemanticModel m;
  CHECK(std::abs(semantic_similarity(m, 1e30) - 0.98) <= 1e-9);
  CHECK(std::abs(semantic_similarity(m, 1e-30) - 0.37) <= 1e-9);
  CHECK(std::abs(semantic_similarity(m, std::pow(10.0, 0.316)) - 0.675) <= 1e-9);
  CHECK(m.rate_scale() == 39062.5);
  CHECK(std::abs(semantic_rate(m, 1e30) - 38281.25) <= 1e-6);
  CHECK(std::abs(semantic_rate(m, 1e-30) - 14453.125) <= 1e-6);
  CHECK(m.ssr_ceiling() == doctest::Approx(23828.125).epsilon(1e-14));

  double prev = semantic_similarity(m, 1e-4);
  for (double g_db = -39.5; g_db < 60; g_db += 0.5) {
    const double s = semantic_similarity(m, std::pow(10.0, g_db / 10));
    CHECK(s > prev);
    CHECK(s >= m.a1);
    CHECK(s <= m.a2);
    prev = s;
  }
}

TEST_CASE("SINR threshold inversion") {
  const SemanticModel m;
  const auto mid = sinr_thresholds(m, m.rate_scale() * 0.675 - 1000.0, 1000.0);
  CHECK(std::abs(mid.gamma_com - std::pow(10.0, 0.316)) <= 1e-9);
  CHECK(std::abs(mid.gamma_com - 2.07) < 0.005);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(m.a1 * m.rate_scale() + 1.0, m.a2 * m.rate_scale() - 1.0);
  for (int i = 0; i < 100; ++i) {
    const double r = u(rng);
    const auto t = sinr_thresholds(m, r, 0.0);
    CHECK(std::abs(semantic_rate(m, t.gamma_eve) - r) <= 1e-6 * r);
    CHECK(t.gamma_com == t.gamma_eve);
  }
  CHECK_THROWS_AS(sinr_thresholds(m, m.a1 * m.rate_scale(), 10.0), std::domain_error);
  CHECK_THROWS_AS(sinr_thresholds(m, 20000.0, 20000.0), std::domain_error);
}

TEST_CASE("semantic secrecy rate") {
  const auto cfg = small_config(4, 6);
  const SemanticModel m;
  const NoisePowers noise;
  const auto v = model::PhaseProfile::random(6, 4);
  std::mt19937_64 rng(1);
  const auto bf = random_beams(4, 2, 1.0, rng);
  const auto cov = covariance_from_beamformers(bf);

  SUBCASE("symmetric eavesdropper") {
    auto ch = make_channels(cfg, 8);
    ch.h_c[0] = ch.g_e;
    ch.h_d[0] = ch.h_e;
    CHECK(ssr_per_user(ch, v, cov, m, noise)[0] == 0.0);
    CHECK(ssr_worst(ch, v, cov, m, noise) == 0.0);
  }
  SUBCASE("silent eavesdropper") {
    auto ch = make_channels(cfg, 8);
    ch.g_e.setZero();
    ch.h_e.setZero();
    double expect = 1e300;
    for (int k = 0; k < 2; ++k) {
      expect = std::min(expect, m.rate_scale() * (semantic_similarity(m, sinr_scu(ch, v, cov, k, 1e-12)) - m.a1));
    }
    CHECK(rel_err(ssr_worst(ch, v, cov, m, noise), expect) <= 1e-12);
  }
  SUBCASE("ceiling and phase invariance") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto ch = make_channels(cfg, s);
      const double ssr = ssr_worst(ch, v, cov, m, noise);
      CHECK(ssr <= m.ssr_ceiling());
      auto rotated = bf;
      const Complex rot = std::polar(1.0, 0.37 * static_cast<double>(s));
      for (auto& w : rotated.w_c) w *= rot;
      rotated.w_s *= rot;
      rotated.w_n *= rot;
      CHECK(std::abs(ssr_worst(ch, v, covariance_from_beamformers(rotated), m, noise) - ssr) <= 1e-9 * (1 + ssr));
    }
  }
}

TEST_CASE("bit-oriented comparison") {
  const auto bc = BcModel::default_lte();
  CHECK_NOTHROW(bc.validate());
  const double scale = 5e6 * 10 / (20.0 * 256);
  CHECK(bc_rate(bc, 5e6, 10, 256, std::pow(10.0, -0.8)) == 0.0);
  CHECK(bc_rate(bc, 5e6, 10, 256, 1e4) == doctest::Approx(scale * 5.5547));
  double prev = 0.0;
  int steps = 0;
  for (double g_db = -30; g_db <= 30; g_db += 0.01) {
    const double r = bc_rate(bc, 5e6, 10, 256, std::pow(10.0, g_db / 10));
    CHECK(r >= prev);
    if (r > prev) ++steps;
    prev = r;
  }
  CHECK(steps == 15);

  const auto parsed = BcModel::from_csv_text("threshold_db,efficiency\n-1.0,0.5\n# note\n3.0,1.5\n", 10.0);
  CHECK(parsed.cqi_table.size() == 2);
  CHECK(parsed.efficiency(1.0) == 0.5);
  CHECK_THROWS_AS(BcModel::from_csv_text("1,2\n0,3\n", 10.0), std::invalid_argument);

  const auto cfg = small_config(4, 6);
  const auto v = model::PhaseProfile::random(6, 4);
  std::mt19937_64 rng(1);
  const auto cov = covariance_from_beamformers(random_beams(4, 2, 1.0, rng));
  auto ch = make_channels(cfg, 8);
  auto same = ch;
  same.h_c[0] = same.g_e;
  same.h_d[0] = same.h_e;
  CHECK(bc_secrecy_per_user(bc, cfg, same, v, cov)[0] == 0.0);
  auto deaf = ch;
  deaf.g_e.setZero();
  deaf.h_e.setZero();
  const double br = bc_rate(bc, cfg.bandwidth_hz, cfg.semantic_info, cfg.segment_length,
                            sinr_scu(deaf, v, cov, 1, cfg.sigma_c2));
  CHECK(bc_secrecy_per_user(bc, cfg, deaf, v, cov)[1] == br);
}
