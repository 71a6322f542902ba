#include "isasc/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "isasc/metrics.hpp"
#include "isasc/optimizer.hpp"

namespace isasc::validation {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

model::SystemConfig config(int m, int n) {
  model::SystemConfig c;
  c.m_t = m;
  c.m_r = m;
  c.n_irs = n;
  return c;
}

opt::Scenario scenario(int m, int n, std::uint64_t seed) {
  const auto c = config(m, n);
  return {c, model::synthesize_channels(c, model::SceneLayout::default_layout(c.k_users), model::PathLossModel{}, seed),
          metrics::SemanticModel::from_config(c)};
}

CVec gaussian(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVec v(m);
  for (int i = 0; i < m; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

CMat gaussian_psd(int m, int rank, std::mt19937_64& rng) {
  CMat a(m, rank);
  for (int j = 0; j < rank; ++j) a.col(j) = gaussian(m, rng);
  return a * a.adjoint();
}

metrics::BeamformerSet beams(int m, int k, double power, std::mt19937_64& rng) {
  metrics::BeamformerSet bf;
  for (int i = 0; i < k; ++i) bf.w_c.push_back(gaussian(m, rng));
  bf.w_s = gaussian(m, rng);
  bf.w_n = gaussian(m, rng);
  const double s = std::sqrt(power / bf.total_power());
  for (auto& w : bf.w_c) w *= s;
  bf.w_s *= s;
  bf.w_n *= s;
  return bf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

OracleResult oracle(std::string name, double start, double tolerance, bool at_least = false) {
  OracleResult r;
  r.name = std::move(name);
  r.observed = start;
  r.tolerance = tolerance;
  r.at_least = at_least;
  return r;
}

OracleResult finish(OracleResult r, std::chrono::steady_clock::time_point t0) {
  r.pass = r.at_least ? r.observed >= r.tolerance : r.observed <= r.tolerance;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

metrics::ThresholdPair vacuous() {
  metrics::ThresholdPair th;
  th.gamma_com = 0.0;
  th.gamma_eve = kInf;
  return th;
}

double echo_j(const opt::Scenario& sc, const model::PhaseProfile& v, const CMat& r) {
  const auto e = model::cascaded_echo(sc.channels, v);
  return metrics::sensing_j(e.h, e.h_dot, r).value_or(0.0);
}

}  // namespace

OracleResult crb_identity(std::uint64_t seed, int instances) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("crb_closed_vs_fim", 0.0, 1e-10);
  const auto c = config(4, 6);
  const int l = c.block_length();
  for (int i = 0; i < instances; ++i) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    const auto ch = model::synthesize_channels(c, model::SceneLayout::default_layout(c.k_users), {}, s);
    const auto v = model::PhaseProfile::random(6, s + 1);
    std::mt19937_64 rng(s);
    const auto cov = metrics::covariance_from_beamformers(beams(4, 2, 1.0, rng));
    const auto closed = metrics::crb_theta_closed(ch, v, cov.r_x, l, c.sigma_s2, ch.scene.alpha);
    const Eigen::Matrix3d f = metrics::fim_theta(ch, v, cov.r_x, l, c.sigma_s2, ch.scene.alpha).f;
    if (!closed) {
      r.observed = kInf;
      break;
    }
    r.observed = std::max(r.observed, rel(*closed, f.inverse()(0, 0)));
  }
  r.note = std::to_string(instances) + " instances";
  return finish(r, t0);
}

OracleResult echo_derivative(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("echo_derivative_fd", 0.0, 1e-6);
  const auto sc = scenario(4, 6, seed);
  for (int t = 0; t < 10; ++t) {
    const auto v = model::PhaseProfile::random(6, derive_seed(seed, static_cast<std::uint64_t>(t)));
    const CMat hd = model::cascaded_echo(sc.channels, v).h_dot;
    const double h = 1e-6;
    auto shifted = sc.channels;
    shifted.scene.theta += h;
    const CMat hp = model::cascaded_echo(shifted, v).h;
    shifted.scene.theta -= 2 * h;
    const CMat hm = model::cascaded_echo(shifted, v).h;
    r.observed = std::max(r.observed, ((hp - hm) / (2 * h) - hd).norm() / hd.norm());
  }
  return finish(r, t0);
}

OracleResult fim_jacobian(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("fim_vs_fd_jacobian", 0.0, 1e-4);
  const auto sc = scenario(4, 6, seed);
  const auto& ch = sc.channels;
  const int l = 16;
  const double s2 = 1e-12;
  for (int t = 0; t < 5; ++t) {
    std::mt19937_64 rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(t)));
    const auto v = model::PhaseProfile::random(6, rng());
    const auto bf = beams(4, 2, 1.0, rng);
    const auto cov = metrics::covariance_from_beamformers(bf);
    const Complex alpha = ch.scene.alpha;
    const auto fim = metrics::fim_theta(ch, v, cov.r_x, l, s2, alpha);

    // waveform with sample covariance R_x
    std::vector<CVec> cols = bf.w_c;
    cols.push_back(bf.w_s);
    cols.push_back(bf.w_n);
    CMat x = CMat::Zero(4, l);
    for (std::size_t i = 0; i < cols.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = std::sqrt(double(l)) * cols[i];
    auto mean = [&](double theta, Complex a) {
      auto shifted = ch;
      shifted.scene.theta = theta;
      CMat hx = a * model::cascaded_echo(shifted, v).h * x;
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
    r.observed = std::max(r.observed, (oracle - fim.f).norm() / fim.f.norm());
  }
  return finish(r, t0);
}

OracleResult logistic_shape() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("logistic_asymptotes_midpoint", 0.0, 1e-9);
  const metrics::SemanticModel m;
  r.observed = std::max({std::abs(metrics::semantic_similarity(m, 1e30) - 0.98),
                         std::abs(metrics::semantic_similarity(m, 1e-30) - 0.37),
                         std::abs(metrics::semantic_similarity(m, std::pow(10.0, 0.316)) - 0.675)});
  return finish(r, t0);
}

OracleResult threshold_roundtrip(std::uint64_t seed, int samples) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("threshold_inversion_roundtrip", 0.0, 1e-6);
  const metrics::SemanticModel m;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(m.a1 * m.rate_scale() + 1.0, m.a2 * m.rate_scale() - 1.0);
  for (int i = 0; i < samples; ++i) {
    const double rate = u(rng);
    const auto t = metrics::sinr_thresholds(m, rate, 0.0);
    r.observed = std::max(r.observed, rel(metrics::semantic_rate(m, t.gamma_com), rate));
  }
  return finish(r, t0);
}

OracleResult power_scaling(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("crb_power_scaling", 0.0, 1e-14);
  const auto sc = scenario(4, 8, seed);
  std::mt19937_64 rng(seed);
  const auto cov = metrics::covariance_from_beamformers(beams(4, 2, 1.0, rng));
  const auto v = model::PhaseProfile::random(8, seed);
  const int l = sc.config.block_length();
  const double base = *metrics::crb_theta_closed(sc.channels, v, cov.r_x, l, sc.config.sigma_s2, sc.channels.scene.alpha);
  for (double c : {0.5, 2.0, 10.0}) {
    const double scaled =
        *metrics::crb_theta_closed(sc.channels, v, c * cov.r_x, l, sc.config.sigma_s2, sc.channels.scene.alpha);
    r.observed = std::max(r.observed, rel(scaled, base / c));
  }
  return finish(r, t0);
}

std::vector<OracleResult> sp1_relaxation(std::uint64_t seed, int instances) {
  const auto t0 = std::chrono::steady_clock::now();
  auto excess = oracle("sp1_recovered_le_relaxed", 0.0, 1e-6);
  auto median = oracle("sp1_median_recovery_ratio", 0.0, kPi / 4, true);
  std::vector<double> ratios;
  int attempts = 0;
  while (static_cast<int>(ratios.size()) < instances && attempts < 4 * instances) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(attempts++));
    const auto sc = scenario(4, 8, s);
    const auto v = model::PhaseProfile::random(8, s);
    const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 4000.0);
    const auto res = opt::solve_sp1(sc, v, th, sc.config.p_max, conic::SolverSettings{}, opt::Scheme::proposed, s);
    if (res.status != opt::Status::ok) continue;
    excess.observed = std::max(excess.observed, res.j_recovered / res.j_relaxed - 1.0);
    ratios.push_back(res.ratio);
  }
  if (ratios.empty()) {
    median.observed = 0.0;
  } else {
    std::sort(ratios.begin(), ratios.end());
    const auto n = ratios.size();
    median.observed = n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  }
  excess.note = median.note = std::to_string(ratios.size()) + " solved of " + std::to_string(attempts);
  if (static_cast<int>(ratios.size()) < instances) excess.observed = kInf;
  return {finish(excess, t0), finish(median, t0)};
}

namespace {

struct ScaFixture {
  opt::Scenario sc;
  opt::Sp2Precomp pre;
};

ScaFixture sca_fixture(std::uint64_t seed, bool normalize) {
  auto sc = scenario(4, 6, seed);
  std::mt19937_64 rng(seed);
  const auto cov = metrics::covariance_from_beamformers(beams(4, 2, 1.0, rng));
  auto pre = opt::sp2_precompute(sc.channels, cov, vacuous(), sc.noise());
  if (normalize) {
    double scale = 0.0;
    pre = opt::normalize_for_sca(pre, scale);
  }
  return {std::move(sc), std::move(pre)};
}

CMat unit_diagonal_psd(int n, int rank, std::mt19937_64& rng) {
  CMat x = gaussian_psd(n, rank, rng);
  const RVec d = x.diagonal().real().cwiseSqrt().cwiseInverse();
  return d.cast<Complex>().asDiagonal() * x * d.cast<Complex>().asDiagonal();
}

}  // namespace

OracleResult polarization_identity(std::uint64_t seed, int probes) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("dc_polarization_identity", 0.0, 1e-10);
  const auto fx = sca_fixture(seed, true);
  std::mt19937_64 rng(seed);
  for (int t = 0; t < probes; ++t) {
    const CMat x = unit_diagonal_psd(7, 1 + t % 4, rng);
    const auto p0 = opt::sca_objective_parts(fx.pre, x, {0.0, 0.0});
    if (!p0) continue;
    const auto p = opt::sca_objective_parts(fx.pre, x, p0->u_match);
    const double mag = std::abs(p->j1_bar) + std::abs(p->j2_bar);
    r.observed = std::max(r.observed, std::abs(p->j1_bar + p->j2_bar - p->j_tilde) / mag);
  }
  // rank-one points against the vector form
  for (int t = 0; t < 20; ++t) {
    const auto v = model::PhaseProfile::random(6, derive_seed(seed, static_cast<std::uint64_t>(t)));
    const auto p = opt::sca_objective_parts(fx.pre, v.gram(), {0.0, 0.0});
    const double vec = opt::sca_vector_objective(fx.pre, v);
    r.observed = std::max(r.observed, rel(p->j_tilde, vec));
  }
  return finish(r, t0);
}

OracleResult tangent_minorization(std::uint64_t seed, int probes) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("sca_tangent_minorizes", -kInf, 1e-12);
  const auto fx = sca_fixture(seed, true);
  std::mt19937_64 rng(seed);
  opt::ScaState anchor;
  anchor.v_gram = model::PhaseProfile::random(6, seed).gram();
  anchor.u = opt::sca_objective_parts(fx.pre, anchor.v_gram, {0.0, 0.0})->u_match;
  std::uniform_real_distribution<double> uni(0.0, 3.0);
  for (int t = 0; t < probes; ++t) {
    const CMat x = gaussian_psd(7, 1 + t % 3, rng);
    const std::array<double, 2> u{uni(rng), uni(rng)};
    const double tangent = opt::sca_tangent(fx.pre, anchor, x, u);
    const double exact = opt::sca_objective_parts(fx.pre, x, u)->j1_bar;
    r.observed = std::max(r.observed, (tangent - exact) / std::max(std::abs(exact), 1e-300));
  }
  r.note = "largest relative excess of the tangent";
  return finish(r, t0);
}

OracleResult surrogate_monotone(std::uint64_t seed, int runs) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("sca_surrogate_monotone", 0.0, 1e-7);
  int solved = 0;
  for (int i = 0; i < 4 * runs && solved < runs; ++i) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    const auto sc = scenario(4, 6, s);
    const auto v = model::PhaseProfile::random(6, s);
    const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 3000.0);
    conic::SolverSettings st;
    const auto sp1 = opt::solve_sp1(sc, v, th, sc.config.p_max, st);
    if (sp1.status != opt::Status::ok) continue;
    const auto sp2 = opt::solve_sp2(sc, sp1.cov, th, v, st);
    if (sp2.status != opt::Status::ok) continue;
    ++solved;
    const auto& tr = sp2.surrogate_trace;
    for (std::size_t k = 1; k < tr.size(); ++k) r.observed = std::max(r.observed, (tr[k - 1] - tr[k]) / std::abs(tr[k - 1]));
  }
  r.note = std::to_string(solved) + " runs";
  if (solved < runs) r.observed = kInf;
  return finish(r, t0);
}

OracleResult phase_grid(std::uint64_t seed, int runs) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("sp2_vs_phase_grid", kInf, 0.95, true);
  for (int i = 0; i < runs; ++i) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    const auto sc = scenario(4, 3, s);
    std::mt19937_64 rng(s);
    const auto cov = metrics::covariance_from_beamformers(beams(4, 2, 1.0, rng));
    double best = 0.0;
    RVec ph(3);
    for (int a = 0; a < 16; ++a) {
      for (int b = 0; b < 16; ++b) {
        for (int c = 0; c < 16; ++c) {
          ph << a * kPi / 8, b * kPi / 8, c * kPi / 8;
          best = std::max(best, echo_j(sc, model::PhaseProfile::from_phases(ph), cov.r_x));
        }
      }
    }
    const auto res = opt::solve_sp2(sc, cov, vacuous(), model::PhaseProfile::random(3, s), conic::SolverSettings{});
    r.observed = std::min(r.observed, res.j_final / best);
  }
  r.note = "worst ratio over " + std::to_string(runs) + " seeds";
  return finish(r, t0);
}

OracleResult gss_stub() {
  const auto t0 = std::chrono::steady_clock::now();
  const double delta = 1e-4;
  auto r = oracle("gss_stub_minimizer", 0.0, delta);
  const double a = 14453.125, b = 38281.25;
  for (double x_star : {15000.0, 23000.0, 30123.4, 38000.0}) {
    const auto res =
        opt::golden_section_minimize([&](double x) { return std::abs(x - x_star) + 0.1 * (x - x_star) * (x - x_star); },
                                     a, b, delta);
    r.observed = std::max(r.observed, std::abs(res.x - x_star) / (b - a));
  }
  r.note = "error / interval width";
  return finish(r, t0);
}

OracleResult rth_bounds() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = oracle("rth_interval_bounds", 0.0, 1e-12);
  const auto [lo, hi] = opt::rth_interval(metrics::SemanticModel{}, 5000.0);
  r.observed = std::max(std::abs(lo - 14453.125), std::abs(hi - (38281.25 - 5000.0)));
  return finish(r, t0);
}

std::vector<OracleResult> run_all(std::uint64_t seed) {
  std::vector<OracleResult> out{crb_identity(seed),      echo_derivative(seed), fim_jacobian(seed),
                                logistic_shape(),        threshold_roundtrip(seed), power_scaling(seed)};
  for (auto& r : sp1_relaxation(seed)) out.push_back(std::move(r));
  out.push_back(polarization_identity(seed));
  out.push_back(tangent_minorization(seed));
  out.push_back(surrogate_monotone(seed));
  out.push_back(phase_grid(seed));
  out.push_back(gss_stub());
  out.push_back(rth_bounds());
  return out;
}

}  // namespace isasc::validation
