#include <doctest.h>

#include <cmath>
#include <random>

#include "isasc/optimizer.hpp"
#include "isasc/tolerances.hpp"
#include "test_util.hpp"

using namespace isasc;
using namespace isasc::opt;
using isasc::testing::rel_err;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Scenario make_scenario(int m, int n, std::uint64_t seed, int k = 2) {
  const auto cfg = isasc::testing::small_config(m, n, k);
  return {cfg, isasc::testing::make_channels(cfg, seed), metrics::SemanticModel::from_config(cfg)};
}

metrics::ThresholdPair vacuous() {
  metrics::ThresholdPair th;
  th.gamma_com = 0.0;
  th.gamma_eve = kInf;
  return th;
}

double j_of(const Scenario& sc, const model::PhaseProfile& v, const CMat& r) {
  const auto echo = model::cascaded_echo(sc.channels, v);
  return *metrics::sensing_j(echo.h, echo.h_dot, r);
}

// Frank-Wolfe on the concave J over {R >= 0, tr R = P} with exact line search.
double frank_wolfe_j(const CMat& h, const CMat& hd, double p, int iters) {
  const CMat a = hd.adjoint() * hd;
  const CMat c = h.adjoint() * h;
  const CMat bm = hd.adjoint() * h;
  const auto m = h.cols();
  auto j = [&](const CMat& r) {
    const double cc = (c * r).trace().real();
    return (a * r).trace().real() - std::norm((bm * r).trace()) / cc;
  };
  CMat r = CMat::Identity(m, m) * (p / static_cast<double>(m));
  for (int it = 0; it < iters; ++it) {
    const Complex b = (bm * r).trace();
    const double cc = (c * r).trace().real();
    const CMat g = a - (std::conj(b) * bm + b * bm.adjoint()) / cc + std::norm(b) / (cc * cc) * c;
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (g + g.adjoint()));
    const CVec e = es.eigenvectors().col(m - 1);
    const CMat s = p * e * e.adjoint();
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 60; ++k) {
      const double x1 = hi - kGoldenTau * (hi - lo), x2 = lo + kGoldenTau * (hi - lo);
      if (j(r + x1 * (s - r)) >= j(r + x2 * (s - r))) {
        hi = x2;
      } else {
        lo = x1;
      }
    }
    r += 0.5 * (lo + hi) * (s - r);
  }
  return j(r);
}

}  // namespace

TEST_CASE("scheme names round trip") {
  for (auto s : {Scheme::proposed, Scheme::bl1, Scheme::bl2, Scheme::bl3, Scheme::bl4}) {
    CHECK(scheme_from_string(to_string(s)) == s);
  }
  CHECK_FALSE(scheme_from_string("bl9").has_value());
}

TEST_CASE("SP1 with vacuous constraints matches a Frank-Wolfe optimum") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto sc = make_scenario(3, 4, seed);
    const auto v = model::PhaseProfile::random(4, seed);
    const auto res = solve_sp1(sc, v, vacuous(), 1.0, conic::SolverSettings{});
    REQUIRE(res.status == Status::ok);
    const auto echo = model::cascaded_echo(sc.channels, v);
    const double fw = frank_wolfe_j(echo.h, echo.h_dot, 1.0, 3000);
    CHECK(res.j_relaxed >= fw * (1 - 1e-7));
    CHECK(res.j_relaxed <= fw * (1 + 1e-3));
    CHECK(res.j_recovered >= 0.95 * res.j_relaxed);
    CHECK(res.j_recovered <= res.j_relaxed * (1 + 1e-6));
  }
}

TEST_CASE("SP1 edge cases and monotonicity") {
  const auto sc = make_scenario(4, 6, 8);
  const auto v = model::PhaseProfile::random(6, 1);
  const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 5000.0);
  conic::SolverSettings st;

  const auto zero = solve_sp1(sc, v, th, 0.0, st);
  CHECK(zero.status == Status::infeasible);
  CHECK(zero.cov.r_x.norm() == 0.0);

  const auto p1 = solve_sp1(sc, v, th, 1.0, st);
  const auto p2 = solve_sp1(sc, v, th, 2.0, st);
  REQUIRE(p1.status == Status::ok);
  REQUIRE(p2.status == Status::ok);
  CHECK(p2.j_relaxed >= p1.j_relaxed * (1 - 1e-7));

  auto harder = th;
  harder.gamma_com *= 1.5;
  const auto h = solve_sp1(sc, v, harder, 1.0, st);
  if (h.status == Status::ok) CHECK(h.j_relaxed <= p1.j_relaxed * (1 + 1e-7));

  const auto rep = conic::validate_feasibility(
      sc.channels, v, p1.cov, {th.gamma_com, th.gamma_eve, 1.0, sc.config.sigma_c2, sc.config.sigma_e2});
  CHECK(rep.feasible({th.gamma_com, th.gamma_eve, 1.0, sc.config.sigma_c2, sc.config.sigma_e2}, 1e-6));

  auto impossible = th;
  impossible.gamma_com = 1e9;
  CHECK(solve_sp1(sc, v, impossible, 1.0, st).status == Status::infeasible);
}

TEST_CASE("SP1 baseline variants") {
  const auto sc = make_scenario(4, 6, 12);
  const auto v = model::PhaseProfile::random(6, 3);
  const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 3000.0);
  conic::SolverSettings st;
  const auto full = solve_sp1(sc, v, th, 1.0, st);
  const auto bl1 = solve_sp1(sc, v, th, 1.0, st, Scheme::bl1);
  REQUIRE(full.status == Status::ok);
  REQUIRE(bl1.status == Status::ok);
  CHECK(bl1.beams.w_s.size() == 0);
  CHECK(bl1.beams.w_n.size() == 0);
  CHECK(full.j_relaxed >= bl1.j_relaxed * (1 - 1e-7));

  const auto bl2 = solve_sp1(sc, v, th, 1.0, st, Scheme::bl2);
  if (bl2.status == Status::ok) {
    CHECK(bl2.beams.total_power() <= 1.0 + tol::kPowerBudget);
    CHECK(full.j_relaxed >= bl2.j_relaxed * (1 - 1e-7));
    const auto dirs = baseline_directions(sc.channels, v, Scheme::bl2);
    const CVec u = bl2.beams.w_c[0] / bl2.beams.w_c[0].norm();
    CHECK(std::abs(std::abs(u.dot(dirs[0])) - 1.0) <= 1e-9);
  }
  const auto dirs3 = baseline_directions(sc.channels, v, Scheme::bl3);
  CHECK(dirs3.size() == 4);
  CHECK(std::abs(dirs3[0](2) - Complex(0.25, 0.0)) <= 1e-15);
}

TEST_CASE("SP1 recovery ratio over seeded instances") {
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto sc = make_scenario(4, 8, 500 + seed);
    const auto v = model::PhaseProfile::random(8, seed);
    const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 4000.0);
    const auto res = solve_sp1(sc, v, th, 1.0, conic::SolverSettings{});
    if (res.status != Status::ok) continue;
    CHECK(res.j_recovered <= res.j_relaxed * (1 + 1e-6));
    ratios.push_back(res.ratio);
  }
  REQUIRE(ratios.size() >= 6);
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[ratios.size() / 2] >= kPi / 4);
}

TEST_CASE("SP2 precomputation identities") {
  const auto sc = make_scenario(4, 6, 31);
  std::mt19937_64 rng(31);
  const auto cov = metrics::covariance_from_beamformers(isasc::testing::random_beams(4, 2, 1.0, rng));
  metrics::ThresholdPair th;
  th.gamma_com = 0.7;
  th.gamma_eve = 1.3;
  const auto noise = sc.noise();
  const auto pre = sp2_precompute(sc.channels, cov, th, noise);
  CHECK(pre.r1_pad.row(6).norm() == 0.0);
  CHECK(pre.r1_pad.col(6).norm() == 0.0);
  CHECK(pre.r2_pad.row(6).norm() == 0.0);
  CHECK(pre.d_pad(6, 6) == 0.0);
  for (const auto& c : pre.c_com) CHECK((c - c.adjoint()).norm() <= 1e-15 * c.norm());

  for (int t = 0; t < 100; ++t) {
    const auto v = model::PhaseProfile::random(6, 1000 + t);
    const CVec a = v.augmented();
    for (int k = 0; k < 2; ++k) {
      const double lifted = (a.adjoint() * pre.c_com[static_cast<std::size_t>(k)] * a)(0, 0).real();
      const CRow h = model::composite_scu_channel(sc.channels, v, k);
      const double direct = (1 + th.gamma_com) * metrics::quad_form(h, cov.w_c[static_cast<std::size_t>(k)]) -
                            th.gamma_com * metrics::quad_form(h, cov.r_x);
      CHECK(std::abs(lifted - direct) <= 1e-9 * std::abs(th.gamma_com * metrics::quad_form(h, cov.r_x)));
      const bool lifted_ok = lifted >= pre.rhs_com[static_cast<std::size_t>(k)];
      const bool sinr_ok = metrics::sinr_scu(sc.channels, v, cov, k, noise.sigma_c2) >= th.gamma_com;
      CHECK(lifted_ok == sinr_ok);

      const double le = (a.adjoint() * pre.c_eve[static_cast<std::size_t>(k)] * a)(0, 0).real();
      const bool eve_ok = metrics::sinr_eve(sc.channels, v, cov, k, noise.sigma_e2) <= th.gamma_eve;
      CHECK((le <= pre.rhs_eve[static_cast<std::size_t>(k)]) == eve_ok);
    }
  }

  // no useful power for user 0: only the interference part remains
  auto silent = cov;
  silent.w_c[0].setZero();
  const auto pz = sp2_precompute(sc.channels, silent, th, noise);
  const CMat g = model::lifted_scu_factor(sc.channels, 0);
  const CMat expect = -th.gamma_com * (g * silent.r_x * g.adjoint()).conjugate();
  CHECK(rel_err(pz.c_com[0], expect) <= 1e-12);
  Eigen::SelfAdjointEigenSolver<CMat> es(pz.c_com[0]);
  CHECK(es.eigenvalues().maxCoeff() <= 1e-12 * pz.c_com[0].norm());
}

TEST_CASE("SCA objective parts: polarization, slack monotonicity, lifting") {
  const auto sc = make_scenario(4, 6, 41);
  std::mt19937_64 rng(41);
  const auto cov = metrics::covariance_from_beamformers(isasc::testing::random_beams(4, 2, 1.0, rng));
  const auto pre = sp2_precompute(sc.channels, cov, vacuous(), sc.noise());
  for (int t = 0; t < 100; ++t) {
    // random PSD with unit diagonal
    CMat x = isasc::testing::random_psd(7, 1 + t % 4, rng);
    const RVec d = x.diagonal().real().cwiseSqrt().cwiseInverse();
    x = d.cast<Complex>().asDiagonal() * x * d.cast<Complex>().asDiagonal();
    const auto p0 = sca_objective_parts(pre, x, {0.0, 0.0});
    REQUIRE(p0.has_value());
    const auto p = sca_objective_parts(pre, x, p0->u_match);
    CHECK(std::abs(p->j1_bar + p->j2_bar - p->j_tilde) <= 1e-10 * (std::abs(p->j1_bar) + std::abs(p->j2_bar)));
    const auto bigger = sca_objective_parts(pre, x, {p0->u_match[0] * 1.1 + 1e-3, p0->u_match[1] * 1.1 + 1e-3});
    CHECK(bigger->j1_bar + bigger->j2_bar < p->j1_bar + p->j2_bar);
  }
  for (int t = 0; t < 20; ++t) {
    const auto v = model::PhaseProfile::random(6, 70 + t);
    const auto p = sca_objective_parts(pre, v.gram(), {0.0, 0.0});
    const double vec = sca_vector_objective(pre, v);
    CHECK(std::abs(p->j_tilde - vec) <= 1e-10 * std::abs(vec));
    CHECK(rel_err(pre.geometric_scale * vec, j_of(sc, v, cov.r_x)) <= 1e-10);
  }
  CHECK_FALSE(sca_objective_parts(pre, CMat::Zero(7, 7), {0.0, 0.0}).has_value());
}

TEST_CASE("SCA tangent: anchor, minorization and gradient") {
  const auto sc = make_scenario(4, 5, 43);
  std::mt19937_64 rng(43);
  const auto cov = metrics::covariance_from_beamformers(isasc::testing::random_beams(4, 2, 1.0, rng));
  double scale = 0.0;
  const auto pre = normalize_for_sca(sp2_precompute(sc.channels, cov, vacuous(), sc.noise()), scale);
  const auto v = model::PhaseProfile::random(5, 9);
  ScaState anchor;
  anchor.v_gram = v.gram();
  anchor.u = sca_objective_parts(pre, anchor.v_gram, {0.0, 0.0})->u_match;
  const double j1 = sca_objective_parts(pre, anchor.v_gram, anchor.u)->j1_bar;
  CHECK(std::abs(sca_tangent(pre, anchor, anchor.v_gram, anchor.u) - j1) <= 1e-12 * std::abs(j1));

  std::uniform_real_distribution<double> uni(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const CMat x = isasc::testing::random_psd(6, 2, rng);
    const std::array<double, 2> u{uni(rng), uni(rng)};
    const double tangent = sca_tangent(pre, anchor, x, u);
    const double exact = sca_objective_parts(pre, x, u)->j1_bar;
    CHECK(tangent <= exact + 1e-12 * std::abs(exact));
  }

  // directional derivative along a random Hermitian direction and slack direction
  CMat dir = isasc::testing::random_psd(6, 3, rng) - isasc::testing::random_psd(6, 3, rng);
  dir = 0.5 * (dir + dir.adjoint());
  const std::array<double, 2> du{0.7, -0.4};
  const double h = 1e-5;
  auto j1_at = [&](double s) {
    return sca_objective_parts(pre, anchor.v_gram + s * dir, {anchor.u[0] + s * du[0], anchor.u[1] + s * du[1]})
        ->j1_bar;
  };
  const double fd = (j1_at(h) - j1_at(-h)) / (2 * h);
  const double lin = sca_tangent(pre, anchor, anchor.v_gram + dir, {anchor.u[0] + du[0], anchor.u[1] + du[1]}) -
                     sca_tangent(pre, anchor, anchor.v_gram, anchor.u);
  CHECK(std::abs(fd - lin) <= 1e-5 * std::abs(lin));
}

TEST_CASE("SP2 surrogate is non-decreasing and N = 1 returns the input") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sc = make_scenario(4, 6, 900 + seed);
    const auto v = model::PhaseProfile::random(6, seed);
    const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 3000.0);
    conic::SolverSettings st;
    const auto sp1 = solve_sp1(sc, v, th, 1.0, st);
    if (sp1.status != Status::ok) continue;
    const auto sp2 = solve_sp2(sc, sp1.cov, th, v, st);
    CHECK(sp2.status == Status::ok);
    for (std::size_t i = 1; i < sp2.surrogate_trace.size(); ++i) {
      CHECK(sp2.surrogate_trace[i] >= sp2.surrogate_trace[i - 1] * (1 - 1e-7));
    }
    CHECK(sp2.j_final >= sp2.j_initial);
    CHECK(sp2.v.is_unit_modulus(1e-12));
  }
  const auto sc = make_scenario(4, 1, 5);
  std::mt19937_64 rng(5);
  const auto cov = metrics::covariance_from_beamformers(isasc::testing::random_beams(4, 2, 1.0, rng));
  const auto v = model::PhaseProfile::random(1, 2);
  const auto r = solve_sp2(sc, cov, vacuous(), v, conic::SolverSettings{});
  CHECK(r.v.v == v.v);
  CHECK(std::abs(r.j_final - r.j_initial) <= 1e-9 * std::max(1.0, std::abs(r.j_initial)));
}

TEST_CASE("SP2 against an exhaustive phase grid at N = 3") {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sc = make_scenario(4, 3, 300 + seed);
    std::mt19937_64 rng(seed);
    const auto cov = metrics::covariance_from_beamformers(isasc::testing::random_beams(4, 2, 1.0, rng));
    double best = 0.0;
    for (int a = 0; a < 16; ++a) {
      for (int b = 0; b < 16; ++b) {
        for (int c = 0; c < 16; ++c) {
          RVec ph(3);
          ph << a * kPi / 8, b * kPi / 8, c * kPi / 8;
          best = std::max(best, j_of(sc, model::PhaseProfile::from_phases(ph), cov.r_x));
        }
      }
    }
    const auto v0 = model::PhaseProfile::random(3, seed);
    const auto r = solve_sp2(sc, cov, vacuous(), v0, conic::SolverSettings{});
    within += r.j_final >= 0.95 * best ? 1 : 0;
  }
  CHECK(within == 20);
}

TEST_CASE("alternating optimization") {
  const auto sc = make_scenario(4, 6, 77);
  const auto th = metrics::sinr_thresholds(sc.semantic, 20000.0, 3000.0);
  conic::SolverSettings st;
  const auto v0 = model::PhaseProfile::random(6, 77);
  const auto ao = alternating_optimize(sc, th, st, v0);
  REQUIRE(ao.feasible());
  CHECK(ao.iterations <= 10);
  CHECK(ao.iterations == static_cast<int>(ao.crb_trace.size()));
  for (std::size_t i = 1; i + 1 < ao.crb_trace.size(); ++i) CHECK(ao.crb_trace[i] <= ao.crb_trace[i - 1]);
  CHECK(ao.crb == *std::min_element(ao.crb_trace.begin(), ao.crb_trace.end()));
  CHECK(std::abs(*design_crb(sc, ao.v, ao.cov) - ao.crb) <= 1e-12 * ao.crb);

  const conic::DesignConstraints d{th.gamma_com, th.gamma_eve, sc.config.p_max, sc.config.sigma_c2,
                                   sc.config.sigma_e2};
  CHECK(conic::validate_feasibility(sc.channels, ao.v, ao.cov, d).feasible(d, 1e-6));
  CHECK(ao.ssr >= th.epsilon - 1e-6 * sc.semantic.rate_scale());

  // stationarity: the first SP1 at the converged profile reproduces the CRB
  const auto again = alternating_optimize(sc, th, st, ao.v);
  CHECK(std::abs(again.crb_trace.front() - ao.crb) <= st.delta_ao * ao.crb);

  // BL4 with the optimized profile injected
  const auto bl4 = solve_baseline(Scheme::bl4, sc, th, st, ao.v);
  CHECK(std::abs(bl4.crb - ao.crb) <= st.delta_ao * ao.crb);
  CHECK(bl4.iterations == 1);

  auto impossible = th;
  impossible.gamma_com = 1e9;
  const auto bad = alternating_optimize(sc, impossible, st, v0);
  CHECK(bad.status == Status::infeasible);
  CHECK(bad.crb_trace.empty());
  CHECK_THROWS_AS(solve_baseline(Scheme::proposed, sc, th, st, v0), std::invalid_argument);
}

TEST_CASE("golden-section search on stubs") {
  const double a = 14453.125, b = 38281.25, x_star = 23000.0;
  const double delta = 1e-4;
  auto v_shape = [&](double x) { return std::abs(x - x_star) + 1.0; };
  const auto res = golden_section_minimize(v_shape, a, b, delta);
  CHECK(std::abs(res.x - x_star) <= delta * (b - a));
  CHECK_FALSE(res.fallback_used);
  CHECK_FALSE(res.non_unimodal);
  for (std::size_t r = 1; r < res.widths.size(); ++r) {
    CHECK(std::abs(res.widths[r - 1] - std::pow(kGoldenTau, static_cast<double>(r) - 1.0) * (b - a)) <=
          1e-9 * (b - a));
  }
  CHECK(res.b - res.a <= delta * (b - a));

  // infeasible shoulders: both first probes land outside the feasible window
  auto window = [&](double x) { return std::abs(x - 26000.0) < 1500.0 ? std::pow(x - 26500.0, 2) : kInf; };
  const auto w = golden_section_minimize(window, a, b, delta);
  CHECK(w.feasible);
  CHECK(w.fallback_used);
  CHECK(std::abs(w.x - 26500.0) <= 2 * delta * (b - a));

  const auto none = golden_section_minimize([](double) { return kInf; }, a, b, delta);
  CHECK_FALSE(none.feasible);

  // two separated valleys
  auto twin = [&](double x) { return std::min(std::abs(x - 16000.0) + 5.0, std::abs(x - 36000.0)); };
  const auto t = golden_section_minimize(twin, a, b, delta);
  CHECK(t.f <= 5.0 + 1e-9);

  const auto [lo, hi] = rth_interval(metrics::SemanticModel{}, 5000.0);
  CHECK(lo == 14453.125);
  CHECK(hi == 38281.25 - 5000.0);
}

TEST_CASE("golden-section search over r_th and a short Pareto sweep") {
  const auto sc = make_scenario(4, 4, 55);
  conic::SolverSettings st;
  st.delta_gss = 1e-2;
  st.ao_restarts = 1;
  const auto v0 = model::PhaseProfile::random(4, 55);
  const double ceiling = sc.semantic.ssr_ceiling();

  const auto g = golden_section_rth(sc, 5000.0, st, v0);
  REQUIRE(g.feasible);
  CHECK(g.r_th_opt > g.lower);
  CHECK(g.r_th_opt < g.upper);
  CHECK(g.best.ssr >= 5000.0 - 1e-6 * sc.semantic.rate_scale());

  const auto empty = golden_section_rth(sc, ceiling * 1.01, st, v0);
  CHECK_FALSE(empty.feasible);
  CHECK(empty.evaluations == 0);

  const std::vector<double> grid{0.0, 0.3 * ceiling, 0.6 * ceiling, 1.05 * ceiling};
  const auto pts = pareto_sweep(sc, grid, st, v0);
  REQUIRE(pts.size() == 4);
  CHECK_FALSE(pts[3].feasible);
  double prev = 0.0;
  for (const auto& p : pts) {
    if (!p.feasible) continue;
    CHECK(p.crb >= prev);
    prev = p.crb;
    CHECK(p.ssr <= ceiling);
    CHECK(p.ssr >= p.epsilon - 1e-6 * sc.semantic.rate_scale());
  }
  CHECK(pts[0].feasible);

  const auto eps = default_eps_grid(sc.semantic);
  CHECK(eps.size() == 12);
  CHECK(eps.front() == 0.0);
  CHECK(std::abs(eps.back() - 0.95 * ceiling) <= 1e-9);
}
