#include <doctest.h>

#include <cmath>
#include <random>

#include "isasc/rank_one.hpp"
#include "isasc/sdp.hpp"
#include "isasc/tolerances.hpp"
#include "test_util.hpp"

using namespace isasc;
using namespace isasc::conic;
using isasc::testing::rel_err;

namespace {

struct BeamCase {
  std::vector<CMat> blocks;
  BeamConstraints cons;
  CMat q;
};

// Rank-one blocks with SINR requirements a little below what they achieve.
BeamCase rank_one_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int m = 4, k = 2;
  auto bf = isasc::testing::random_beams(m, k, 1.0, rng);
  BeamCase c;
  c.blocks = {bf.w_c[0] * bf.w_c[0].adjoint(), bf.w_c[1] * bf.w_c[1].adjoint(), bf.w_s * bf.w_s.adjoint(),
              bf.w_n * bf.w_n.adjoint()};
  CMat r = CMat::Zero(m, m);
  for (const auto& b : c.blocks) r += b;
  c.cons.p_max = 1.0;
  for (int i = 0; i < k; ++i) {
    const CRow h = isasc::testing::random_cvec(m, rng).transpose();
    const double s = metrics::quad_form(h, c.blocks[static_cast<std::size_t>(i)]);
    const double sinr = s / (metrics::quad_form(h, r) - s + 0.01);
    c.cons.rows.push_back({h, i, 0.9 * sinr, 0.01, false});
  }
  c.q = isasc::testing::random_psd(m, 2, rng);
  return c;
}

}  // namespace

TEST_CASE("rank-one W input is recovered exactly") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = rank_one_case(seed);
    CMat r = CMat::Zero(4, 4);
    for (const auto& b : c.blocks) r += b;
    // the input covariance is the unique maximizer
    auto obj = [&](const CMat& x) { return 1.0 - (x - r).norm(); };
    const auto res = randomize_rank_one_w(c.blocks, 2, c.cons, obj, 1.0, 50, seed);
    CHECK(res.feasible);
    CHECK(std::abs(res.ratio - 1.0) <= 1e-9);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(rel_err(CMat(res.beams[i] * res.beams[i].adjoint()), c.blocks[i]) <= 1e-9);
    }
  }
}

TEST_CASE("W randomization respects the relaxation bound and the budget") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 4;
    std::vector<CMat> blocks{isasc::testing::random_psd(m, 2, rng), isasc::testing::random_psd(m, 2, rng),
                             isasc::testing::random_psd(m, 3, rng), isasc::testing::random_psd(m, 1, rng)};
    double tr = 0.0;
    for (const auto& b : blocks) tr += b.trace().real();
    for (auto& b : blocks) b /= tr;
    BeamConstraints cons;
    cons.p_max = 1.0;
    const CMat q = isasc::testing::random_psd(m, 1, rng);
    // linear objective: the relaxed value bounds every rank-one candidate with the same trace
    Eigen::SelfAdjointEigenSolver<CMat> es(q);
    const double bound = es.eigenvalues()(m - 1);
    auto obj = [&](const CMat& r) { return (q * r).trace().real(); };
    const auto res = randomize_rank_one_w(blocks, 2, cons, obj, bound, 30, 7 + trial);
    CHECK(res.feasible);
    CHECK(res.objective <= bound * (1 + 1e-12));
    double power = 0.0;
    for (const auto& b : res.beams) power += b.squaredNorm();
    CHECK(power <= cons.p_max + tol::kPowerBudget);
  }
}

TEST_CASE("W randomization reports failure with the least violating candidate") {
  auto c = rank_one_case(3);
  c.cons.rows[0].gamma *= 1e6;
  auto obj = [&](const CMat& r) { return (c.q * r).trace().real(); };
  const auto res = randomize_rank_one_w(c.blocks, 2, c.cons, obj, 1.0, 10, 1);
  CHECK_FALSE(res.feasible);
  CHECK(res.violation > 0.0);
  CHECK(res.trials_used == 70);
  CHECK(res.beams.size() == 4);
}

TEST_CASE("W randomization is deterministic per seed") {
  const auto c = rank_one_case(9);
  std::vector<CMat> blocks = c.blocks;
  blocks[2] += 0.1 * CMat::Identity(4, 4);
  auto obj = [&](const CMat& r) { return (c.q * r).trace().real(); };
  const auto a = randomize_rank_one_w(blocks, 2, c.cons, obj, 1.0, 40, 11);
  const auto b = randomize_rank_one_w(blocks, 2, c.cons, obj, 1.0, 40, 11);
  CHECK(a.objective == b.objective);
  CHECK(a.beams[0] == b.beams[0]);
}

TEST_CASE("rank-one V is recovered exactly") {
  const auto v = model::PhaseProfile::random(6, 3);
  CMat q = CMat::Zero(7, 7);
  std::mt19937_64 rng(5);
  q = isasc::testing::random_psd(7, 3, rng);
  auto obj = [&](const model::PhaseProfile& p) {
    const CVec a = p.augmented();
    return (a.adjoint() * q * a)(0, 0).real();
  };
  const auto res = randomize_rank_one_v(v.gram(), {}, obj, obj(v), 20, 1);
  CHECK(res.feasible);
  CHECK(std::abs(res.ratio - 1.0) <= 1e-9);
  CHECK((res.v.v - v.v).norm() <= 1e-9);
}

TEST_CASE("V randomization against the max-cut style relaxation bound") {
  std::mt19937_64 rng(77);
  int feasible = 0;
  double ratio_sum = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n1 = 5;
    const CMat q = isasc::testing::random_psd(n1, 2, rng) - 0.5 * isasc::testing::random_psd(n1, 1, rng);
    SdpModel m;
    const auto x = m.add_psd(n1);
    for (int i = 0; i < n1; ++i) m.fix_entry(x, i, i, 1.0);
    m.maximize(AffineExpr::re_trace(q, x));
    const auto sol = solve_sdp(m, SolverSettings{});
    REQUIRE(sol.ok());
    auto obj = [&](const model::PhaseProfile& p) {
      const CVec a = p.augmented();
      return (a.adjoint() * q * a)(0, 0).real();
    };
    const PhaseConstraint floor{CMat::Identity(n1, n1), 1.0, false};
    const auto res = randomize_rank_one_v(sol.value(x), {floor}, obj, sol.objective, 100, 100 + inst);
    CHECK(res.v.is_unit_modulus(1e-14));
    CHECK(res.objective <= sol.objective * (1 + 1e-7));
    feasible += res.feasible ? 1 : 0;
    ratio_sum += res.ratio;
  }
  MESSAGE("feasible " << feasible << "/50, mean ratio " << ratio_sum / 50);
  CHECK(feasible == 50);
}

TEST_CASE("anchor blending finds feasible phase candidates near the anchor") {
  const int n = 4;
  const auto anchor = model::PhaseProfile::random(n, 8);
  const CVec a = anchor.augmented();
  // tight requirement satisfied at the anchor only approximately by far draws
  const CMat c = a * a.adjoint();
  const double have = (a.adjoint() * c * a)(0, 0).real();
  const PhaseConstraint pc{c, 0.97 * have, false};
  CMat v = CMat::Identity(n + 1, n + 1);
  auto obj = [](const model::PhaseProfile& p) { return p.v(0).real(); };
  const auto plain = randomize_rank_one_v(v, {pc}, obj, 1.0, 20, 4);
  const auto blended = randomize_rank_one_v(v, {pc}, obj, 1.0, 20, 4, &anchor);
  CHECK(blended.feasible);
  CHECK(phase_violation(pc, blended.v.augmented()) <= tol::kCandidateFeasibility);
  CHECK(blended.trials_used <= plain.trials_used);
}

TEST_CASE("feasibility report against the metrics module") {
  const auto cfg = isasc::testing::small_config(4, 6);
  const auto ch = isasc::testing::make_channels(cfg, 21);
  std::mt19937_64 rng(21);
  const auto bf = isasc::testing::random_beams(4, 2, 0.8, rng);
  const auto cov = metrics::covariance_from_beamformers(bf);
  const auto v = model::PhaseProfile::random(6, 2);
  DesignConstraints d{0.5, 2.0, 1.0, cfg.sigma_c2, cfg.sigma_e2};
  const auto rep = validate_feasibility(ch, v, cov, d);
  double scu = -1e300, eve = -1e300;
  for (int k = 0; k < 2; ++k) {
    scu = std::max(scu, d.gamma_com - metrics::sinr_scu(ch, v, cov, k, cfg.sigma_c2));
    eve = std::max(eve, metrics::sinr_eve(ch, v, cov, k, cfg.sigma_e2) - d.gamma_eve);
  }
  CHECK(std::abs(rep.scu - scu) <= 1e-12 * std::max(1.0, std::abs(scu)));
  CHECK(std::abs(rep.eve - eve) <= 1e-12 * std::max(1.0, std::abs(eve)));
  CHECK(std::abs(rep.power - (0.8 - 1.0)) <= 1e-12);
  CHECK(rep.unit_modulus <= 1e-15);
  CHECK(rep.psd <= 1e-12);

  // power violating point
  auto big = bf;
  for (auto& w : big.w_c) w *= 2.0;
  const auto cov2 = metrics::covariance_from_beamformers(big);
  const auto rep2 = validate_feasibility(ch, v, cov2, d);
  CHECK(std::abs(rep2.power - (cov2.r_x.trace().real() - 1.0)) <= 1e-12);
  CHECK(rep2.power > 0.0);
  CHECK_FALSE(rep2.feasible(d, 1e-6));

  // feasible point: loose requirements
  DesignConstraints loose{1e-6, 1e6, 1.0, cfg.sigma_c2, cfg.sigma_e2};
  CHECK(validate_feasibility(ch, v, cov, loose).feasible(loose, 1e-6));
}

TEST_CASE("row violations are signed and relative") {
  const CRow h = CRow::Constant(2, Complex(1.0, 0.0));
  CMat w = CMat::Zero(2, 2);
  w(0, 0) = 1.0;
  const CMat r = w;
  SinrRow lower{h, 0, 1e4, 1.0, false};  // SINR = 1
  CHECK(row_violation(lower, w, r) > 0.0);
  lower.gamma = 0.5;
  CHECK(row_violation(lower, w, r) < 0.0);
  SinrRow upper{h, 0, std::numeric_limits<double>::infinity(), 1.0, true};
  CHECK(row_violation(upper, w, r) == 0.0);
}
