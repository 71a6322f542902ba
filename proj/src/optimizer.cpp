#include "isasc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "isasc/tolerances.hpp"

namespace isasc::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CMat herm(const CMat& m) { return 0.5 * (m + m.adjoint()); }

double echo_j(const model::ChannelSet& ch, const model::PhaseProfile& v, const CMat& r_x) {
  const auto echo = model::cascaded_echo(ch, v);
  const auto j = metrics::sensing_j(echo.h, echo.h_dot, r_x);
  return j ? *j : 0.0;
}

CVec unit_or_uniform(const CVec& x, int m) {
  const double n = x.norm();
  if (n > 0) return x / n;
  return CVec::Constant(m, Complex(1.0 / std::sqrt(static_cast<double>(m)), 0.0));
}

}  // namespace

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::proposed: return "proposed";
    case Scheme::bl1: return "bl1";
    case Scheme::bl2: return "bl2";
    case Scheme::bl3: return "bl3";
    case Scheme::bl4: return "bl4";
  }
  return "?";
}

std::optional<Scheme> scheme_from_string(const std::string& name) {
  for (auto s : {Scheme::proposed, Scheme::bl1, Scheme::bl2, Scheme::bl3, Scheme::bl4}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::infeasible: return "infeasible";
    case Status::degenerate: return "degenerate";
    case Status::solver_failure: return "solver_failure";
    case Status::grm_failure: return "grm_failure";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SP1

std::vector<CVec> baseline_directions(const model::ChannelSet& ch, const model::PhaseProfile& v, Scheme scheme) {
  const int k_users = ch.k_users();
  const int m = ch.m_t();
  std::vector<CVec> dirs;
  if (scheme == Scheme::bl3) {
    dirs.assign(static_cast<std::size_t>(k_users + 2), CVec::Constant(m, Complex(1.0 / m, 0.0)));
    return dirs;
  }
  if (scheme != Scheme::bl2) throw std::invalid_argument("baseline_directions: fixed directions only for bl2/bl3");
  for (int k = 0; k < k_users; ++k) {
    dirs.push_back(unit_or_uniform(model::composite_scu_channel(ch, v, k).adjoint(), m));
  }
  dirs.push_back(unit_or_uniform(model::composite_target_channel(ch, v).adjoint(), m));
  dirs.push_back(unit_or_uniform(model::composite_eve_channel(ch, v).adjoint(), m));
  return dirs;
}

Sp1Result solve_sp1(const Scenario& sc, const model::PhaseProfile& v, const metrics::ThresholdPair& th,
                    double p_max, const conic::SolverSettings& settings, Scheme scheme, std::uint64_t grm_seed) {
  using conic::AffineExpr;
  using conic::ComplexExpr;
  const auto& ch = sc.channels;
  const int k_users = ch.k_users();
  const int m = ch.m_t();
  const auto noise = sc.noise();
  Sp1Result res;
  const bool fixed_dirs = scheme == Scheme::bl2 || scheme == Scheme::bl3;
  const int streams = scheme == Scheme::bl1 ? k_users : k_users + 2;

  auto zero_result = [&](Status s) {
    res.status = s;
    std::vector<CMat> w(static_cast<std::size_t>(k_users), CMat::Zero(m, m));
    res.relaxed = metrics::CovarianceSet::from_blocks(w, CMat(), CMat());
    res.cov = res.relaxed;
    res.beams.w_c.assign(static_cast<std::size_t>(k_users), CVec::Zero(m));
    return res;
  };
  if (!(p_max > 0)) return zero_result(th.gamma_com > 0 ? Status::infeasible : Status::degenerate);

  const auto echo = model::cascaded_echo(ch, v);
  const double nh = echo.h.norm();
  const double nd = echo.h_dot.norm();
  if (!(nh > 0) || !(nd > 0)) return zero_result(Status::degenerate);
  const CMat hn = echo.h / nh;
  const CMat hdn = echo.h_dot / nd;

  conic::SdpModel sdp;
  std::vector<conic::HermitianVar> wv;
  std::vector<conic::ScalarVar> pv;
  std::vector<CVec> dirs;
  if (fixed_dirs) {
    dirs = baseline_directions(ch, v, scheme);
    for (int i = 0; i < streams; ++i) pv.push_back(sdp.add_scalar(true));
  } else {
    for (int i = 0; i < streams; ++i) wv.push_back(sdp.add_psd(m));
  }
  auto stream_trace = [&](int i, const CMat& coef) -> ComplexExpr {
    const auto idx = static_cast<std::size_t>(i);
    if (!fixed_dirs) return ComplexExpr::trace(coef, wv[idx]);
    const Complex c = (dirs[idx].adjoint() * coef * dirs[idx])(0, 0);
    return {AffineExpr::scalar(pv[idx], c.real()), AffineExpr::scalar(pv[idx], c.imag())};
  };
  auto r_trace = [&](const CMat& coef) {
    ComplexExpr sum;
    for (int i = 0; i < streams; ++i) sum += stream_trace(i, coef);
    return sum;
  };

  // J / (P ||H_dot||^2) = tr(Hdn R Hdn^H) - S00 with [[S00, b], [b*, c]] >= 0
  const auto s = sdp.add_psd(2);
  const ComplexExpr cross = r_trace(hdn.adjoint() * hn);
  const ComplexExpr s01 = ComplexExpr::entry(s, 0, 1);
  sdp.add_equality(s01.re - cross.re, 0.0);
  sdp.add_equality(s01.im - cross.im, 0.0);
  sdp.add_equality(ComplexExpr::entry(s, 1, 1).re - r_trace(hn.adjoint() * hn).re, 0.0);
  sdp.maximize(r_trace(hdn.adjoint() * hdn).re - ComplexExpr::entry(s, 0, 0).re);

  conic::BeamConstraints cons;
  cons.p_max = p_max;
  const CRow he = model::composite_eve_channel(ch, v);
  const double ne2 = he.squaredNorm();
  for (int k = 0; k < k_users; ++k) {
    const CRow hk = model::composite_scu_channel(ch, v, k);
    const double nk2 = hk.squaredNorm();
    const double g = th.gamma_com;
    if (g > 0) {
      if (!(nk2 > 0)) return zero_result(Status::infeasible);
      const CMat q = (hk.adjoint() * hk) / nk2;
      const double sc_row = std::max(1.0, g);
      sdp.add_geq(((1.0 + g) * stream_trace(k, q).re - g * r_trace(q).re) * (1.0 / sc_row),
                  g * noise.sigma_c2 / (p_max * nk2) / sc_row);
      cons.rows.push_back({hk, k, g, noise.sigma_c2, false});
    }
    const double ge = th.gamma_eve;
    if (std::isfinite(ge) && ne2 > 0) {
      const CMat q = (he.adjoint() * he) / ne2;
      const double sc_row = std::max(1.0, ge);
      sdp.add_leq(((1.0 + ge) * stream_trace(k, q).re - ge * r_trace(q).re) * (1.0 / sc_row),
                  ge * noise.sigma_e2 / (p_max * ne2) / sc_row);
      cons.rows.push_back({he, k, ge, noise.sigma_e2, true});
    }
  }
  // fixed-direction baselines budget the stream powers themselves
  AffineExpr power;
  for (int i = 0; i < streams; ++i) {
    power += fixed_dirs ? AffineExpr::scalar(pv[static_cast<std::size_t>(i)])
                        : stream_trace(i, CMat::Identity(m, m)).re;
  }
  sdp.add_leq(power, 1.0);

  const auto sol = conic::solve_sdp(sdp, settings);
  res.sdp_status = sol.status;
  res.sdp_iterations = sol.iterations;
  if (sol.status == conic::SdpStatus::infeasible) return zero_result(Status::infeasible);
  if (!sol.ok()) return zero_result(Status::solver_failure);

  std::vector<CMat> blocks;
  for (int i = 0; i < streams; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (fixed_dirs) {
      blocks.push_back(p_max * std::max(sol.value(pv[idx]), 0.0) * dirs[idx] * dirs[idx].adjoint());
    } else {
      blocks.push_back(p_max * herm(sol.value(wv[idx])));
    }
  }
  auto split = [&](const std::vector<CMat>& b) {
    std::vector<CMat> wc(b.begin(), b.begin() + k_users);
    if (streams == k_users) return metrics::CovarianceSet::from_blocks(wc, CMat(), CMat());
    return metrics::CovarianceSet::from_blocks(wc, b[static_cast<std::size_t>(k_users)],
                                               b[static_cast<std::size_t>(k_users + 1)]);
  };
  res.relaxed = split(blocks);
  auto objective = [&](const CMat& r_x) {
    const auto j = metrics::sensing_j(echo.h, echo.h_dot, r_x);
    return j ? *j : 0.0;
  };
  res.j_relaxed = objective(res.relaxed.r_x);

  std::vector<CVec> beams;
  bool feasible = false;
  if (fixed_dirs) {
    for (int i = 0; i < streams; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      beams.push_back(std::sqrt(p_max * std::max(sol.value(pv[idx]), 0.0)) * dirs[idx]);
    }
    std::vector<CMat> cov;
    for (const auto& b : beams) cov.push_back(b * b.adjoint());
    feasible = conic::beam_violation(cons, cov) <= tol::kCandidateFeasibility;
  } else {
    const auto rr = conic::randomize_rank_one_w(blocks, k_users, cons, objective, res.j_relaxed,
                                                settings.grm_trials, grm_seed);
    beams = rr.beams;
    feasible = rr.feasible;
  }
  res.beams.w_c.assign(beams.begin(), beams.begin() + k_users);
  if (streams > k_users) {
    res.beams.w_s = beams[static_cast<std::size_t>(k_users)];
    res.beams.w_n = beams[static_cast<std::size_t>(k_users + 1)];
  }
  res.cov = metrics::covariance_from_beamformers(res.beams);
  res.j_recovered = objective(res.cov.r_x);
  res.ratio = res.j_relaxed > 0 ? res.j_recovered / res.j_relaxed : 0.0;
  res.status = feasible ? Status::ok : Status::grm_failure;
  return res;
}

// ---------------------------------------------------------------------------
// SP2

Sp2Precomp sp2_precompute(const model::ChannelSet& ch, const metrics::CovarianceSet& cov,
                          const metrics::ThresholdPair& th, const metrics::NoisePowers& noise) {
  const int n = ch.n_irs();
  const CVec a = model::steering_vector(ch.scene.theta, n, ch.spacing_ratio);
  Sp2Precomp pre;
  const CMat gr_a = ch.g_r * a.asDiagonal();
  const CMat gt_a = ch.g_t.transpose() * a.asDiagonal();
  pre.r1 = herm(gr_a.adjoint() * gr_a);
  pre.r2 = herm(gt_a.adjoint() * cov.r_x.conjugate() * gt_a);
  pre.r1_pad = CMat::Zero(n + 1, n + 1);
  pre.r2_pad = CMat::Zero(n + 1, n + 1);
  pre.r1_pad.topLeftCorner(n, n) = pre.r1;
  pre.r2_pad.topLeftCorner(n, n) = pre.r2;
  pre.d_pad = CMat::Zero(n + 1, n + 1);
  for (int i = 0; i < n; ++i) pre.d_pad(i, i) = static_cast<double>(i);
  const double kp = 2.0 * kPi * ch.spacing_ratio * std::cos(ch.scene.theta);
  pre.geometric_scale = kp * kp;

  const double g = th.gamma_com;
  const double ge = th.gamma_eve;
  const CMat ghat_e = model::lifted_eve_factor(ch);
  for (int k = 0; k < cov.k_users(); ++k) {
    const CMat& wk = cov.w_c[static_cast<std::size_t>(k)];
    if (g > 0) {
      const CMat ghat = model::lifted_scu_factor(ch, k);
      pre.c_com.push_back(herm((ghat * ((1.0 + g) * wk - g * cov.r_x) * ghat.adjoint()).conjugate()));
      pre.rhs_com.push_back(g * noise.sigma_c2);
    }
    if (std::isfinite(ge)) {
      pre.c_eve.push_back(herm((ghat_e * ((1.0 + ge) * wk - ge * cov.r_x) * ghat_e.adjoint()).conjugate()));
      pre.rhs_eve.push_back(ge * noise.sigma_e2);
    }
  }
  return pre;
}

Sp2Precomp normalize_for_sca(const Sp2Precomp& pre, double& scale) {
  Sp2Precomp out = pre;
  const double n1 = pre.r1.norm();
  const double n2 = pre.r2.norm();
  const double dsc = std::max(1.0, static_cast<double>(pre.n_irs() - 1));
  scale = n1 * n2 * dsc * dsc;
  if (!(n1 > 0) || !(n2 > 0)) {
    scale = 0.0;
    return out;
  }
  out.r1 /= n1;
  out.r2 /= n2;
  out.r1_pad /= n1;
  out.r2_pad /= n2;
  out.d_pad /= dsc;
  auto norm_rows = [](std::vector<CMat>& c, std::vector<double>& rhs) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double s = std::max(c[i].norm(), 1e-300);
      c[i] /= s;
      rhs[i] /= s;
    }
  };
  norm_rows(out.c_com, out.rhs_com);
  norm_rows(out.c_eve, out.rhs_eve);
  return out;
}

namespace {

struct TraceTerms {
  double a1, a2, b1, b2;
  Complex t1, t2;
};

TraceTerms trace_terms(const Sp2Precomp& pre, const CMat& v) {
  const CMat& d = pre.d_pad;
  auto tr = [&](const CMat& c) { return (c.cwiseProduct(v.transpose())).sum(); };
  return {tr(pre.r1_pad).real(),
          tr(pre.r2_pad).real(),
          tr(d * pre.r1_pad * d).real(),
          tr(d * pre.r2_pad * d).real(),
          tr(d * pre.r1_pad),
          tr(d * pre.r2_pad)};
}

std::array<double, 4> f_terms(const TraceTerms& t, const std::array<double, 2>& u) {
  return {t.a2 + t.b1, t.a1 + t.b2, t.a2 - u[0], t.a1 - u[1]};
}

std::array<double, 4> e_terms(const TraceTerms& t, const std::array<double, 2>& u) {
  return {t.a2 - t.b1, t.a1 - t.b2, t.a2 + u[0], t.a1 + u[1]};
}

}  // namespace

std::optional<ScaParts> sca_objective_parts(const Sp2Precomp& pre, const CMat& v_gram,
                                            const std::array<double, 2>& u) {
  const auto t = trace_terms(pre, v_gram);
  if (!(t.a1 > 0) || !(t.a2 > 0)) return std::nullopt;
  ScaParts p;
  for (double f : f_terms(t, u)) p.j1_bar += 0.25 * f * f;
  for (double e : e_terms(t, u)) p.j2_bar -= 0.25 * e * e;
  p.u_match = {std::norm(t.t1) / t.a1, std::norm(t.t2) / t.a2};
  p.j_tilde = t.a2 * (t.b1 - p.u_match[0]) + t.a1 * (t.b2 - p.u_match[1]);
  return p;
}

double sca_vector_objective(const Sp2Precomp& pre, const model::PhaseProfile& v) {
  const CVec& x = v.v;
  const CVec dx = pre.d_pad.topLeftCorner(x.size(), x.size()) * x;
  const double q1 = (x.adjoint() * pre.r1 * x)(0, 0).real();
  const double q2 = (x.adjoint() * pre.r2 * x)(0, 0).real();
  if (!(q1 > 0) || !(q2 > 0)) return 0.0;
  const double s1 = (dx.adjoint() * pre.r1 * dx)(0, 0).real();
  const double s2 = (dx.adjoint() * pre.r2 * dx)(0, 0).real();
  const double t1 = std::norm((dx.adjoint() * pre.r1 * x)(0, 0));
  const double t2 = std::norm((dx.adjoint() * pre.r2 * x)(0, 0));
  return q2 * (s1 - t1 / q1) + q1 * (s2 - t2 / q2);
}

double sca_tangent(const Sp2Precomp& pre, const ScaState& anchor, const CMat& v_gram,
                   const std::array<double, 2>& u) {
  const auto fr = f_terms(trace_terms(pre, anchor.v_gram), anchor.u);
  const auto f = f_terms(trace_terms(pre, v_gram), u);
  double out = 0.0;
  for (int j = 0; j < 4; ++j) out += 0.5 * fr[j] * f[j] - 0.25 * fr[j] * fr[j];
  return out;
}

Sp2Surrogate sca_linearize(const Sp2Precomp& pre, const ScaState& state) {
  using conic::AffineExpr;
  using conic::ComplexExpr;
  const int n1 = pre.n_irs() + 1;
  Sp2Surrogate sur;
  auto& m = sur.model;
  sur.v = m.add_psd(n1);
  for (int i = 0; i < n1; ++i) m.fix_entry(sur.v, i, i, 1.0);
  sur.u1 = m.add_scalar(true);
  sur.u2 = m.add_scalar(true);

  const CMat& d = pre.d_pad;
  const AffineExpr a1 = AffineExpr::re_trace(pre.r1_pad, sur.v);
  const AffineExpr a2 = AffineExpr::re_trace(pre.r2_pad, sur.v);
  const AffineExpr b1 = AffineExpr::re_trace(d * pre.r1_pad * d, sur.v);
  const AffineExpr b2 = AffineExpr::re_trace(d * pre.r2_pad * d, sur.v);
  const ComplexExpr t1 = ComplexExpr::trace(d * pre.r1_pad, sur.v);
  const ComplexExpr t2 = ComplexExpr::trace(d * pre.r2_pad, sur.v);
  const AffineExpr u1 = AffineExpr::scalar(sur.u1);
  const AffineExpr u2 = AffineExpr::scalar(sur.u2);

  m.add_lmi({{u1, t1}, {t1.conj(), a1}});
  m.add_lmi({{u2, t2}, {t2.conj(), a2}});

  const std::array<AffineExpr, 4> f{a2 + b1, a1 + b2, a2 - u1, a1 - u2};
  const std::array<AffineExpr, 4> e{a2 - b1, a1 - b2, a2 + u1, a1 + u2};
  const auto fr = f_terms(trace_terms(pre, state.v_gram), state.u);
  AffineExpr obj;
  for (int j = 0; j < 4; ++j) {
    sur.tangent += 0.5 * fr[j] * f[j];
    sur.tangent += AffineExpr(-0.25 * fr[j] * fr[j]);
  }
  obj += sur.tangent;
  for (int j = 0; j < 4; ++j) {
    const auto sj = m.add_scalar(true);
    m.add_lmi({{AffineExpr::scalar(sj), e[j]}, {e[j], AffineExpr(1.0)}});
    obj -= AffineExpr::scalar(sj, 0.25);
  }
  m.maximize(obj);

  for (std::size_t i = 0; i < pre.c_com.size(); ++i) {
    m.add_geq(AffineExpr::re_trace(pre.c_com[i], sur.v), pre.rhs_com[i]);
  }
  for (std::size_t i = 0; i < pre.c_eve.size(); ++i) {
    m.add_leq(AffineExpr::re_trace(pre.c_eve[i], sur.v), pre.rhs_eve[i]);
  }
  return sur;
}

namespace {

// Element-wise phase ascent on a 64-point grid, keeping feasibility.
void polish_phases(model::PhaseProfile& v, double& j, const std::function<double(const model::PhaseProfile&)>& f,
                   const std::function<bool(const model::PhaseProfile&)>& feasible) {
  constexpr int kGrid = 64;
  for (int sweep = 0; sweep < 5; ++sweep) {
    const double start = j;
    for (int n = 0; n < v.size(); ++n) {
      model::PhaseProfile best = v;
      for (int g = 0; g < kGrid; ++g) {
        model::PhaseProfile trial = v;
        trial.v(n) = std::polar(1.0, 2.0 * kPi * g / kGrid);
        const double jt = f(trial);
        if (jt > j && feasible(trial)) {
          j = jt;
          best = trial;
        }
      }
      v = best;
    }
    if (j - start <= 1e-6 * std::abs(start)) break;
  }
}

}  // namespace

Sp2Result solve_sp2(const Scenario& sc, const metrics::CovarianceSet& cov, const metrics::ThresholdPair& th,
                    const model::PhaseProfile& v_init, const conic::SolverSettings& settings,
                    std::uint64_t grm_seed) {
  const auto& ch = sc.channels;
  Sp2Result res;
  res.v = v_init;
  auto objective = [&](const model::PhaseProfile& p) { return echo_j(ch, p, cov.r_x); };
  res.j_initial = objective(v_init);
  res.j_final = res.j_initial;
  res.kept_initial = true;
  if (ch.n_irs() <= 1) return res;

  double scale = 0.0;
  const Sp2Precomp pre = normalize_for_sca(sp2_precompute(ch, cov, th, sc.noise()), scale);
  if (!(scale > 0)) {
    res.status = Status::degenerate;
    return res;
  }
  const double to_j = scale * pre.geometric_scale;

  // SCA from a lifted starting point; empty on a degenerate start
  auto run_sca = [&](const CMat& start, std::vector<double>& trace, int& iters) -> std::optional<ScaState> {
    const auto p0 = sca_objective_parts(pre, start, {0.0, 0.0});
    if (!p0) return std::nullopt;
    ScaState state{start, p0->u_match, 0, p0->j_tilde};
    trace.push_back(to_j * state.surrogate);
    for (int r = 1; r <= settings.n_sca; ++r) {
      const auto sur = sca_linearize(pre, state);
      const auto sol = conic::solve_sdp(sur.model, settings);
      if (!sol.ok()) {
        if (r == 1) return std::nullopt;
        break;
      }
      const CMat vn = herm(sol.value(sur.v));
      const auto parts = sca_objective_parts(pre, vn, {0.0, 0.0});
      if (!parts) break;
      const double prev = state.surrogate;
      state = {vn, parts->u_match, r, parts->j_tilde};
      trace.push_back(to_j * state.surrogate);
      iters = r;
      if ((state.surrogate - prev) <= 1e-6 * std::abs(prev)) break;
    }
    return state;
  };

  const auto first = run_sca(v_init.gram(), res.surrogate_trace, res.sca_iterations);
  if (!first) {
    res.status = sca_objective_parts(pre, v_init.gram(), {0.0, 0.0}) ? Status::solver_failure : Status::degenerate;
    return res;
  }
  const ScaState state = *first;

  std::vector<conic::PhaseConstraint> cons;
  for (std::size_t i = 0; i < pre.c_com.size(); ++i) cons.push_back({pre.c_com[i], pre.rhs_com[i], false});
  for (std::size_t i = 0; i < pre.c_eve.size(); ++i) cons.push_back({pre.c_eve[i], pre.rhs_eve[i], true});
  const auto rr = conic::randomize_rank_one_v(state.v_gram, cons, objective, to_j * state.surrogate,
                                              settings.grm_trials, grm_seed, &v_init);
  res.grm_feasible = rr.feasible;
  res.grm_ratio = rr.ratio;
  auto feasible = [&](const model::PhaseProfile& p) {
    const CVec a = p.augmented();
    return std::all_of(cons.begin(), cons.end(), [&](const conic::PhaseConstraint& c) {
      return conic::phase_violation(c, a) <= tol::kCandidateFeasibility;
    });
  };
  // polish the randomized candidate and the incumbent, keep the better
  std::vector<std::pair<model::PhaseProfile, double>> starts;
  if (rr.feasible) starts.emplace_back(rr.v, rr.objective);
  if (feasible(v_init)) starts.emplace_back(v_init, res.j_initial);
  for (auto& [cand, j_cand] : starts) {
    polish_phases(cand, j_cand, objective, feasible);
    if (j_cand > res.j_final) {
      res.v = cand;
      res.j_final = j_cand;
      res.kept_initial = false;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// alternating optimization

std::optional<double> design_crb(const Scenario& sc, const model::PhaseProfile& v,
                                 const metrics::CovarianceSet& cov) {
  return metrics::crb_theta_closed(sc.channels, v, cov.r_x, sc.config.block_length(), sc.config.sigma_s2,
                                   sc.channels.scene.alpha);
}

AoResult alternating_optimize(const Scenario& sc, const metrics::ThresholdPair& th,
                              const conic::SolverSettings& settings, const model::PhaseProfile& v0,
                              Scheme scheme) {
  AoResult res;
  res.v = v0;
  model::PhaseProfile v = v0;
  double best = kInf;
  for (int t = 0; t < settings.max_ao_iterations; ++t) {
    const auto sp1 = solve_sp1(sc, v, th, sc.config.p_max, settings, scheme,
                               derive_seed(settings.seed, 2 * static_cast<std::uint64_t>(t)));
    std::optional<double> crb;
    if (sp1.status == Status::ok) crb = design_crb(sc, v, sp1.cov);
    if (!crb) {
      if (t == 0) {
        res.status = sp1.status == Status::ok ? Status::degenerate : sp1.status;
        return res;
      }
      break;
    }
    res.crb_trace.push_back(*crb);
    if (*crb < best) {
      best = *crb;
      res.beams = sp1.beams;
      res.cov = sp1.cov;
      res.v = v;
      res.crb = *crb;
      res.j = sp1.j_recovered;
      res.sp1_ratio = sp1.ratio;
    }
    if (t > 0) {
      const double prev = res.crb_trace[res.crb_trace.size() - 2];
      if (*crb > prev || std::abs(*crb - prev) <= settings.delta_ao * prev) break;
    }
    if (scheme == Scheme::bl4 || sc.channels.n_irs() <= 1) break;
    const auto sp2 = solve_sp2(sc, sp1.cov, th, v, settings,
                               derive_seed(settings.seed, 2 * static_cast<std::uint64_t>(t) + 1));
    v = sp2.v;
  }
  res.iterations = static_cast<int>(res.crb_trace.size());
  res.status = Status::ok;
  res.ssr = metrics::ssr_worst(sc.channels, res.v, res.cov, sc.semantic, sc.noise());
  return res;
}

AoResult solve_baseline(Scheme kind, const Scenario& sc, const metrics::ThresholdPair& th,
                        const conic::SolverSettings& settings, const model::PhaseProfile& v0) {
  if (kind == Scheme::proposed) throw std::invalid_argument("solve_baseline: not a baseline");
  return alternating_optimize(sc, th, settings, v0, kind);
}

// ---------------------------------------------------------------------------
// golden-section search

namespace {

bool valley_shaped(std::vector<std::pair<double, double>> probes) {
  std::sort(probes.begin(), probes.end());
  std::size_t imin = 0;
  for (std::size_t i = 1; i < probes.size(); ++i) {
    if (probes[i].second < probes[imin].second) imin = i;
  }
  auto slack = [](double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) return 0.0;
    return 1e-3 * std::max(std::abs(a), std::abs(b));
  };
  for (std::size_t i = 0; i + 1 <= imin; ++i) {
    const double a = probes[i].second, b = probes[i + 1].second;
    if (a < b - slack(a, b)) return false;
  }
  for (std::size_t i = imin; i + 1 < probes.size(); ++i) {
    const double a = probes[i].second, b = probes[i + 1].second;
    if (b < a - slack(a, b)) return false;
  }
  return true;
}

ScalarGssResult gss_core(const std::function<double(double)>& f, double a, double b, double rel_tol,
                         bool allow_fallback) {
  ScalarGssResult res;
  const double a0 = a, b0 = b;
  const double w0 = b - a;
  auto eval = [&](double x) {
    const double y = f(x);
    res.probes.emplace_back(x, std::isnan(y) ? kInf : y);
    ++res.evaluations;
    return res.probes.back().second;
  };
  auto finish = [&]() {
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.probes.size(); ++i) {
      if (res.probes[i].second < res.probes[best].second) best = i;
    }
    res.x = res.probes[best].first;
    res.f = res.probes[best].second;
    res.feasible = std::isfinite(res.f);
  };
  if (!(w0 > 0)) {
    eval(a);
    res.a = res.b = a;
    res.widths.push_back(0.0);
    finish();
    return res;
  }

  auto grid_refine = [&]() {
    res.fallback_used = true;
    const double h = w0 / 10.0;
    for (int i = 1; i <= 9; ++i) {
      eval(a0 + i * h);
      res.widths.push_back(w0);
    }
    finish();
    if (!res.feasible) return;
    const double lo = std::max(a0, res.x - h), hi = std::min(b0, res.x + h);
    auto sub = gss_core(f, lo, hi, rel_tol * w0 / (hi - lo), false);
    res.evaluations += sub.evaluations;
    res.probes.insert(res.probes.end(), sub.probes.begin(), sub.probes.end());
    for (double w : sub.widths) res.widths.push_back(w);
    res.a = sub.a;
    res.b = sub.b;
    finish();
  };

  double c = b - kGoldenTau * (b - a);
  double d = a + kGoldenTau * (b - a);
  double fc = eval(c);
  res.widths.push_back(w0);
  double fd = eval(d);
  if (std::isinf(fc) && std::isinf(fd)) {
    if (allow_fallback) {
      grid_refine();
    } else {
      res.a = a;
      res.b = b;
      res.widths.push_back(b - a);
      finish();
    }
    return res;
  }
  while (true) {
    bool go_left = fc <= fd;
    if (std::isinf(fc) && std::isinf(fd)) {
      // both interior probes infeasible: move toward the best finite probe
      double xb = 0.5 * (a + b), fb = kInf;
      for (const auto& p : res.probes) {
        if (p.second < fb) {
          fb = p.second;
          xb = p.first;
        }
      }
      go_left = xb < c;
    }
    if (go_left) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGoldenTau * (b - a);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGoldenTau * (b - a);
    }
    res.widths.push_back(b - a);
    if (b - a <= rel_tol * w0) break;
    if (go_left) {
      fc = eval(c);
    } else {
      fd = eval(d);
    }
  }
  res.a = a;
  res.b = b;
  const double fm = eval(0.5 * (a + b));
  finish();
  if (fm <= res.f) {
    res.x = 0.5 * (a + b);
    res.f = fm;
  }
  if (allow_fallback && !valley_shaped(res.probes)) {
    res.non_unimodal = true;
    const auto keep_a = res.a, keep_b = res.b;
    grid_refine();
    if (!res.feasible) {
      res.a = keep_a;
      res.b = keep_b;
    }
  }
  return res;
}

}  // namespace

ScalarGssResult golden_section_minimize(const std::function<double(double)>& f, double a, double b,
                                        double rel_tol) {
  if (!(rel_tol > 0)) throw std::invalid_argument("golden_section_minimize: tolerance must be positive");
  if (b < a) throw std::invalid_argument("golden_section_minimize: empty interval");
  return gss_core(f, a, b, rel_tol, true);
}

std::pair<double, double> rth_interval(const metrics::SemanticModel& model, double epsilon) {
  const double rs = model.rate_scale();
  return {rs * model.a1, rs * model.a2 - epsilon};
}

GssResult golden_section_rth(const Scenario& sc, double epsilon, const conic::SolverSettings& settings,
                             const model::PhaseProfile& v0, Scheme scheme) {
  GssResult out;
  out.epsilon = epsilon;
  const auto [lo, hi] = rth_interval(sc.semantic, epsilon);
  out.lower = lo;
  out.upper = hi;
  if (!(hi > lo)) return out;

  std::vector<std::pair<double, AoResult>> runs;
  std::optional<model::PhaseProfile> warm;
  auto f = [&](double r_th) {
    metrics::ThresholdPair th;
    try {
      th = metrics::sinr_thresholds(sc.semantic, r_th, epsilon);
    } catch (const std::domain_error&) {
      return kInf;
    }
    model::PhaseProfile start = v0;
    if (warm && scheme != Scheme::bl4) {
      const auto a = solve_sp1(sc, v0, th, sc.config.p_max, settings, scheme, derive_seed(settings.seed, 0));
      const auto b = solve_sp1(sc, *warm, th, sc.config.p_max, settings, scheme, derive_seed(settings.seed, 0));
      const auto ca = a.status == Status::ok ? design_crb(sc, v0, a.cov) : std::nullopt;
      const auto cb = b.status == Status::ok ? design_crb(sc, *warm, b.cov) : std::nullopt;
      if (cb && (!ca || *cb < *ca)) start = *warm;
    }
    auto ao = alternating_optimize(sc, th, settings, start, scheme);
    if (!ao.feasible()) return kInf;
    warm = ao.v;
    const double crb = ao.crb;
    runs.emplace_back(r_th, std::move(ao));
    return crb;
  };
  const auto g = golden_section_minimize(f, lo, hi, settings.delta_gss);
  out.evaluations = g.evaluations;
  out.fallback_used = g.fallback_used;
  out.non_unimodal = g.non_unimodal;
  out.feasible = g.feasible;
  if (!g.feasible) return out;
  out.r_th_opt = g.x;
  for (auto& [x, ao] : runs) {
    if (x == g.x && ao.crb == g.f) {
      out.best = ao;
      break;
    }
  }
  if (scheme != Scheme::bl4) {
    const auto th = metrics::sinr_thresholds(sc.semantic, g.x, epsilon);
    for (int i = 0; i < settings.ao_restarts; ++i) {
      const auto start = model::PhaseProfile::random(v0.size(), derive_seed(settings.seed, 1000 + static_cast<std::uint64_t>(i)));
      auto ao = alternating_optimize(sc, th, settings, start, scheme);
      if (ao.feasible() && ao.crb < out.best.crb) out.best = std::move(ao);
    }
  }
  return out;
}

std::vector<ParetoPoint> pareto_sweep(const Scenario& sc, const std::vector<double>& eps_grid,
                                      const conic::SolverSettings& settings, const model::PhaseProfile& v0,
                                      Scheme scheme) {
  std::vector<double> grid = eps_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<ParetoPoint> pts;
  for (double eps : grid) {
    const auto g = golden_section_rth(sc, eps, settings, v0, scheme);
    ParetoPoint p;
    p.epsilon = eps;
    p.feasible = g.feasible;
    p.evaluations = g.evaluations;
    p.fallback_used = g.fallback_used;
    p.status = g.feasible ? Status::ok : Status::infeasible;
    if (g.feasible) {
      p.r_th_opt = g.r_th_opt;
      p.crb = g.best.crb;
      p.ssr = g.best.ssr;
      p.ao_iterations = g.best.iterations;
      p.v = g.best.v;
      p.cov = g.best.cov;
    }
    pts.push_back(p);
  }
  for (std::size_t i = pts.size(); i-- > 1;) {
    const auto& hi = pts[i];
    auto& lo = pts[i - 1];
    if (hi.feasible && (!lo.feasible || hi.crb < lo.crb)) {
      const double eps = lo.epsilon;
      const int evals = lo.evaluations;
      lo = hi;
      lo.epsilon = eps;
      lo.evaluations = evals;
      lo.carried = true;
    }
  }
  return pts;
}

std::vector<double> default_eps_grid(const metrics::SemanticModel& model, int points) {
  if (points < 1) throw std::invalid_argument("default_eps_grid: need at least one point");
  std::vector<double> grid;
  const double top = 0.95 * model.ssr_ceiling();
  for (int i = 0; i < points; ++i) grid.push_back(points == 1 ? 0.0 : top * i / (points - 1));
  return grid;
}

}  // namespace isasc::opt
