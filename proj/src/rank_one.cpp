#include "isasc/rank_one.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "isasc/tolerances.hpp"

namespace isasc::conic {

namespace {

double quad(const CRow& h, const CMat& x) { return (h * x * h.adjoint())(0, 0).real(); }

// Returns F with F F^H = m. Eigenvalues below 1e-12 of the largest are
// treated as round-off and dropped.
CMat psd_factor(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()));
  const double floor = 1e-12 * std::max(es.eigenvalues().maxCoeff(), 0.0);
  RVec ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = ev(i) > floor ? ev(i) : 0.0;
  return es.eigenvectors() * ev.cwiseSqrt().cast<Complex>().asDiagonal();
}

// Principal eigenvector scaled to carry `power`.
CVec principal(const CMat& m, double power) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()));
  return std::sqrt(std::max(power, 0.0)) * es.eigenvectors().col(es.eigenvectors().cols() - 1);
}

class Gauss {
 public:
  explicit Gauss(std::uint64_t seed) : rng_(seed), n_(0.0, std::sqrt(0.5)) {}
  CVec draw(Eigen::Index n) {
    CVec r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double re = n_(rng_);
      const double im = n_(rng_);
      r(i) = Complex(re, im);
    }
    return r;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> n_;
};

}  // namespace

double row_violation(const SinrRow& row, const CMat& w_stream, const CMat& r_x) {
  if (row.upper && std::isinf(row.gamma)) return 0.0;
  if (!row.upper && row.gamma <= 0.0) return 0.0;
  const double have = quad(row.h, w_stream);
  const double need = row.gamma * (quad(row.h, r_x) - have + row.noise);
  const double scale = std::max({std::abs(need), std::abs(have), 1e-300});
  return row.upper ? (have - need) / scale : (need - have) / scale;
}

double beam_violation(const BeamConstraints& cons, const std::vector<CMat>& blocks) {
  CMat r = CMat::Zero(blocks.front().rows(), blocks.front().cols());
  for (const auto& b : blocks) r += b;
  double worst = (r.trace().real() - cons.p_max) / std::max(cons.p_max, 1e-300);
  for (const auto& row : cons.rows) {
    worst = std::max(worst, row_violation(row, blocks.at(static_cast<std::size_t>(row.stream)), r));
  }
  return worst;
}

RankOneW randomize_rank_one_w(const std::vector<CMat>& blocks, int k_users, const BeamConstraints& cons,
                              const CovObjective& objective, double relaxed_objective, int trials,
                              std::uint64_t seed) {
  if (blocks.empty() || k_users < 1 || k_users > static_cast<int>(blocks.size())) {
    throw std::invalid_argument("randomize_rank_one_w: inconsistent block list");
  }
  if (trials < 1) throw std::invalid_argument("randomize_rank_one_w: trials must be >= 1");
  const std::size_t nb = blocks.size();
  const auto k = static_cast<std::size_t>(k_users);
  const Eigen::Index m = blocks.front().rows();
  const bool has_sensing = nb > k;

  RankOneW best;
  best.relaxed_objective = relaxed_objective;
  double best_infeasible = std::numeric_limits<double>::infinity();
  double best_feasible_obj = -std::numeric_limits<double>::infinity();

  auto consider = [&](std::vector<CVec> beams) {
    // two scalings: per-stream relaxed power and uniform full budget
    for (int mode = 0; mode < 2; ++mode) {
      std::vector<CVec> w = beams;
      if (mode == 0) {
        for (std::size_t i = 0; i < nb; ++i) {
          const double nrm2 = w[i].squaredNorm();
          const double target = blocks[i].trace().real();
          w[i] = nrm2 > 0 ? CVec(w[i] * std::sqrt(std::max(target, 0.0) / nrm2)) : CVec(CVec::Zero(m));
        }
      } else {
        double total = 0.0;
        for (const auto& x : w) total += x.squaredNorm();
        if (!(total > 0)) continue;
        const double s = std::sqrt(cons.p_max / total);
        for (auto& x : w) x *= s;
      }
      std::vector<CMat> cov(nb);
      CMat r = CMat::Zero(m, m);
      for (std::size_t i = 0; i < nb; ++i) {
        cov[i] = w[i] * w[i].adjoint();
        r += cov[i];
      }
      const double viol = beam_violation(cons, cov);
      if (viol <= tol::kCandidateFeasibility) {
        const double obj = objective(r);
        if (obj > best_feasible_obj) {
          best_feasible_obj = obj;
          best.beams = w;
          best.feasible = true;
          best.objective = obj;
          best.violation = viol;
        }
      } else if (!best.feasible && viol < best_infeasible) {
        best_infeasible = viol;
        best.beams = w;
        best.objective = objective(r);
        best.violation = viol;
      }
    }
  };

  CMat sensing_sum = CMat::Zero(m, m);
  for (std::size_t i = k; i < nb; ++i) sensing_sum += blocks[i];

  auto sensing_pair = [&](const CMat& q, std::vector<CVec>& beams) {
    // the sensing-type streams only matter through their sum, so the two
    // strongest eigen-directions of that sum are used
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (q + q.adjoint()));
    for (std::size_t i = k; i < nb; ++i) {
      const Eigen::Index col = m - 1 - static_cast<Eigen::Index>(i - k);
      if (col < 0) {
        beams[i] = CVec::Zero(m);
        continue;
      }
      beams[i] = std::sqrt(std::max(es.eigenvalues()(col), 0.0)) * es.eigenvectors().col(col);
    }
  };

  // deterministic candidates
  {
    std::vector<CVec> beams(nb);
    for (std::size_t i = 0; i < k; ++i) beams[i] = principal(blocks[i], blocks[i].trace().real());
    if (has_sensing) sensing_pair(sensing_sum, beams);
    consider(beams);
  }
  if (has_sensing) {
    // W_k h^H h W_k / (h W_k h^H) keeps every user's useful power; the rest
    // of R_x is handed to the sensing streams
    std::vector<CVec> beams(nb);
    CMat r = CMat::Zero(m, m);
    for (const auto& b : blocks) r += b;
    CMat rest = r;
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) {
      const SinrRow* own = nullptr;
      for (const auto& row : cons.rows) {
        if (!row.upper && row.stream == static_cast<int>(i)) own = &row;
      }
      if (own == nullptr) {
        ok = false;
        break;
      }
      const CVec g = blocks[i] * own->h.adjoint();
      const double denom = quad(own->h, blocks[i]);
      if (!(denom > 0)) {
        ok = false;
        break;
      }
      beams[i] = g / std::sqrt(denom);
      rest -= beams[i] * beams[i].adjoint();
    }
    if (ok) {
      sensing_pair(rest, beams);
      consider(beams);
    }
  }

  std::vector<CMat> factors(nb);
  for (std::size_t i = 0; i < nb; ++i) factors[i] = psd_factor(blocks[i]);
  Gauss gauss(seed);
  int used = 0;
  int round_trials = trials;
  for (int round = 0; round < 3; ++round) {
    for (int t = 0; t < round_trials; ++t) {
      std::vector<CVec> beams(nb);
      for (std::size_t i = 0; i < nb; ++i) beams[i] = factors[i] * gauss.draw(m);
      consider(beams);
      ++used;
    }
    if (best.feasible) break;
    round_trials *= 2;
  }
  best.trials_used = used;
  best.ratio = relaxed_objective != 0.0 ? best.objective / relaxed_objective : 0.0;
  return best;
}

double phase_violation(const PhaseConstraint& pc, const CVec& v_aug) {
  const double value = (v_aug.adjoint() * pc.c * v_aug)(0, 0).real();
  const double scale = std::max({std::abs(pc.rhs), std::abs(value), 1e-300});
  return pc.upper ? (value - pc.rhs) / scale : (pc.rhs - value) / scale;
}

RankOneV randomize_rank_one_v(const CMat& v_gram, const std::vector<PhaseConstraint>& cons,
                              const PhaseObjective& objective, double relaxed_objective, int trials,
                              std::uint64_t seed, const model::PhaseProfile* anchor) {
  const Eigen::Index n1 = v_gram.rows();
  if (n1 < 2 || v_gram.cols() != n1) throw std::invalid_argument("randomize_rank_one_v: bad Gram matrix");
  if (trials < 1) throw std::invalid_argument("randomize_rank_one_v: trials must be >= 1");

  RankOneV best;
  best.relaxed_objective = relaxed_objective;
  double best_infeasible = std::numeric_limits<double>::infinity();
  double best_feasible_obj = -std::numeric_limits<double>::infinity();

  auto unit = [&](const CVec& xi) {
    CVec a(n1);
    for (Eigen::Index i = 0; i < n1; ++i) {
      const double mag = std::abs(xi(i));
      a(i) = mag > 0 ? xi(i) / mag : Complex(1.0, 0.0);
    }
    a *= std::conj(a(n1 - 1));
    a(n1 - 1) = 1.0;
    return a;
  };
  auto violation = [&](const CVec& a) {
    double viol = -1.0;
    for (const auto& pc : cons) viol = std::max(viol, phase_violation(pc, a));
    return viol;
  };
  auto accept = [&](const CVec& a, double viol) {
    model::PhaseProfile v(a.head(n1 - 1));
    if (viol <= tol::kCandidateFeasibility) {
      const double obj = objective(v);
      if (obj > best_feasible_obj) {
        best_feasible_obj = obj;
        best.v = v;
        best.feasible = true;
        best.objective = obj;
        best.violation = viol;
      }
    } else if (!best.feasible && viol < best_infeasible) {
      best_infeasible = viol;
      best.v = v;
      best.objective = objective(v);
      best.violation = viol;
    }
  };
  const CVec anchor_aug = anchor != nullptr ? anchor->augmented() : CVec();
  auto consider = [&](const CVec& xi) {
    const CVec a = unit(xi);
    const double viol = violation(a);
    if (viol <= tol::kCandidateFeasibility || anchor == nullptr) {
      accept(a, viol);
      return;
    }
    // pull an infeasible draw back toward the anchor until it fits
    for (double lambda = 0.5; lambda > 0.03; lambda *= 0.5) {
      const CVec b = unit((1.0 - lambda) * anchor_aug + lambda * a);
      const double vb = violation(b);
      if (vb <= tol::kCandidateFeasibility) {
        accept(b, vb);
        return;
      }
    }
    accept(a, viol);
  };

  consider(principal(v_gram, 1.0));
  const CMat f = psd_factor(v_gram);
  Gauss gauss(seed);
  int used = 0;
  int round_trials = trials;
  for (int round = 0; round < 3; ++round) {
    for (int t = 0; t < round_trials; ++t) {
      consider(f * gauss.draw(n1));
      ++used;
    }
    if (best.feasible) break;
    round_trials *= 2;
  }
  best.trials_used = used;
  best.ratio = relaxed_objective != 0.0 ? best.objective / relaxed_objective : 0.0;
  return best;
}

bool FeasibilityReport::feasible(const DesignConstraints& d, double rel_tol) const {
  return power <= rel_tol * d.p_max && scu <= rel_tol * std::max(d.gamma_com, 1.0) &&
         (std::isinf(d.gamma_eve) || eve <= rel_tol * std::max(d.gamma_eve, 1.0)) &&
         unit_modulus <= tol::kUnitModulus && psd <= tol::kPsdSlack * std::max(d.p_max, 1e-300);
}

FeasibilityReport validate_feasibility(const model::ChannelSet& ch, const model::PhaseProfile& v,
                                       const metrics::CovarianceSet& cov, const DesignConstraints& d) {
  FeasibilityReport rep;
  rep.power = cov.r_x.trace().real() - d.p_max;
  for (Eigen::Index i = 0; i < v.v.size(); ++i) {
    rep.unit_modulus = std::max(rep.unit_modulus, std::abs(std::abs(v.v(i)) - 1.0));
  }
  auto neg_eig = [](const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
    return -es.eigenvalues()(0);
  };
  rep.psd = std::max({neg_eig(cov.w_s), neg_eig(cov.w_n), -std::numeric_limits<double>::infinity()});
  for (const auto& w : cov.w_c) rep.psd = std::max(rep.psd, neg_eig(w));

  const CVec a = v.augmented();
  const CRow h_e = a.transpose() * model::lifted_eve_factor(ch);
  rep.scu = -std::numeric_limits<double>::infinity();
  rep.eve = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < cov.k_users(); ++k) {
    const CMat& wk = cov.w_c[static_cast<std::size_t>(k)];
    const CRow h = a.transpose() * model::lifted_scu_factor(ch, k);
    const double s = quad(h, wk);
    rep.scu = std::max(rep.scu, d.gamma_com - s / (quad(h, cov.r_x) - s + d.sigma_c2));
    const double se = quad(h_e, wk);
    rep.eve = std::max(rep.eve, se / (quad(h_e, cov.r_x) - se + d.sigma_e2) - d.gamma_eve);
  }
  return rep;
}

}  // namespace isasc::conic
