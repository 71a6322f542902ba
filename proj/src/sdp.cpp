#include "isasc/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace isasc::conic {

void SolverSettings::validate() const {
  if (!(feas_tol > 0) || !(gap_tol > 0) || max_iterations < 1 || grm_trials < 1 || !(delta_ao > 0) ||
      !(delta_gss > 0) || n_sca < 1 || max_ao_iterations < 1 || ao_restarts < 0 || psd_dim_cap < 1) {
    throw std::invalid_argument("SolverSettings: all tolerances and counts must be positive");
  }
}

const char* to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::inaccurate: return "inaccurate";
    case SdpStatus::failed: return "failed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// expressions

namespace {

CMat hermitian_part(const CMat& c) { return 0.5 * (c + c.adjoint()); }

}  // namespace

AffineExpr AffineExpr::re_trace(const CMat& c, HermitianVar x) {
  if (x.id < 0 || c.rows() != x.dim || c.cols() != x.dim) {
    throw std::invalid_argument("AffineExpr: coefficient does not match the variable");
  }
  AffineExpr e;
  e.herm_.emplace(x.id, hermitian_part(c));
  return e;
}

AffineExpr AffineExpr::im_trace(const CMat& c, HermitianVar x) { return re_trace(Complex(0.0, -1.0) * c, x); }

AffineExpr AffineExpr::scalar(ScalarVar s, double coef) {
  if (s.id < 0) throw std::invalid_argument("AffineExpr: undeclared scalar");
  AffineExpr e;
  e.scal_.emplace(s.id, coef);
  return e;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  constant_ += other.constant_;
  for (const auto& [id, c] : other.herm_) {
    auto it = herm_.find(id);
    if (it == herm_.end()) herm_.emplace(id, c);
    else it->second += c;
  }
  for (const auto& [id, c] : other.scal_) scal_[id] += c;
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  AffineExpr neg = other;
  neg *= -1.0;
  return *this += neg;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  for (auto& [id, c] : herm_) c *= s;
  for (auto& [id, c] : scal_) c *= s;
  return *this;
}

ComplexExpr ComplexExpr::trace(const CMat& c, HermitianVar x) {
  return {AffineExpr::re_trace(c, x), AffineExpr::im_trace(c, x)};
}

ComplexExpr ComplexExpr::entry(HermitianVar x, int i, int j) {
  if (i < 0 || j < 0 || i >= x.dim || j >= x.dim) throw std::out_of_range("ComplexExpr: entry index");
  // X(i, j) = tr(E_ji X)
  CMat e = CMat::Zero(x.dim, x.dim);
  e(j, i) = 1.0;
  return trace(e, x);
}

ComplexExpr ComplexExpr::conj() const { return {re, -im}; }

ComplexExpr& ComplexExpr::operator+=(const ComplexExpr& o) {
  re += o.re;
  im += o.im;
  return *this;
}

ComplexExpr& ComplexExpr::operator-=(const ComplexExpr& o) {
  re -= o.re;
  im -= o.im;
  return *this;
}

ComplexExpr operator*(Complex s, const ComplexExpr& a) {
  return {s.real() * a.re - s.imag() * a.im, s.real() * a.im + s.imag() * a.re};
}

// ---------------------------------------------------------------------------
// model

HermitianVar SdpModel::add_psd(int dim) {
  if (dim < 1) throw std::invalid_argument("SdpModel: matrix dimension must be >= 1");
  dims_.push_back(dim);
  return {static_cast<int>(dims_.size()) - 1, dim};
}

ScalarVar SdpModel::add_scalar(bool nonnegative) {
  nonneg_.push_back(nonnegative);
  return {static_cast<int>(nonneg_.size()) - 1};
}

void SdpModel::check(const AffineExpr& e) const {
  for (const auto& [id, c] : e.matrix_terms()) {
    if (id < 0 || id >= num_matrix_vars() || c.rows() != dims_[static_cast<std::size_t>(id)]) {
      throw std::invalid_argument("SdpModel: expression references an undeclared matrix variable");
    }
  }
  for (const auto& [id, c] : e.scalar_terms()) {
    if (id < 0 || id >= num_scalar_vars()) {
      throw std::invalid_argument("SdpModel: expression references an undeclared scalar");
    }
  }
}

void SdpModel::add_equality(const AffineExpr& lhs, double rhs) {
  check(lhs);
  rows_.push_back({lhs, rhs, RowKind::equal});
}

void SdpModel::add_leq(const AffineExpr& lhs, double rhs) {
  check(lhs);
  rows_.push_back({lhs, rhs, RowKind::less_equal});
}

void SdpModel::add_geq(const AffineExpr& lhs, double rhs) {
  check(lhs);
  rows_.push_back({lhs, rhs, RowKind::greater_equal});
}

HermitianVar SdpModel::add_lmi(const ExprMatrix& m) {
  const int n = static_cast<int>(m.size());
  for (const auto& row : m) {
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("SdpModel: LMI must be square");
  }
  const HermitianVar s = add_psd(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const auto& e = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const ComplexExpr sij = ComplexExpr::entry(s, i, j);
      add_equality(sij.re - e.re, 0.0);
      if (i != j) add_equality(sij.im - e.im, 0.0);
    }
  }
  lmis_.emplace_back(m, s.id);
  return s;
}

void SdpModel::fix_entry(HermitianVar x, int i, int j, Complex value) {
  const ComplexExpr e = ComplexExpr::entry(x, i, j);
  add_equality(e.re, value.real());
  if (i != j) add_equality(e.im, value.imag());
}

void SdpModel::maximize(const AffineExpr& objective) {
  check(objective);
  objective_ = objective;
}

double evaluate(const AffineExpr& e, const std::vector<CMat>& matrices, const std::vector<double>& scalars) {
  double v = e.constant();
  for (const auto& [id, c] : e.matrix_terms()) {
    const CMat& x = matrices.at(static_cast<std::size_t>(id));
    v += (c.array() * x.conjugate().array()).real().sum();
  }
  for (const auto& [id, c] : e.scalar_terms()) v += c * scalars.at(static_cast<std::size_t>(id));
  return v;
}

double SdpSolution::value(const AffineExpr& e) const { return evaluate(e, matrices, scalars); }

namespace {

double min_eig(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

double max_violation(const SdpModel& model, const std::vector<CMat>& matrices,
                     const std::vector<double>& scalars) {
  double worst = 0.0;
  for (const auto& row : model.rows()) {
    const double lhs = evaluate(row.lhs, matrices, scalars);
    double viol = 0.0;
    switch (row.kind) {
      case SdpModel::RowKind::equal: viol = std::abs(lhs - row.rhs); break;
      case SdpModel::RowKind::less_equal: viol = std::max(0.0, lhs - row.rhs); break;
      case SdpModel::RowKind::greater_equal: viol = std::max(0.0, row.rhs - lhs); break;
    }
    worst = std::max(worst, viol / (1.0 + std::abs(row.rhs)));
  }
  for (std::size_t j = 0; j < matrices.size(); ++j) {
    worst = std::max(worst, std::max(0.0, -min_eig(matrices[j])) / (1.0 + matrices[j].norm()));
  }
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (model.nonneg()[i]) worst = std::max(worst, std::max(0.0, -scalars[i]) / (1.0 + std::abs(scalars[i])));
  }
  for (const auto& [m, slack] : model.lmis()) {
    const int n = static_cast<int>(m.size());
    CMat value(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const auto& e = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        value(i, j) = Complex(evaluate(e.re, matrices, scalars), evaluate(e.im, matrices, scalars));
        value(j, i) = std::conj(value(i, j));
      }
    }
    worst = std::max(worst, std::max(0.0, -min_eig(value)) / (1.0 + value.norm()));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// standard-form data

namespace {

struct Entry {
  int r;
  int c;
  Complex v;
};

struct BlockCoef {
  int row = 0;
  CMat dense;
  std::vector<Entry> entries;
  bool use_dense = false;
};

struct Block {
  int n = 0;
  CMat c;
  std::vector<BlockCoef> coefs;
};

struct Core {
  int m = 0;
  RVec b;
  std::vector<Block> blocks;
  RMat a_lp;  // m x n_l
  RVec c_lp;
  RMat a_free;  // m x n_f
  RVec c_free;
};

CMat embed(const CMat& a) {
  const Eigen::Index n = a.rows();
  CMat out(2 * n, 2 * n);
  const RMat re = a.real();
  const RMat im = a.imag();
  out.topLeftCorner(n, n) = re.cast<Complex>();
  out.topRightCorner(n, n) = (-im).cast<Complex>();
  out.bottomLeftCorner(n, n) = im.cast<Complex>();
  out.bottomRightCorner(n, n) = re.cast<Complex>();
  return out;
}

CMat unembed(const CMat& y) {
  const Eigen::Index n = y.rows() / 2;
  const RMat y11 = y.topLeftCorner(n, n).real();
  const RMat y22 = y.bottomRightCorner(n, n).real();
  const RMat y21 = y.bottomLeftCorner(n, n).real();
  const RMat y12 = y.topRightCorner(n, n).real();
  CMat x(n, n);
  x.real() = 0.5 * (y11 + y22);
  x.imag() = 0.5 * (y21 - y12);
  return hermitian_part(x);
}

struct Layout {
  std::vector<int> lp_of_scalar;    // -1 when free
  std::vector<int> free_of_scalar;  // -1 when nonnegative
  int n_lp = 0;
  int n_free = 0;
};

Layout layout_of(const SdpModel& model) {
  Layout l;
  for (bool nn : model.nonneg()) {
    l.lp_of_scalar.push_back(nn ? l.n_lp++ : -1);
    l.free_of_scalar.push_back(nn ? -1 : l.n_free++);
  }
  // one orthant slack per inequality row, appended after the scalars
  for (const auto& row : model.rows()) {
    if (row.kind != SdpModel::RowKind::equal) ++l.n_lp;
  }
  return l;
}

struct Scaling {
  double b_scale = 1.0;
  double c_scale = 1.0;
};

// Returns false when a structurally empty row demands a nonzero value.
bool build_core(const SdpModel& model, bool real_embedding, const Layout& layout, Core& core, Scaling& sc) {
  const int nb = model.num_matrix_vars();
  const int factor = real_embedding ? 2 : 1;
  core.blocks.resize(static_cast<std::size_t>(nb));
  for (int j = 0; j < nb; ++j) {
    const int n = model.dims()[static_cast<std::size_t>(j)] * factor;
    core.blocks[static_cast<std::size_t>(j)].n = n;
    core.blocks[static_cast<std::size_t>(j)].c = CMat::Zero(n, n);
  }
  auto map_coef = [&](const CMat& h) -> CMat { return real_embedding ? CMat(0.5 * embed(h)) : h; };

  const auto& rows = model.rows();
  std::vector<int> kept;
  std::vector<double> norms;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double nrm2 = 0.0;
    for (const auto& [id, c] : rows[i].lhs.matrix_terms()) nrm2 += map_coef(c).squaredNorm();
    for (const auto& [id, c] : rows[i].lhs.scalar_terms()) nrm2 += c * c;
    if (rows[i].kind != SdpModel::RowKind::equal) nrm2 += 1.0;
    const double b = rows[i].rhs - rows[i].lhs.constant();
    if (nrm2 == 0.0) {
      if (std::abs(b) > 1e-12 * (1.0 + std::abs(rows[i].rhs))) return false;
      continue;
    }
    kept.push_back(static_cast<int>(i));
    norms.push_back(std::sqrt(nrm2));
  }

  const int m = static_cast<int>(kept.size());
  core.m = m;
  core.b = RVec::Zero(m);
  core.a_lp = RMat::Zero(m, layout.n_lp);
  core.a_free = RMat::Zero(m, layout.n_free);
  int slack = static_cast<int>(std::count(model.nonneg().begin(), model.nonneg().end(), true));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // slacks are numbered by row order regardless of whether the row is kept
    if (rows[i].kind == SdpModel::RowKind::equal) continue;
    const auto it = std::find(kept.begin(), kept.end(), static_cast<int>(i));
    if (it != kept.end()) {
      const int r = static_cast<int>(it - kept.begin());
      core.a_lp(r, slack) = (rows[i].kind == SdpModel::RowKind::less_equal ? 1.0 : -1.0) / norms[static_cast<std::size_t>(r)];
    }
    ++slack;
  }

  for (int r = 0; r < m; ++r) {
    const auto& row = rows[static_cast<std::size_t>(kept[static_cast<std::size_t>(r)])];
    const double inv = 1.0 / norms[static_cast<std::size_t>(r)];
    core.b(r) = (row.rhs - row.lhs.constant()) * inv;
    for (const auto& [id, c] : row.lhs.matrix_terms()) {
      BlockCoef coef;
      coef.row = r;
      coef.dense = map_coef(c) * inv;
      core.blocks[static_cast<std::size_t>(id)].coefs.push_back(std::move(coef));
    }
    for (const auto& [id, c] : row.lhs.scalar_terms()) {
      const auto sid = static_cast<std::size_t>(id);
      if (layout.lp_of_scalar[sid] >= 0) core.a_lp(r, layout.lp_of_scalar[sid]) += c * inv;
      else core.a_free(r, layout.free_of_scalar[sid]) += c * inv;
    }
  }

  core.c_lp = RVec::Zero(layout.n_lp);
  core.c_free = RVec::Zero(layout.n_free);
  const AffineExpr& obj = model.objective();
  for (const auto& [id, c] : obj.matrix_terms()) core.blocks[static_cast<std::size_t>(id)].c -= map_coef(c);
  for (const auto& [id, c] : obj.scalar_terms()) {
    const auto sid = static_cast<std::size_t>(id);
    if (layout.lp_of_scalar[sid] >= 0) core.c_lp(layout.lp_of_scalar[sid]) -= c;
    else core.c_free(layout.free_of_scalar[sid]) -= c;
  }

  // global scaling of b and C
  sc.b_scale = std::max(1.0, core.b.norm());
  double c_norm2 = core.c_lp.squaredNorm() + core.c_free.squaredNorm();
  for (const auto& blk : core.blocks) c_norm2 += blk.c.squaredNorm();
  sc.c_scale = std::max(1.0, std::sqrt(c_norm2));
  core.b /= sc.b_scale;
  core.c_lp /= sc.c_scale;
  core.c_free /= sc.c_scale;
  for (auto& blk : core.blocks) {
    blk.c /= sc.c_scale;
    for (auto& coef : blk.coefs) {
      for (int c = 0; c < blk.n; ++c) {
        for (int r = 0; r < blk.n; ++r) {
          if (coef.dense(r, c) != Complex(0.0, 0.0)) coef.entries.push_back({r, c, coef.dense(r, c)});
        }
      }
      coef.use_dense = static_cast<int>(coef.entries.size()) > 2 * blk.n;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// interior-point method

double inner(const CMat& a, const CMat& b) { return (a.array() * b.conjugate().array()).real().sum(); }

struct Iterate {
  std::vector<CMat> x;
  std::vector<CMat> z;
  RVec xl;
  RVec zl;
  RVec xf;
  RVec y;
};

struct Direction {
  std::vector<CMat> dx;
  std::vector<CMat> dz;
  RVec dxl;
  RVec dzl;
  RVec dxf;
  RVec dy;
};

struct CoreResult {
  SdpStatus status = SdpStatus::failed;
  Iterate it;
  int iterations = 0;
  double gap = 0.0;
  std::string message;
};

RVec apply_a(const Core& p, const std::vector<CMat>& x, const RVec& xl, const RVec& xf) {
  RVec out = p.a_lp * xl + p.a_free * xf;
  for (std::size_t j = 0; j < p.blocks.size(); ++j) {
    for (const auto& coef : p.blocks[j].coefs) {
      double v = 0.0;
      for (const auto& e : coef.entries) v += (e.v * x[j](e.c, e.r)).real();
      out(coef.row) += v;
    }
  }
  return out;
}

CMat apply_at(const Block& blk, const RVec& y) {
  CMat out = CMat::Zero(blk.n, blk.n);
  for (const auto& coef : blk.coefs) {
    const double yi = y(coef.row);
    if (yi == 0.0) continue;
    for (const auto& e : coef.entries) out(e.r, e.c) += yi * e.v;
  }
  return out;
}

// Largest step keeping x + a dx positive semidefinite.
double max_step(const CMat& x, const CMat& dx) {
  Eigen::LLT<CMat> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  CMat w = llt.matrixL().solve(dx);
  w = llt.matrixL().solve(CMat(w.adjoint()));
  const double lmin = min_eig(w);
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step(const RVec& x, const RVec& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

class Ipm {
 public:
  Ipm(const Core& p, const SolverSettings& s) : p_(p), s_(s) {}

  CoreResult run();

 private:
  void init();
  void residuals();
  bool build_schur();
  bool solve_system(const RVec& rhs, RVec& dy, RVec& dxf) const;
  bool direction(double sigma_mu, const Direction* pred, Direction& d);
  void steps(const Direction& d, double& ap, double& ad) const;

  const Core& p_;
  const SolverSettings& s_;
  Iterate it_;
  std::vector<CMat> zinv_;
  std::vector<CMat> rd_;
  RVec rp_, rdl_, rdf_;
  RMat schur_;
  Eigen::LLT<RMat> llt_;
  Eigen::PartialPivLU<RMat> lu_;
  bool use_lu_ = false;
  double nu_ = 0.0;
};

void Ipm::init() {
  const int m = p_.m;
  it_.y = RVec::Zero(m);
  it_.xf = RVec::Zero(p_.c_free.size());
  for (const auto& blk : p_.blocks) {
    const double n = blk.n;
    double ratio = 0.0;
    double a_max = 0.0;
    for (const auto& coef : blk.coefs) {
      const double an = coef.dense.norm();
      ratio = std::max(ratio, (1.0 + std::abs(p_.b(coef.row))) / (1.0 + an));
      a_max = std::max(a_max, an);
    }
    const double xi = std::max({10.0, std::sqrt(n), n * ratio});
    const double eta = std::max({10.0, std::sqrt(n), blk.c.norm(), a_max});
    it_.x.push_back(xi * CMat::Identity(blk.n, blk.n));
    it_.z.push_back(eta * CMat::Identity(blk.n, blk.n));
    nu_ += n;
  }
  const Eigen::Index nl = p_.c_lp.size();
  if (nl > 0) {
    double ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      ratio = std::max(ratio, (1.0 + std::abs(p_.b(i))) / (1.0 + p_.a_lp.row(i).norm()));
    }
    const double xi = std::max({10.0, std::sqrt(double(nl)), ratio});
    const double eta = std::max({10.0, std::sqrt(double(nl)), p_.c_lp.norm(), p_.a_lp.norm()});
    it_.xl = RVec::Constant(nl, xi);
    it_.zl = RVec::Constant(nl, eta);
    nu_ += static_cast<double>(nl);
  } else {
    it_.xl = RVec::Zero(0);
    it_.zl = RVec::Zero(0);
  }
}

void Ipm::residuals() {
  rp_ = p_.b - apply_a(p_, it_.x, it_.xl, it_.xf);
  rd_.resize(p_.blocks.size());
  for (std::size_t j = 0; j < p_.blocks.size(); ++j) rd_[j] = p_.blocks[j].c - apply_at(p_.blocks[j], it_.y) - it_.z[j];
  rdl_ = p_.c_lp - p_.a_lp.transpose() * it_.y - it_.zl;
  rdf_ = p_.c_free - p_.a_free.transpose() * it_.y;
}

bool Ipm::build_schur() {
  const int m = p_.m;
  schur_ = RMat::Zero(m, m);
  zinv_.resize(p_.blocks.size());
  for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
    const Block& blk = p_.blocks[j];
    Eigen::LLT<CMat> llt(it_.z[j]);
    if (llt.info() != Eigen::Success) return false;
    zinv_[j] = llt.solve(CMat::Identity(blk.n, blk.n));
    zinv_[j] = hermitian_part(zinv_[j]);
    const CMat& x = it_.x[j];
    const CMat& zi = zinv_[j];
    std::vector<CMat> g(blk.coefs.size());
    for (std::size_t a = 0; a < blk.coefs.size(); ++a) {
      if (blk.coefs[a].use_dense) g[a] = x * blk.coefs[a].dense * zi;
    }
    for (std::size_t a = 0; a < blk.coefs.size(); ++a) {
      const BlockCoef& ca = blk.coefs[a];
      for (std::size_t b = a; b < blk.coefs.size(); ++b) {
        const BlockCoef& cb = blk.coefs[b];
        double v = 0.0;
        if (ca.use_dense) {
          for (const auto& e : cb.entries) v += (e.v * g[a](e.c, e.r)).real();
        } else if (cb.use_dense) {
          for (const auto& e : ca.entries) v += (e.v * g[b](e.c, e.r)).real();
        } else {
          Complex acc(0.0, 0.0);
          for (const auto& ea : ca.entries) {
            for (const auto& eb : cb.entries) acc += ea.v * eb.v * x(ea.c, eb.r) * zi(eb.c, ea.r);
          }
          v = acc.real();
        }
        schur_(ca.row, cb.row) += v;
        if (a != b) schur_(cb.row, ca.row) += v;
      }
    }
  }
  if (p_.c_lp.size() > 0) {
    const RVec d = it_.xl.cwiseQuotient(it_.zl);
    schur_ += p_.a_lp * d.asDiagonal() * p_.a_lp.transpose();
  }
  schur_ = 0.5 * (schur_ + schur_.transpose());

  const Eigen::Index nf = p_.c_free.size();
  if (nf == 0) {
    llt_.compute(schur_);
    use_lu_ = llt_.info() != Eigen::Success;
    if (use_lu_) {
      RMat reg = schur_;
      reg.diagonal().array() += 1e-14 * std::max(1.0, schur_.diagonal().maxCoeff());
      lu_.compute(reg);
    }
  } else {
    RMat k = RMat::Zero(m + nf, m + nf);
    k.topLeftCorner(m, m) = schur_;
    k.topRightCorner(m, nf) = p_.a_free;
    k.bottomLeftCorner(nf, m) = p_.a_free.transpose();
    lu_.compute(k);
    use_lu_ = true;
  }
  return true;
}

bool Ipm::solve_system(const RVec& rhs, RVec& dy, RVec& dxf) const {
  const int m = p_.m;
  const Eigen::Index nf = p_.c_free.size();
  if (nf == 0) {
    dy = use_lu_ ? RVec(lu_.solve(rhs)) : RVec(llt_.solve(rhs));
    dxf = RVec::Zero(0);
  } else {
    RVec full(m + nf);
    full.head(m) = rhs;
    full.tail(nf) = rdf_;
    const RVec sol = lu_.solve(full);
    dy = sol.head(m);
    dxf = sol.tail(nf);
  }
  return dy.allFinite() && dxf.allFinite();
}

bool Ipm::direction(double sigma_mu, const Direction* pred, Direction& d) {
  const std::size_t nb = p_.blocks.size();
  std::vector<CMat> h(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    h[j] = sigma_mu * zinv_[j] - it_.x[j] - it_.x[j] * rd_[j] * zinv_[j];
    if (pred) h[j] -= pred->dx[j] * pred->dz[j] * zinv_[j];
  }
  RVec hl;
  if (p_.c_lp.size() > 0) {
    hl = (sigma_mu * it_.zl.cwiseInverse()) - it_.xl - it_.xl.cwiseProduct(rdl_).cwiseQuotient(it_.zl);
    if (pred) hl -= pred->dxl.cwiseProduct(pred->dzl).cwiseQuotient(it_.zl);
  } else {
    hl = RVec::Zero(0);
  }
  RVec rhs = rp_ - p_.a_lp * hl;
  rhs -= apply_a(p_, h, RVec::Zero(hl.size()), RVec::Zero(p_.c_free.size()));
  if (!solve_system(rhs, d.dy, d.dxf)) return false;

  d.dz.resize(nb);
  d.dx.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    d.dz[j] = rd_[j] - apply_at(p_.blocks[j], d.dy);
    d.dz[j] = hermitian_part(d.dz[j]);
    CMat t = sigma_mu * zinv_[j] - it_.x[j] - it_.x[j] * d.dz[j] * zinv_[j];
    if (pred) t -= pred->dx[j] * pred->dz[j] * zinv_[j];
    d.dx[j] = hermitian_part(t);
  }
  if (p_.c_lp.size() > 0) {
    d.dzl = rdl_ - p_.a_lp.transpose() * d.dy;
    d.dxl = hl + it_.xl.cwiseQuotient(it_.zl).cwiseProduct(p_.a_lp.transpose() * d.dy);
  } else {
    d.dzl = RVec::Zero(0);
    d.dxl = RVec::Zero(0);
  }
  return true;
}

void Ipm::steps(const Direction& d, double& ap, double& ad) const {
  ap = std::numeric_limits<double>::infinity();
  ad = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
    ap = std::min(ap, max_step(it_.x[j], d.dx[j]));
    ad = std::min(ad, max_step(it_.z[j], d.dz[j]));
  }
  if (p_.c_lp.size() > 0) {
    ap = std::min(ap, max_step(it_.xl, d.dxl));
    ad = std::min(ad, max_step(it_.zl, d.dzl));
  }
}

CoreResult Ipm::run() {
  init();
  CoreResult res;
  const double b_norm = p_.b.norm();
  double c_norm2 = p_.c_lp.squaredNorm() + p_.c_free.squaredNorm();
  for (const auto& blk : p_.blocks) c_norm2 += blk.c.squaredNorm();
  const double c_norm = std::sqrt(c_norm2);
  const double inner_feas = std::min(1e-9, s_.feas_tol);

  int stalls = 0;
  double relgap = 1.0, pinf = 1.0, dinf = 1.0;
  for (int iter = 0; iter <= s_.max_iterations; ++iter) {
    residuals();
    double pobj = p_.c_lp.dot(it_.xl) + p_.c_free.dot(it_.xf);
    double complementarity = it_.xl.dot(it_.zl);
    double rd2 = rdl_.squaredNorm() + rdf_.squaredNorm();
    for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
      pobj += inner(p_.blocks[j].c, it_.x[j]);
      complementarity += inner(it_.x[j], it_.z[j]);
      rd2 += rd_[j].squaredNorm();
    }
    const double dobj = p_.b.dot(it_.y);
    const double mu = complementarity / std::max(nu_, 1.0);
    relgap = std::max(std::abs(pobj - dobj), complementarity) / (1.0 + std::abs(pobj) + std::abs(dobj));
    pinf = rp_.norm() / (1.0 + b_norm);
    dinf = std::sqrt(rd2) / (1.0 + c_norm);
    res.iterations = iter;
    res.gap = relgap;
    if (!std::isfinite(relgap) || !std::isfinite(pinf) || !std::isfinite(dinf)) {
      res.status = SdpStatus::failed;
      res.message = "numerical breakdown";
      return res;
    }
    if (relgap <= s_.gap_tol && pinf <= inner_feas && dinf <= inner_feas) {
      res.status = SdpStatus::optimal;
      res.it = it_;
      return res;
    }

    // dual ray: b'y > 0 with A'y + Z close to zero certifies an empty model
    if (dobj > 0.0) {
      double ray2 = (p_.a_lp.transpose() * it_.y + it_.zl).squaredNorm() + (p_.a_free.transpose() * it_.y).squaredNorm();
      for (std::size_t j = 0; j < p_.blocks.size(); ++j) ray2 += (apply_at(p_.blocks[j], it_.y) + it_.z[j]).squaredNorm();
      if (std::sqrt(ray2) / dobj < 1e-8) {
        res.status = SdpStatus::infeasible;
        res.message = "dual ray found (model infeasible)";
        res.it = it_;
        return res;
      }
    }
    if (pobj < 0.0) {
      const RVec ax = apply_a(p_, it_.x, it_.xl, it_.xf);
      if (-pobj > 1e6 && ax.norm() / -pobj < 1e-8) {
        res.status = SdpStatus::failed;
        res.message = "primal ray found (objective unbounded)";
        res.it = it_;
        return res;
      }
    }
    if (iter == s_.max_iterations) break;

    if (!build_schur()) {
      res.message = "lost positive definiteness";
      break;
    }
    Direction pred;
    if (!direction(0.0, nullptr, pred)) {
      res.message = "singular Newton system";
      break;
    }
    double ap = 0.0, ad = 0.0;
    steps(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = (it_.xl + ap * pred.dxl).dot(it_.zl + ad * pred.dzl);
    for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
      mu_aff += inner(it_.x[j] + ap * pred.dx[j], it_.z[j] + ad * pred.dz[j]);
    }
    mu_aff /= std::max(nu_, 1.0);
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    Direction corr;
    if (!direction(sigma * mu, &pred, corr)) {
      res.message = "singular Newton system";
      break;
    }
    steps(corr, ap, ad);
    const double gamma = 0.9 + 0.09 * std::min({1.0, ap, ad});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (std::max(ap, ad) < 1e-9) {
      if (++stalls >= 3) {
        res.message = "step length stalled";
        break;
      }
    } else {
      stalls = 0;
    }
    for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
      it_.x[j] = hermitian_part(it_.x[j] + ap * corr.dx[j]);
      it_.z[j] = hermitian_part(it_.z[j] + ad * corr.dz[j]);
    }
    if (p_.c_lp.size() > 0) {
      it_.xl += ap * corr.dxl;
      it_.zl += ad * corr.dzl;
    }
    it_.xf += ap * corr.dxf;
    it_.y += ad * corr.dy;
  }
  res.it = it_;
  if (relgap <= 1e-5 && pinf <= 1e-6 && dinf <= 1e-6) {
    res.status = SdpStatus::inaccurate;
    if (res.message.empty()) res.message = "iteration limit reached near optimum";
  } else {
    res.status = SdpStatus::failed;
    if (res.message.empty()) res.message = "iteration limit reached";
  }
  return res;
}

}  // namespace

SdpSolution solve_sdp(const SdpModel& model, const SolverSettings& settings) {
  for (int d : model.dims()) {
    if (d > settings.psd_dim_cap) throw std::invalid_argument("solve_sdp: PSD block exceeds the dimension cap");
  }
  const Layout layout = layout_of(model);
  Core core;
  Scaling sc;
  SdpSolution sol;
  sol.matrices.resize(model.dims().size());
  sol.scalars.assign(model.nonneg().size(), 0.0);
  for (std::size_t j = 0; j < model.dims().size(); ++j) {
    sol.matrices[j] = CMat::Zero(model.dims()[j], model.dims()[j]);
  }
  if (!build_core(model, settings.real_embedding, layout, core, sc)) {
    sol.status = SdpStatus::infeasible;
    sol.message = "constant constraint row cannot be met";
    return sol;
  }

  Ipm ipm(core, settings);
  const CoreResult res = ipm.run();
  sol.status = res.status;
  sol.iterations = res.iterations;
  sol.gap = res.gap;
  sol.message = res.message;
  if (res.it.x.size() == core.blocks.size()) {
    for (std::size_t j = 0; j < core.blocks.size(); ++j) {
      const CMat x = sc.b_scale * res.it.x[j];
      sol.matrices[j] = settings.real_embedding ? unembed(x) : hermitian_part(x);
    }
    for (std::size_t i = 0; i < model.nonneg().size(); ++i) {
      if (layout.lp_of_scalar[i] >= 0) sol.scalars[i] = sc.b_scale * res.it.xl(layout.lp_of_scalar[i]);
      else sol.scalars[i] = sc.b_scale * res.it.xf(layout.free_of_scalar[i]);
    }
  }
  sol.objective = evaluate(model.objective(), sol.matrices, sol.scalars);
  sol.max_violation = max_violation(model, sol.matrices, sol.scalars);
  if (sol.status == SdpStatus::optimal && sol.max_violation > settings.feas_tol) {
    sol.status = SdpStatus::inaccurate;
    sol.message = "constraint violation above tolerance after unscaling";
  }
  return sol;
}

std::string SdpModel::to_sdpa() const {
  const Layout layout = layout_of(*this);
  Core core;
  Scaling sc;
  if (!build_core(*this, true, layout, core, sc)) return "* infeasible constant row\n";
  const Eigen::Index nf = core.c_free.size();
  const Eigen::Index nl = core.c_lp.size() + 2 * nf;
  std::ostringstream out;
  out << std::setprecision(17);
  out << "* real-embedded standard form; b and C are scaled by " << sc.b_scale << " and " << sc.c_scale << "\n";
  out << core.m << "\n";
  const std::size_t nblocks = core.blocks.size() + (nl > 0 ? 1 : 0);
  out << nblocks << "\n";
  for (const auto& blk : core.blocks) out << blk.n << " ";
  if (nl > 0) out << -nl;
  out << "\n";
  for (int i = 0; i < core.m; ++i) out << core.b(i) << (i + 1 < core.m ? " " : "\n");
  auto emit_block = [&](int matno, int blkno, const CMat& a) {
    for (int r = 0; r < a.rows(); ++r) {
      for (int c = r; c < a.cols(); ++c) {
        const double v = a(r, c).real();
        if (v != 0.0) out << matno << " " << blkno << " " << r + 1 << " " << c + 1 << " " << v << "\n";
      }
    }
  };
  const int lp_block = static_cast<int>(core.blocks.size()) + 1;
  auto emit_lp = [&](int matno, const RVec& lp, const RVec& fr) {
    for (Eigen::Index i = 0; i < lp.size(); ++i) {
      if (lp(i) != 0.0) out << matno << " " << lp_block << " " << i + 1 << " " << i + 1 << " " << lp(i) << "\n";
    }
    for (Eigen::Index i = 0; i < fr.size(); ++i) {
      if (fr(i) == 0.0) continue;
      const Eigen::Index base = lp.size() + 2 * i;
      out << matno << " " << lp_block << " " << base + 1 << " " << base + 1 << " " << fr(i) << "\n";
      out << matno << " " << lp_block << " " << base + 2 << " " << base + 2 << " " << -fr(i) << "\n";
    }
  };
  for (std::size_t j = 0; j < core.blocks.size(); ++j) emit_block(0, static_cast<int>(j) + 1, -core.blocks[j].c);
  emit_lp(0, -core.c_lp, -core.c_free);
  for (int i = 0; i < core.m; ++i) {
    for (std::size_t j = 0; j < core.blocks.size(); ++j) {
      for (const auto& coef : core.blocks[j].coefs) {
        if (coef.row == i) emit_block(i + 1, static_cast<int>(j) + 1, coef.dense);
      }
    }
    emit_lp(i + 1, core.a_lp.row(i).transpose(), core.a_free.row(i).transpose());
  }
  return out.str();
}

}  // namespace isasc::conic
