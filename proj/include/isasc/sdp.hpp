#pragma once

// Small dense semidefinite programs over complex Hermitian matrix variables.
//
// A model is written with matrix variables X_i >= 0, real scalar variables,
// real affine expressions (Re/Im of traces and entries) and the constraint
// kinds used by the beamforming and phase-shift programs: linear
// (in)equalities, linear matrix inequalities and fixed entries. It is
// compiled to the standard primal form
//
//   minimize <C, X>  subject to  <A_i, X> = b_i,  X in K,
//
// where K is a product of Hermitian PSD blocks, a nonnegative orthant and a
// free part, and solved with an infeasible primal-dual path-following
// method (HKM direction, Mehrotra predictor-corrector).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isasc/types.hpp"

namespace isasc::conic {

struct SolverSettings {
  double feas_tol = 1e-7;     // relative constraint violation accepted as optimal
  double gap_tol = 1e-8;      // relative duality gap
  int max_iterations = 100;   // interior-point iterations
  int grm_trials = 200;
  std::uint64_t seed = 1;
  double delta_ao = 1e-4;
  double delta_gss = 1e-4;
  int n_sca = 10;
  int max_ao_iterations = 20;
  /// Extra seeded starting profiles tried at the selected r_th.
  int ao_restarts = 3;
  int psd_dim_cap = 64;
  /// Solve through the real symmetric 2n x 2n embedding of every block.
  bool real_embedding = false;

  void validate() const;
};

enum class SdpStatus { optimal, infeasible, inaccurate, failed };

const char* to_string(SdpStatus status);

struct HermitianVar {
  int id = -1;
  int dim = 0;
};

struct ScalarVar {
  int id = -1;
};

/// Real affine function of the model variables.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)

  /// Re tr(C X).
  static AffineExpr re_trace(const CMat& c, HermitianVar x);
  /// Im tr(C X).
  static AffineExpr im_trace(const CMat& c, HermitianVar x);
  static AffineExpr scalar(ScalarVar s, double coef = 1.0);

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double s);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }

  [[nodiscard]] double constant() const { return constant_; }
  /// Hermitian coefficient matrices keyed by matrix variable id.
  [[nodiscard]] const std::map<int, CMat>& matrix_terms() const { return herm_; }
  [[nodiscard]] const std::map<int, double>& scalar_terms() const { return scal_; }

 private:
  double constant_ = 0.0;
  std::map<int, CMat> herm_;
  std::map<int, double> scal_;
};

/// Complex affine expression as a pair of real ones.
struct ComplexExpr {
  AffineExpr re;
  AffineExpr im;

  ComplexExpr() = default;
  ComplexExpr(AffineExpr real_part) : re(std::move(real_part)) {}  // NOLINT(google-explicit-constructor)
  ComplexExpr(double value) : re(value) {}                         // NOLINT(google-explicit-constructor)
  ComplexExpr(AffineExpr real_part, AffineExpr imag_part) : re(std::move(real_part)), im(std::move(imag_part)) {}

  /// tr(C X)
  static ComplexExpr trace(const CMat& c, HermitianVar x);
  /// X(i, j)
  static ComplexExpr entry(HermitianVar x, int i, int j);

  [[nodiscard]] ComplexExpr conj() const;
  ComplexExpr& operator+=(const ComplexExpr& o);
  ComplexExpr& operator-=(const ComplexExpr& o);
  friend ComplexExpr operator+(ComplexExpr a, const ComplexExpr& b) { return a += b; }
  friend ComplexExpr operator-(ComplexExpr a, const ComplexExpr& b) { return a -= b; }
  friend ComplexExpr operator*(Complex s, const ComplexExpr& a);
};

using ExprMatrix = std::vector<std::vector<ComplexExpr>>;

class SdpModel {
 public:
  /// New Hermitian variable constrained to X >= 0.
  HermitianVar add_psd(int dim);
  ScalarVar add_scalar(bool nonnegative = true);

  void add_equality(const AffineExpr& lhs, double rhs);
  void add_leq(const AffineExpr& lhs, double rhs);
  void add_geq(const AffineExpr& lhs, double rhs);
  /// Hermitian affine matrix >= 0 (upper triangle is read). Returns the
  /// slack variable that carries the matrix value.
  HermitianVar add_lmi(const ExprMatrix& m);
  void fix_entry(HermitianVar x, int i, int j, Complex value);
  void maximize(const AffineExpr& objective);

  [[nodiscard]] int num_matrix_vars() const { return static_cast<int>(dims_.size()); }
  [[nodiscard]] int num_scalar_vars() const { return static_cast<int>(nonneg_.size()); }
  [[nodiscard]] int num_constraints() const { return static_cast<int>(rows_.size()); }
  [[nodiscard]] int dim(HermitianVar x) const { return dims_.at(static_cast<std::size_t>(x.id)); }

  /// Problem in SDPA sparse format after the real embedding. The standard
  /// form above is SDPA's dual: F0 = -C, F_i = A_i, c_i = b_i. The orthant
  /// is written as a diagonal block; free scalars are split into a
  /// difference of two nonnegative ones.
  [[nodiscard]] std::string to_sdpa() const;

  enum class RowKind { equal, less_equal, greater_equal };
  struct Row {
    AffineExpr lhs;
    double rhs = 0.0;
    RowKind kind = RowKind::equal;
  };

  [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
  [[nodiscard]] const std::vector<bool>& nonneg() const { return nonneg_; }
  [[nodiscard]] const std::vector<Row>& rows() const { return rows_; }
  [[nodiscard]] const AffineExpr& objective() const { return objective_; }
  [[nodiscard]] const std::vector<std::pair<ExprMatrix, int>>& lmis() const { return lmis_; }

 private:
  void check(const AffineExpr& e) const;

  std::vector<int> dims_;
  std::vector<bool> nonneg_;
  std::vector<Row> rows_;
  std::vector<std::pair<ExprMatrix, int>> lmis_;
  AffineExpr objective_;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::failed;
  double objective = 0.0;      // value of the maximized expression
  double max_violation = 0.0;  // largest relative constraint violation
  double gap = 0.0;            // relative duality gap at exit
  int iterations = 0;
  std::string message;
  std::vector<CMat> matrices;
  std::vector<double> scalars;

  [[nodiscard]] bool ok() const { return status == SdpStatus::optimal || status == SdpStatus::inaccurate; }
  [[nodiscard]] const CMat& value(HermitianVar x) const { return matrices.at(static_cast<std::size_t>(x.id)); }
  [[nodiscard]] double value(ScalarVar s) const { return scalars.at(static_cast<std::size_t>(s.id)); }
  [[nodiscard]] double value(const AffineExpr& e) const;
};

/// Evaluates an expression at explicit variable values.
double evaluate(const AffineExpr& e, const std::vector<CMat>& matrices, const std::vector<double>& scalars);

/// Largest relative violation of every model constraint at the given point.
double max_violation(const SdpModel& model, const std::vector<CMat>& matrices,
                     const std::vector<double>& scalars);

/// Throws std::invalid_argument when a PSD block exceeds the dimension cap.
SdpSolution solve_sdp(const SdpModel& model, const SolverSettings& settings);

}  // namespace isasc::conic
