#include <doctest.h>

#include <cmath>

#include "isasc/sdp.hpp"

using namespace isasc;
using namespace isasc::conic;

namespace {

// Deterministic 6x6 instance shared with the cross-solver reference below.
struct Instance {
  CMat c;
  CMat a2;
};

Instance six_by_six() {
  const int n = 6;
  CMat c(n, n), b(n, n);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < n; ++k) {
      c(r, k) = Complex(std::cos(r + 2.0 * k), std::sin(r * k - 1.0));
      b(r, k) = Complex(std::sin(r + 0.7 * k), std::cos(0.3 * r - k));
    }
  }
  return {0.5 * (c + c.adjoint()), b * b.adjoint() / 10.0};
}

SdpSolution solve_six(bool embed) {
  const auto inst = six_by_six();
  SdpModel m;
  const auto x = m.add_psd(6);
  m.add_equality(AffineExpr::re_trace(CMat::Identity(6, 6), x), 1.0);
  m.add_leq(AffineExpr::re_trace(inst.a2, x), 0.5);
  m.add_geq(ComplexExpr::entry(x, 0, 1).re + ComplexExpr::entry(x, 2, 3).im, 0.05);
  m.maximize(AffineExpr::re_trace(inst.c, x));
  SolverSettings s;
  s.real_embedding = embed;
  return solve_sdp(m, s);
}

}  // namespace

TEST_CASE("scalar Schur case") {
  SdpModel m;
  const auto t = m.add_scalar(false);
  const ExprMatrix lmi{{AffineExpr(1.0) - AffineExpr::scalar(t), AffineExpr(0.0)},
                       {AffineExpr(0.0), AffineExpr(1.0)}};
  m.add_lmi(lmi);
  m.maximize(AffineExpr::scalar(t));
  const auto sol = solve_sdp(m, SolverSettings{});
  CHECK(sol.status == SdpStatus::optimal);
  CHECK(std::abs(sol.value(t) - 1.0) <= 1e-7);
  CHECK(sol.max_violation <= 1e-7);
}

TEST_CASE("eigenvalue program") {
  SdpModel m;
  const auto x = m.add_psd(2);
  m.add_equality(AffineExpr::re_trace(CMat::Identity(2, 2), x), 1.0);
  CMat c = CMat::Zero(2, 2);
  c(0, 0) = 3.0;
  c(1, 1) = 1.0;
  m.maximize(AffineExpr::re_trace(c, x));
  const auto sol = solve_sdp(m, SolverSettings{});
  CHECK(sol.status == SdpStatus::optimal);
  CHECK(std::abs(sol.objective - 3.0) <= 1e-7);
  CHECK(std::abs(sol.value(x)(0, 0) - 1.0) <= 1e-6);
}

TEST_CASE("complex eigenvalue program") {
  CMat c(3, 3);
  c << 2.0, Complex(0.0, 1.0), 0.0, Complex(0.0, -1.0), 2.0, Complex(0.5, 0.5), 0.0, Complex(0.5, -0.5), 1.0;
  SdpModel m;
  const auto x = m.add_psd(3);
  m.add_equality(AffineExpr::re_trace(CMat::Identity(3, 3), x), 1.0);
  m.maximize(AffineExpr::re_trace(c, x));
  const auto sol = solve_sdp(m, SolverSettings{});
  Eigen::SelfAdjointEigenSolver<CMat> es(c);
  CHECK(sol.status == SdpStatus::optimal);
  CHECK(std::abs(sol.objective - es.eigenvalues()(2)) <= 1e-7);
}

TEST_CASE("cross-solver reference on a 6x6 complex instance") {
  // Optimal value reported by three independent conic solvers (interior
  // point, first order and homogeneous embedding); they agree to 1e-8.
  const double reference = 1.5777576431809708;
  const auto native = solve_six(false);
  CHECK(native.status == SdpStatus::optimal);
  CHECK(std::abs(native.objective - reference) / reference <= 1e-6);
  const auto embedded = solve_six(true);
  CHECK(embedded.status == SdpStatus::optimal);
  CHECK(std::abs(embedded.objective - native.objective) <= 1e-8 * (1 + std::abs(native.objective)));
  CHECK(native.max_violation <= 1e-7);
}

TEST_CASE("native and embedded paths agree on an LMI with complex entries") {
  SdpModel m;
  const auto x = m.add_psd(3);
  const auto t = m.add_scalar(false);
  m.fix_entry(x, 0, 0, 1.0);
  m.fix_entry(x, 1, 1, 1.0);
  m.fix_entry(x, 2, 2, 1.0);
  CMat c(3, 3);
  c << 0.0, Complex(1.0, 2.0), Complex(-0.5, 0.1), Complex(1.0, -2.0), 0.0, Complex(0.3, 0.0),
      Complex(-0.5, -0.1), Complex(0.3, 0.0), 0.0;
  const ComplexExpr off = ComplexExpr::entry(x, 0, 1);
  m.add_lmi({{AffineExpr(2.0) - AffineExpr::scalar(t), off}, {off.conj(), AffineExpr(1.5)}});
  m.maximize(AffineExpr::re_trace(c, x) + AffineExpr::scalar(t, 0.5));
  SolverSettings s;
  const auto a = solve_sdp(m, s);
  s.real_embedding = true;
  const auto b = solve_sdp(m, s);
  CHECK(a.status == SdpStatus::optimal);
  CHECK(b.status == SdpStatus::optimal);
  CHECK(std::abs(a.objective - b.objective) <= 1e-8 * (1 + std::abs(a.objective)));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(a.value(x)(i, i) - 1.0) <= 1e-7);
}

TEST_CASE("infeasible model is reported") {
  SdpModel m;
  const auto x = m.add_psd(2);
  m.add_equality(AffineExpr::re_trace(CMat::Identity(2, 2), x), 1.0);
  CMat e = CMat::Zero(2, 2);
  e(0, 0) = 1.0;
  m.add_geq(AffineExpr::re_trace(e, x), 2.0);
  m.maximize(AffineExpr::re_trace(e, x));
  const auto sol = solve_sdp(m, SolverSettings{});
  CHECK(sol.status == SdpStatus::infeasible);

  SdpModel empty_row;
  empty_row.add_psd(1);
  empty_row.add_equality(AffineExpr(0.0), 1.0);
  CHECK(solve_sdp(empty_row, SolverSettings{}).status == SdpStatus::infeasible);
}

TEST_CASE("dimension cap and undeclared variables") {
  SdpModel m;
  const auto x = m.add_psd(65);
  m.maximize(AffineExpr::re_trace(CMat::Identity(65, 65), x) * -1.0);
  CHECK_THROWS_AS(solve_sdp(m, SolverSettings{}), std::invalid_argument);
  SdpModel other;
  CHECK_THROWS_AS(other.add_equality(AffineExpr::scalar(ScalarVar{3}), 1.0), std::invalid_argument);
}

TEST_CASE("determinism and debug dump") {
  const auto a = solve_six(false);
  const auto b = solve_six(false);
  CHECK(a.objective == b.objective);
  CHECK(a.iterations == b.iterations);
  CHECK(a.matrices[0] == b.matrices[0]);

  SdpModel m;
  const auto x = m.add_psd(2);
  const auto s = m.add_scalar(false);
  m.add_equality(AffineExpr::re_trace(CMat::Identity(2, 2), x) + AffineExpr::scalar(s), 1.0);
  m.maximize(AffineExpr::scalar(s, -1.0));
  const std::string dump = m.to_sdpa();
  CHECK(dump.find("4 -2") != std::string::npos);
}
