#include <cmath>
#include <random>

#include "doctest.h"
#include "hbeng/forward.hpp"
#include "hbeng/oracles.hpp"

using namespace hbeng;

namespace {

ForwardProblem sho_problem(Real a01 = 1.0) {
  ForwardProblem p;
  p.model = std::make_shared<MathieuModel>(0.0, 1.0);
  p.set = HarmonicIndexSet::build(0, 1);
  p.grid = SamplingGrid::make(17, 15);
  p.a01 = a01;
  return p;
}

ForwardProblem mathieu_problem(Real q, Real a01, int M, int K,
                               const std::map<int, Real>& ac = {},
                               const std::map<int, Real>& dc = {}) {
  ForwardProblem p;
  p.model = std::make_shared<MathieuModel>(q, 0.0, ac, dc);
  p.set = HarmonicIndexSet::build(M, K);
  p.grid = SamplingGrid::make(std::max(2 * K + 1, 3), std::max(2 * M + 1, 1));
  p.a01 = a01;
  return p;
}

const std::map<int, Real> kFig1Ac = {{4, -0.2}, {6, -0.4}, {8, 0.01}};

}  // namespace

TEST_CASE("SHO residual has the closed form 1 - omega^2") {
  const auto p = sho_problem();
  for (const Real w : {0.5, 1.0, 1.3}) {
    Vector x(1);
    x[0] = w;
    const Vector r = assemble_residual(p, x);
    CHECK(r.size() == 1);
    CHECK(r[0] == doctest::Approx(1.0 - w * w).epsilon(1e-12));
  }
}

TEST_CASE("SHO solve lands on omega = 1") {
  const HbSolution sol = solve_forward(sho_problem());
  CHECK(sol.converged);
  CHECK(std::abs(sol.omega - 1.0) < 1e-12);
  CHECK(sol.beta == doctest::Approx(1.0));
  CHECK(sol.coeffs.at(0, 1) == 1.0);  // prescribed amplitude kept exactly
}

TEST_CASE("jacobian") {
  SUBCASE("SHO: dr/domega = -2 omega") {
    const auto p = sho_problem();
    Vector x(1);
    x[0] = 1.2;
    const Matrix j = jacobian(p, x);
    CHECK(j(0, 0) == doctest::Approx(-2.4).epsilon(1e-12));
  }
  SUBCASE("matches finite differences at a generic Mathieu point") {
    auto p = mathieu_problem(0.45, 0.15, 3, 4, kFig1Ac);
    ForwardSystem sys(p);
    std::mt19937 rng(3);
    std::uniform_real_distribution<Real> dist(-0.02, 0.02);
    Vector x = sys.initial_guess();
    for (int i = 0; i < x.size() - 1; ++i) x[i] += dist(rng);

    const Matrix j = sys.jacobian(x);
    const Vector r0 = sys.residual(x);
    Real worst = 0.0;
    for (int c = 0; c < x.size(); ++c) {
      const Real h = 1e-7 * std::max(1.0, std::abs(x[c]));
      Vector xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      const Vector fd = (sys.residual(xp) - sys.residual(xm)) / (2 * h);
      for (int rix = 0; rix < r0.size(); ++rix) {
        const Real scale = std::max(1.0, std::abs(fd[rix]));
        worst = std::max(worst, std::abs(j(rix, c) - fd[rix]) / scale);
      }
    }
    CHECK(worst < 1e-5);
  }
  SUBCASE("zero-amplitude linear limit: coefficient block independent of a01") {
    auto p1 = mathieu_problem(0.3, 1e-9, 2, 2);
    auto p2 = mathieu_problem(0.3, 1e-3, 2, 2);
    ForwardSystem s1(p1), s2(p2);
    Vector x1 = s1.initial_guess(), x2 = s2.initial_guess();
    x1.head(x1.size() - 1).setZero();
    x2.head(x2.size() - 1).setZero();
    x1[x1.size() - 1] = x2[x2.size() - 1] = 0.25;
    const Matrix j1 = s1.jacobian(x1), j2 = s2.jacobian(x2);
    // all columns except d/domega agree for a linear model
    CHECK((j1.leftCols(x1.size() - 1) - j2.leftCols(x2.size() - 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("square system count") {
  for (const auto& [M, K] : std::vector<std::pair<int, int>>{{0, 1}, {3, 2}, {7, 8}}) {
    auto p = mathieu_problem(0.1, 0.01, M, K);
    ForwardSystem sys(p);
    CHECK(sys.unknown_count() == p.set.size());
    const Vector r = sys.residual(sys.initial_guess());
    CHECK(r.size() == p.set.size());
  }
}

TEST_CASE("Duffing frequency against Lindstedt and quadrature") {
  // accel = -u - 0.01 u^3 via a = 1, alpha4_dc = 0.005; A01 = 0.5.
  ForwardProblem p;
  p.model = std::make_shared<MathieuModel>(0.0, 1.0, std::map<int, Real>{},
                                           std::map<int, Real>{{4, 0.005}});
  p.set = HarmonicIndexSet::build(0, 8);
  p.grid = SamplingGrid::make(17, 1);
  p.a01 = 0.5;
  const HbSolution sol = solve_forward(p);
  REQUIRE(sol.converged);
  CHECK(std::abs(sol.omega - 1.0009375) < 2e-6);

  // The oracle amplitude is the turning point u(0) = sum_k A_k (theta = 0,
  // so v(0) = 0), not the fundamental's coefficient A01.
  TargetPotential pot;
  pot.c_coeffs[4] = 0.005;
  const Real w_exact = period_quadrature(pot, 1.0, reconstruct_at(sol, 0.0));
  CHECK(std::abs(sol.omega - w_exact) < 1e-9);
}

TEST_CASE("linear Mathieu matches the monodromy exponent") {
  for (const Real q : {0.1, 0.3, 0.5}) {
    auto p = mathieu_problem(q, 1.0, 7, 1);
    const HbSolution sol = solve_forward(p);
    REQUIRE(sol.converged);
    const Real beta_mono = characteristic_exponent(q, 0.0);
    CHECK(std::abs(sol.beta - beta_mono) < 1e-8);
  }
}

TEST_CASE("q-continuation tracks the monodromy curve") {
  auto p = mathieu_problem(0.05, 1.0, 7, 1);
  std::vector<Real> qs;
  for (int i = 0; i < 14; ++i) qs.push_back(0.05 + i * (0.65 / 13));
  const auto sols = continue_in_parameter(p, "q", qs);
  REQUIRE(sols.size() == qs.size());
  Real prev_beta = 0.0;
  for (size_t i = 0; i < qs.size(); ++i) {
    REQUIRE(sols[i].converged);
    CHECK(sols[i].beta > prev_beta);  // monotone increasing in q
    prev_beta = sols[i].beta;
    CHECK(std::abs(sols[i].beta - characteristic_exponent(qs[i], 0.0)) < 1e-8);
  }
}

TEST_CASE("single-element continuation equals a direct solve") {
  auto p = mathieu_problem(0.3, 0.05, 3, 3);
  const auto sols = continue_in_parameter(p, "q", {0.3});
  const auto direct = solve_forward(p);
  REQUIRE(sols.size() == 1);
  CHECK(same_branch(sols[0], direct));
}

TEST_CASE("reconstruction") {
  SUBCASE("SHO solution reconstructs A01 cos(xi) exactly") {
    const HbSolution sol = solve_forward(sho_problem(0.7));
    for (const Real xi : {0.0, 0.5, 2.0, 6.0})
      CHECK(reconstruct_at(sol, xi) == doctest::Approx(0.7 * std::cos(xi)).epsilon(1e-12));
  }
  SUBCASE("u(0) equals the coefficient sum at theta = 0") {
    auto p = mathieu_problem(0.4, 0.1, 3, 3, kFig1Ac);
    const HbSolution sol = solve_forward(p);
    REQUIRE(sol.converged);
    CHECK(reconstruct_at(sol, 0.0) ==
          doctest::Approx(sol.coeffs.amplitudes.sum()).epsilon(1e-14));
  }
}

TEST_CASE("guess independence on the same branch") {
  auto p = mathieu_problem(0.3, 0.05, 5, 4, kFig1Ac);
  const HbSolution a = solve_forward(p);
  ForwardProblem p2 = p;
  p2.omega_guess = a.omega * 1.05;
  CoefficientTable guess = a.coeffs;
  for (int i = 0; i < guess.amplitudes.size(); ++i)
    if (i != guess.set.secular_index()) guess.amplitudes[i] *= 1.2;
  p2.coeff_guess = guess;
  const HbSolution b = solve_forward(p2);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(same_branch(a, b));
}

TEST_CASE("amplitude continuation reaches the physical branch at reference parameters") {
  // Strong drive with strong nonlinearity: the cold Newton root at
  // A01 = 0.2 is a different algebraic branch whose trajectory does not
  // track the integrated dynamics; the amplitude ladder stays on the branch
  // connected to the linear limit.
  auto p = mathieu_problem(0.7, 0.2, 7, 8, kFig1Ac);
  const HbSolution sol = solve_forward_continued(p);
  REQUIRE(sol.converged);
  CHECK(sol.beta == doctest::Approx(0.534588).epsilon(1e-4));

  // The cold Newton root is a different, spurious branch.
  const HbSolution cold = solve_forward(p);
  if (cold.converged) CHECK(!same_branch(sol, cold));

  const auto [u0, v0] = initial_state_from_solution(sol);
  CHECK(v0 == 0.0);
  const Trajectory rk = integrate(*p.model, u0, v0, 0.0, 50.0);
  const auto rep = deviation([&](Real xi) { return xi == 0.0 ? u0 : rk.u(xi); },
                             [&](Real xi) { return reconstruct_at(sol, xi); }, 50.0, 1000);
  CHECK(rep.max_dev < 0.05);
}

TEST_CASE("NEFS dominates OFS on the strong-drive reference problem") {
  auto nefs_p = mathieu_problem(0.7, 0.2, 7, 8, kFig1Ac);
  auto ofs_p = mathieu_problem(0.7, 0.2, 7, 1, kFig1Ac);
  const HbSolution nefs = solve_forward_continued(nefs_p);
  const HbSolution ofs = solve_forward_continued(ofs_p);
  REQUIRE(nefs.converged);
  REQUIRE(ofs.converged);

  const auto [u0, v0] = initial_state_from_solution(nefs);
  const Trajectory rk = integrate(*nefs_p.model, u0, v0, 0.0, 200.0);
  auto ref = [&](Real xi) { return xi == 0.0 ? u0 : rk.u(xi); };
  const Real dev_nefs =
      deviation(ref, [&](Real xi) { return reconstruct_at(nefs, xi); }, 200.0, 4000).max_dev;
  const Real dev_ofs =
      deviation(ref, [&](Real xi) { return reconstruct_at(ofs, xi); }, 200.0, 4000).max_dev;
  CHECK(dev_nefs <= 0.1 * dev_ofs);
}

TEST_CASE("lattice forward solve with the k0 row") {
  ForwardProblem p;
  p.model = std::make_shared<OpticalLatticeModel>(0.2, 0.53);
  p.set = HarmonicIndexSet::build(7, 8, true, 0.0);
  p.grid = SamplingGrid::make(17, 15);
  p.a01 = 0.2;
  const HbSolution sol = solve_forward_continued(p);
  REQUIRE(sol.converged);
  CHECK(sol.beta == doctest::Approx(0.52317).epsilon(1e-3));
  // forced k0 response carries the shaking
  CHECK(std::abs(sol.coeffs.at(1, 0)) > 0.01);
}

TEST_CASE("lattice depth continuation converges at every point") {
  ForwardProblem p;
  p.model = std::make_shared<OpticalLatticeModel>(0.05, 0.53);
  p.set = HarmonicIndexSet::build(7, 8, true, 0.0);
  p.grid = SamplingGrid::make(17, 15);
  p.a01 = 0.01;
  std::vector<Real> depths;
  for (int i = 0; i < 12; ++i) depths.push_back(0.05 + i * (0.55 / 11));
  const auto sols = continue_in_parameter(p, "v0", depths);
  for (size_t i = 0; i < sols.size(); ++i) {
    CAPTURE(depths[i]);
    CHECK(sols[i].converged);
  }
}

TEST_CASE("non-finite model propagates from the residual") {
  struct BadModel : MathieuModel {
    BadModel() : MathieuModel(0.1, 1.0) {}
    Real accel(Real, Real) const override { return std::numeric_limits<Real>::infinity(); }
  };
  ForwardProblem p;
  p.model = std::make_shared<BadModel>();
  p.set = HarmonicIndexSet::build(0, 1);
  p.grid = SamplingGrid::make(5, 1);
  p.a01 = 1.0;
  Vector x(1);
  x[0] = 1.0;
  CHECK_THROWS_AS(assemble_residual(p, x), NonFiniteError);
}
