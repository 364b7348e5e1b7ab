#include <cmath>
#include <random>

#include "doctest.h"
#include "hbeng/magnus.hpp"
#include "hbeng/oracles.hpp"

using namespace hbeng;

namespace {

Poly2 random_cubic(std::mt19937& rng) {
  std::uniform_int_distribution<int> coeff(-3, 3);
  Poly2 p;
  for (int i = 0; i <= 3; ++i)
    for (int j = 0; i + j <= 3; ++j) p.set_coeff(i, j, coeff(rng));
  return p;
}

PolyVectorField random_field(std::mt19937& rng) {
  return {random_cubic(rng), random_cubic(rng)};
}

Real max_abs_coeff(const Poly2& p) {
  Real m = 0.0;
  for (int i = 0; i <= p.u_degree(); ++i)
    for (int j = 0; j <= p.v_degree(); ++j) m = std::max(m, std::abs(p.coeff(i, j)));
  return m;
}

}  // namespace

TEST_CASE("poly2 arithmetic") {
  const Poly2 u = Poly2::monomial(1, 0, 1.0);
  const Poly2 v = Poly2::monomial(0, 1, 1.0);
  const Poly2 p = u * u * v + 3.0 * v;
  CHECK(p.coeff(2, 1) == 1.0);
  CHECK(p.coeff(0, 1) == 3.0);
  CHECK(p.evaluate(2.0, 0.5) == doctest::Approx(2.0 + 1.5));
  CHECK(p.du().coeff(1, 1) == 2.0);
  CHECK(p.dv().coeff(2, 0) == 1.0);
  CHECK((p - p).is_zero());
}

TEST_CASE("bracket antisymmetry: [f, f] = 0 exactly") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const PolyVectorField f = random_field(rng);
    const PolyVectorField b = lie_bracket(f, f);
    CHECK(max_abs_coeff(b.u_comp) == 0.0);
    CHECK(max_abs_coeff(b.v_comp) == 0.0);
  }
}

TEST_CASE("linear fields reduce to the matrix commutator") {
  // f = A x d/dx, g = B x d/dx with 2x2 matrices A, B acting on (u, v):
  // [f, g] corresponds to the commutator [A, B] = AB - BA.
  Eigen::Matrix2d A, B;
  A << 1, 2, -1, 0.5;
  B << 0, 1, 3, -2;
  auto linear_field = [](const Eigen::Matrix2d& M) {
    PolyVectorField f;
    f.u_comp = Poly2::monomial(1, 0, M(0, 0)) + Poly2::monomial(0, 1, M(0, 1));
    f.v_comp = Poly2::monomial(1, 0, M(1, 0)) + Poly2::monomial(0, 1, M(1, 1));
    return f;
  };
  // [f, g]_i = sum_j (f_j d_j g_i - g_j d_j f_i) gives (BA - AB) x.
  const PolyVectorField br = lie_bracket(linear_field(A), linear_field(B));
  const Eigen::Matrix2d C = B * A - A * B;
  CHECK(br.u_comp.coeff(1, 0) == doctest::Approx(C(0, 0)));
  CHECK(br.u_comp.coeff(0, 1) == doctest::Approx(C(0, 1)));
  CHECK(br.v_comp.coeff(1, 0) == doctest::Approx(C(1, 0)));
  CHECK(br.v_comp.coeff(0, 1) == doctest::Approx(C(1, 1)));
}

TEST_CASE("Jacobi identity holds with exactly zero coefficients") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const PolyVectorField f = random_field(rng);
    const PolyVectorField g = random_field(rng);
    const PolyVectorField h = random_field(rng);
    PolyVectorField sum = lie_bracket(f, lie_bracket(g, h));
    const PolyVectorField t2 = lie_bracket(g, lie_bracket(h, f));
    const PolyVectorField t3 = lie_bracket(h, lie_bracket(f, g));
    sum.u_comp += t2.u_comp;
    sum.u_comp += t3.u_comp;
    sum.v_comp += t2.v_comp;
    sum.v_comp += t3.v_comp;
    CHECK(max_abs_coeff(sum.u_comp) == 0.0);
    CHECK(max_abs_coeff(sum.v_comp) == 0.0);
  }
}

TEST_CASE("cosine drive: first-order commutator sum vanishes") {
  // With F_{-1} = F_1 the first-order term is [F_1, F_1]/(2 Omega) = 0, so
  // a purely linear drive with no static force leaves only the 1/Omega^2
  // correction; its coefficient is exactly q^2/2 at Omega = 2.
  const MathieuModel m(0.3, 0.0);
  const auto eff = effective_force_of(m);
  CHECK(eff.c2 == doctest::Approx(0.3 * 0.3 / 2.0).epsilon(1e-14));
  CHECK(eff.c4 == 0.0);
}

TEST_CASE("linear Mathieu limit: beta_fm = sqrt(a + q^2/2) exactly") {
  for (const Real q : {0.05, 0.3, 0.7}) {
    for (const Real a : {0.0, 0.02}) {
      const MathieuModel m(q, a);
      const auto eff = effective_force_of(m);
      CHECK(std::sqrt(eff.omega0_sq()) ==
            doctest::Approx(std::sqrt(a + q * q / 2)).epsilon(1e-14));
    }
  }
}

TEST_CASE("pseudopotential cross-check against the monodromy oracle") {
  const MathieuModel m(0.05, 0.0);
  const Real beta_fm = std::sqrt(effective_force_of(m).omega0_sq());
  const Real beta_mono = characteristic_exponent(0.05, 0.0);
  CHECK(std::abs(beta_fm - beta_mono) / beta_mono < 1e-3);
}

TEST_CASE("effective force of the full nonlinear trap matches the averaging closed form") {
  // Independent oracle: for accel = h0(u) + 2 q g(u) cos(Omega t) the
  // second-order high-frequency force is h0 - (q^2/2) (g g')' ... expanded,
  // with g = u + 2 a4 u^3 + 3 a6 u^5 + 4 a8 u^7:
  //   (g g')|_(u^3) = 8 a4, |_(u^5) = 18 a6 + 12 a4^2,
  //   |_(u^7) = 32 a8 + 48 a4 a6.
  const Real q = 0.7, a4 = -0.2, a6 = -0.4, a8 = 0.01, t4 = 0.3, t6 = -0.1;
  const MathieuModel m(q, 0.0, {{4, a4}, {6, a6}, {8, a8}}, {{4, t4}, {6, t6}});
  const auto eff = effective_force_of(m);

  const Real half_q2 = 0.5 * q * q;  // q^2 g g' / 2 at Omega = 2
  CHECK(eff.c2 == doctest::Approx(half_q2).epsilon(1e-13));
  CHECK(eff.c4 == doctest::Approx(2 * t4 + half_q2 * 8 * a4).epsilon(1e-13));
  CHECK(eff.c6 == doctest::Approx(3 * t6 + half_q2 * (18 * a6 + 12 * a4 * a4)).epsilon(1e-13));
  CHECK(eff.c8 == doctest::Approx(half_q2 * (32 * a8 + 48 * a4 * a6)).epsilon(1e-13));
}

TEST_CASE("C4 is affine in the DC control") {
  auto c4_at = [](Real alpha) {
    const MathieuModel m(0.7, 0.0, {{4, -0.2}, {6, -0.4}, {8, 0.01}}, {{4, alpha}});
    return effective_force_of(m).anharmonicity(4);
  };
  const Real c0 = c4_at(0.0), c1 = c4_at(0.4);
  const Real interpolated = 0.5 * (c0 + c1);
  CHECK(c4_at(0.2) == doctest::Approx(interpolated).epsilon(1e-12));
}

TEST_CASE("predict_control") {
  SUBCASE("already-zero target returns control = 0") {
    const MathieuModel m(0.3, 0.0);  // no AC anharmonicity: C4(0) = 0
    const auto pred = predict_control(m, "alpha4_dc", 4, 0.0);
    CHECK(std::abs(pred.control) < 1e-12);
  }
  SUBCASE("trap prediction matches the closed form") {
    // alpha4 = c2 C4 - 2 q^2 alpha4_ac with c2 = q^2/2.
    const Real q = 0.05;
    const MathieuModel m(q, 0.0, {{4, -0.2}, {6, -0.4}, {8, 0.01}});
    const auto pred = predict_control(m, "alpha4_dc", 4, 0.4);
    const Real expected = (q * q / 2) * 0.4 - 2 * q * q * (-0.2);
    CHECK(pred.control == doctest::Approx(expected).epsilon(1e-10));
    CHECK(pred.control == doctest::Approx(0.0015).epsilon(1e-9));
    CHECK(pred.beta_fm == doctest::Approx(q / std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("unreachable target raises NoRoot") {
    const OpticalLatticeModel m(0.2, 0.0);
    CHECK_THROWS_AS(predict_control(m, "lam", 4, 1e6), NoRootError);
  }
  SUBCASE("unsupported order rejected") {
    const MathieuModel m(0.3, 0.0);
    CHECK_THROWS_AS(predict_control(m, "alpha4_dc", 5, 0.1), UnsupportedOrderError);
  }
}

TEST_CASE("lattice truncation stability: degree 9 vs 11") {
  const OpticalLatticeModel m(0.2, 0.53);
  const Real c4_9 = effective_force_of(m, 9).anharmonicity(4);
  const Real c4_11 = effective_force_of(m, 11).anharmonicity(4);
  CHECK(std::abs(c4_9 - c4_11) / std::abs(c4_11) < 1e-3);
}

TEST_CASE("lattice static mode carries the Bessel renormalization") {
  // c2 -> 2 V0 J0(2 lam) as V0 -> 0 (the 1/Omega^2 corrections are O(V0^2)).
  const Real v0 = 1e-4, lam = 0.53;
  const OpticalLatticeModel m(v0, lam);
  const auto eff = effective_force_of(m, 13);
  const Real j0 = std::cyl_bessel_j(0.0, 2 * lam);
  CHECK(eff.c2 == doctest::Approx(2 * v0 * j0).epsilon(1e-3));
}

TEST_CASE("non-canonical field rejected") {
  FourierVectorField field;
  field.mode(0).u_comp = Poly2::monomial(1, 0, 1.0);  // udot = u, not v
  field.mode(0).v_comp = Poly2::monomial(1, 0, -1.0);
  CHECK_THROWS_AS(effective_force_2nd_order(field, 2.0), NonCanonicalError);
}

TEST_CASE("anharmonicity extraction requires a confining well") {
  EffectiveForcePolynomial eff;
  eff.c2 = -0.1;
  CHECK_THROWS_AS(eff.anharmonicities(), InvalidArgument);
}
