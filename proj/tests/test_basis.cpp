#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hbeng/basis.hpp"

using namespace hbeng;

namespace {

Vector random_coeffs(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("index set construction") {
  SUBCASE("minimal single-harmonic set") {
    const auto set = HarmonicIndexSet::build(0, 1);
    CHECK(set.size() == 1);
    CHECK(set.entry(0) == HarmonicIndex{0, 1});
    CHECK(set.secular_index() == 0);
  }
  SUBCASE("core block size (2M+1)K") {
    const auto set = HarmonicIndexSet::build(7, 8);
    CHECK(set.size() == 120);
    CHECK(set.contains(0, 1));
    CHECK(set.contains(-7, 8));
    CHECK(!set.contains(0, 0));
  }
  SUBCASE("k0 row at theta = 0 is restricted to m >= 0") {
    const auto set = HarmonicIndexSet::build(7, 8, true, 0.0);
    CHECK(set.size() == 128);
    CHECK(set.contains(0, 0));
    CHECK(set.contains(7, 0));
    CHECK(!set.contains(-1, 0));
  }
  SUBCASE("k0 row at theta != 0 keeps the full m range") {
    const auto set = HarmonicIndexSet::build(7, 8, true, 0.3);
    CHECK(set.size() == 135);
    CHECK(set.contains(-7, 0));
  }
  SUBCASE("K = 0 rejected") { CHECK_THROWS_AS(HarmonicIndexSet::build(3, 0), InvalidArgument); }
  SUBCASE("vectorization order is m-major, k-minor") {
    const auto set = HarmonicIndexSet::build(1, 2);
    CHECK(set.entry(0) == HarmonicIndex{-1, 1});
    CHECK(set.entry(1) == HarmonicIndex{-1, 2});
    CHECK(set.entry(5) == HarmonicIndex{1, 2});
  }
}

TEST_CASE("sampling grid guardrail") {
  const auto set = HarmonicIndexSet::build(7, 8);
  CHECK_THROWS_AS(MdftOperator(set, SamplingGrid::make(15, 15), FrequencyPair{}, 0.0), GridError);
  CHECK_NOTHROW(MdftOperator(set, SamplingGrid::make(17, 15), FrequencyPair{}, 0.0));
}

TEST_CASE("single-column operator") {
  const auto set = HarmonicIndexSet::build(0, 1);
  const auto grid = SamplingGrid::make(17, 15);
  const MdftOperator op(set, grid, FrequencyPair{1.0, 2.0}, 0.0);
  // cos(2 pi s / 17) replicated across the zeta axis
  for (int s = 0; s < 17; ++s)
    for (int p = 0; p < 15; ++p)
      CHECK(op.s_matrix()(s * 15 + p, 0) ==
            doctest::Approx(std::cos(2 * std::numbers::pi * (s + 1) / 17)).epsilon(1e-14));
  const Matrix eye = op.projector() * op.s_matrix();
  CHECK(std::abs(eye(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("sub-Nyquist 15x15 grid aliases (m,8) against (-m,7)") {
  const auto set = HarmonicIndexSet::build(7, 8);
  const auto grid = SamplingGrid::make(15, 15, true);

  const auto pairs = aliased_pairs(set, grid, 0.0);
  CHECK(pairs.size() == 15);  // one per m
  bool found = false;
  for (const auto& [a, b] : pairs)
    if ((a == HarmonicIndex{3, 7} && b == HarmonicIndex{-3, 8}) ||
        (a == HarmonicIndex{-3, 8} && b == HarmonicIndex{3, 7}))
      found = true;
  CHECK(found);

  try {
    MdftOperator op(set, grid, FrequencyPair{}, 0.0);
    FAIL("expected RankDeficientError");
  } catch (const RankDeficientError& e) {
    CHECK(std::string(e.what()).find("aliased column pairs") != std::string::npos);
  }

  // Dropping the aliased columns restores full rank: 15*7 = 105 columns.
  const auto reduced = drop_aliased(set, grid, 0.0);
  CHECK(reduced.size() == 105);
  CHECK(reduced.max_k() == 7);
  CHECK_NOTHROW(MdftOperator(reduced, grid, FrequencyPair{}, 0.0));
}

TEST_CASE("k0-row degeneracy at theta = 0") {
  // Hand-built set with the full m = -M..M k0 row: rank deficient at theta=0.
  auto full = HarmonicIndexSet::build(2, 2, true, 0.5);  // full row (theta != 0)
  CHECK(full.size() == 15);
  const auto grid = SamplingGrid::make(7, 7);
  CHECK_THROWS_AS(MdftOperator(full, grid, FrequencyPair{}, 0.0), RankDeficientError);
  CHECK_NOTHROW(MdftOperator(full, grid, FrequencyPair{}, 0.5));

  const auto restricted = HarmonicIndexSet::build(2, 2, true, 0.0);
  CHECK(restricted.size() == 13);
  CHECK_NOTHROW(MdftOperator(restricted, grid, FrequencyPair{}, 0.0));
}

TEST_CASE("round trip analyze(synthesize(x)) = x") {
  const auto set = HarmonicIndexSet::build(7, 8);
  const auto grid = SamplingGrid::make(17, 15);
  const MdftOperator op(set, grid, FrequencyPair{0.51, 2.0}, 0.0);

  const Matrix eye = op.projector() * op.s_matrix();
  CHECK((eye - Matrix::Identity(120, 120)).cwiseAbs().maxCoeff() < 1e-10);

  CoefficientTable x(set);
  x.amplitudes = random_coeffs(set.size(), 42);
  const Vector samples = synthesize(op, x);
  const CoefficientTable back = analyze(op, samples);
  CHECK((back.amplitudes - x.amplitudes).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("synthesize special cases") {
  const auto set = HarmonicIndexSet::build(2, 2);
  const auto grid = SamplingGrid::make(7, 7);
  const MdftOperator op(set, grid, FrequencyPair{}, 0.0);

  SUBCASE("all-zero coefficients give the zero vector") {
    CoefficientTable zero(set);
    CHECK(synthesize(op, zero).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("A01 alone gives a pure xi cosine") {
    CoefficientTable x(set);
    x.at(0, 1) = 1.0;
    const Vector u = synthesize(op, x);
    for (int s = 0; s < 7; ++s)
      for (int p = 0; p < 7; ++p)
        CHECK(u[s * 7 + p] ==
              doctest::Approx(std::cos(2 * std::numbers::pi * (s + 1) / 7)).epsilon(1e-14));
  }
  SUBCASE("dimension mismatch rejected") {
    CoefficientTable wrong(HarmonicIndexSet::build(1, 1));
    CHECK_THROWS_AS(synthesize(op, wrong), DimensionError);
    CHECK_THROWS_AS(analyze(op, Vector::Zero(5)), DimensionError);
  }
}

TEST_CASE("analyze of a basis column and of out-of-span input") {
  const auto set = HarmonicIndexSet::build(3, 2);
  const auto grid = SamplingGrid::make(9, 9);
  const MdftOperator op(set, grid, FrequencyPair{}, 0.0);

  SUBCASE("basis column maps to a unit coefficient") {
    const int j = set.index_of(3, 2);
    const Vector col = op.s_matrix().col(j);
    const CoefficientTable c = analyze(op, col);
    for (int i = 0; i < set.size(); ++i)
      CHECK(std::abs(c.amplitudes[i] - (i == j ? 1.0 : 0.0)) < 1e-10);
  }
  SUBCASE("constant vector is out of span without (0,0); residual reported") {
    const Vector ones = Vector::Ones(grid.sample_count());
    const CoefficientTable c = analyze(op, ones);
    // Least-squares fit of a constant onto zero-mean columns is zero.
    CHECK(c.amplitudes.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(projection_residual(op, ones) == doctest::Approx(ones.norm()).epsilon(1e-12));
  }
}

TEST_CASE("phase-grid property: s_matrix is independent of omega") {
  const auto set = HarmonicIndexSet::build(3, 4);
  const auto grid = SamplingGrid::make(11, 9);
  const MdftOperator a(set, grid, FrequencyPair{1.0, 2.0}, 0.0);
  const MdftOperator b(set, grid, FrequencyPair{2.37, 2.0}, 0.0);
  CHECK(a.s_matrix() == b.s_matrix());  // bit-identical
  CHECK(a.projector() == b.projector());
  CHECK(a.d2_multipliers() != b.d2_multipliers());
}

TEST_CASE("d2 multipliers match a finite difference of the real-time signal") {
  const auto set = HarmonicIndexSet::build(2, 3);
  const FrequencyPair freqs{0.73, 2.0};
  CoefficientTable x(set, 0.2);
  x.amplitudes = random_coeffs(set.size(), 7);

  // Second derivative along xi = zeta = t via the multipliers.
  auto u = [&](Real t) { return x.value(t, t, freqs); };
  auto udd = [&](Real t) {
    Real acc = 0.0;
    for (int i = 0; i < set.size(); ++i) {
      const auto& e = set.entry(i);
      const Real w = e.k * freqs.omega + e.m * freqs.Omega;
      acc += -w * w * x.amplitudes[i] * std::cos(w * t + x.theta);
    }
    return acc;
  };
  const Real h = 1e-4;
  for (const Real t : {0.3, 1.7, 4.1}) {
    const Real fd = (u(t + h) - 2 * u(t) + u(t - h)) / (h * h);
    CHECK(udd(t) == doctest::Approx(fd).epsilon(1e-6));
  }
}
