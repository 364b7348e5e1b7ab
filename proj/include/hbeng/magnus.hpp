#pragma once

// Second-order Floquet-Magnus effective-force computation on polynomial
// phase-space vector fields, anharmonicity extraction, and perturbative
// control-parameter prediction.
//
// Fields are pairs of exact bivariate polynomials in (u, v) describing
// udot = f_u(u, v), vdot = f_v(u, v). The drive enters through a finite
// Fourier-mode family F(phi, t) = sum_m F_m(phi) exp(-i m Omega t); cosine
// drives give real, m-symmetric modes, which is all the built-in models use.

#include <map>
#include <string_view>

#include "hbeng/models.hpp"
#include "hbeng/types.hpp"

namespace hbeng {

/// F_eff's first phase-space component failed to reduce to v, or its force
/// component violated the expected parity; signals a convention error.
class NonCanonicalError : public Error {
 public:
  using Error::Error;
};

/// No sign change of C_k(control) - target inside the scanned bracket.
class NoRootError : public Error {
 public:
  using Error::Error;
};

/// Requested anharmonic order outside the implemented set {4, 6, 8}.
class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

/// Bivariate polynomial with exact coefficient arithmetic. coeff(i, j) is
/// the coefficient of u^i v^j.
class Poly2 {
 public:
  Poly2() : c_(Matrix::Zero(1, 1)) {}

  static Poly2 zero() { return Poly2(); }
  static Poly2 monomial(int u_pow, int v_pow, Real coeff);

  Real coeff(int u_pow, int v_pow) const;
  void set_coeff(int u_pow, int v_pow, Real value);

  int u_degree() const { return static_cast<int>(c_.rows()) - 1; }
  int v_degree() const { return static_cast<int>(c_.cols()) - 1; }
  bool is_zero() const;

  Poly2 du() const;  // d/du
  Poly2 dv() const;  // d/dv

  Real evaluate(Real u, Real v) const;

  Poly2 operator-() const;
  Poly2& operator+=(const Poly2& o);
  Poly2& operator-=(const Poly2& o);
  friend Poly2 operator+(Poly2 a, const Poly2& b) { return a += b; }
  friend Poly2 operator-(Poly2 a, const Poly2& b) { return a -= b; }
  friend Poly2 operator*(const Poly2& a, const Poly2& b);
  friend Poly2 operator*(Real s, Poly2 p);

  /// Drops coefficients with |c| below the absolute threshold.
  Poly2& trim(Real threshold = 0.0);

 private:
  Matrix c_;
  void grow_to(int rows, int cols);
};

/// Phase-space vector field (udot, vdot) with polynomial components.
struct PolyVectorField {
  Poly2 u_comp;
  Poly2 v_comp;

  bool is_zero() const { return u_comp.is_zero() && v_comp.is_zero(); }
};

/// [f, g]_i = sum_j (f_j d_j g_i - g_j d_j f_i).
PolyVectorField lie_bracket(const PolyVectorField& f, const PolyVectorField& g);

/// Finite Fourier-mode family; mode(0) is the static part.
class FourierVectorField {
 public:
  PolyVectorField& mode(int m) { return modes_[m]; }
  const PolyVectorField* find(int m) const;
  const std::map<int, PolyVectorField>& modes() const { return modes_; }

 private:
  std::map<int, PolyVectorField> modes_;
};

/// Odd effective force F_eff(u) = -(c2 u + c4 u^3 + c6 u^5 + c8 u^7).
struct EffectiveForcePolynomial {
  Real c2 = 0.0;  // omega0^2
  Real c4 = 0.0;  // cubic coefficient
  Real c6 = 0.0;  // quintic
  Real c8 = 0.0;  // septic

  Real omega0_sq() const { return c2; }

  /// C_4 = c4/(2 c2), C_6 = c6/(3 c2), C_8 = c8/(4 c2); requires c2 > 0.
  std::map<int, Real> anharmonicities() const;
  Real anharmonicity(int k) const;
};

/// Second-order high-frequency effective force. The static mode plus the
/// first-order commutator sum (which vanishes for cosine drives) plus the
/// 1/Omega^2 double-bracket terms. The sign of the second-order block is
/// fixed by the classical pseudopotential limit (linear Mathieu at a = 0
/// must give F_eff = -(q^2/2) u); see the lie-bracket tests.
EffectiveForcePolynomial effective_force_2nd_order(const FourierVectorField& field, Real Omega);

/// Polynomial Fourier-mode decomposition of a drive model. The lattice sine
/// is Taylor-truncated to the given odd degree.
FourierVectorField fourier_field_of(const DriveModel& model, int lattice_degree = 9);

struct MagnusPrediction {
  Real control = 0.0;
  Real beta_fm = 0.0;  // sqrt(c2), normalized units (Omega = 2)
  std::map<int, Real> c_k;
};

/// 1D root solve of C_k(control) = target over the model's scan range.
MagnusPrediction predict_control(const DriveModel& model, std::string_view control, int k,
                                 Real target, int lattice_degree = 9);

/// Effective-force summary at the model's current parameters.
EffectiveForcePolynomial effective_force_of(const DriveModel& model, int lattice_degree = 9);

}  // namespace hbeng
