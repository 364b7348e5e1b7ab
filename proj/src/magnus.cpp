#include "hbeng/magnus.hpp"

#include <algorithm>
#include <cmath>

namespace hbeng {

// ---------------------------------------------------------------------------
// Poly2
// ---------------------------------------------------------------------------

void Poly2::grow_to(int rows, int cols) {
  if (rows <= c_.rows() && cols <= c_.cols()) return;
  Matrix bigger = Matrix::Zero(std::max<Eigen::Index>(rows, c_.rows()),
                               std::max<Eigen::Index>(cols, c_.cols()));
  bigger.topLeftCorner(c_.rows(), c_.cols()) = c_;
  c_ = std::move(bigger);
}

Poly2 Poly2::monomial(int u_pow, int v_pow, Real coeff) {
  Poly2 p;
  p.grow_to(u_pow + 1, v_pow + 1);
  p.c_(u_pow, v_pow) = coeff;
  return p;
}

Real Poly2::coeff(int u_pow, int v_pow) const {
  if (u_pow >= c_.rows() || v_pow >= c_.cols()) return 0.0;
  return c_(u_pow, v_pow);
}

void Poly2::set_coeff(int u_pow, int v_pow, Real value) {
  grow_to(u_pow + 1, v_pow + 1);
  c_(u_pow, v_pow) = value;
}

bool Poly2::is_zero() const { return c_.cwiseAbs().maxCoeff() == 0.0; }

Poly2 Poly2::du() const {
  if (c_.rows() <= 1) return Poly2();
  Poly2 out;
  out.c_ = Matrix::Zero(c_.rows() - 1, c_.cols());
  for (Eigen::Index i = 1; i < c_.rows(); ++i) out.c_.row(i - 1) = static_cast<Real>(i) * c_.row(i);
  return out;
}

Poly2 Poly2::dv() const {
  if (c_.cols() <= 1) return Poly2();
  Poly2 out;
  out.c_ = Matrix::Zero(c_.rows(), c_.cols() - 1);
  for (Eigen::Index j = 1; j < c_.cols(); ++j) out.c_.col(j - 1) = static_cast<Real>(j) * c_.col(j);
  return out;
}

Real Poly2::evaluate(Real u, Real v) const {
  Real sum = 0.0;
  for (Eigen::Index i = c_.rows() - 1; i >= 0; --i) {
    Real row = 0.0;
    for (Eigen::Index j = c_.cols() - 1; j >= 0; --j) row = row * v + c_(i, j);
    sum = sum * u + row;
  }
  return sum;
}

Poly2 Poly2::operator-() const {
  Poly2 out = *this;
  out.c_ = -out.c_;
  return out;
}

Poly2& Poly2::operator+=(const Poly2& o) {
  grow_to(static_cast<int>(o.c_.rows()), static_cast<int>(o.c_.cols()));
  c_.topLeftCorner(o.c_.rows(), o.c_.cols()) += o.c_;
  return *this;
}

Poly2& Poly2::operator-=(const Poly2& o) {
  grow_to(static_cast<int>(o.c_.rows()), static_cast<int>(o.c_.cols()));
  c_.topLeftCorner(o.c_.rows(), o.c_.cols()) -= o.c_;
  return *this;
}

Poly2 operator*(const Poly2& a, const Poly2& b) {
  Poly2 out;
  out.c_ = Matrix::Zero(a.c_.rows() + b.c_.rows() - 1, a.c_.cols() + b.c_.cols() - 1);
  for (Eigen::Index i = 0; i < a.c_.rows(); ++i)
    for (Eigen::Index j = 0; j < a.c_.cols(); ++j) {
      if (a.c_(i, j) == 0.0) continue;
      out.c_.block(i, j, b.c_.rows(), b.c_.cols()) += a.c_(i, j) * b.c_;
    }
  return out;
}

Poly2 operator*(Real s, Poly2 p) {
  p.c_ *= s;
  return p;
}

Poly2& Poly2::trim(Real threshold) {
  Eigen::Index max_r = 0, max_c = 0;
  for (Eigen::Index i = 0; i < c_.rows(); ++i)
    for (Eigen::Index j = 0; j < c_.cols(); ++j) {
      if (std::abs(c_(i, j)) <= threshold) c_(i, j) = 0.0;
      if (c_(i, j) != 0.0) {
        max_r = std::max(max_r, i);
        max_c = std::max(max_c, j);
      }
    }
  c_ = Matrix(c_.topLeftCorner(max_r + 1, max_c + 1));
  return *this;
}

// ---------------------------------------------------------------------------
// Lie bracket
// ---------------------------------------------------------------------------

PolyVectorField lie_bracket(const PolyVectorField& f, const PolyVectorField& g) {
  auto directional = [](const PolyVectorField& a, const Poly2& target) {
    return a.u_comp * target.du() + a.v_comp * target.dv();
  };
  PolyVectorField out;
  out.u_comp = directional(f, g.u_comp) - directional(g, f.u_comp);
  out.v_comp = directional(f, g.v_comp) - directional(g, f.v_comp);
  return out;
}

const PolyVectorField* FourierVectorField::find(int m) const {
  auto it = modes_.find(m);
  return it == modes_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Effective force
// ---------------------------------------------------------------------------

EffectiveForcePolynomial effective_force_2nd_order(const FourierVectorField& field, Real Omega) {
  if (Omega <= 0.0) throw InvalidArgument("effective_force_2nd_order: Omega must be positive");
  const PolyVectorField* f0 = field.find(0);
  if (!f0) throw InvalidArgument("effective_force_2nd_order: static mode m = 0 is required");

  PolyVectorField eff = *f0;

  // First-order commutator sum; identically zero for cosine drives
  // (F_{-m} = F_m), kept for structural completeness.
  for (const auto& [m, fm] : field.modes()) {
    if (m == 0) continue;
    const PolyVectorField* fmm = field.find(-m);
    if (!fmm) continue;
    PolyVectorField br = lie_bracket(*fmm, fm);
    eff.u_comp += (1.0 / (2.0 * m * Omega)) * br.u_comp;
    eff.v_comp += (1.0 / (2.0 * m * Omega)) * br.v_comp;
  }

  // Second-order double-bracket block. Written with an overall minus sign
  // relative to the quantum van-Vleck form: the classical generator picks up
  // (i hbar)^2 per bracket pair, and the sign is anchored to the
  // pseudopotential limit beta^2 = a + q^2/2.
  for (const auto& [m, fm] : field.modes()) {
    if (m == 0) continue;
    const PolyVectorField* fmm = field.find(-m);
    if (fmm) {
      PolyVectorField inner = lie_bracket(*f0, fm);
      PolyVectorField br = lie_bracket(*fmm, inner);
      const Real w = -1.0 / (2.0 * (m * Omega) * (m * Omega));
      eff.u_comp += w * br.u_comp;
      eff.v_comp += w * br.v_comp;
    }
    for (const auto& [n, fn_unused] : field.modes()) {
      if (n == 0 || n == m) continue;
      const PolyVectorField* fmn = field.find(-n);
      const PolyVectorField* fnm = field.find(n - m);
      if (!fmn || !fnm) continue;
      PolyVectorField inner = lie_bracket(*fnm, fm);
      PolyVectorField br = lie_bracket(*fmn, inner);
      const Real w = -1.0 / (3.0 * n * m * Omega * Omega);
      eff.u_comp += w * br.u_comp;
      eff.v_comp += w * br.v_comp;
    }
  }

  // The first component must reduce to v.
  Poly2 u_check = eff.u_comp - Poly2::monomial(0, 1, 1.0);
  u_check.trim(1e-12);
  if (!u_check.is_zero())
    throw NonCanonicalError("effective force: first component does not reduce to v");

  // The force component must be odd in u and independent of v for the
  // parity-symmetric inputs handled here.
  Poly2 force = eff.v_comp;
  force.trim(1e-14);
  for (int j = 1; j <= force.v_degree(); ++j)
    for (int i = 0; i <= force.u_degree(); ++i)
      if (force.coeff(i, j) != 0.0)
        throw NonCanonicalError("effective force: velocity-dependent terms remain");
  for (int i = 0; i <= force.u_degree(); i += 2)
    if (force.coeff(i, 0) != 0.0)
      throw NonCanonicalError("effective force: even powers of u remain");

  EffectiveForcePolynomial out;
  out.c2 = -force.coeff(1, 0);
  out.c4 = -force.coeff(3, 0);
  out.c6 = -force.coeff(5, 0);
  out.c8 = -force.coeff(7, 0);
  return out;
}

std::map<int, Real> EffectiveForcePolynomial::anharmonicities() const {
  if (c2 <= 0.0)
    throw InvalidArgument("anharmonicity extraction requires a confining potential (c2 > 0)");
  return {{4, c4 / (2.0 * c2)}, {6, c6 / (3.0 * c2)}, {8, c8 / (4.0 * c2)}};
}

Real EffectiveForcePolynomial::anharmonicity(int k) const {
  const auto table = anharmonicities();
  auto it = table.find(k);
  if (it == table.end()) throw UnsupportedOrderError("anharmonicity order must be 4, 6 or 8");
  return it->second;
}

// ---------------------------------------------------------------------------
// Model decompositions
// ---------------------------------------------------------------------------

namespace {

/// Mathieu trap: F0 = (v, -h(u)), F_{+-1} = (0, q g(u)) with
/// g(u) = u + 2 a4 u^3 + 3 a6 u^5 + 4 a8 u^7 and
/// h(u) = a u + 2 t4 u^3 + 3 t6 u^5 + 4 t8 u^7.
FourierVectorField mathieu_field(const DriveModel& m) {
  FourierVectorField field;
  Poly2 g = Poly2::monomial(1, 0, 1.0);
  g += Poly2::monomial(3, 0, 2.0 * m.param("alpha4_ac"));
  g += Poly2::monomial(5, 0, 3.0 * m.param("alpha6_ac"));
  g += Poly2::monomial(7, 0, 4.0 * m.param("alpha8_ac"));
  Poly2 h = Poly2::monomial(1, 0, m.param("a"));
  h += Poly2::monomial(3, 0, 2.0 * m.param("alpha4_dc"));
  h += Poly2::monomial(5, 0, 3.0 * m.param("alpha6_dc"));
  h += Poly2::monomial(7, 0, 4.0 * m.param("alpha8_dc"));

  field.mode(0).u_comp = Poly2::monomial(0, 1, 1.0);
  field.mode(0).v_comp = -h;
  const Real q = m.param("q");
  field.mode(1).v_comp = q * g;
  field.mode(-1).v_comp = q * g;
  return field;
}

/// Shaken lattice: -V0 sin(2(u - lam cos phi)) Taylor-truncated in its
/// argument, then expanded into cos(t phi) harmonics via
/// cos^r = 2^(1-r) sum_t binom(r, (r-t)/2) cos(t phi).
FourierVectorField lattice_field(const DriveModel& m, int degree) {
  if (degree < 1 || degree % 2 == 0)
    throw InvalidArgument("lattice_field: truncation degree must be odd");
  const Real v0 = m.param("v0");
  const Real lam = m.param("lam");

  auto binom = [](int n, int k) -> Real {
    Real r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };

  // Force coefficients over monomials u^iu * c^r, c = cos(phi).
  std::map<std::pair<int, int>, Real> coef;
  Real fact = 1.0;
  for (int j = 1; j <= degree; j += 2) {
    fact *= j > 1 ? static_cast<Real>((j - 1) * j) : 1.0;
    const Real sj = ((j - 1) / 2 % 2 == 0 ? 1.0 : -1.0) / fact;
    // x^j with x = 2u - 2 lam c
    for (int r = 0; r <= j; ++r) {
      const Real cc = binom(j, r) * std::pow(2.0, j - r) * std::pow(-2.0 * lam, r) * sj;
      coef[{j - r, r}] += -v0 * cc;
    }
  }

  std::map<int, Poly2> harmonics;  // t -> g_t(u) with F = sum g_t cos(t phi)
  for (const auto& [key, cc] : coef) {
    const auto [iu, r] = key;
    for (int t = r % 2; t <= r; t += 2) {
      const Real w = (t == 0) ? binom(r, r / 2) / std::pow(2.0, r)
                              : binom(r, (r - t) / 2) / std::pow(2.0, r - 1);
      harmonics[t] += Poly2::monomial(iu, 0, cc * w);
    }
  }

  FourierVectorField field;
  field.mode(0).u_comp = Poly2::monomial(0, 1, 1.0);
  field.mode(0).v_comp = harmonics[0];
  for (const auto& [t, g] : harmonics) {
    if (t == 0) continue;
    Poly2 half = 0.5 * g;
    if (half.is_zero()) continue;
    field.mode(t).v_comp = half;
    field.mode(-t).v_comp = half;
  }
  return field;
}

}  // namespace

FourierVectorField fourier_field_of(const DriveModel& model, int lattice_degree) {
  if (model.name() == "mathieu") return mathieu_field(model);
  if (model.name() == "lattice") return lattice_field(model, lattice_degree);
  throw InvalidArgument("fourier_field_of: no polynomial decomposition for model " + model.name());
}

EffectiveForcePolynomial effective_force_of(const DriveModel& model, int lattice_degree) {
  return effective_force_2nd_order(fourier_field_of(model, lattice_degree), 2.0);
}

MagnusPrediction predict_control(const DriveModel& model, std::string_view control, int k,
                                 Real target, int lattice_degree) {
  if (k != 4 && k != 6 && k != 8)
    throw UnsupportedOrderError("predict_control: target order must be 4, 6 or 8");

  auto ck_at = [&](Real value) -> Real {
    auto m = model.clone();
    m->set_param(control, value);
    return effective_force_of(*m, lattice_degree).anharmonicity(k);
  };

  const auto [lo, hi] = model.control_scan_range(control);
  constexpr int kScanPoints = 240;
  Real a = lo, fa = std::numeric_limits<Real>::quiet_NaN();
  Real b = 0.0, fb = 0.0;
  bool bracketed = false;
  Real prev_x = 0.0, prev_f = std::numeric_limits<Real>::quiet_NaN();
  for (int i = 0; i <= kScanPoints; ++i) {
    const Real x = lo + (hi - lo) * i / kScanPoints;
    Real fx;
    try {
      fx = ck_at(x) - target;
    } catch (const Error&) {
      prev_f = std::numeric_limits<Real>::quiet_NaN();
      continue;
    }
    if (std::isfinite(prev_f) && prev_f * fx <= 0.0) {
      a = prev_x;
      fa = prev_f;
      b = x;
      fb = fx;
      bracketed = true;
      break;
    }
    prev_x = x;
    prev_f = fx;
  }
  if (!bracketed)
    throw NoRootError("predict_control: no sign change of C_k - target in the scan range");

  // Bisection/secant hybrid to ~1e-14 in the control.
  for (int it = 0; it < 200 && std::abs(b - a) > 1e-14 * std::max(1.0, std::abs(b)); ++it) {
    Real x = (fb != fa) ? b - fb * (b - a) / (fb - fa) : 0.5 * (a + b);
    if (!(std::min(a, b) < x && x < std::max(a, b))) x = 0.5 * (a + b);
    const Real fx = ck_at(x) - target;
    if (fa * fx <= 0.0) {
      b = x;
      fb = fx;
    } else {
      a = x;
      fa = fx;
    }
  }

  MagnusPrediction out;
  out.control = 0.5 * (a + b);
  auto m = model.clone();
  m->set_param(control, out.control);
  const auto eff = effective_force_of(*m, lattice_degree);
  out.beta_fm = std::sqrt(eff.omega0_sq());
  out.c_k = eff.anharmonicities();
  return out;
}

}  // namespace hbeng
