#pragma once

// Independent ground-truth machinery: an 8th-order Dormand-Prince integrator
// with dense output, trajectory deviation metrics, the monodromy-matrix
// characteristic exponent for the linear Mathieu limit, and exact period
// quadrature for conservative potentials.

#include <functional>
#include <utility>
#include <vector>

#include "hbeng/forward.hpp"
#include "hbeng/models.hpp"
#include "hbeng/types.hpp"

namespace hbeng {

class StepSizeUnderflow : public Error {
 public:
  using Error::Error;
};

/// (q, a) outside the stable region of the linear Mathieu equation.
class UnstableError : public Error {
 public:
  using Error::Error;
};

/// Potential is not strictly increasing on the requested interval.
class NonMonotonicError : public Error {
 public:
  using Error::Error;
};

/// Reference trajectory starts at u(0) = 0; deviation is undefined.
class ZeroReferenceError : public Error {
 public:
  using Error::Error;
};

struct IntegratorConfig {
  Real rel_tol = 1e-12;
  Real abs_tol = 1e-14;
  Real max_step = 0.0;  // 0: span length
  long max_steps = 2000000;
};

using OdeRhs = std::function<void(Real t, const Vector& y, Vector& dy)>;

/// Dense solution of an ODE integration; queryable at any time inside the
/// integration span via the scheme's 7th-order interpolant.
class Trajectory {
 public:
  Vector state(Real t) const;
  Real u(Real t) const { return component(t, 0); }
  Real v(Real t) const { return component(t, 1); }
  Real component(Real t, int i) const;

  Real t_begin() const { return t0_; }
  Real t_end() const { return t1_; }
  int dimension() const { return dim_; }
  long accepted_steps() const { return static_cast<long>(steps_.size()); }
  long rejected_steps() const { return rejected_; }
  long rhs_evaluations() const { return n_rhs_; }

 private:
  struct Step {
    Real t0, h;
    std::vector<Vector> rcont;  // 8 interpolation vectors
  };
  Real t0_ = 0, t1_ = 0;
  int dim_ = 0;
  long rejected_ = 0, n_rhs_ = 0;
  std::vector<Step> steps_;

  int find_step(Real t) const;
  friend Trajectory integrate_ode(const OdeRhs&, Vector, Real, Real, const IntegratorConfig&);
};

/// Adaptive integration with dense output over [t0, t1].
Trajectory integrate_ode(const OdeRhs& rhs, Vector y0, Real t0, Real t1,
                         const IntegratorConfig& config = {});

/// Driven-oscillator convenience wrapper: integrates u'' = accel(u, 2*xi).
Trajectory integrate(const DriveModel& model, Real u0, Real v0, Real xi0, Real xi1,
                     const IntegratorConfig& config = {});

/// Fixed-step 8th-order core (no error control); for convergence-order tests.
Vector integrate_fixed_step(const OdeRhs& rhs, Vector y0, Real t0, Real t1, long n_steps);

/// Phase-consistent ODE initial conditions at xi = 0 for an HB solution:
/// u0 = sum A_mk cos(theta), v0 = -sum A_mk (k w + m W) sin(theta).
std::pair<Real, Real> initial_state_from_solution(const HbSolution& sol);

struct DeviationReport {
  std::vector<std::pair<Real, Real>> samples;  // (xi, |du/u(0)|)
  Real max_dev = 0.0;
  Real xi_max = 0.0;
};

/// |u_ref(xi) - u_test(xi)| / |u_ref(0)| on a uniform grid over (0, xi_max].
DeviationReport deviation(const std::function<Real(Real)>& u_ref,
                          const std::function<Real(Real)>& u_test, Real xi_max,
                          int n_samples = 4000);

/// One-period monodromy matrix of u'' + (a - 2 q cos 2 xi) u = 0.
Eigen::Matrix2d monodromy(Real q, Real a, const IntegratorConfig& config = {});

/// Characteristic exponent beta = 2*omega/Omega from the monodromy trace.
Real characteristic_exponent(Real q, Real a, const IntegratorConfig& config = {});

/// Exact angular frequency at amplitude A in the symmetric well V(u), from
/// T(A) = 4 * integral_0^A du / sqrt(2 (V(A) - V(u))). The substitution
/// u = A sin(phi) removes the endpoint singularity; `divided_difference`
/// must return (V(x) - V(y)) / (x - y) and is the numerically stable route
/// for polynomial potentials.
Real period_quadrature(const std::function<Real(Real, Real)>& divided_difference, Real A);

Real period_quadrature(const TargetPotential& potential, Real omega0, Real A);

/// Generic potential overload (naive divided difference).
Real period_quadrature(const std::function<Real(Real)>& potential, Real A);

}  // namespace hbeng
