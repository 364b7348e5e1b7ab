#pragma once

// Forward harmonic-balance solves: residual assembly in coefficient space,
// analytic Jacobian, damped Newton iteration, and parameter continuation.
//
// Unknown vector layout: [A_mk for every (m,k) != (0,1) in index-set order,
// omega]. The (0,1) amplitude is the prescribed input A01, so the system is
// square: |set| equations in |set| unknowns.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hbeng/basis.hpp"
#include "hbeng/models.hpp"
#include "hbeng/types.hpp"

namespace hbeng {

struct ForwardProblem {
  std::shared_ptr<const DriveModel> model;
  HarmonicIndexSet set;
  SamplingGrid grid;
  Real a01 = 0.0;
  Real theta = 0.0;
  Real Omega = 2.0;
  Real omega_guess = 0.0;  // 0: use the model's seed
  std::optional<CoefficientTable> coeff_guess;
};

struct NewtonOptions {
  Real tol = 1e-10;
  int max_iterations = 100;
  int max_backtracks = 20;
  /// Keep iterating past tol while the residual still improves. Used by
  /// verification paths that need frequency resolution near the noise floor.
  bool polish = false;
  int max_polish_iterations = 12;
};

struct HbSolution {
  CoefficientTable coeffs;
  Real omega = 0.0;
  Real Omega = 2.0;
  Real beta = 0.0;  // 2*omega/Omega
  Real residual_norm = std::numeric_limits<Real>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<Real> residual_trace;
};

/// Caches the MDFT operator and exposes residual/Jacobian evaluations on the
/// packed unknown vector.
class ForwardSystem {
 public:
  explicit ForwardSystem(const ForwardProblem& problem);

  int unknown_count() const { return op_.index_set().size(); }

  Vector residual(const Vector& unknowns) const;
  Matrix jacobian(const Vector& unknowns) const;

  Vector pack(const CoefficientTable& coeffs, Real omega) const;
  std::pair<CoefficientTable, Real> unpack(const Vector& unknowns) const;
  Vector initial_guess() const;

  const MdftOperator& op() const { return op_; }
  const ForwardProblem& problem() const { return problem_; }

 private:
  ForwardProblem problem_;
  MdftOperator op_;
  std::vector<int> free_indices_;  // all coefficient positions except (0,1)

  Vector full_amplitudes(const Vector& unknowns) const;
  friend HbSolution solve_forward(const ForwardProblem&, const NewtonOptions&);
};

Vector assemble_residual(const ForwardProblem& problem, const Vector& unknowns);
Matrix jacobian(const ForwardProblem& problem, const Vector& unknowns);

HbSolution solve_forward(const ForwardProblem& problem, const NewtonOptions& options = {});

/// Sequential warm-started solves along `values` of a model parameter, or of
/// the prescribed amplitude when param_name == "a01". Failed points are
/// recorded (converged = false) without aborting the sweep.
std::vector<HbSolution> continue_in_parameter(const ForwardProblem& problem,
                                              const std::string& param_name,
                                              const std::vector<Real>& values,
                                              const NewtonOptions& options = {});

/// Forward solve with an automatic amplitude-continuation ladder. Large
/// prescribed amplitudes are reached by ramping a01 from a small value,
/// which keeps Newton on the branch connected to the linear limit.
HbSolution solve_forward_continued(const ForwardProblem& problem, Real a01_step = 0.025,
                                   const NewtonOptions& options = {});

/// Real-time reconstruction u(xi) = sum A_mk cos((k w + m W) xi + theta).
Real reconstruct_at(const HbSolution& sol, Real xi);
std::vector<Real> reconstruct_trajectory(const HbSolution& sol, const std::vector<Real>& xi);

/// True when two solutions lie on the same branch (coefficients within ctol,
/// frequency within wtol).
bool same_branch(const HbSolution& a, const HbSolution& b, Real ctol = 1e-8, Real wtol = 1e-10);

}  // namespace hbeng
