#pragma once

// Stacked inverse solves: N_c + 1 harmonic-balance blocks at distinct
// collocation amplitudes share the control vector alpha, the base frequency
// omega0, and the target amplitude-frequency relation
//   omega(A) = omega0 * (1 + sum_k eps_k A^k).
// Unknown layout: [block-0 free coefficients, ..., block-Nc free
// coefficients, omega0, alpha...], which is square at (N_c+1)*|set|.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hbeng/forward.hpp"
#include "hbeng/models.hpp"
#include "hbeng/types.hpp"

namespace hbeng {

class CountMismatchError : public Error {
 public:
  using Error::Error;
};

struct AmplitudeFrequencyTarget {
  std::map<int, Real> eps;  // even k >= 2

  /// 1 + sum_k eps_k A^k.
  Real kappa(Real a01) const;
};

/// First-order map from anharmonicities to frequency-shift coefficients:
/// eps2 = (3/4) C4, eps4 = (15/16) C6, eps6 = (35/32) C8.
AmplitudeFrequencyTarget eps_from_anharmonicity(const TargetPotential& target);

/// Inverse of the first-order map.
TargetPotential anharmonicity_from_eps(const AmplitudeFrequencyTarget& target);

struct InverseSeeds {
  Vector alpha;
  Real omega0 = 0.0;
  std::vector<CoefficientTable> blocks;  // optional; may be empty
};

struct StackedInverseProblem {
  std::shared_ptr<const DriveModel> model;
  std::vector<std::string> controls;
  std::vector<Real> block_a01;  // strictly increasing, count = N_c + 1
  Real theta = 0.0;
  Real Omega = 2.0;
  HarmonicIndexSet set;
  SamplingGrid grid;
  AmplitudeFrequencyTarget target;
  std::optional<InverseSeeds> seeds;
};

struct InverseSolution {
  Vector alpha;
  Real omega0 = 0.0;
  std::vector<HbSolution> blocks;
  Real residual_norm = std::numeric_limits<Real>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<Real> residual_trace;
};

/// Residual/Jacobian evaluator on the packed stacked unknown vector.
class StackedSystem {
 public:
  explicit StackedSystem(const StackedInverseProblem& problem);

  int block_count() const { return static_cast<int>(problem_.block_a01.size()); }
  int unknown_count() const;

  Vector residual(const Vector& unknowns) const;
  Matrix jacobian(const Vector& unknowns) const;

  Vector pack(const std::vector<CoefficientTable>& blocks, Real omega0, const Vector& alpha) const;
  void unpack(const Vector& unknowns, std::vector<CoefficientTable>& blocks, Real& omega0,
              Vector& alpha) const;

  const MdftOperator& op() const { return op_; }
  const StackedInverseProblem& problem() const { return problem_; }

 private:
  StackedInverseProblem problem_;
  MdftOperator op_;
  std::vector<int> free_indices_;
  std::vector<Real> kappa_;

  std::unique_ptr<DriveModel> model_at(const Vector& alpha) const;
};

Vector assemble_stacked(const StackedInverseProblem& problem, const Vector& unknowns);

InverseSolution solve_inverse(const StackedInverseProblem& problem,
                              const NewtonOptions& options = {});

struct VerificationRow {
  Real a01 = 0.0;
  Real target_shift = 0.0;
  Real achieved_shift = 0.0;
  Real rel_error = 0.0;  // |achieved - target| / max(|target|, floor)
};

/// Forward-solves the optimized model at each amplitude and compares the
/// achieved relative frequency shift against the target relation. Shifts are
/// normalized by a re-measured base frequency omega(A_min)/kappa(A_min) so
/// that the comparison is not limited by the stacked solve's own
/// frequency-resolution floor.
std::vector<VerificationRow> verify_target(const InverseSolution& sol,
                                           const StackedInverseProblem& problem,
                                           const std::vector<Real>& amplitudes);

}  // namespace hbeng
