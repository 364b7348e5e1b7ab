#pragma once

// Two-frequency harmonic basis and the multidimensional DFT (MDFT) operator.
//
// A trial function u(xi, zeta) = sum_{(m,k)} A_mk cos(k*omega*xi + m*Omega*zeta + theta)
// is sampled on a rectangular pseudo-time grid. Because the grid points are
// xi_s = 2*pi*s/(omega*M_xi) and zeta_p = 2*pi*p/(Omega*M_zeta), the sampled
// basis values reduce to pure phase expressions cos(2*pi*k*s/M_xi +
// 2*pi*m*p/M_zeta + theta) and the synthesis matrix is independent of the
// numeric frequencies. Only the second-derivative multipliers -(k*omega +
// m*Omega)^2 carry the frequency dependence.

#include <utility>
#include <vector>

#include "hbeng/types.hpp"

namespace hbeng {

/// Secular frequency omega and drive frequency Omega (normalized time).
struct FrequencyPair {
  Real omega = 1.0;
  Real Omega = 2.0;
};

/// One retained harmonic: frequency k*omega + m*Omega.
struct HarmonicIndex {
  int m = 0;
  int k = 0;
  friend bool operator==(const HarmonicIndex&, const HarmonicIndex&) = default;
};

/// Ordered set of retained (m, k) pairs. The core block runs m = -M..M,
/// k = 1..K (m-major, k-minor); an optional k = 0 row models a directly
/// forced response. At theta = 0 the k = 0 row is restricted to m >= 0
/// because cos(m*Omega*zeta) and cos(-m*Omega*zeta) coincide there.
class HarmonicIndexSet {
 public:
  HarmonicIndexSet() = default;

  static HarmonicIndexSet build(int M, int K, bool include_k0 = false, Real theta = 0.0);

  int size() const { return static_cast<int>(entries_.size()); }
  const HarmonicIndex& entry(int i) const { return entries_[static_cast<size_t>(i)]; }
  const std::vector<HarmonicIndex>& entries() const { return entries_; }

  int max_m() const { return max_m_; }
  int max_k() const { return max_k_; }
  bool has_k0_row() const { return has_k0_; }

  /// Position of (m, k) in vectorization order, or -1.
  int index_of(int m, int k) const;
  bool contains(int m, int k) const { return index_of(m, k) >= 0; }

  /// Position of the secular entry (0, 1); always present.
  int secular_index() const { return secular_index_; }

  /// Copy with the given entries removed (vectorization order preserved).
  HarmonicIndexSet without(const std::vector<HarmonicIndex>& removed) const;

  friend bool operator==(const HarmonicIndexSet&, const HarmonicIndexSet&) = default;

 private:
  std::vector<HarmonicIndex> entries_;
  int max_m_ = 0;
  int max_k_ = 0;
  bool has_k0_ = false;
  int secular_index_ = -1;

  void finalize();
};

/// Real amplitudes A_mk (vectorized in index-set order) plus the shared phase.
struct CoefficientTable {
  HarmonicIndexSet set;
  Vector amplitudes;
  Real theta = 0.0;

  CoefficientTable() = default;
  CoefficientTable(HarmonicIndexSet s, Real theta_in = 0.0)
      : set(std::move(s)), amplitudes(Vector::Zero(set.size())), theta(theta_in) {}

  Real& at(int m, int k);
  Real at(int m, int k) const;

  /// Trial-function value at pseudo-times (xi, zeta).
  Real value(Real xi, Real zeta, const FrequencyPair& freqs) const;
};

/// Rectangular sampling grid, stored in phase units 2*pi*s/M_xi, 2*pi*p/M_zeta.
class SamplingGrid {
 public:
  SamplingGrid() = default;

  /// Grid sizes must satisfy m_xi >= 2K+1, m_zeta >= 2M+1 for the index set
  /// they are used with unless allow_subnyquist is set.
  static SamplingGrid make(int m_xi, int m_zeta, bool allow_subnyquist = false);

  int m_xi() const { return m_xi_; }
  int m_zeta() const { return m_zeta_; }
  bool allow_subnyquist() const { return allow_subnyquist_; }
  int sample_count() const { return m_xi_ * m_zeta_; }

  Real xi_phase(int s) const { return xi_phases_[static_cast<size_t>(s)]; }
  Real zeta_phase(int p) const { return zeta_phases_[static_cast<size_t>(p)]; }

  /// Drive phase Omega*zeta_p for each grid row, in (s-major, p-minor) order.
  const Vector& drive_phases() const { return drive_phases_; }

  friend bool operator==(const SamplingGrid&, const SamplingGrid&) = default;

 private:
  int m_xi_ = 0;
  int m_zeta_ = 0;
  bool allow_subnyquist_ = false;
  std::vector<Real> xi_phases_;
  std::vector<Real> zeta_phases_;
  Vector drive_phases_;
};

/// Pairs of index-set entries whose sampled basis columns coincide (up to
/// sign) on the given grid. Predicted arithmetically from the congruences
/// k +- k' = 0 (mod m_xi), m +- m' = 0 (mod m_zeta).
std::vector<std::pair<HarmonicIndex, HarmonicIndex>> aliased_pairs(
    const HarmonicIndexSet& set, const SamplingGrid& grid, Real theta);

/// Index set with the higher-k member of each aliased pair removed.
/// Used by the paper-parity reproduction mode on sub-Nyquist grids.
HarmonicIndexSet drop_aliased(const HarmonicIndexSet& set, const SamplingGrid& grid, Real theta);

/// Sampled synthesis matrix S, its least-squares pseudo-inverse, and the
/// second-derivative multipliers. S and the projector depend only on the
/// grid phases and theta; d2 multipliers are recomputed per frequency.
class MdftOperator {
 public:
  MdftOperator(HarmonicIndexSet set, SamplingGrid grid, FrequencyPair freqs, Real theta);

  const Matrix& s_matrix() const { return s_; }
  const Matrix& projector() const { return projector_; }

  Vector d2_multipliers(const FrequencyPair& freqs) const;
  Vector d2_multipliers() const { return d2_multipliers(freqs_); }

  const HarmonicIndexSet& index_set() const { return set_; }
  const SamplingGrid& grid() const { return grid_; }
  Real theta() const { return theta_; }
  const FrequencyPair& freqs() const { return freqs_; }

 private:
  HarmonicIndexSet set_;
  SamplingGrid grid_;
  FrequencyPair freqs_;
  Real theta_ = 0.0;
  Matrix s_;
  Matrix projector_;
};

MdftOperator build_operator(const HarmonicIndexSet& set, const SamplingGrid& grid,
                            const FrequencyPair& freqs, Real theta);

/// u_hat = S * coeffs, in (s-major, p-minor) grid order.
Vector synthesize(const MdftOperator& op, const CoefficientTable& coeffs);
Vector synthesize(const MdftOperator& op, const Vector& amplitudes);

/// Least-squares projection of grid samples onto the harmonic columns.
CoefficientTable analyze(const MdftOperator& op, const Vector& samples);

/// Norm of the part of `samples` not representable in the basis.
Real projection_residual(const MdftOperator& op, const Vector& samples);

}  // namespace hbeng
