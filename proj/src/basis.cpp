#include "hbeng/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hbeng {

namespace {
constexpr Real kTwoPi = 2.0 * std::numbers::pi;
}

// ---------------------------------------------------------------------------
// HarmonicIndexSet
// ---------------------------------------------------------------------------

HarmonicIndexSet HarmonicIndexSet::build(int M, int K, bool include_k0, Real theta) {
  if (M < 0) throw InvalidArgument("HarmonicIndexSet: M must be >= 0");
  if (K < 1) throw InvalidArgument("HarmonicIndexSet: K must be >= 1");
  HarmonicIndexSet set;
  set.entries_.reserve(static_cast<size_t>((2 * M + 1) * K + M + 1));
  for (int m = -M; m <= M; ++m)
    for (int k = 1; k <= K; ++k) set.entries_.push_back({m, k});
  if (include_k0) {
    const int m_lo = (theta == 0.0) ? 0 : -M;
    for (int m = m_lo; m <= M; ++m) set.entries_.push_back({m, 0});
    set.has_k0_ = true;
  }
  set.finalize();
  return set;
}

void HarmonicIndexSet::finalize() {
  if (entries_.empty()) throw InvalidArgument("HarmonicIndexSet: empty set");
  max_m_ = 0;
  max_k_ = 0;
  secular_index_ = -1;
  for (size_t i = 0; i < entries_.size(); ++i) {
    max_m_ = std::max(max_m_, std::abs(entries_[i].m));
    max_k_ = std::max(max_k_, entries_[i].k);
    if (entries_[i].m == 0 && entries_[i].k == 1) secular_index_ = static_cast<int>(i);
    for (size_t j = i + 1; j < entries_.size(); ++j)
      if (entries_[i] == entries_[j]) throw InvalidArgument("HarmonicIndexSet: duplicate entry");
    if (entries_[i].k < 0) throw InvalidArgument("HarmonicIndexSet: k must be >= 0");
  }
  if (secular_index_ < 0) throw InvalidArgument("HarmonicIndexSet: (0,1) entry is required");
}

int HarmonicIndexSet::index_of(int m, int k) const {
  for (size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].m == m && entries_[i].k == k) return static_cast<int>(i);
  return -1;
}

HarmonicIndexSet HarmonicIndexSet::without(const std::vector<HarmonicIndex>& removed) const {
  HarmonicIndexSet out;
  out.has_k0_ = has_k0_;
  for (const auto& e : entries_)
    if (std::find(removed.begin(), removed.end(), e) == removed.end()) out.entries_.push_back(e);
  out.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// CoefficientTable
// ---------------------------------------------------------------------------

Real& CoefficientTable::at(int m, int k) {
  const int i = set.index_of(m, k);
  if (i < 0) throw InvalidArgument("CoefficientTable: no such harmonic");
  return amplitudes[i];
}

Real CoefficientTable::at(int m, int k) const {
  const int i = set.index_of(m, k);
  if (i < 0) throw InvalidArgument("CoefficientTable: no such harmonic");
  return amplitudes[i];
}

Real CoefficientTable::value(Real xi, Real zeta, const FrequencyPair& freqs) const {
  Real u = 0.0;
  for (int i = 0; i < set.size(); ++i) {
    const auto& e = set.entry(i);
    u += amplitudes[i] * std::cos(e.k * freqs.omega * xi + e.m * freqs.Omega * zeta + theta);
  }
  return u;
}

// ---------------------------------------------------------------------------
// SamplingGrid
// ---------------------------------------------------------------------------

SamplingGrid SamplingGrid::make(int m_xi, int m_zeta, bool allow_subnyquist) {
  if (m_xi < 1 || m_zeta < 1) throw InvalidArgument("SamplingGrid: sizes must be >= 1");
  SamplingGrid g;
  g.m_xi_ = m_xi;
  g.m_zeta_ = m_zeta;
  g.allow_subnyquist_ = allow_subnyquist;
  g.xi_phases_.resize(static_cast<size_t>(m_xi));
  g.zeta_phases_.resize(static_cast<size_t>(m_zeta));
  for (int s = 0; s < m_xi; ++s) g.xi_phases_[static_cast<size_t>(s)] = kTwoPi * (s + 1) / m_xi;
  for (int p = 0; p < m_zeta; ++p) g.zeta_phases_[static_cast<size_t>(p)] = kTwoPi * (p + 1) / m_zeta;
  g.drive_phases_.resize(m_xi * m_zeta);
  int row = 0;
  for (int s = 0; s < m_xi; ++s)
    for (int p = 0; p < m_zeta; ++p) g.drive_phases_[row++] = g.zeta_phases_[static_cast<size_t>(p)];
  return g;
}

// ---------------------------------------------------------------------------
// Alias detection
// ---------------------------------------------------------------------------

std::vector<std::pair<HarmonicIndex, HarmonicIndex>> aliased_pairs(const HarmonicIndexSet& set,
                                                                   const SamplingGrid& grid,
                                                                   Real theta) {
  std::vector<std::pair<HarmonicIndex, HarmonicIndex>> pairs;
  const int mx = grid.m_xi();
  const int mz = grid.m_zeta();
  auto mod0 = [](int a, int n) { return ((a % n) + n) % n == 0; };
  for (int i = 0; i < set.size(); ++i) {
    for (int j = i + 1; j < set.size(); ++j) {
      const auto& a = set.entry(i);
      const auto& b = set.entry(j);
      const bool same = mod0(a.k - b.k, mx) && mod0(a.m - b.m, mz);
      // The mirrored congruence gives cos(x + theta) == cos(-x + theta) only
      // at theta = 0 (mod pi).
      const bool mirrored = mod0(a.k + b.k, mx) && mod0(a.m + b.m, mz) &&
                            std::abs(std::sin(theta)) < 1e-15;
      if (same || mirrored) pairs.emplace_back(a, b);
    }
  }
  return pairs;
}

HarmonicIndexSet drop_aliased(const HarmonicIndexSet& set, const SamplingGrid& grid, Real theta) {
  std::vector<HarmonicIndex> removed;
  for (const auto& [a, b] : aliased_pairs(set, grid, theta)) {
    const HarmonicIndex victim = (b.k > a.k || (b.k == a.k && std::abs(b.m) >= std::abs(a.m))) ? b : a;
    if (std::find(removed.begin(), removed.end(), victim) == removed.end()) removed.push_back(victim);
  }
  return removed.empty() ? set : set.without(removed);
}

// ---------------------------------------------------------------------------
// MdftOperator
// ---------------------------------------------------------------------------

MdftOperator::MdftOperator(HarmonicIndexSet set, SamplingGrid grid, FrequencyPair freqs, Real theta)
    : set_(std::move(set)), grid_(std::move(grid)), freqs_(freqs), theta_(theta) {
  if (freqs_.omega <= 0.0 || freqs_.Omega <= 0.0)
    throw InvalidArgument("MdftOperator: frequencies must be positive");
  if (!grid_.allow_subnyquist() &&
      (grid_.m_xi() < 2 * set_.max_k() + 1 || grid_.m_zeta() < 2 * set_.max_m() + 1)) {
    std::ostringstream msg;
    msg << "SamplingGrid " << grid_.m_xi() << "x" << grid_.m_zeta()
        << " is below the Nyquist guardrail (need >= " << 2 * set_.max_k() + 1 << "x"
        << 2 * set_.max_m() + 1 << "); pass allow_subnyquist to override";
    throw GridError(msg.str());
  }

  const int rows = grid_.sample_count();
  const int cols = set_.size();
  s_.resize(rows, cols);
  int row = 0;
  for (int s = 0; s < grid_.m_xi(); ++s) {
    const Real xs = grid_.xi_phase(s);
    for (int p = 0; p < grid_.m_zeta(); ++p, ++row) {
      const Real zp = grid_.zeta_phase(p);
      for (int j = 0; j < cols; ++j) {
        const auto& e = set_.entry(j);
        s_(row, j) = std::cos(e.k * xs + e.m * zp + theta_);
      }
    }
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(s_);
  qr.setThreshold(1e-8);
  if (qr.rank() < cols) {
    const auto pairs = aliased_pairs(set_, grid_, theta_);
    std::ostringstream msg;
    msg << "MDFT matrix is rank deficient (rank " << qr.rank() << " of " << cols << ")";
    if (!pairs.empty()) {
      msg << "; aliased column pairs:";
      for (const auto& [a, b] : pairs)
        msg << " (" << a.m << "," << a.k << ")~(" << b.m << "," << b.k << ")";
    }
    throw RankDeficientError(msg.str());
  }
  // Least-squares pseudo-inverse, computed once via the same factorization.
  projector_ = qr.solve(Matrix::Identity(rows, rows));
}

Vector MdftOperator::d2_multipliers(const FrequencyPair& freqs) const {
  Vector d2(set_.size());
  for (int i = 0; i < set_.size(); ++i) {
    const auto& e = set_.entry(i);
    const Real w = e.k * freqs.omega + e.m * freqs.Omega;
    d2[i] = -w * w;
  }
  return d2;
}

MdftOperator build_operator(const HarmonicIndexSet& set, const SamplingGrid& grid,
                            const FrequencyPair& freqs, Real theta) {
  return MdftOperator(set, grid, freqs, theta);
}

Vector synthesize(const MdftOperator& op, const Vector& amplitudes) {
  if (amplitudes.size() != op.index_set().size())
    throw DimensionError("synthesize: coefficient count does not match operator");
  return op.s_matrix() * amplitudes;
}

Vector synthesize(const MdftOperator& op, const CoefficientTable& coeffs) {
  if (!(coeffs.set == op.index_set()))
    throw DimensionError("synthesize: index set does not match operator");
  return synthesize(op, coeffs.amplitudes);
}

CoefficientTable analyze(const MdftOperator& op, const Vector& samples) {
  if (samples.size() != op.grid().sample_count())
    throw DimensionError("analyze: sample count does not match grid");
  CoefficientTable out(op.index_set(), op.theta());
  out.amplitudes = op.projector() * samples;
  return out;
}

Real projection_residual(const MdftOperator& op, const Vector& samples) {
  const Vector coeffs = op.projector() * samples;
  return (samples - op.s_matrix() * coeffs).norm();
}

}  // namespace hbeng
