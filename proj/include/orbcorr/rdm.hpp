#pragma once

// Reduced states of mode subsets, the one-particle RDM and the
// natural-occupation measures built on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "orbcorr/fock.hpp"
#include "orbcorr/linalg.hpp"

namespace orbcorr {

class SymmetryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SsrMode { none = 0, parity = 1, number = 2 };

inline const char* to_string(SsrMode m) {
  switch (m) {
    case SsrMode::none: return "none";
    case SsrMode::parity: return "parity";
    case SsrMode::number: return "number";
  }
  return "?";
}

/// Bit of kept position `p` inside the dense index of a k-mode reduced space.
/// Pairs of positions (2q, 2q+1) form base-4 digits, first pair most
/// significant, so that a kept list (up_i, down_i, up_j, down_j) yields the
/// product basis {vacuum, up, down, up+down}_i (x) {...}_j. With odd k the
/// unpaired last position is the least significant bit.
inline int local_bit(int p, int k) {
  if (k % 2 == 1 && p == k - 1) return 0;
  return k - 2 - 2 * (p / 2) + (p % 2);
}

/// Density operator on the Fock space of an ordered list of modes.
///
/// Basis index i encodes occupations of `modes` via local_bit. The charge
/// flags record which quantities the operator is known to conserve; they
/// define the allowed-entry mask used by projections and the optimizer.
struct DensityMatrix {
  std::vector<int> modes;
  Matrix matrix;
  bool conserves_number = false;
  bool conserves_sz = false;
  bool conserves_parity = false;
  int split = -1;  // number of leading modes forming side A, or -1
  SsrMode ssr = SsrMode::none;

  int mode_count() const { return static_cast<int>(modes.size()); }
  Eigen::Index dim() const { return matrix.rows(); }

  bool occupied(Eigen::Index index, int position) const {
    return (static_cast<std::uint64_t>(index) >> local_bit(position, mode_count())) & 1U;
  }

  int particles(Eigen::Index index, int from, int to) const {
    int n = 0;
    for (int p = from; p < to; ++p) n += occupied(index, p);
    return n;
  }

  int twice_sz(Eigen::Index index) const {
    int s = 0;
    for (int p = 0; p < mode_count(); ++p) {
      if (occupied(index, p)) s += (modes[static_cast<std::size_t>(p)] % 2 == 0) ? 1 : -1;
    }
    return s;
  }

  /// Whether entry (r, c) may be nonzero given the recorded symmetries.
  bool allowed(Eigen::Index r, Eigen::Index c) const {
    const int k = mode_count();
    const int nr = particles(r, 0, k), nc = particles(c, 0, k);
    if (conserves_number && nr != nc) return false;
    if (conserves_parity && (nr - nc) % 2 != 0) return false;
    if (conserves_sz && twice_sz(r) != twice_sz(c)) return false;
    if (split >= 0 && ssr != SsrMode::none) {
      const int ar = particles(r, 0, split), ac = particles(c, 0, split);
      const int br = nr - ar, bc = nc - ac;
      if (ssr == SsrMode::number && (ar != ac || br != bc)) return false;
      if (ssr == SsrMode::parity && ((ar - ac) % 2 != 0 || (br - bc) % 2 != 0)) return false;
    }
    return true;
  }

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask() const {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m(dim(), dim());
    for (Eigen::Index r = 0; r < dim(); ++r)
      for (Eigen::Index c = 0; c < dim(); ++c) m(r, c) = allowed(r, c);
    return m;
  }

  /// Largest entry magnitude outside the allowed mask.
  double mask_violation() const {
    double v = 0.0;
    for (Eigen::Index r = 0; r < dim(); ++r)
      for (Eigen::Index c = 0; c < dim(); ++c)
        if (!allowed(r, c)) v = std::max(v, std::abs(matrix(r, c)));
    return v;
  }

  /// Zeroes entries outside the mask.
  void apply_mask() {
    for (Eigen::Index r = 0; r < dim(); ++r)
      for (Eigen::Index c = 0; c < dim(); ++c)
        if (!allowed(r, c)) matrix(r, c) = 0.0;
  }

  void validate(double tol = 1e-10) const {
    if (linalg::hermiticity_defect(matrix) > tol) throw SymmetryError("density matrix is not Hermitian");
    if (std::abs(matrix.trace() - 1.0) > tol) throw SymmetryError("density matrix trace differs from 1");
    if (linalg::eigh(linalg::hermitian_part(matrix)).values.minCoeff() < -tol) {
      throw SymmetryError("density matrix has a negative eigenvalue");
    }
  }
};

namespace detail {

// Sign of the reordering that moves the occupied modes of `occupied` (given in
// ascending global order) into the order defined by `rank`.
inline int reorder_sign(const std::vector<int>& ranks) {
  int inversions = 0;
  for (std::size_t a = 0; a < ranks.size(); ++a)
    for (std::size_t b = a + 1; b < ranks.size(); ++b)
      if (ranks[a] > ranks[b]) ++inversions;
  return inversions % 2 == 0 ? 1 : -1;
}

inline void check_kept(const std::vector<int>& kept, int mode_count) {
  std::vector<int> sorted = kept;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("kept modes contain duplicates");
  }
  for (int m : kept) OccupationConfig::check_mode(m, mode_count);
  if (kept.size() > 16) throw std::invalid_argument("too many kept modes for a dense reduced state");
}

}  // namespace detail

/// Reduced state of the ordered mode list `kept`.
///
/// Each configuration is first reordered so that its kept modes come first
/// (in the order given), followed by the traced modes in ascending order;
/// the sign of that reordering is the only fermionic sign involved. The
/// trailing factor is then traced out.
inline DensityMatrix mode_partial_trace(const StateVector& state, const std::vector<int>& kept) {
  const int d = state.mode_count();
  detail::check_kept(kept, d);
  const int k = static_cast<int>(kept.size());
  std::vector<int> kept_pos(static_cast<std::size_t>(d), -1);
  for (int p = 0; p < k; ++p) kept_pos[static_cast<std::size_t>(kept[static_cast<std::size_t>(p)])] = p;

  std::uint64_t traced_mask = 0;
  for (int m = 0; m < d; ++m)
    if (kept_pos[static_cast<std::size_t>(m)] < 0) traced_mask |= mode_bit(m, d);

  struct Entry {
    Eigen::Index local;
    cplx amp;
  };
  std::unordered_map<std::uint64_t, std::vector<Entry>> groups;
  const auto& basis = state.basis();
  const auto& amps = state.amplitudes();
  std::vector<int> ranks;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const cplx a = amps[static_cast<Eigen::Index>(i)];
    if (a == cplx{0.0, 0.0}) continue;
    const auto& c = basis[i];
    ranks.clear();
    std::uint64_t local = 0;
    for (int m : c.occupied_modes()) {
      const int p = kept_pos[static_cast<std::size_t>(m)];
      if (p >= 0) {
        ranks.push_back(p);
        local |= std::uint64_t{1} << local_bit(p, k);
      } else {
        ranks.push_back(k + m);
      }
    }
    const int sign = detail::reorder_sign(ranks);
    groups[c.bits() & traced_mask].push_back({static_cast<Eigen::Index>(local), a * static_cast<double>(sign)});
  }

  const Eigen::Index dim = Eigen::Index{1} << k;
  DensityMatrix out;
  out.modes = kept;
  out.matrix = Matrix::Zero(dim, dim);
  for (const auto& [key, entries] : groups) {
    for (const auto& x : entries)
      for (const auto& y : entries) out.matrix(x.local, y.local) += x.amp * std::conj(y.amp);
  }
  const auto& sector = basis.sector();
  out.conserves_number = sector.particle_count.has_value();
  out.conserves_sz = sector.twice_sz.has_value();
  out.conserves_parity = sector.particle_count.has_value() || sector.parity.has_value();
  return out;
}

/// Reduced state of a subset (in the given order) of a density matrix's modes.
inline DensityMatrix mode_partial_trace(const DensityMatrix& rho, const std::vector<int>& kept) {
  const int kin = rho.mode_count();
  std::vector<int> pos_of;  // kept position -> position in rho
  for (int m : kept) {
    auto it = std::find(rho.modes.begin(), rho.modes.end(), m);
    if (it == rho.modes.end()) throw std::invalid_argument("kept mode is not part of the density matrix");
    pos_of.push_back(static_cast<int>(it - rho.modes.begin()));
  }
  {
    std::vector<int> s = kept;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("kept modes contain duplicates");
  }
  const int k = static_cast<int>(kept.size());
  std::vector<int> kept_rank(static_cast<std::size_t>(kin), -1);
  for (int p = 0; p < k; ++p) kept_rank[static_cast<std::size_t>(pos_of[static_cast<std::size_t>(p)])] = p;

  const Eigen::Index din = rho.dim();
  std::vector<Eigen::Index> local(static_cast<std::size_t>(din));
  std::vector<std::uint64_t> traced(static_cast<std::size_t>(din));
  std::vector<int> sign(static_cast<std::size_t>(din));
  std::vector<int> ranks;
  for (Eigen::Index i = 0; i < din; ++i) {
    ranks.clear();
    std::uint64_t l = 0, t = 0;
    // Operator strings are ordered by position in rho.modes.
    for (int p = 0; p < kin; ++p) {
      if (!rho.occupied(i, p)) continue;
      const int r = kept_rank[static_cast<std::size_t>(p)];
      if (r >= 0) {
        ranks.push_back(r);
        l |= std::uint64_t{1} << local_bit(r, k);
      } else {
        ranks.push_back(k + p);
        t |= std::uint64_t{1} << p;
      }
    }
    local[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(l);
    traced[static_cast<std::size_t>(i)] = t;
    sign[static_cast<std::size_t>(i)] = detail::reorder_sign(ranks);
  }
  const Eigen::Index dim = Eigen::Index{1} << k;
  DensityMatrix out;
  out.modes = kept;
  out.matrix = Matrix::Zero(dim, dim);
  for (Eigen::Index r = 0; r < din; ++r)
    for (Eigen::Index c = 0; c < din; ++c) {
      const auto ur = static_cast<std::size_t>(r), uc = static_cast<std::size_t>(c);
      if (traced[ur] != traced[uc]) continue;
      out.matrix(local[ur], local[uc]) += static_cast<double>(sign[ur] * sign[uc]) * rho.matrix(r, c);
    }
  out.conserves_number = rho.conserves_number;
  out.conserves_sz = rho.conserves_sz;
  out.conserves_parity = rho.conserves_parity;
  return out;
}

/// Local occupation probabilities for {vacuum, up, down, up+down}.
struct OneOrbitalSpectrum {
  double p1 = 1.0, p2 = 0.0, p3 = 0.0, p4 = 0.0;

  std::array<double, 4> values() const { return {p1, p2, p3, p4}; }

  void validate(double tol = 1e-10) const {
    double s = 0.0;
    for (double p : values()) {
      if (p < -tol || p > 1.0 + tol) throw std::invalid_argument("orbital probability outside [0, 1]");
      s += p;
    }
    if (std::abs(s - 1.0) > tol) throw std::invalid_argument("orbital probabilities do not sum to 1");
  }
};

struct OneOrbitalRdm {
  DensityMatrix rho;
  OneOrbitalSpectrum spectrum;
};

inline void check_orbital(const StateVector& state, int orbital) {
  if (orbital < 0 || orbital >= state.orbital_count()) {
    throw std::invalid_argument("orbital " + std::to_string(orbital) + " out of range");
  }
}

inline OneOrbitalRdm one_orbital_rdm(const StateVector& state, int j) {
  check_orbital(state, j);
  DensityMatrix rho = mode_partial_trace(state, {mode_index(j, Spin::up), mode_index(j, Spin::down)});
  double off = 0.0;
  for (Eigen::Index r = 0; r < 4; ++r)
    for (Eigen::Index c = 0; c < 4; ++c)
      if (r != c) off = std::max(off, std::abs(rho.matrix(r, c)));
  if (off > 1e-8) {
    throw SymmetryError("one-orbital reduced state has off-diagonal weight " + std::to_string(off) +
                        "; the state does not conserve particle number and spin");
  }
  Matrix diag = Matrix::Zero(4, 4);
  for (Eigen::Index r = 0; r < 4; ++r) diag(r, r) = rho.matrix(r, r).real();
  rho.matrix = diag;
  OneOrbitalSpectrum p{diag(0, 0).real(), diag(1, 1).real(), diag(2, 2).real(), diag(3, 3).real()};
  return {rho, p};
}

/// Reduced state of orbitals i and j in the product basis
/// {vacuum, up, down, up+down}_i (x) {...}_j; side A is orbital i.
inline DensityMatrix two_orbital_rdm(const StateVector& state, int i, int j) {
  check_orbital(state, i);
  check_orbital(state, j);
  if (i == j) throw std::invalid_argument("two-orbital reduced state needs distinct orbitals");
  DensityMatrix rho = mode_partial_trace(
      state, {mode_index(i, Spin::up), mode_index(i, Spin::down), mode_index(j, Spin::up), mode_index(j, Spin::down)});
  rho.split = 2;
  const double v = rho.mask_violation();
  if (v > 1e-8) throw SymmetryError("two-orbital reduced state violates its sector mask by " + std::to_string(v));
  rho.apply_mask();
  return rho;
}

struct OneParticleRdm {
  Matrix gamma;  // gamma(p, q) = <c+_q c_p>

  double trace() const { return gamma.trace().real(); }
};

inline OneParticleRdm one_particle_rdm(const StateVector& state) {
  const int d = state.mode_count();
  const auto& basis = state.basis();
  const auto& amps = state.amplitudes();
  Matrix g = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const cplx a = amps[static_cast<Eigen::Index>(i)];
    if (a == cplx{0.0, 0.0}) continue;
    const auto& c = basis[i];
    for (int p : c.occupied_modes()) {
      auto removed = apply_annihilation(c, p);
      for (int q = 0; q < d; ++q) {
        auto added = apply_creation(removed->config, q);
        if (!added) continue;
        auto row = basis.index_of(added->config);
        if (!row) continue;
        g(p, q) += std::conj(amps[static_cast<Eigen::Index>(*row)]) * a *
                   static_cast<double>(removed->phase * added->phase);
      }
    }
  }
  return {g};
}

struct NaturalOccupations {
  Eigen::VectorXd lambdas;  // decreasing

  static NaturalOccupations from(const OneParticleRdm& g) {
    Eigen::VectorXd v = linalg::eigh(linalg::hermitian_part(g.gamma)).values.reverse();
    return {v};
  }

  Eigen::VectorXd hf_point(int n) const {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(lambdas.size());
    h.head(std::min<Eigen::Index>(n, h.size())).setOnes();
    return h;
  }
};

/// l1 distance of the natural occupations from (1,...,1,0,...,0).
inline double intrinsic_correlation(const NaturalOccupations& occ, int n) {
  if (n < 0 || n > occ.lambdas.size()) throw std::invalid_argument("electron count out of range");
  double s = 0.0;
  for (Eigen::Index a = 0; a < occ.lambdas.size(); ++a) s += a < n ? 1.0 - occ.lambdas[a] : occ.lambdas[a];
  return s;
}

struct SlaterOverlap {
  double overlap = 0.0;
  bool degenerate = false;
};

namespace detail {

inline double determinant_overlap(const StateVector& state, const Matrix& orbitals) {
  const Eigen::Index n = orbitals.cols();
  cplx total = 0.0;
  const auto& basis = state.basis();
  Matrix m(n, n);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const cplx a = state.amplitudes()[static_cast<Eigen::Index>(i)];
    if (a == cplx{0.0, 0.0}) continue;
    const auto occ = basis[i].occupied_modes();
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) = std::conj(orbitals(occ[static_cast<std::size_t>(r)], c));
    total += (n == 0 ? cplx{1.0, 0.0} : m.determinant()) * a;
  }
  return std::norm(total);
}

}  // namespace detail

/// |<phi_1 ... phi_N | Psi>|^2 for the determinant of the N most occupied
/// natural spin-orbitals.
///
/// When occupations are degenerate across the N-th level, the degenerate
/// cluster is resolved in the eigenbasis of the mode-index operator restricted
/// to it, and the subset of cluster orbitals with the largest overlap is used.
inline SlaterOverlap natural_slater_overlap(const StateVector& state, double degeneracy_tol = 1e-8) {
  const auto& sector = state.basis().sector();
  if (!sector.particle_count) throw std::invalid_argument("natural Slater overlap needs a fixed particle number");
  const int n = *sector.particle_count;
  const int d = state.mode_count();
  auto g = one_particle_rdm(state);
  auto e = linalg::eigh(linalg::hermitian_part(g.gamma));
  Eigen::VectorXd lam = e.values.reverse();
  Matrix u = e.vectors.rowwise().reverse();
  if (n == 0 || n == d) return {1.0, false};

  const bool degenerate = lam[n - 1] - lam[n] < degeneracy_tol;
  if (!degenerate) return {detail::determinant_overlap(state, u.leftCols(n)), false};

  int lo = n - 1, hi = n;
  while (lo > 0 && lam[lo - 1] - lam[n - 1] < degeneracy_tol) --lo;
  while (hi + 1 < d && lam[n] - lam[hi + 1] < degeneracy_tol) ++hi;
  const int width = hi - lo + 1;
  const int need = n - lo;
  Matrix cluster = u.middleCols(lo, width);
  Matrix index_op = Matrix::Zero(d, d);
  for (int m = 0; m < d; ++m) index_op(m, m) = static_cast<double>(m);
  auto ce = linalg::eigh(cluster.adjoint() * index_op * cluster);
  cluster = cluster * ce.vectors;

  double best = -1.0;
  Matrix orbitals(d, n);
  orbitals.leftCols(lo) = u.leftCols(lo);
  int visited = 0;
  detail::for_each_subset(width, need, [&](const std::vector<int>& pick) {
    if (++visited > 20000) return;
    for (int q = 0; q < need; ++q) orbitals.col(lo + q) = cluster.col(pick[static_cast<std::size_t>(q)]);
    best = std::max(best, detail::determinant_overlap(state, orbitals));
  });
  return {best, true};
}

}  // namespace orbcorr
