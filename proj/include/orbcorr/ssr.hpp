#pragma once

// Superselection-rule projections onto local charge sectors.

#include <algorithm>
#include <vector>

#include "orbcorr/rdm.hpp"

namespace orbcorr {

/// Split of a density matrix's modes into sides A and B.
struct Bipartition {
  std::vector<int> side_a;
  std::vector<int> side_b;

  static Bipartition orbitals(int i, int j) {
    return {{mode_index(i, Spin::up), mode_index(i, Spin::down)}, {mode_index(j, Spin::up), mode_index(j, Spin::down)}};
  }

  /// Leading `split` modes of rho as side A (rho.split when not given).
  static Bipartition leading(const DensityMatrix& rho, int split = -1) {
    if (split < 0) split = rho.split;
    if (split < 0 || split > rho.mode_count()) throw std::invalid_argument("density matrix has no bipartition");
    return {{rho.modes.begin(), rho.modes.begin() + split}, {rho.modes.begin() + split, rho.modes.end()}};
  }

  std::vector<int> ordered() const {
    std::vector<int> all = side_a;
    all.insert(all.end(), side_b.begin(), side_b.end());
    return all;
  }

  void validate(const DensityMatrix& rho) const {
    std::vector<int> a = ordered(), b = rho.modes;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::invalid_argument("bipartition does not cover the density matrix modes");
  }
};

/// rho expressed with side A modes first, then side B, with split recorded.
inline DensityMatrix align(const DensityMatrix& rho, const Bipartition& split) {
  split.validate(rho);
  const bool same = rho.modes == split.ordered();
  const int na = static_cast<int>(split.side_a.size());
  DensityMatrix out = same ? rho : mode_partial_trace(rho, split.ordered());
  out.ssr = (same && rho.split == na) ? rho.ssr : SsrMode::none;
  out.split = na;
  return out;
}

namespace detail {

inline DensityMatrix project(const DensityMatrix& rho, const Bipartition& split, SsrMode mode) {
  DensityMatrix out = align(rho, split);
  if (mode == SsrMode::none) return out;
  // Number blocks refine parity blocks, so the stronger rule wins.
  if (out.ssr != SsrMode::number) out.ssr = mode;
  out.apply_mask();
  return out;
}

}  // namespace detail

/// Removes coherences between different local fermion parities.
inline DensityMatrix project_parity(const DensityMatrix& rho, const Bipartition& split) {
  return detail::project(rho, split, SsrMode::parity);
}

/// Removes coherences between different local particle numbers.
inline DensityMatrix project_number(const DensityMatrix& rho, const Bipartition& split) {
  return detail::project(rho, split, SsrMode::number);
}

inline DensityMatrix project(const DensityMatrix& rho, const Bipartition& split, SsrMode mode) {
  return detail::project(rho, split, mode);
}

}  // namespace orbcorr
