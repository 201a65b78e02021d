#pragma once

// Orbital correlation pipeline: reduced state, superselection projection,
// then total, quantum and classical correlation.

#include <cstdint>

#include "orbcorr/entropy.hpp"
#include "orbcorr/rdm.hpp"
#include "orbcorr/separable.hpp"
#include "orbcorr/ssr.hpp"

namespace orbcorr {

/// Deterministic seed for the optimizer of one (i, j, regime) job.
inline std::uint64_t pair_seed(std::uint64_t base, int i, int j, SsrMode mode) {
  std::uint64_t z = base ^ (static_cast<std::uint64_t>(i) << 40) ^ (static_cast<std::uint64_t>(j) << 16) ^
                    static_cast<std::uint64_t>(mode);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct PairCorrelation {
  CorrelationTriple triple;
  SeparableApproximation separable;
  DensityMatrix physical;  // rho after the projection
};

/// I, E, C of a bipartite density matrix under one superselection regime.
inline PairCorrelation pair_correlation(const DensityMatrix& rho, const Bipartition& split, SsrMode mode,
                                        const SeparableOptions& opt = {}) {
  PairCorrelation out{CorrelationTriple{}, SeparableApproximation{}, project(rho, split, mode)};
  out.triple.ssr = mode;
  out.triple.total = mutual_information(out.physical, split);
  out.separable = closest_separable(out.physical, opt);
  out.triple.quantum = out.separable.distance;
  out.triple.classical = out.separable.classical;
  out.triple.converged = out.separable.converged;
  out.triple.clean();
  return out;
}

/// E^Q(rho) = E(rho^Q).
inline double rel_entropy_of_entanglement(const DensityMatrix& rho, SsrMode mode, const Bipartition& split,
                                          const SeparableOptions& opt = {}) {
  return pair_correlation(rho, split, mode, opt).triple.quantum;
}

/// S(sigma* || rho^Q_A (x) rho^Q_B) for the closest separable sigma*.
inline double classical_correlation(const DensityMatrix& rho, SsrMode mode, const Bipartition& split,
                                    const SeparableOptions& opt = {}) {
  return *pair_correlation(rho, split, mode, opt).triple.classical;
}

/// Correlation between orbitals i and j of a state (side A is orbital i).
inline CorrelationTriple correlation_profile(const StateVector& state, int i, int j, SsrMode mode,
                                             SeparableOptions opt = {}) {
  opt.seed = pair_seed(opt.seed, i, j, mode);
  const DensityMatrix rho = two_orbital_rdm(state, i, j);
  return pair_correlation(rho, Bipartition::orbitals(i, j), mode, opt).triple;
}

/// Correlation between orbital j and the rest of a pure state, from the
/// closed forms in the local occupation probabilities.
inline CorrelationTriple correlation_profile(const StateVector& state, int j, SsrMode mode) {
  return single_orbital_measures(one_orbital_rdm(state, j).spectrum, mode);
}

}  // namespace orbcorr
