#pragma once

// Independent reference implementations and random inputs shared by the
// unit tests and the acceptance binary. Everything here works on the full
// 2^D Fock space with mode m stored at bit (D - 1 - m), i.e. a plain
// Jordan-Wigner layout unrelated to the library's base-4 packing.

#include <cmath>
#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "orbcorr/fock.hpp"
#include "orbcorr/models.hpp"
#include "orbcorr/rdm.hpp"

namespace oracle {

using orbcorr::cplx;
using orbcorr::Matrix;
using orbcorr::Vector;

inline std::uint64_t jw_bit(int m, int d) { return std::uint64_t{1} << (d - 1 - m); }

/// c^dagger_m on a full-space vector.
inline Vector create(int m, const Vector& psi, int d) {
  Vector out = Vector::Zero(psi.size());
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    if (psi[s] == cplx{0.0, 0.0}) continue;
    const auto us = static_cast<std::uint64_t>(s);
    if (us & jw_bit(m, d)) continue;
    int before = 0;
    for (int k = 0; k < m; ++k) before += (us & jw_bit(k, d)) ? 1 : 0;
    out[static_cast<Eigen::Index>(us | jw_bit(m, d))] += (before % 2 ? -1.0 : 1.0) * psi[s];
  }
  return out;
}

/// c_m on a full-space vector.
inline Vector annihilate(int m, const Vector& psi, int d) {
  Vector out = Vector::Zero(psi.size());
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    if (psi[s] == cplx{0.0, 0.0}) continue;
    const auto us = static_cast<std::uint64_t>(s);
    if (!(us & jw_bit(m, d))) continue;
    int before = 0;
    for (int k = 0; k < m; ++k) before += (us & jw_bit(k, d)) ? 1 : 0;
    out[static_cast<Eigen::Index>(us & ~jw_bit(m, d))] += (before % 2 ? -1.0 : 1.0) * psi[s];
  }
  return out;
}

/// Full-space index of a library configuration, read from its 0/1 string.
inline Eigen::Index full_index(const orbcorr::OccupationConfig& c) {
  const std::string s = c.to_string();
  std::uint64_t idx = 0;
  for (std::size_t m = 0; m < s.size(); ++m)
    if (s[m] == '1') idx |= jw_bit(static_cast<int>(m), static_cast<int>(s.size()));
  return static_cast<Eigen::Index>(idx);
}

inline Vector embed(const orbcorr::StateVector& state) {
  const int d = state.mode_count();
  Vector full = Vector::Zero(Eigen::Index{1} << d);
  for (std::size_t i = 0; i < state.basis().size(); ++i)
    full[full_index(state.basis()[i])] = state.amplitudes()[static_cast<Eigen::Index>(i)];
  return full;
}

/// Reduced state of orbitals i and j from rho_rc = <chi_c|chi_r>, where
/// chi_x = P_vac C_x^dagger |Psi> and C_x creates the occupied kept modes of x
/// in the order (i up, i down, j up, j down). Local index 4 l_i + l_j with
/// l = n_up + 2 n_down.
inline Matrix two_orbital_rdm(const orbcorr::StateVector& state, int i, int j) {
  const int d = state.mode_count();
  const Vector psi = embed(state);
  const int kept[4] = {2 * i, 2 * i + 1, 2 * j, 2 * j + 1};
  std::vector<Vector> chi(16);
  for (int x = 0; x < 16; ++x) {
    const int li = x / 4, lj = x % 4;
    const int occ[4] = {li & 1, (li >> 1) & 1, lj & 1, (lj >> 1) & 1};
    Vector v = psi;
    for (int q = 0; q < 4; ++q)
      if (occ[q]) v = annihilate(kept[q], v, d);
    // Project the kept modes onto vacuum.
    for (Eigen::Index s = 0; s < v.size(); ++s)
      for (int q = 0; q < 4; ++q)
        if (static_cast<std::uint64_t>(s) & jw_bit(kept[q], d)) v[s] = 0.0;
    chi[static_cast<std::size_t>(x)] = v;
  }
  Matrix rho(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) rho(r, c) = chi[static_cast<std::size_t>(c)].dot(chi[static_cast<std::size_t>(r)]);
  return rho;
}

/// Occupation probabilities of orbital j: (empty, up, down, double).
inline std::array<double, 4> orbital_occupations(const orbcorr::StateVector& state, int j) {
  const int d = state.mode_count();
  const Vector psi = embed(state);
  std::array<double, 4> p{0, 0, 0, 0};
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    const auto us = static_cast<std::uint64_t>(s);
    const int l = ((us & jw_bit(2 * j, d)) ? 1 : 0) + ((us & jw_bit(2 * j + 1, d)) ? 2 : 0);
    p[static_cast<std::size_t>(l)] += std::norm(psi[s]);
  }
  return p;
}

/// Hamiltonian of an integral set on a sector basis, applied operator by
/// operator on the full space.
inline Matrix hamiltonian(const orbcorr::IntegralSet& ints, const orbcorr::FockBasis& basis) {
  const int n = ints.orbital_count(), d = 2 * n;
  const auto dim = static_cast<Eigen::Index>(basis.size());
  Matrix h = Matrix::Zero(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    Vector e = Vector::Zero(Eigen::Index{1} << d);
    e[full_index(basis[static_cast<std::size_t>(col)])] = 1.0;
    Vector he = ints.core_energy * e;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (ints.one_body(i, j) == 0.0) continue;
        for (int s = 0; s < 2; ++s) he += ints.one_body(i, j) * create(2 * i + s, annihilate(2 * j + s, e, d), d);
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const double v = ints.two_body(i, j, k, l);
            if (v == 0.0) continue;
            for (int s = 0; s < 2; ++s)
              for (int t = 0; t < 2; ++t) {
                Vector w = annihilate(2 * j + s, e, d);
                w = annihilate(2 * l + t, w, d);
                w = create(2 * k + t, w, d);
                w = create(2 * i + s, w, d);
                he += 0.5 * v * w;
              }
          }
    for (Eigen::Index row = 0; row < dim; ++row) h(row, col) = he[full_index(basis[static_cast<std::size_t>(row)])];
  }
  return h;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx{g(rng), g(rng)};
  return v / v.norm();
}

/// Random pure state with fixed particle number and spin projection.
inline orbcorr::StateVector random_state(int orbitals, int electrons, int twice_m, std::mt19937_64& rng) {
  auto basis = orbcorr::make_basis(2 * orbitals, orbcorr::SectorLabel::fixed(electrons, twice_m));
  return orbcorr::StateVector(basis, random_vector(static_cast<Eigen::Index>(basis->size()), rng));
}

/// Random two-orbital pure state in a random non-trivial (N, 2M) sector.
inline orbcorr::StateVector random_pair_state(std::mt19937_64& rng) {
  struct Sector {
    int n, m;
  };
  static const Sector sectors[] = {{1, 1}, {1, -1}, {2, 0}, {2, 2}, {3, 1}, {3, -1}};
  const auto& s = sectors[std::uniform_int_distribution<int>(0, 5)(rng)];
  return random_state(2, s.n, s.m, rng);
}

/// Random real integrals with the eightfold permutation symmetry.
inline orbcorr::IntegralSet random_integrals(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  orbcorr::IntegralSet ints(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) ints.set_one_body(i, j, u(rng));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          if (ints.two_body(i, j, k, l) != 0.0) continue;
          // Keep a positive-leaning diagonal like physical Coulomb integrals.
          const double v = (i == j && k == l) ? 0.5 + 0.5 * std::abs(u(rng)) : 0.2 * u(rng);
          ints.set_two_body(i, j, k, l, v);
        }
  return ints;
}

/// Two-orbital density matrix with the number and spin mask. kind 0: random
/// mixture of product basis states (always separable); kind 1: mixture of
/// random sector-respecting pure states; kind 2: the same blended with the
/// maximally mixed state.
inline orbcorr::DensityMatrix random_masked_state(std::mt19937_64& rng, int kind) {
  orbcorr::DensityMatrix rho;
  rho.modes = {0, 1, 2, 3};
  rho.split = 2;
  rho.conserves_number = rho.conserves_sz = rho.conserves_parity = true;
  rho.matrix = Matrix::Zero(16, 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int terms = 1 + std::uniform_int_distribution<int>(0, 5)(rng);
  const bool product = kind == 0;
  for (int t = 0; t < terms; ++t) {
    const double w = u(rng) + 0.05;
    if (product) {
      const int la = std::uniform_int_distribution<int>(0, 3)(rng);
      const int lb = std::uniform_int_distribution<int>(0, 3)(rng);
      rho.matrix(4 * la + lb, 4 * la + lb) += w;
    } else {
      const auto s = random_pair_state(rng);
      const Matrix r = orbcorr::two_orbital_rdm(s, 0, 1).matrix;
      rho.matrix += w * r;
    }
  }
  rho.matrix /= rho.matrix.trace();
  if (kind == 2) {
    const double p = 0.3 + 0.6 * u(rng);
    rho.matrix = (1.0 - p) * rho.matrix + p * Matrix::Identity(16, 16) / 16.0;
  }
  return rho;
}

}  // namespace oracle
