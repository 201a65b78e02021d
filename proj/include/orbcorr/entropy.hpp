#pragma once

// Entropies, mutual information, the single-orbital closed forms and the
// partial-transpose test.

#include <cmath>
#include <limits>
#include <optional>

#include "orbcorr/linalg.hpp"
#include "orbcorr/rdm.hpp"
#include "orbcorr/ssr.hpp"

namespace orbcorr {

/// Correlation values in nats for one superselection regime.
struct CorrelationTriple {
  double total = 0.0;                // I
  double quantum = 0.0;              // E
  std::optional<double> classical;   // C, absent for single-orbital results
  SsrMode ssr = SsrMode::none;
  bool converged = true;

  /// Values below `floor` are reported as exactly zero.
  CorrelationTriple& clean(double floor = 1e-10) {
    auto fix = [floor](double& v) {
      if (v < floor) v = 0.0;
    };
    fix(total);
    fix(quantum);
    if (classical) fix(*classical);
    return *this;
  }

  friend bool operator==(const CorrelationTriple&, const CorrelationTriple&) = default;
};

/// Spectrum of a density matrix with small negative noise clipped and
/// the remainder renormalized.
inline Eigen::VectorXd clipped_spectrum(const Matrix& rho, double clip = 1e-10) {
  Eigen::VectorXd v = linalg::eigh(linalg::hermitian_part(rho)).values;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < -clip) throw SymmetryError("density matrix eigenvalue " + std::to_string(v[i]) + " is negative");
    if (v[i] < 0.0) v[i] = 0.0;
  }
  const double s = v.sum();
  if (s > 0.0) v /= s;
  return v;
}

inline double von_neumann_entropy(const Matrix& rho) { return linalg::shannon(clipped_spectrum(rho)); }
inline double von_neumann_entropy(const DensityMatrix& rho) { return von_neumann_entropy(rho.matrix); }

/// S(rho || sigma) = Tr rho (ln rho - ln sigma); +inf when supp(rho) is not
/// contained in supp(sigma).
inline double relative_entropy(const Matrix& rho, const Matrix& sigma, double support_tol = 1e-12) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) {
    throw std::invalid_argument("relative entropy needs operators of equal dimension");
  }
  auto es = linalg::eigh(linalg::hermitian_part(sigma));
  Matrix rt = es.vectors.adjoint() * rho * es.vectors;
  double cross = 0.0;
  for (Eigen::Index i = 0; i < es.values.size(); ++i) {
    const double r = rt(i, i).real();
    if (es.values[i] <= support_tol) {
      if (r > 1e-10) return std::numeric_limits<double>::infinity();
      continue;
    }
    cross -= r * std::log(es.values[i]);
  }
  return -von_neumann_entropy(rho) + cross;
}

inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return relative_entropy(rho.matrix, sigma.matrix);
}

/// Operator of a bipartite density matrix in Kronecker order
/// (side A index major), plus the local dimensions.
struct KroneckerForm {
  Matrix matrix;
  Eigen::Index dim_a = 1;
  Eigen::Index dim_b = 1;
  std::vector<Eigen::Index> position;  // density-matrix index -> Kronecker index
};

inline KroneckerForm kronecker_form(const DensityMatrix& rho) {
  if (rho.split < 0) throw std::invalid_argument("density matrix has no bipartition");
  const int k = rho.mode_count();
  const int na = rho.split, nb = k - na;
  KroneckerForm out;
  out.dim_a = Eigen::Index{1} << na;
  out.dim_b = Eigen::Index{1} << nb;
  out.position.resize(static_cast<std::size_t>(rho.dim()));
  for (Eigen::Index i = 0; i < rho.dim(); ++i) {
    Eigen::Index a = 0, b = 0;
    for (int p = 0; p < na; ++p)
      if (rho.occupied(i, p)) a |= Eigen::Index{1} << local_bit(p, na);
    for (int p = 0; p < nb; ++p)
      if (rho.occupied(i, na + p)) b |= Eigen::Index{1} << local_bit(p, nb);
    out.position[static_cast<std::size_t>(i)] = a * out.dim_b + b;
  }
  out.matrix = Matrix::Zero(rho.dim(), rho.dim());
  for (Eigen::Index r = 0; r < rho.dim(); ++r)
    for (Eigen::Index c = 0; c < rho.dim(); ++c)
      out.matrix(out.position[static_cast<std::size_t>(r)], out.position[static_cast<std::size_t>(c)]) = rho.matrix(r, c);
  return out;
}

/// Inverse of kronecker_form: writes `m` back into the index order of `like`.
inline DensityMatrix from_kronecker(const KroneckerForm& form, const Matrix& m, const DensityMatrix& like) {
  DensityMatrix out = like;
  for (Eigen::Index r = 0; r < like.dim(); ++r)
    for (Eigen::Index c = 0; c < like.dim(); ++c)
      out.matrix(r, c) = m(form.position[static_cast<std::size_t>(r)], form.position[static_cast<std::size_t>(c)]);
  return out;
}

struct Marginals {
  Matrix a;
  Matrix b;
};

inline Marginals marginals(const KroneckerForm& k) {
  return {linalg::trace_out_second(k.matrix, k.dim_a, k.dim_b), linalg::trace_out_first(k.matrix, k.dim_a, k.dim_b)};
}

/// I = S(rho_A) + S(rho_B) - S(rho).
inline double mutual_information(const DensityMatrix& rho, const Bipartition& split) {
  auto k = kronecker_form(align(rho, split));
  auto m = marginals(k);
  return von_neumann_entropy(m.a) + von_neumann_entropy(m.b) - von_neumann_entropy(k.matrix);
}

inline double mutual_information(const DensityMatrix& rho) { return mutual_information(rho, Bipartition::leading(rho)); }

/// Single-orbital measures of a pure global state with fixed N and M,
/// from the local occupation probabilities alone.
inline CorrelationTriple single_orbital_measures(const OneOrbitalSpectrum& p, SsrMode mode) {
  p.validate();
  using linalg::xlogx;
  const double s = -(xlogx(p.p1) + xlogx(p.p2) + xlogx(p.p3) + xlogx(p.p4));
  CorrelationTriple t;
  t.ssr = mode;
  switch (mode) {
    case SsrMode::none:
      t.quantum = s;
      break;
    case SsrMode::parity:
      t.quantum = xlogx(p.p1 + p.p4) + xlogx(p.p2 + p.p3) + s;
      break;
    case SsrMode::number:
      t.quantum = xlogx(p.p2 + p.p3) - xlogx(p.p2) - xlogx(p.p3);
      break;
  }
  t.total = t.quantum + s;
  return t.clean();
}

struct PptResult {
  bool ppt = true;
  double min_eigenvalue = 0.0;
};

/// Partial transpose on side B; NPT certifies entanglement.
inline PptResult ppt_test(const DensityMatrix& rho, const Bipartition& split, double tol = 1e-10) {
  auto k = kronecker_form(align(rho, split));
  Matrix pt = linalg::partial_transpose_second(k.matrix, k.dim_a, k.dim_b);
  const double lo = linalg::eigh(linalg::hermitian_part(pt)).values.minCoeff();
  return {lo >= -tol, lo};
}

inline PptResult ppt_test(const DensityMatrix& rho) { return ppt_test(rho, Bipartition::leading(rho)); }

}  // namespace orbcorr
