#pragma once

// Lowest eigenpair of a sector-restricted Hamiltonian.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "orbcorr/models.hpp"

namespace orbcorr {

class EigenSolverError : public std::runtime_error {
 public:
  EigenSolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (best residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct EigenResult {
  double energy = 0.0;
  StateVector state;
  bool degeneracy_flag = false;
  double gap = 0.0;  // to the next eigenvalue, +inf for a one-dimensional sector
  double residual = 0.0;
  bool iterative = false;
};

struct GroundStateOptions {
  std::size_t dense_limit = 4096;
  std::size_t max_dim = std::size_t{1} << 20;
  double degeneracy_gap = 1e-8;
  std::uint64_t seed = 0x5EED;
  int krylov_size = 80;
  int max_restarts = 400;
  double hermiticity_tol = 1e-12;
};

namespace detail {

// Degenerate ground spaces: take the smallest basis index with non-negligible
// weight in the ground space and project that basis vector onto it.
inline Vector pick_ground_vector(const Matrix& space) {
  if (space.cols() == 1) return space.col(0);
  const Eigen::VectorXd weight = space.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < weight.size(); ++i) {
    if (weight[i] > 1e-6) {
      Vector v = space * space.row(i).adjoint();
      return v / v.norm();
    }
  }
  return space.col(0);
}

struct LanczosPair {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;
};

// Restarted Lanczos with full reorthogonalization, optionally confined to
// the orthogonal complement of `deflate`.
inline LanczosPair lanczos_lowest(const SparseOperator::Storage& h, const std::vector<Vector>& deflate,
                                  const GroundStateOptions& opt, double scale) {
  const Eigen::Index n = h.rows();
  std::mt19937_64 rng(opt.seed + deflate.size());
  std::normal_distribution<double> gauss;
  Vector start(n);
  for (Eigen::Index i = 0; i < n; ++i) start[i] = cplx{gauss(rng), 0.0};

  auto project_out = [&](Vector& v) {
    for (const auto& d : deflate) v -= d * d.dot(v);
  };

  const int m = static_cast<int>(std::min<Eigen::Index>(opt.krylov_size, n - static_cast<Eigen::Index>(deflate.size())));
  if (m < 1) throw EigenSolverError("no room left for a Lanczos vector", 0.0);
  const double tol = 1e-11 * std::max(1.0, scale);
  LanczosPair best;
  best.residual = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    project_out(start);
    start /= start.norm();
    Matrix q(n, m);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    q.col(0) = start;
    int k = 0;
    for (; k < m; ++k) {
      Vector w = h * q.col(k);
      alpha[k] = q.col(k).dot(w).real();
      // Two passes of classical Gram-Schmidt against everything kept.
      for (int pass = 0; pass < 2; ++pass) {
        w -= q.leftCols(k + 1) * (q.leftCols(k + 1).adjoint() * w);
        project_out(w);
      }
      const double b = w.norm();
      if (k + 1 == m || b < 1e-14 * std::max(1.0, scale)) {
        ++k;
        break;
      }
      beta[k] = b;
      q.col(k + 1) = w / b;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    Vector ritz = q.leftCols(k) * es.eigenvectors().col(0).cast<cplx>();
    project_out(ritz);
    ritz /= ritz.norm();
    const double value = (ritz.dot(h * ritz)).real();
    const double res = (h * ritz - value * ritz).norm();
    if (res < best.residual) best = {value, ritz, res};
    if (res <= tol) return best;
    start = ritz;
  }
  throw EigenSolverError("Lanczos did not converge", best.residual);
}

}  // namespace detail

/// Lowest eigenpair of `h` inside `sector`, which must describe h's basis.
inline EigenResult ground_state(const SparseOperator& h, const SectorLabel& sector,
                                const GroundStateOptions& opt = {}) {
  const auto& basis = h.basis();
  for (const auto& c : basis.configs()) {
    if (!sector.contains(c)) throw FockError("operator basis is not restricted to the requested sector");
  }
  const auto dim = basis.size();
  if (dim == 0) throw EmptySectorError("empty sector");
  if (dim > opt.max_dim) {
    throw FockError("sector dimension " + std::to_string(dim) + " exceeds the solver limit");
  }
  const double scale = h.max_abs();
  if (h.hermiticity_defect() > opt.hermiticity_tol * std::max(1.0, scale)) {
    throw std::invalid_argument("Hamiltonian is not Hermitian");
  }

  EigenResult out{0.0, StateVector(h.basis_ptr(), Vector::Ones(static_cast<Eigen::Index>(dim))), false, 0.0, 0.0, false};
  Matrix ground_space;
  if (dim <= opt.dense_limit) {
    Eigen::VectorXd values;
    Matrix vectors;
    if (h.is_real()) {
      Eigen::MatrixXd dense = h.to_dense().real();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
      if (es.info() != Eigen::Success) throw EigenSolverError("dense eigensolver failed", 0.0);
      values = es.eigenvalues();
      vectors = es.eigenvectors().cast<cplx>();
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> es(h.to_dense());
      if (es.info() != Eigen::Success) throw EigenSolverError("dense eigensolver failed", 0.0);
      values = es.eigenvalues();
      vectors = es.eigenvectors();
    }
    out.energy = values[0];
    out.gap = dim > 1 ? values[1] - values[0] : std::numeric_limits<double>::infinity();
    Eigen::Index g = 1;
    while (g < values.size() && values[g] - values[0] < opt.degeneracy_gap) ++g;
    ground_space = vectors.leftCols(g);
  } else {
    out.iterative = true;
    std::vector<Vector> found;
    auto first = detail::lanczos_lowest(h.matrix(), {}, opt, scale);
    out.energy = first.value;
    found.push_back(first.vector);
    out.gap = std::numeric_limits<double>::infinity();
    while (found.size() < 8 && found.size() < dim) {
      auto next = detail::lanczos_lowest(h.matrix(), found, opt, scale);
      const double gap = next.value - out.energy;
      if (found.size() == 1) out.gap = gap;
      if (gap >= opt.degeneracy_gap) break;
      found.push_back(next.vector);
    }
    ground_space.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(found.size()));
    for (std::size_t i = 0; i < found.size(); ++i) ground_space.col(static_cast<Eigen::Index>(i)) = found[i];
  }
  out.degeneracy_flag = out.gap < opt.degeneracy_gap;
  Vector v = detail::pick_ground_vector(ground_space);
  out.state = StateVector(h.basis_ptr(), v).phase_fixed();
  out.residual = (h.apply(out.state.amplitudes()) - out.energy * out.state.amplitudes()).norm();
  return out;
}

inline EigenResult ground_state(const SparseOperator& h, const GroundStateOptions& opt = {}) {
  return ground_state(h, h.basis().sector(), opt);
}

}  // namespace orbcorr
