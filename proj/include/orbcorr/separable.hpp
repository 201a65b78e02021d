#pragma once

// Closest separable state in relative entropy.
//
// The search runs over explicit mixtures of product states, so every iterate
// is separable and the distance found is an upper bound on the true minimum.
// Each outer iteration calls a linear minimization oracle over product states
// (alternating local eigenvector updates from seeded random starts), mixes the
// winner into the ensemble with a line search, and then refines all product
// vectors and weights jointly with L-BFGS. Iterates are projected onto the
// charge mask of the input, which is an average over local phase rotations
// and so keeps them separable.
//
// Ties between equally distant separable states are broken towards the
// smallest classical part S(sigma || rho_A (x) rho_B): further passes minimize
// S(rho || sigma) + mu * S(sigma || rho_A (x) rho_B) for a decreasing sequence
// of mu, each warm-started from the one before.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "orbcorr/entropy.hpp"
#include "orbcorr/linalg.hpp"

namespace orbcorr {

struct SeparableOptions {
  std::uint64_t seed = 0xC0FFEE;
  int multistarts = 32;
  int patience = 50;
  double improvement_tol = 1e-9;
  double gap_tol = 1e-10;
  int max_iterations = 1000;
  int refine_iterations = 40;
  int max_atoms = 64;
  std::vector<double> tie_break_weights = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  int tie_patience = 10;
  double tie_tol = 1e-8;
  double tie_settle = 1e-6;  // change in C between passes that ends the continuation

  friend bool operator==(const SeparableOptions&, const SeparableOptions&) = default;
};

/// One term of a product-state mixture; vectors live in the local Fock
/// spaces of sides A and B.
struct ProductAtom {
  double weight = 0.0;
  Vector a;
  Vector b;
};

/// sigma_star equals the charge-mask projection of the ensemble mixture.
struct SeparableApproximation {
  DensityMatrix sigma_star;
  std::vector<ProductAtom> ensemble;
  bool converged = false;
  double residual = 0.0;   // Frank-Wolfe gap at the final iterate
  double distance = 0.0;   // S(rho || sigma_star)
  double classical = 0.0;  // S(sigma_star || rho_A (x) rho_B)
  int iterations = 0;
};

namespace detail {

using RealVec = Eigen::VectorXd;

struct LbfgsResult {
  RealVec x;
  double f = 0.0;
  int iterations = 0;
};

/// Limited-memory BFGS with Armijo backtracking. `fg` returns f and fills
/// the gradient; it may return +inf to reject a point.
inline LbfgsResult lbfgs(const std::function<double(const RealVec&, RealVec&)>& fg, RealVec x, int max_iter,
                         int memory = 20) {
  RealVec g(x.size());
  double f = fg(x, g);
  std::vector<RealVec> s_hist, y_hist;
  std::vector<double> rho_hist;
  int it = 0;
  int stalls = 0;
  for (; it < max_iter; ++it) {
    if (!std::isfinite(f) || g.lpNorm<Eigen::Infinity>() < 1e-13) break;
    RealVec q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      const auto ui = static_cast<std::size_t>(i);
      alpha[ui] = rho_hist[ui] * s_hist[ui].dot(q);
      q -= alpha[ui] * y_hist[ui];
    }
    double gamma = 1.0 / std::max(1.0, g.norm());
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    RealVec d = -gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d -= (alpha[i] + beta) * s_hist[i];
    }
    // Fall back to steepest descent if curvature pairs broke the direction.
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    double step = 1.0;
    RealVec xn, gn(x.size());
    double fn = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = x + step * d;
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    RealVec s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    const double drop = f - fn;
    x = xn;
    g = gn;
    f = fn;
    stalls = drop <= 1e-16 * std::max(1.0, std::abs(f)) ? stalls + 1 : 0;
    if (stalls >= 3) break;
  }
  return {x, f, it};
}

/// Local charge labels used to block the reduced bases.
struct LocalLabel {
  int n = 0;       // particle number (or parity when only parity is tracked)
  int twice_sz = 0;
  auto operator<=>(const LocalLabel&) const = default;
};

/// The problem restricted to supp(rho_A) (x) supp(rho_B).
struct ReducedProblem {
  Eigen::Index ra = 0, rb = 0, n = 0;
  Matrix rho;
  Matrix va, vb;  // local isometries into the full side spaces
  RealVec log_pi;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  double rho_log_rho = 0.0;
  std::vector<LocalLabel> label_a, label_b;
  std::vector<std::vector<Eigen::Index>> blocks;  // classes of the mask relation
  std::vector<Matrix> rho_blocks;
};

struct Atom {
  Vector u;
  Vector v;
  double w = 0.0;
};

class SeparableSolver {
 public:
  SeparableSolver(const ReducedProblem& p, const SeparableOptions& opt, std::uint64_t seed)
      : p_(p), opt_(opt), rng_(seed) {}

  struct Eval {
    double f = std::numeric_limits<double>::infinity();
    double distance = std::numeric_limits<double>::infinity();
    double classical = std::numeric_limits<double>::infinity();
    Matrix grad;
  };

  Matrix twirl(Matrix m) const {
    for (Eigen::Index r = 0; r < p_.n; ++r)
      for (Eigen::Index c = 0; c < p_.n; ++c)
        if (!p_.mask(r, c)) m(r, c) = 0.0;
    return m;
  }

  Matrix mixture(const std::vector<Atom>& atoms) const {
    Matrix x(p_.n, static_cast<Eigen::Index>(atoms.size()));
    for (std::size_t k = 0; k < atoms.size(); ++k)
      x.col(static_cast<Eigen::Index>(k)) = std::sqrt(atoms[k].w) * linalg::kron(atoms[k].u, atoms[k].v);
    Matrix s = x * x.adjoint();
    return twirl(s);
  }

  /// Objective S(rho||sigma) + mu S(sigma||pi) and its gradient in sigma.
  /// Masked operators are block diagonal, so all spectral work is per block.
  Eval evaluate(const Matrix& sigma, double mu, bool want_grad) const {
    Eval out;
    double cross = 0.0, entropy_term = 0.0;
    if (want_grad) out.grad = Matrix::Zero(p_.n, p_.n);
    for (std::size_t bi = 0; bi < p_.blocks.size(); ++bi) {
      const auto& idx = p_.blocks[bi];
      const auto bn = static_cast<Eigen::Index>(idx.size());
      auto es = linalg::eigh(linalg::hermitian_part(sigma(idx, idx)));
      const RealVec& s = es.values;
      Matrix rt = es.vectors.adjoint() * p_.rho_blocks[bi] * es.vectors;
      for (Eigen::Index i = 0; i < bn; ++i) {
        const double r = rt(i, i).real();
        entropy_term += linalg::xlogx(std::max(s[i], 0.0));
        if (s[i] <= 1e-300) {
          if (r > 1e-14) return Eval{};
          continue;
        }
        cross -= r * std::log(s[i]);
      }
      if (!want_grad) continue;
      Matrix gt(bn, bn);
      for (Eigen::Index i = 0; i < bn; ++i)
        for (Eigen::Index j = 0; j < bn; ++j) {
          // Flooring keeps the derivative finite along directions where both
          // sigma and rho vanish.
          const double si = std::max(s[i], 1e-15), sj = std::max(s[j], 1e-15);
          gt(i, j) = -rt(i, j) * linalg::log_divided_difference(si, sj);
        }
      if (mu > 0.0) {
        for (Eigen::Index i = 0; i < bn; ++i) gt(i, i) += mu * (std::log(std::max(s[i], 1e-15)) + 1.0);
      }
      Matrix g = es.vectors * gt * es.vectors.adjoint();
      out.grad(idx, idx) = linalg::hermitian_part(g);
    }
    out.distance = p_.rho_log_rho + cross;
    double classical = entropy_term;
    for (Eigen::Index i = 0; i < p_.n; ++i) classical -= sigma(i, i).real() * p_.log_pi[i];
    out.classical = classical;
    out.f = out.distance + mu * classical;
    if (want_grad && mu > 0.0) {
      for (Eigen::Index i = 0; i < p_.n; ++i) out.grad(i, i) -= mu * p_.log_pi[i];
    }
    return out;
  }

  /// G rearranged so that R((i,k),(j,l)) = G((i,j),(k,l)); both partial
  /// contractions become matrix-vector products with R.
  Matrix realign(const Matrix& g) const {
    const Eigen::Index ra = p_.ra, rb = p_.rb;
    Matrix r(ra * ra, rb * rb);
    for (Eigen::Index i = 0; i < ra; ++i)
      for (Eigen::Index k = 0; k < ra; ++k)
        for (Eigen::Index j = 0; j < rb; ++j)
          for (Eigen::Index l = 0; l < rb; ++l) r(i * ra + k, j * rb + l) = g(i * rb + j, k * rb + l);
    return r;
  }

  static Vector outer_vec(const Vector& x) {
    const Eigen::Index d = x.size();
    Vector o(d * d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index l = 0; l < d; ++l) o[j * d + l] = std::conj(x[j]) * x[l];
    return o;
  }

  /// Reduced matrix (I (x) v)^dagger G (I (x) v), from the realigned G.
  Matrix contract_b(const Matrix& r, const Vector& v) const {
    Vector a = r * outer_vec(v);
    return Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data(), p_.ra, p_.ra);
  }

  /// (u (x) I)^dagger G (u (x) I), from the realigned G.
  Matrix contract_a(const Matrix& r, const Vector& u) const {
    Vector b = r.transpose() * outer_vec(u);
    return Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(b.data(), p_.rb, p_.rb);
  }

  Vector random_unit(Eigen::Index dim) {
    std::normal_distribution<double> gauss;
    Vector x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = cplx{gauss(rng_), gauss(rng_)};
    return x / x.norm();
  }

  /// Product state minimizing <u v| G |u v>.
  /// Besides the random starts, every current atom seeds one descent, which
  /// keeps the reported gap non-negative.
  std::tuple<Vector, Vector, double> product_oracle(const Matrix& g, const std::vector<Atom>& atoms) {
    const Matrix r = realign(g);
    double best = std::numeric_limits<double>::infinity();
    Vector bu, bv;
    const int starts = opt_.multistarts + static_cast<int>(atoms.size());
    for (int start = 0; start < starts; ++start) {
      Vector v = start < opt_.multistarts ? random_unit(p_.rb) : atoms[static_cast<std::size_t>(start - opt_.multistarts)].v;
      Vector u;
      double val = std::numeric_limits<double>::infinity();
      for (int it = 0; it < 60; ++it) {
        auto ea = linalg::eigh(linalg::hermitian_part(contract_b(r, v)));
        u = ea.vectors.col(0);
        auto eb = linalg::eigh(linalg::hermitian_part(contract_a(r, u)));
        v = eb.vectors.col(0);
        const double next = eb.values[0];
        const bool done = val - next < 1e-13 * std::max(1.0, std::abs(next));
        val = next;
        if (done) break;
      }
      if (val < best) {
        best = val;
        bu = u;
        bv = v;
      }
    }
    return {bu, bv, best};
  }

  // Packed real parameters per atom: Re u, Im u, Re v, Im v, s.
  Eigen::Index block() const { return 2 * p_.ra + 2 * p_.rb + 1; }

  RealVec pack(const std::vector<Atom>& atoms) const {
    RealVec x(static_cast<Eigen::Index>(atoms.size()) * block());
    Eigen::Index o = 0;
    for (const auto& a : atoms) {
      x.segment(o, p_.ra) = a.u.real();
      x.segment(o + p_.ra, p_.ra) = a.u.imag();
      x.segment(o + 2 * p_.ra, p_.rb) = a.v.real();
      x.segment(o + 2 * p_.ra + p_.rb, p_.rb) = a.v.imag();
      x[o + block() - 1] = std::sqrt(a.w);
      o += block();
    }
    return x;
  }

  std::vector<Atom> unpack(const RealVec& x) const {
    const Eigen::Index k = x.size() / block();
    std::vector<Atom> atoms(static_cast<std::size_t>(k));
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) total += x[j * block() + block() - 1] * x[j * block() + block() - 1];
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index o = j * block();
      auto& a = atoms[static_cast<std::size_t>(j)];
      a.u.resize(p_.ra);
      a.v.resize(p_.rb);
      for (Eigen::Index i = 0; i < p_.ra; ++i) a.u[i] = cplx{x[o + i], x[o + p_.ra + i]};
      for (Eigen::Index i = 0; i < p_.rb; ++i) a.v[i] = cplx{x[o + 2 * p_.ra + i], x[o + 2 * p_.ra + p_.rb + i]};
      const double su = a.u.norm(), sv = a.v.norm();
      if (su > 0.0) a.u /= su;
      if (sv > 0.0) a.v /= sv;
      a.w = total > 0.0 ? x[o + block() - 1] * x[o + block() - 1] / total : 0.0;
    }
    return atoms;
  }

  double objective(const RealVec& x, RealVec& grad, double mu) const {
    const Eigen::Index k = x.size() / block();
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) total += x[j * block() + block() - 1] * x[j * block() + block() - 1];
    if (!(total > 0.0)) return std::numeric_limits<double>::infinity();
    auto atoms = unpack(x);
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index o = j * block();
      if (x.segment(o, 2 * p_.ra).norm() == 0.0 || x.segment(o + 2 * p_.ra, 2 * p_.rb).norm() == 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
    Eval e = evaluate(mixture(atoms), mu, true);
    if (!std::isfinite(e.f)) return e.f;
    grad.setZero(x.size());
    const Matrix r = realign(e.grad);
    std::vector<double> gk(static_cast<std::size_t>(k));
    double mean = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& a = atoms[static_cast<std::size_t>(j)];
      const Eigen::Index o = j * block();
      Matrix ma = contract_b(r, a.v);
      Matrix mb = contract_a(r, a.u);
      Vector au = ma * a.u;
      Vector bv = mb * a.v;
      const double val = a.u.dot(au).real();
      gk[static_cast<std::size_t>(j)] = val;
      mean += a.w * val;
      const double nu = x.segment(o, 2 * p_.ra).norm();
      const double nv = x.segment(o + 2 * p_.ra, 2 * p_.rb).norm();
      Vector du = 2.0 * a.w * (au - val * a.u) / nu;
      Vector dv = 2.0 * a.w * (bv - val * a.v) / nv;
      grad.segment(o, p_.ra) = du.real();
      grad.segment(o + p_.ra, p_.ra) = du.imag();
      grad.segment(o + 2 * p_.ra, p_.rb) = dv.real();
      grad.segment(o + 2 * p_.ra + p_.rb, p_.rb) = dv.imag();
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      const double sj = x[j * block() + block() - 1];
      grad[j * block() + block() - 1] = 2.0 * sj / total * (gk[static_cast<std::size_t>(j)] - mean);
    }
    return e.f;
  }

  /// Real coordinates of the masked projector |u v><u v|, plus a constant
  /// entry for the weight sum.
  RealVec masked_coordinates(const Atom& a) const {
    const Vector x = linalg::kron(a.u, a.v);
    std::vector<double> out;
    for (const auto& idx : p_.blocks)
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const cplx d = x[idx[r]];
        out.push_back(std::norm(d));
        for (std::size_t c = r + 1; c < idx.size(); ++c) {
          const cplx z = x[idx[r]] * std::conj(x[idx[c]]);
          out.push_back(z.real());
          out.push_back(z.imag());
        }
      }
    out.push_back(1.0);
    return Eigen::Map<RealVec>(out.data(), static_cast<Eigen::Index>(out.size()));
  }

  /// Removes one atom without changing the mixture, by moving the weights
  /// along an affine dependency among the atoms. False if none exists.
  bool caratheodory_step(std::vector<Atom>& atoms) const {
    const auto k = static_cast<Eigen::Index>(atoms.size());
    RealVec first = masked_coordinates(atoms.front());
    Eigen::MatrixXd m(first.size(), k);
    m.col(0) = first;
    for (Eigen::Index j = 1; j < k; ++j) m.col(j) = masked_coordinates(atoms[static_cast<std::size_t>(j)]);
    if (m.rows() >= k) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      const auto sv = svd.singularValues();
      if (sv[k - 1] > 1e-10 * sv[0]) return false;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    RealVec z = svd.matrixV().col(k - 1);
    if (z.maxCoeff() <= 0.0) z = -z;
    double step = std::numeric_limits<double>::infinity();
    Eigen::Index drop = -1;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (z[j] <= 1e-12) continue;
      const double r = atoms[static_cast<std::size_t>(j)].w / z[j];
      if (r < step) {
        step = r;
        drop = j;
      }
    }
    if (drop < 0) return false;
    for (Eigen::Index j = 0; j < k; ++j) {
      auto& a = atoms[static_cast<std::size_t>(j)];
      a.w = std::max(0.0, a.w - step * z[j]);
    }
    atoms.erase(atoms.begin() + drop);
    return true;
  }

  void prune(std::vector<Atom>& atoms) const {
    atoms.erase(std::remove_if(atoms.begin(), atoms.end(), [](const Atom& a) { return !(a.w > 1e-15); }),
                atoms.end());
    while (static_cast<int>(atoms.size()) > opt_.max_atoms && caratheodory_step(atoms)) {
    }
    if (static_cast<int>(atoms.size()) > opt_.max_atoms) {
      std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.w > b.w; });
      atoms.resize(static_cast<std::size_t>(opt_.max_atoms));
    }
    double total = 0.0;
    for (const auto& a : atoms) total += a.w;
    for (auto& a : atoms) a.w /= total;
  }

  struct Outcome {
    std::vector<Atom> atoms;
    Eval eval;
    double gap = 0.0;
    bool converged = false;
    int iterations = 0;
  };

  Outcome run(std::vector<Atom> atoms, double mu, int patience) {
    prune(atoms);
    Outcome out;
    Eval cur = evaluate(mixture(atoms), mu, true);
    int quiet = 0;
    for (int iter = 0; iter < opt_.max_iterations; ++iter) {
      out.iterations = iter + 1;
      const double before = cur.f;
      const std::vector<Atom> previous = atoms;
      const Matrix sigma = mixture(atoms);
      auto [u, v, low] = product_oracle(cur.grad, atoms);
      out.gap = (cur.grad.cwiseProduct(sigma.conjugate())).sum().real() - low;
      if (out.gap < opt_.gap_tol) {
        out.converged = true;
        break;
      }
      // Line search along the conditional-gradient direction.
      Vector x = linalg::kron(u, v);
      const Matrix vertex = twirl(x * x.adjoint());
      auto phi = [&](double t) { return evaluate((1.0 - t) * sigma + t * vertex, mu, false).f; };
      double lo = 0.0, hi = 1.0;
      const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
      double f1 = phi(x1), f2 = phi(x2);
      for (int k = 0; k < 50 && hi - lo > 1e-12; ++k) {
        if (f1 <= f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - golden * (hi - lo);
          f1 = phi(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + golden * (hi - lo);
          f2 = phi(x2);
        }
      }
      const double t = 0.5 * (lo + hi);
      if (phi(t) < cur.f) {
        for (auto& a : atoms) a.w *= (1.0 - t);
        atoms.push_back({u, v, t});
      } else {
        atoms.push_back({u, v, 1e-6});
      }
      prune(atoms);
      auto fg = [&](const RealVec& p, RealVec& g) { return objective(p, g, mu); };
      auto refined = lbfgs(fg, pack(atoms), opt_.refine_iterations);
      auto candidate = unpack(refined.x);
      Eval next = evaluate(mixture(candidate), mu, true);
      if (next.f <= cur.f) {
        atoms = std::move(candidate);
        prune(atoms);
      }
      cur = evaluate(mixture(atoms), mu, true);
      // Dropping atoms at the cap can cost more than the step gained.
      if (!(cur.f <= before)) {
        atoms = previous;
        cur = evaluate(mixture(atoms), mu, true);
      }
      const double improvement = before - cur.f;
      quiet = improvement < opt_.improvement_tol ? quiet + 1 : 0;
      if (quiet >= patience) {
        out.converged = true;
        break;
      }
    }
    out.atoms = std::move(atoms);
    out.eval = cur;
    return out;
  }

  /// Eigenproducts of rho_A (x) rho_B with their weights.
  std::vector<Atom> product_of_marginals() const {
    std::vector<Atom> atoms;
    for (Eigen::Index i = 0; i < p_.ra; ++i)
      for (Eigen::Index j = 0; j < p_.rb; ++j) {
        Atom a;
        a.u = Vector::Unit(p_.ra, i);
        a.v = Vector::Unit(p_.rb, j);
        a.w = std::exp(p_.log_pi[i * p_.rb + j]);
        atoms.push_back(a);
      }
    return atoms;
  }

 private:
  const ReducedProblem& p_;
  const SeparableOptions& opt_;
  std::mt19937_64 rng_;
};

inline LocalLabel local_label(const DensityMatrix& rho, Eigen::Index side_index, int from, int count, bool by_number,
                              bool by_parity, bool by_sz) {
  // side_index is a Kronecker-side index; decode it with the same bit map.
  LocalLabel l;
  int n = 0, sz = 0;
  for (int p = 0; p < count; ++p) {
    if ((side_index >> local_bit(p, count)) & 1) {
      ++n;
      sz += rho.modes[static_cast<std::size_t>(from + p)] % 2 == 0 ? 1 : -1;
    }
  }
  l.n = by_number ? n : (by_parity ? n % 2 : 0);
  l.twice_sz = by_sz ? sz : 0;
  return l;
}

inline std::pair<Matrix, RealVec> blocked_support(const Matrix& m, const std::vector<LocalLabel>& labels,
                                                  std::vector<LocalLabel>& kept_labels, double tol) {
  std::map<LocalLabel, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < m.rows(); ++i) groups[labels[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<Vector> cols;
  std::vector<double> vals;
  for (const auto& [label, idx] : groups) {
    const auto g = static_cast<Eigen::Index>(idx.size());
    Matrix block(g, g);
    for (Eigen::Index r = 0; r < g; ++r)
      for (Eigen::Index c = 0; c < g; ++c) block(r, c) = m(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
    auto e = linalg::eigh(linalg::hermitian_part(block));
    for (Eigen::Index k = g - 1; k >= 0; --k) {
      if (e.values[k] <= tol) continue;
      Vector col = Vector::Zero(m.rows());
      for (Eigen::Index r = 0; r < g; ++r) col[idx[static_cast<std::size_t>(r)]] = e.vectors(r, k);
      cols.push_back(col);
      vals.push_back(e.values[k]);
      kept_labels.push_back(label);
    }
  }
  Matrix v(m.rows(), static_cast<Eigen::Index>(cols.size()));
  RealVec p(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    v.col(static_cast<Eigen::Index>(i)) = cols[i];
    p[static_cast<Eigen::Index>(i)] = vals[i];
  }
  p /= p.sum();
  return {v, p};
}

}  // namespace detail

/// Closest separable state to a bipartite density matrix (split recorded in
/// rho.split). The charge mask of rho constrains the search.
inline SeparableApproximation closest_separable(const DensityMatrix& rho_in, const SeparableOptions& opt = {}) {
  if (rho_in.split < 0) throw std::invalid_argument("closest_separable needs a bipartite density matrix");
  const DensityMatrix& rho = rho_in;
  const KroneckerForm kf = kronecker_form(rho);
  const Marginals mg = marginals(kf);
  const int na = rho.split, nb = rho.mode_count() - na;

  const bool number_a = rho.conserves_number || rho.ssr == SsrMode::number;
  const bool parity_a = rho.conserves_parity || rho.ssr != SsrMode::none;
  std::vector<detail::LocalLabel> la, lb;
  for (Eigen::Index i = 0; i < kf.dim_a; ++i)
    la.push_back(detail::local_label(rho, i, 0, na, number_a, parity_a, rho.conserves_sz));
  for (Eigen::Index i = 0; i < kf.dim_b; ++i)
    lb.push_back(detail::local_label(rho, i, na, nb, number_a, parity_a, rho.conserves_sz));

  detail::ReducedProblem p;
  auto [va, pa] = detail::blocked_support(mg.a, la, p.label_a, 1e-13);
  auto [vb, pb] = detail::blocked_support(mg.b, lb, p.label_b, 1e-13);
  p.va = va;
  p.vb = vb;
  p.ra = va.cols();
  p.rb = vb.cols();
  p.n = p.ra * p.rb;
  const Matrix w = linalg::kron(va, vb);
  p.rho = linalg::hermitian_part(w.adjoint() * kf.matrix * w);
  p.rho /= p.rho.trace().real();
  p.rho_log_rho = -von_neumann_entropy(p.rho);
  p.log_pi.resize(p.n);
  for (Eigen::Index i = 0; i < p.ra; ++i)
    for (Eigen::Index j = 0; j < p.rb; ++j) p.log_pi[i * p.rb + j] = std::log(pa[i]) + std::log(pb[j]);

  // Entry (r, c) of the reduced space is allowed when every conserved charge
  // agrees between the row and column labels.
  p.mask.resize(p.n, p.n);
  for (Eigen::Index r = 0; r < p.n; ++r)
    for (Eigen::Index c = 0; c < p.n; ++c) {
      const auto& ar = p.label_a[static_cast<std::size_t>(r / p.rb)];
      const auto& br = p.label_b[static_cast<std::size_t>(r % p.rb)];
      const auto& ac = p.label_a[static_cast<std::size_t>(c / p.rb)];
      const auto& bc = p.label_b[static_cast<std::size_t>(c % p.rb)];
      bool ok = true;
      if (rho.conserves_number) ok = ok && ar.n + br.n == ac.n + bc.n;
      if (rho.conserves_parity) ok = ok && (ar.n + br.n - ac.n - bc.n) % 2 == 0;
      if (rho.conserves_sz) ok = ok && ar.twice_sz + br.twice_sz == ac.twice_sz + bc.twice_sz;
      if (rho.ssr == SsrMode::number) ok = ok && ar.n == ac.n && br.n == bc.n;
      if (rho.ssr == SsrMode::parity) ok = ok && (ar.n - ac.n) % 2 == 0 && (br.n - bc.n) % 2 == 0;
      p.mask(r, c) = ok;
    }
  for (Eigen::Index r = 0; r < p.n; ++r) {
    auto it = std::find_if(p.blocks.begin(), p.blocks.end(), [&](const auto& b) { return p.mask(r, b.front()); });
    if (it == p.blocks.end()) {
      p.blocks.push_back({r});
    } else {
      it->push_back(r);
    }
  }
  for (const auto& b : p.blocks) p.rho_blocks.push_back(p.rho(b, b));

  detail::SeparableSolver solver(p, opt, opt.seed);
  auto first = solver.run(solver.product_of_marginals(), 0.0, opt.patience);

  struct Candidate {
    std::vector<detail::Atom> atoms;
    double distance, classical, gap;
    bool converged;
  };
  std::vector<Candidate> candidates;
  auto score = [&](const detail::SeparableSolver::Outcome& o) {
    auto e = solver.evaluate(solver.mixture(o.atoms), 0.0, false);
    return Candidate{o.atoms, e.distance, e.classical, o.gap, o.converged};
  };
  candidates.push_back(score(first));
  int iterations = first.iterations;

  // Continuation in mu: each pass starts from the previous one, so the
  // iterate slides along the set of near-minimizers towards small C while the
  // shrinking weight pulls the distance back to its minimum. The limit is the
  // lexicographic minimum (distance first, then C); it stops once C settles
  // with the distance back within tie_tol.
  const Candidate* chosen = &candidates.front();
  if (p.n > 1) {
    std::vector<detail::Atom> start = first.atoms;
    for (auto& a : start) a.w *= 1.0 - 1e-3;
    for (auto a : solver.product_of_marginals()) {
      a.w *= 1e-3;
      start.push_back(a);
    }
    candidates.reserve(opt.tie_break_weights.size() + 1);
    for (double mu : opt.tie_break_weights) {
      auto pass = solver.run(start, mu, opt.tie_patience);
      iterations += pass.iterations;
      const double previous = candidates.back().classical;
      candidates.push_back(score(pass));
      start = pass.atoms;
      const auto& c = candidates.back();
      if (c.distance <= candidates.front().distance + opt.tie_tol &&
          std::abs(c.classical - previous) < opt.tie_settle) {
        break;
      }
    }
    double best_distance = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) best_distance = std::min(best_distance, c.distance);
    // Latest pass within the tolerance of the best distance.
    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
      if (it->distance <= best_distance + opt.tie_tol) {
        chosen = &*it;
        break;
      }
    }
  }

  SeparableApproximation out;
  Matrix sigma_red = solver.mixture(chosen->atoms);
  out.sigma_star = from_kronecker(kf, w * sigma_red * w.adjoint(), rho);
  for (const auto& a : chosen->atoms) out.ensemble.push_back({a.w, va * a.u, vb * a.v});
  out.converged = first.converged && chosen->converged;
  out.residual = chosen->gap;
  out.distance = std::max(0.0, chosen->distance);
  out.classical = std::max(0.0, chosen->classical);
  out.iterations = iterations;
  return out;
}

}  // namespace orbcorr
