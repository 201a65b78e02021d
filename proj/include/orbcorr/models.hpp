#pragma once

// Hamiltonians (from integral files and built-in lattice models) and the
// closed-form two-orbital model states.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Sparse>

#include "orbcorr/fock.hpp"

namespace orbcorr {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Spin-restricted one- and two-electron integrals of an active space.
///
/// Two-electron values are kept in chemists' notation (ij|kl) with all eight
/// real-orbital permutation images stored explicitly; indices are 0-based.
class IntegralSet {
 public:
  IntegralSet() = default;
  explicit IntegralSet(int orbital_count)
      : norb_(orbital_count),
        one_body_(Eigen::MatrixXd::Zero(orbital_count, orbital_count)),
        two_body_(static_cast<std::size_t>(orbital_count) * orbital_count * orbital_count * orbital_count, 0.0) {
    if (orbital_count < 1) throw std::invalid_argument("orbital count must be positive");
  }

  int orbital_count() const { return norb_; }

  double one_body(int i, int j) const { return one_body_(i, j); }
  const Eigen::MatrixXd& one_body_matrix() const { return one_body_; }
  void set_one_body(int i, int j, double v) {
    one_body_(i, j) = v;
    one_body_(j, i) = v;
  }

  double two_body(int i, int j, int k, int l) const { return two_body_[index(i, j, k, l)]; }

  /// Sets (ij|kl) and its permutation images.
  void set_two_body(int i, int j, int k, int l, double v) {
    for (auto [a, b, c, d] : images(i, j, k, l)) two_body_[index(a, b, c, d)] = v;
  }

  void clear_two_body() { std::fill(two_body_.begin(), two_body_.end(), 0.0); }

  bool two_body_is_zero() const {
    return std::all_of(two_body_.begin(), two_body_.end(), [](double v) { return v == 0.0; });
  }

  double core_energy = 0.0;
  int electron_count = 0;
  int ms2 = 0;
  std::vector<int> orbsym;
  int isym = 1;

  void validate(double tol = 1e-12) const {
    if (one_body_.rows() != norb_) throw std::invalid_argument("one-body matrix has wrong shape");
    if ((one_body_ - one_body_.transpose()).cwiseAbs().maxCoeff() > tol) {
      throw std::invalid_argument("one-body integrals are not symmetric");
    }
    for (int i = 0; i < norb_; ++i)
      for (int j = 0; j < norb_; ++j)
        for (int k = 0; k < norb_; ++k)
          for (int l = 0; l < norb_; ++l) {
            const double v = two_body(i, j, k, l);
            for (auto [a, b, c, d] : images(i, j, k, l)) {
              if (std::abs(two_body(a, b, c, d) - v) > tol) {
                throw std::invalid_argument("two-body integrals violate the 8-fold symmetry");
              }
            }
          }
  }

  friend bool operator==(const IntegralSet& a, const IntegralSet& b) {
    return a.norb_ == b.norb_ && a.one_body_ == b.one_body_ && a.two_body_ == b.two_body_ &&
           a.core_energy == b.core_energy && a.electron_count == b.electron_count && a.ms2 == b.ms2 &&
           a.orbsym == b.orbsym && a.isym == b.isym;
  }

  static std::array<std::array<int, 4>, 8> images(int i, int j, int k, int l) {
    return {{{i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
             {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}}};
  }

 private:
  std::size_t index(int i, int j, int k, int l) const {
    const auto n = static_cast<std::size_t>(norb_);
    return ((static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * n + static_cast<std::size_t>(k)) * n +
           static_cast<std::size_t>(l);
  }

  int norb_ = 0;
  Eigen::MatrixXd one_body_;
  std::vector<double> two_body_;
};

namespace detail {

inline std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

inline bool parse_double(std::string tok, double& out) {
  for (auto& ch : tok) {
    if (ch == 'D' || ch == 'd') ch = 'E';
  }
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_int(const std::string& tok, int& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace detail

/// Reads an FCIDUMP stream.
///
/// Header: a namelist starting with &FCI holding NORB, NELEC, MS2 and the
/// optional ORBSYM, ISYM, closed by &END or '/'. Body: `value i j k l`
/// with 1-based indices; `i j 0 0` is a one-electron integral, `0 0 0 0`
/// the core energy and `i 0 0 0` an orbital energy (ignored).
inline IntegralSet parse_fcidump(std::istream& in) {
  std::string line;
  int lineno = 0;
  std::string header;
  bool started = false;
  bool closed = false;
  int header_line = 1;

  while (!closed && std::getline(in, line)) {
    ++lineno;
    std::string u = detail::upper(line);
    if (!started) {
      auto pos = u.find_first_not_of(" \t\r");
      if (pos == std::string::npos) continue;
      if (u.compare(pos, 4, "&FCI") != 0) throw ParseError(lineno, "expected '&FCI' header");
      started = true;
      header_line = lineno;
      u = u.substr(pos + 4);
    }
    for (const char* term : {"&END", "$END", "/"}) {
      auto p = u.find(term);
      if (p != std::string::npos) {
        u = u.substr(0, p);
        closed = true;
        break;
      }
    }
    header += ' ' + u;
  }
  if (!started) throw ParseError(lineno, "missing '&FCI' header");
  if (!closed) throw ParseError(lineno, "unterminated header namelist");

  for (auto& ch : header) {
    if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
  }
  std::vector<std::string> toks;
  {
    std::string cur;
    for (char ch : header) {
      if (ch == ' ' || ch == '=') {
        if (!cur.empty()) toks.push_back(cur);
        cur.clear();
        if (ch == '=') toks.emplace_back("=");
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) toks.push_back(cur);
  }
  std::map<std::string, std::vector<std::string>> fields;
  for (std::size_t i = 0; i < toks.size();) {
    if (i + 1 >= toks.size() || toks[i + 1] != "=") {
      throw ParseError(header_line, "malformed header near '" + toks[i] + "'");
    }
    std::string key = toks[i];
    std::vector<std::string> vals;
    std::size_t j = i + 2;
    while (j < toks.size() && !(j + 1 < toks.size() && toks[j + 1] == "=")) vals.push_back(toks[j++]);
    fields[key] = vals;
    i = j;
  }

  auto int_field = [&](const std::string& key, std::optional<int> fallback) -> int {
    auto it = fields.find(key);
    if (it == fields.end()) {
      if (fallback) return *fallback;
      throw ParseError(header_line, "header lacks " + key);
    }
    int v = 0;
    if (it->second.size() != 1 || !detail::parse_int(it->second[0], v)) {
      throw ParseError(header_line, "non-numeric value for " + key);
    }
    return v;
  };

  const int norb = int_field("NORB", std::nullopt);
  if (norb < 1) throw ParseError(header_line, "NORB must be positive");
  IntegralSet ints(norb);
  ints.electron_count = int_field("NELEC", std::nullopt);
  ints.ms2 = int_field("MS2", 0);
  ints.isym = int_field("ISYM", 1);
  if (auto it = fields.find("ORBSYM"); it != fields.end()) {
    for (const auto& t : it->second) {
      int v = 0;
      if (!detail::parse_int(t, v)) throw ParseError(header_line, "non-numeric ORBSYM entry");
      ints.orbsym.push_back(v);
    }
  }
  if (auto it = fields.find("UHF"); it != fields.end() && !it->second.empty() &&
                                    it->second[0].find('T') != std::string::npos) {
    throw ParseError(header_line, "unrestricted integrals are not supported");
  }

  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> parts;
    for (std::string t; ls >> t;) parts.push_back(t);
    if (parts.empty()) continue;
    if (parts.size() != 5) throw ParseError(lineno, "expected 'value i j k l'");
    double value = 0.0;
    if (!detail::parse_double(parts[0], value)) throw ParseError(lineno, "non-numeric value '" + parts[0] + "'");
    int idx[4];
    for (int q = 0; q < 4; ++q) {
      if (!detail::parse_int(parts[static_cast<std::size_t>(q + 1)], idx[q])) {
        throw ParseError(lineno, "non-numeric index '" + parts[static_cast<std::size_t>(q + 1)] + "'");
      }
      if (idx[q] < 0 || idx[q] > norb) {
        throw ParseError(lineno, "index " + std::to_string(idx[q]) + " exceeds NORB=" + std::to_string(norb));
      }
    }
    const auto [i, j, k, l] = idx;
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      ints.core_energy = value;
    } else if (i > 0 && j > 0 && k > 0 && l > 0) {
      ints.set_two_body(i - 1, j - 1, k - 1, l - 1, value);
    } else if (i > 0 && j > 0 && k == 0 && l == 0) {
      ints.set_one_body(i - 1, j - 1, value);
    } else if (i > 0 && j == 0 && k == 0 && l == 0) {
      // orbital energy, not part of the Hamiltonian
    } else {
      throw ParseError(lineno, "unrecognized index pattern");
    }
  }
  return ints;
}

inline IntegralSet parse_fcidump(const std::string& text) {
  std::istringstream in(text);
  return parse_fcidump(in);
}

/// Writes canonical, value-exact FCIDUMP text.
inline void write_fcidump(const IntegralSet& ints, std::ostream& out) {
  const int n = ints.orbital_count();
  out << "&FCI NORB=" << n << ",NELEC=" << ints.electron_count << ",MS2=" << ints.ms2 << ",\n";
  if (!ints.orbsym.empty()) {
    out << "  ORBSYM=";
    for (int s : ints.orbsym) out << s << ',';
    out << '\n';
  }
  out << "  ISYM=" << ints.isym << ",\n&END\n";
  out << std::scientific << std::setprecision(17);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l <= k; ++l) {
          if (i * (i + 1) / 2 + j < k * (k + 1) / 2 + l) continue;
          const double v = ints.two_body(i, j, k, l);
          if (v != 0.0) out << v << ' ' << i + 1 << ' ' << j + 1 << ' ' << k + 1 << ' ' << l + 1 << '\n';
        }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = ints.one_body(i, j);
      if (v != 0.0) out << v << ' ' << i + 1 << ' ' << j + 1 << " 0 0\n";
    }
  out << ints.core_energy << " 0 0 0 0\n";
}

inline std::string to_fcidump(const IntegralSet& ints) {
  std::ostringstream out;
  write_fcidump(ints, out);
  return out.str();
}

/// Hermitian operator restricted to one sector basis.
class SparseOperator {
 public:
  using Storage = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

  SparseOperator(BasisPtr basis, Storage m) : basis_(std::move(basis)), m_(std::move(m)) {
    if (static_cast<std::size_t>(m_.rows()) != basis_->size() || m_.rows() != m_.cols()) {
      throw std::invalid_argument("operator shape does not match its basis");
    }
    m_.makeCompressed();
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Storage& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

  Vector apply(const Vector& v) const { return m_ * v; }
  Matrix to_dense() const { return Matrix(m_); }

  std::vector<Eigen::Triplet<cplx>> triplets() const {
    std::vector<Eigen::Triplet<cplx>> out;
    for (Eigen::Index c = 0; c < m_.outerSize(); ++c)
      for (Storage::InnerIterator it(m_, c); it; ++it) out.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (Eigen::Index c = 0; c < m_.outerSize(); ++c)
      for (Storage::InnerIterator it(m_, c); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }

  double hermiticity_defect() const {
    Storage adj = m_.adjoint();
    Storage diff = m_ - adj;
    double m = 0.0;
    for (Eigen::Index c = 0; c < diff.outerSize(); ++c)
      for (Storage::InnerIterator it(diff, c); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }

  bool is_real() const {
    for (Eigen::Index c = 0; c < m_.outerSize(); ++c)
      for (Storage::InnerIterator it(m_, c); it; ++it)
        if (it.value().imag() != 0.0) return false;
    return true;
  }

 private:
  BasisPtr basis_;
  Storage m_;
};

namespace detail {

/// Applies a product of creation/annihilation operators (rightmost first).
/// `ops` lists (mode, is_creation) in written left-to-right order.
inline std::optional<SignedConfig> apply_string(OccupationConfig c, const std::vector<std::pair<int, bool>>& ops) {
  int phase = 1;
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    auto r = it->second ? apply_creation(c, it->first) : apply_annihilation(c, it->first);
    if (!r) return std::nullopt;
    c = r->config;
    phase *= r->phase;
  }
  return SignedConfig{c, phase};
}

inline SparseOperator assemble(BasisPtr basis, std::vector<Eigen::Triplet<cplx>>& trips) {
  const auto n = static_cast<Eigen::Index>(basis->size());
  SparseOperator::Storage m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.prune(cplx{0.0, 0.0});
  return SparseOperator(std::move(basis), std::move(m));
}

}  // namespace detail

/// Second-quantized electronic Hamiltonian
///   H = sum T_ij c+_is c_js + sum V_ijkl c+_is c+_jt c_kt c_ls + E_core
/// with V_ijkl = (il|jk)/2 translated from the chemists'-notation integrals.
inline SparseOperator build_hamiltonian(const IntegralSet& ints, BasisPtr basis) {
  const int d = ints.orbital_count();
  if (basis->mode_count() != 2 * d) {
    throw std::invalid_argument("basis has " + std::to_string(basis->mode_count()) + " modes but integrals need " +
                                std::to_string(2 * d));
  }
  struct OneTerm { int i, j; double v; };
  struct TwoTerm { int i, j, k, l; double v; };
  std::vector<OneTerm> one;
  std::vector<TwoTerm> two;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (ints.one_body(i, j) != 0.0) one.push_back({i, j, ints.one_body(i, j)});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          if (double v = ints.two_body(i, j, k, l); v != 0.0) two.push_back({i, j, k, l, 0.5 * v});

  std::vector<Eigen::Triplet<cplx>> trips;
  const auto& b = *basis;
  auto push = [&](std::size_t col, const std::optional<SignedConfig>& r, double v) {
    if (!r) return;
    auto row = b.index_of(r->config);
    if (!row) throw std::logic_error("Hamiltonian leaves the sector basis");
    trips.emplace_back(static_cast<int>(*row), static_cast<int>(col), cplx{v * r->phase, 0.0});
  };
  for (std::size_t col = 0; col < b.size(); ++col) {
    const auto& c = b[col];
    if (ints.core_energy != 0.0) trips.emplace_back(static_cast<int>(col), static_cast<int>(col), cplx{ints.core_energy, 0.0});
    for (const auto& t : one) {
      for (Spin s : {Spin::up, Spin::down}) {
        push(col, detail::apply_string(c, {{mode_index(t.i, s), true}, {mode_index(t.j, s), false}}), t.v);
      }
    }
    // (ij|kl)/2 c+_{i s} c+_{k t} c_{l t} c_{j s}
    for (const auto& t : two) {
      for (Spin s : {Spin::up, Spin::down}) {
        for (Spin u : {Spin::up, Spin::down}) {
          push(col,
               detail::apply_string(c, {{mode_index(t.i, s), true},
                                        {mode_index(t.k, u), true},
                                        {mode_index(t.l, u), false},
                                        {mode_index(t.j, s), false}}),
               t.v);
        }
      }
    }
  }
  return detail::assemble(std::move(basis), trips);
}

struct HubbardParams {
  double t = 1.0;
  double U = 0.0;
  int site_count = 2;

  void validate() const {
    if (!(t > 0.0)) throw std::invalid_argument("Hubbard hopping t must be positive");
    if (U < 0.0) throw std::invalid_argument("Hubbard repulsion U must be non-negative");
    if (site_count < 2) throw std::invalid_argument("Hubbard model needs at least two sites");
  }
};

/// Open-boundary Hubbard chain built directly from hopping and on-site terms.
inline SparseOperator hubbard_hamiltonian(const HubbardParams& p, BasisPtr basis) {
  p.validate();
  if (basis->mode_count() != 2 * p.site_count) throw std::invalid_argument("basis does not match the site count");
  std::vector<Eigen::Triplet<cplx>> trips;
  const auto& b = *basis;
  for (std::size_t col = 0; col < b.size(); ++col) {
    const auto& c = b[col];
    double diag = 0.0;
    for (int s = 0; s < p.site_count; ++s) {
      if (c.occupied(mode_index(s, Spin::up)) && c.occupied(mode_index(s, Spin::down))) diag += p.U;
    }
    if (diag != 0.0) trips.emplace_back(static_cast<int>(col), static_cast<int>(col), cplx{diag, 0.0});
    for (int s = 0; s + 1 < p.site_count; ++s) {
      for (Spin sp : {Spin::up, Spin::down}) {
        for (auto [to, from] : {std::pair{s, s + 1}, std::pair{s + 1, s}}) {
          auto r = detail::apply_string(c, {{mode_index(to, sp), true}, {mode_index(from, sp), false}});
          if (!r) continue;
          auto row = b.index_of(r->config);
          if (!row) throw std::logic_error("hopping leaves the sector basis");
          trips.emplace_back(static_cast<int>(*row), static_cast<int>(col), cplx{-p.t * r->phase, 0.0});
        }
      }
    }
  }
  return detail::assemble(std::move(basis), trips);
}

/// Integral representation of the open Hubbard chain.
inline IntegralSet hubbard_integrals(const HubbardParams& p, int electrons, int ms2 = 0) {
  p.validate();
  IntegralSet ints(p.site_count);
  for (int s = 0; s + 1 < p.site_count; ++s) ints.set_one_body(s, s + 1, -p.t);
  for (int s = 0; s < p.site_count; ++s) ints.set_two_body(s, s, s, s, p.U);
  ints.electron_count = electrons;
  ints.ms2 = ms2;
  return ints;
}

struct HubbardDimerCoefficients {
  double a = 0.0;
  double b = 0.0;
  double W = 0.0;
};

/// Ground-state coefficients of the half-filled Hubbard dimer.
inline HubbardDimerCoefficients hubbard_dimer_coefficients(const HubbardParams& p) {
  if (!(p.t > 0.0)) throw std::invalid_argument("Hubbard hopping t must be positive");
  const double W = std::sqrt(p.U * p.U / 4.0 + 4.0 * p.t * p.t);
  const double a = std::sqrt((W + p.U / 2.0) / (2.0 * W));
  const double b = 2.0 * p.t / std::sqrt(2.0 * W * (W + p.U / 2.0));
  return {a, b, W};
}

inline double hubbard_dimer_energy(const HubbardParams& p) {
  return p.U / 2.0 - hubbard_dimer_coefficients(p).W;
}

struct OneElectronState {};
struct DissociatedH2State {};
struct HubbardDimerState {
  HubbardParams params;
};
using AnalyticKind = std::variant<OneElectronState, DissociatedH2State, HubbardDimerState>;

namespace detail {

using CreationString = std::vector<int>;

inline StateVector superpose(const SectorLabel& sector, const std::vector<std::pair<double, CreationString>>& terms) {
  auto basis = make_basis(4, sector);
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(basis->size()));
  for (const auto& [coef, modes] : terms) {
    std::vector<std::pair<int, bool>> ops;
    for (int m : modes) ops.emplace_back(m, true);
    auto r = apply_string(OccupationConfig::vacuum(4), ops);
    if (!r) continue;
    amps[static_cast<Eigen::Index>(*basis->index_of(r->config))] += coef * r->phase;
  }
  return StateVector(basis, amps).first_nonzero_positive();
}

}  // namespace detail

/// The closed-form two-orbital states (D = 4 modes).
inline StateVector analytic_state(const AnalyticKind& kind) {
  const int up1 = mode_index(0, Spin::up), dn1 = mode_index(0, Spin::down);
  const int up2 = mode_index(1, Spin::up), dn2 = mode_index(1, Spin::down);
  const double r2 = 1.0 / std::sqrt(2.0);
  return std::visit(
      [&](const auto& k) -> StateVector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, OneElectronState>) {
          return detail::superpose(SectorLabel::fixed(1, 1), {{r2, {up1}}, {r2, {up2}}});
        } else if constexpr (std::is_same_v<K, DissociatedH2State>) {
          return detail::superpose(SectorLabel::fixed(2, 0), {{r2, {up1, dn2}}, {-r2, {dn1, up2}}});
        } else {
          const auto c = hubbard_dimer_coefficients(k.params);
          return detail::superpose(SectorLabel::fixed(2, 0), {{c.a * r2, {up1, dn2}},
                                                              {-c.a * r2, {dn1, up2}},
                                                              {c.b * r2, {up1, dn1}},
                                                              {-c.b * r2, {dn2, up2}}});
        }
      },
      kind);
}

}  // namespace orbcorr
