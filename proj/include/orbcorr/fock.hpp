#pragma once

// Occupation-number representation of a fermionic Fock space.
//
// Modes are numbered orbital-major with spin-up before spin-down:
//   mode 2*o   -> orbital o, spin up
//   mode 2*o+1 -> orbital o, spin down
// All fermionic signs follow from this single global order.
//
// Bit layout: every orbital owns one base-4 digit of the stored pattern, the
// first orbital being the most significant digit. Inside a digit the up mode
// is bit 0 and the down mode bit 1, so the digit value enumerates the local
// states in the order {vacuum, up, down, up+down}. Numeric ordering of the
// patterns is therefore the Kronecker ordering over orbitals.

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace orbcorr {

using cplx = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

inline constexpr int max_modes = 64;

class FockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySectorError : public FockError {
 public:
  using FockError::FockError;
};

enum class Spin { up = 0, down = 1 };

inline int mode_index(int orbital, Spin spin) { return 2 * orbital + static_cast<int>(spin); }
inline int orbital_of(int mode) { return mode / 2; }
inline Spin spin_of(int mode) { return (mode % 2 == 0) ? Spin::up : Spin::down; }

/// Bit position of `mode` in a pattern over `mode_count` modes.
inline int bit_position(int mode, int mode_count) {
  const int padded = mode_count + (mode_count % 2);
  return padded - 2 - 2 * (mode / 2) + (mode % 2);
}

inline std::uint64_t mode_bit(int mode, int mode_count) {
  return std::uint64_t{1} << bit_position(mode, mode_count);
}

/// Occupation flags n_1..n_D over `mode_count` modes.
class OccupationConfig {
 public:
  OccupationConfig() = default;

  OccupationConfig(int mode_count, std::uint64_t bits) : mode_count_(mode_count), bits_(bits) {
    if (mode_count < 1 || mode_count > max_modes) {
      throw FockError("mode count must lie in [1, 64], got " + std::to_string(mode_count));
    }
    if (bits & ~valid_mask(mode_count)) {
      throw FockError("occupation pattern has bits outside the mode range");
    }
  }

  static OccupationConfig vacuum(int mode_count) { return {mode_count, 0}; }

  static OccupationConfig from_modes(int mode_count, const std::vector<int>& occupied) {
    std::uint64_t bits = 0;
    for (int m : occupied) {
      check_mode(m, mode_count);
      bits |= mode_bit(m, mode_count);
    }
    return {mode_count, bits};
  }

  /// Parses "n_1 n_2 ... n_D" written as a 0/1 string, e.g. "1001".
  static OccupationConfig from_string(const std::string& flags) {
    std::vector<int> occ;
    for (std::size_t m = 0; m < flags.size(); ++m) {
      if (flags[m] == '1') {
        occ.push_back(static_cast<int>(m));
      } else if (flags[m] != '0') {
        throw FockError("occupation string may only contain 0 and 1: " + flags);
      }
    }
    return from_modes(static_cast<int>(flags.size()), occ);
  }

  int mode_count() const { return mode_count_; }
  std::uint64_t bits() const { return bits_; }

  bool occupied(int mode) const {
    check_mode(mode, mode_count_);
    return (bits_ & mode_bit(mode, mode_count_)) != 0;
  }

  int particle_count() const { return std::popcount(bits_); }

  /// Twice the S_z eigenvalue.
  int twice_sz() const {
    int s = 0;
    for (int m = 0; m < mode_count_; ++m) {
      if (bits_ & mode_bit(m, mode_count_)) s += (m % 2 == 0) ? 1 : -1;
    }
    return s;
  }

  /// Number of occupied modes with index strictly below `mode`.
  int occupied_before(int mode) const {
    check_mode(mode, mode_count_);
    // Lower orbitals sit in the more significant digits.
    const int pos = bit_position(mode, mode_count_);
    const int digit_base = pos - (mode % 2);
    std::uint64_t before = (digit_base + 2 >= 64) ? 0 : (bits_ >> (digit_base + 2));
    int count = std::popcount(before);
    if (mode % 2 == 1 && (bits_ & (std::uint64_t{1} << digit_base))) ++count;
    return count;
  }

  std::vector<int> occupied_modes() const {
    std::vector<int> out;
    for (int m = 0; m < mode_count_; ++m) {
      if (bits_ & mode_bit(m, mode_count_)) out.push_back(m);
    }
    return out;
  }

  std::string to_string() const {
    std::string s(static_cast<std::size_t>(mode_count_), '0');
    for (int m = 0; m < mode_count_; ++m) {
      if (bits_ & mode_bit(m, mode_count_)) s[static_cast<std::size_t>(m)] = '1';
    }
    return s;
  }

  OccupationConfig with_flipped(int mode) const {
    return {mode_count_, bits_ ^ mode_bit(mode, mode_count_)};
  }

  friend bool operator==(const OccupationConfig&, const OccupationConfig&) = default;
  friend auto operator<=>(const OccupationConfig& a, const OccupationConfig& b) {
    return a.bits_ <=> b.bits_;
  }

  static std::uint64_t valid_mask(int mode_count) {
    std::uint64_t m = 0;
    for (int i = 0; i < mode_count; ++i) m |= mode_bit(i, mode_count);
    return m;
  }

  static void check_mode(int mode, int mode_count) {
    if (mode < 0 || mode >= mode_count) {
      throw FockError("mode " + std::to_string(mode) + " out of range for " +
                      std::to_string(mode_count) + " modes");
    }
  }

 private:
  int mode_count_ = 2;
  std::uint64_t bits_ = 0;
};

/// Result of a single creation or annihilation operator on a configuration.
struct SignedConfig {
  OccupationConfig config;
  int phase = 1;
};

/// f^dagger_mode |config>; empty when the mode is already occupied.
inline std::optional<SignedConfig> apply_creation(const OccupationConfig& config, int mode) {
  if (config.occupied(mode)) return std::nullopt;
  const int sign = (config.occupied_before(mode) % 2 == 0) ? 1 : -1;
  return SignedConfig{config.with_flipped(mode), sign};
}

/// f_mode |config>; empty when the mode is unoccupied.
inline std::optional<SignedConfig> apply_annihilation(const OccupationConfig& config, int mode) {
  if (!config.occupied(mode)) return std::nullopt;
  const int sign = (config.occupied_before(mode) % 2 == 0) ? 1 : -1;
  return SignedConfig{config.with_flipped(mode), sign};
}

enum class Parity { even = 0, odd = 1 };

/// Quantum numbers selecting a sector; unset fields are unconstrained.
struct SectorLabel {
  std::optional<int> particle_count;
  std::optional<int> twice_sz;  // 2M
  std::optional<Parity> parity;

  static SectorLabel unconstrained() { return {}; }
  static SectorLabel fixed(int n, int twice_m) { return {n, twice_m, std::nullopt}; }
  static SectorLabel particles(int n) { return {n, std::nullopt, std::nullopt}; }

  void validate() const {
    if (particle_count && *particle_count < 0) throw FockError("particle count must be >= 0");
    if (particle_count && parity &&
        static_cast<int>(*parity) != (*particle_count % 2)) {
      throw FockError("sector parity contradicts its particle count");
    }
  }

  bool contains(const OccupationConfig& c) const {
    const int n = c.particle_count();
    if (particle_count && n != *particle_count) return false;
    if (parity && static_cast<int>(*parity) != n % 2) return false;
    if (twice_sz && c.twice_sz() != *twice_sz) return false;
    return true;
  }

  friend bool operator==(const SectorLabel&, const SectorLabel&) = default;
};

/// Ordered list of configurations spanning one sector.
class FockBasis {
 public:
  FockBasis(int mode_count, SectorLabel sector, std::vector<OccupationConfig> configs)
      : mode_count_(mode_count), sector_(sector), configs_(std::move(configs)) {
    for (std::size_t i = 0; i < configs_.size(); ++i) {
      if (configs_[i].mode_count() != mode_count_) throw FockError("config mode count mismatch");
      if (i > 0 && !(configs_[i - 1] < configs_[i])) {
        throw FockError("basis configurations must be strictly increasing");
      }
    }
  }

  int mode_count() const { return mode_count_; }
  const SectorLabel& sector() const { return sector_; }
  std::size_t size() const { return configs_.size(); }
  const OccupationConfig& operator[](std::size_t i) const { return configs_[i]; }
  const std::vector<OccupationConfig>& configs() const { return configs_; }

  std::optional<std::size_t> index_of(const OccupationConfig& c) const {
    auto it = std::lower_bound(configs_.begin(), configs_.end(), c);
    if (it == configs_.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - configs_.begin());
  }

  std::optional<std::size_t> index_of_bits(std::uint64_t bits) const {
    auto it = std::lower_bound(configs_.begin(), configs_.end(), bits,
                               [](const OccupationConfig& c, std::uint64_t b) { return c.bits() < b; });
    if (it == configs_.end() || it->bits() != bits) return std::nullopt;
    return static_cast<std::size_t>(it - configs_.begin());
  }

 private:
  int mode_count_;
  SectorLabel sector_;
  std::vector<OccupationConfig> configs_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

namespace detail {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Visits all n-subsets of {0..modes-1} as mode lists in lexicographic order.
template <class F>
void for_each_subset(int modes, int n, F&& visit) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    visit(idx);
    int i = n - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == modes - n + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace detail

/// Upper bound on enumerated basis size.
inline constexpr double max_basis_size = 1 << 24;

/// All configurations of `mode_count` modes inside `sector`, ascending by bit pattern.
inline FockBasis enumerate_sector_basis(int mode_count, const SectorLabel& sector) {
  if (mode_count < 2 || mode_count > max_modes || mode_count % 2 != 0) {
    throw FockError("mode count must be even and lie in [2, 64], got " + std::to_string(mode_count));
  }
  sector.validate();

  std::vector<int> counts;
  if (sector.particle_count) {
    counts.push_back(*sector.particle_count);
  } else {
    for (int n = 0; n <= mode_count; ++n) {
      if (!sector.parity || static_cast<int>(*sector.parity) == n % 2) counts.push_back(n);
    }
  }

  double total = 0.0;
  for (int n : counts) total += detail::binomial(mode_count, n);
  if (total > max_basis_size) {
    throw FockError("sector too large to enumerate (" + std::to_string(total) + " configurations)");
  }

  std::vector<OccupationConfig> configs;
  for (int n : counts) {
    if (n > mode_count) continue;
    detail::for_each_subset(mode_count, n, [&](const std::vector<int>& modes) {
      auto c = OccupationConfig::from_modes(mode_count, modes);
      if (sector.contains(c)) configs.push_back(c);
    });
  }
  if (configs.empty()) throw EmptySectorError("sector contains no configurations");
  std::sort(configs.begin(), configs.end());
  return FockBasis(mode_count, sector, std::move(configs));
}

inline BasisPtr make_basis(int mode_count, const SectorLabel& sector) {
  return std::make_shared<const FockBasis>(enumerate_sector_basis(mode_count, sector));
}

/// Pure state |Psi> with amplitudes over a sector basis; always normalized.
class StateVector {
 public:
  StateVector(BasisPtr basis, Vector amplitudes) : basis_(std::move(basis)), amps_(std::move(amplitudes)) {
    if (!basis_) throw FockError("state requires a basis");
    if (static_cast<std::size_t>(amps_.size()) != basis_->size()) {
      throw FockError("amplitude count does not match basis size");
    }
    const double norm = amps_.norm();
    if (!(norm > 0.0)) throw FockError("cannot normalize the zero vector");
    amps_ /= norm;
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Vector& amplitudes() const { return amps_; }
  int mode_count() const { return basis_->mode_count(); }
  int orbital_count() const { return basis_->mode_count() / 2; }

  cplx amplitude(const OccupationConfig& c) const {
    auto i = basis_->index_of(c);
    return i ? amps_[static_cast<Eigen::Index>(*i)] : cplx{0.0, 0.0};
  }

  /// Multiplies by a global phase so that the first amplitude of maximal
  /// modulus (within `tol`) is real and positive.
  StateVector phase_fixed(double tol = 1e-8) const {
    const double amax = amps_.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < amps_.size(); ++i) {
      if (std::abs(amps_[i]) >= amax - tol) {
        const cplx ph = std::conj(amps_[i]) / std::abs(amps_[i]);
        return StateVector(basis_, amps_ * ph);
      }
    }
    return *this;
  }

  /// Same as phase_fixed but anchored on the first nonzero amplitude.
  StateVector first_nonzero_positive(double tol = 1e-14) const {
    for (Eigen::Index i = 0; i < amps_.size(); ++i) {
      if (std::abs(amps_[i]) > tol) {
        const cplx ph = std::conj(amps_[i]) / std::abs(amps_[i]);
        return StateVector(basis_, amps_ * ph);
      }
    }
    return *this;
  }

 private:
  BasisPtr basis_;
  Vector amps_;
};

}  // namespace orbcorr
