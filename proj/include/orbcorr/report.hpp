#pragma once

// Whole-state analyses: single-orbital and pairwise tables for several
// superselection regimes, model sweeps, and their JSON / CSV / SVG forms.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "orbcorr/correlation.hpp"
#include "orbcorr/fock.hpp"
#include "orbcorr/groundstate.hpp"
#include "orbcorr/models.hpp"
#include "orbcorr/rdm.hpp"

namespace orbcorr {

inline constexpr const char* tool_version = "0.1.0";

/// Square table over the selected orbitals; diagonal entries stay empty.
using PairTable = std::vector<std::vector<std::optional<double>>>;

struct PairTables {
  PairTable total;
  PairTable quantum;
  PairTable classical;
  friend bool operator==(const PairTables&, const PairTables&) = default;
};

struct UnconvergedPair {
  int i = 0;  // orbital indices, 0-based
  int j = 0;
  SsrMode ssr = SsrMode::none;
  double residual = 0.0;
  friend bool operator==(const UnconvergedPair&, const UnconvergedPair&) = default;
};

struct ReportMetadata {
  std::string version = tool_version;
  std::string units = "nats";
  std::uint64_t optimizer_seed = 0;
  std::uint64_t ground_state_seed = 0;
  SeparableOptions separable;
  double degeneracy_gap = 0.0;
  double zero_floor = 1e-10;
  bool ground_state_degenerate = false;
  double ground_state_residual = 0.0;
  bool all_converged = true;
  std::vector<UnconvergedPair> unconverged;
  friend bool operator==(const ReportMetadata&, const ReportMetadata&) = default;
};

struct AnalysisReport {
  std::string source;
  int orbital_count = 0;
  std::vector<int> orbitals;  // selected orbitals, 0-based
  int electrons = 0;
  int ms2 = 0;
  std::optional<double> ground_energy;
  double intrinsic_correlation = 0.0;
  double slater_overlap = 0.0;
  std::vector<SsrMode> modes;
  std::map<SsrMode, std::vector<CorrelationTriple>> single;  // one entry per selected orbital
  std::map<SsrMode, PairTables> pairwise;
  ReportMetadata metadata;

  friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

struct AnalysisOptions {
  std::vector<SsrMode> modes{SsrMode::none, SsrMode::parity, SsrMode::number};
  std::vector<int> orbitals;  // empty selects all
  SeparableOptions separable;
  unsigned threads = 0;  // 0 uses the hardware concurrency
};

namespace detail {

/// Runs fn(k) for k in [0, count) on a small thread pool. The first
/// exception thrown by any job is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_lock);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline PairTable empty_table(std::size_t n) { return PairTable(n, std::vector<std::optional<double>>(n)); }

}  // namespace detail

/// Single-orbital and pairwise measures of a pure state.
inline AnalysisReport analyze_state(const StateVector& state, const AnalysisOptions& opt = {}) {
  if (opt.modes.empty()) throw std::invalid_argument("at least one superselection mode is required");
  AnalysisReport r;
  r.orbital_count = state.orbital_count();
  r.orbitals = opt.orbitals;
  if (r.orbitals.empty()) {
    for (int k = 0; k < r.orbital_count; ++k) r.orbitals.push_back(k);
  }
  for (int k : r.orbitals) {
    if (k < 0 || k >= r.orbital_count) {
      throw std::out_of_range("orbital " + std::to_string(k + 1) + " is outside 1.." + std::to_string(r.orbital_count));
    }
  }
  if (std::set<int>(r.orbitals.begin(), r.orbitals.end()).size() != r.orbitals.size()) {
    throw std::invalid_argument("orbital selection contains duplicates");
  }
  const auto& sector = state.basis().sector();
  const OneParticleRdm gamma = one_particle_rdm(state);
  r.electrons = sector.particle_count ? *sector.particle_count
                                      : static_cast<int>(std::lround(gamma.gamma.trace().real()));
  r.ms2 = sector.twice_sz.value_or(0);
  r.intrinsic_correlation = intrinsic_correlation(NaturalOccupations::from(gamma), r.electrons);
  r.slater_overlap = natural_slater_overlap(state).overlap;
  r.modes = opt.modes;
  r.metadata.optimizer_seed = opt.separable.seed;
  r.metadata.separable = opt.separable;

  const std::size_t n = r.orbitals.size();
  for (SsrMode m : opt.modes) {
    auto& row = r.single[m];
    for (int k : r.orbitals) row.push_back(correlation_profile(state, k, m));
    r.pairwise[m] = {detail::empty_table(n), detail::empty_table(n), detail::empty_table(n)};
  }

  struct Job {
    std::size_t a, b;
    SsrMode mode;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (SsrMode m : opt.modes) jobs.push_back({a, b, m});
  std::vector<CorrelationTriple> results(jobs.size());
  std::vector<double> residuals(jobs.size(), 0.0);
  detail::parallel_for(jobs.size(), opt.threads, [&](std::size_t k) {
    const Job& job = jobs[k];
    const int i = r.orbitals[job.a], j = r.orbitals[job.b];
    SeparableOptions so = opt.separable;
    so.seed = pair_seed(opt.separable.seed, i, j, job.mode);
    auto pc = pair_correlation(two_orbital_rdm(state, i, j), Bipartition::orbitals(i, j), job.mode, so);
    results[k] = pc.triple;
    residuals[k] = pc.separable.residual;
  });

  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    const auto& t = results[k];
    auto& tables = r.pairwise[job.mode];
    for (auto [x, y] : {std::pair{job.a, job.b}, std::pair{job.b, job.a}}) {
      tables.total[x][y] = t.total;
      tables.quantum[x][y] = t.quantum;
      tables.classical[x][y] = t.classical;
    }
    if (!t.converged) {
      r.metadata.all_converged = false;
      r.metadata.unconverged.push_back({r.orbitals[job.a], r.orbitals[job.b], job.mode, residuals[k]});
    }
  }
  return r;
}

/// Ground state of `h` in its basis sector followed by analyze_state.
inline AnalysisReport analyze_ground_state(const SparseOperator& h, const AnalysisOptions& opt = {},
                                           const GroundStateOptions& gs = {}, double energy_shift = 0.0) {
  EigenResult g = ground_state(h, gs);
  AnalysisReport r = analyze_state(g.state, opt);
  r.ground_energy = g.energy + energy_shift;
  r.metadata.ground_state_seed = gs.seed;
  r.metadata.degeneracy_gap = gs.degeneracy_gap;
  r.metadata.ground_state_degenerate = g.degeneracy_flag;
  r.metadata.ground_state_residual = g.residual;
  return r;
}

// ---------------------------------------------------------------- JSON

inline SsrMode ssr_from_string(const std::string& s) {
  if (s == "none") return SsrMode::none;
  if (s == "parity") return SsrMode::parity;
  if (s == "number") return SsrMode::number;
  throw std::invalid_argument("unknown superselection mode: " + s);
}

namespace detail {

inline nlohmann::json table_to_json(const PairTable& t) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : t) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : row) r.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    out.push_back(r);
  }
  return out;
}

inline PairTable table_from_json(const nlohmann::json& j) {
  PairTable t;
  for (const auto& row : j) {
    std::vector<std::optional<double>> r;
    for (const auto& v : row) r.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    t.push_back(r);
  }
  return t;
}

inline nlohmann::json triple_to_json(const CorrelationTriple& t) {
  nlohmann::json j{{"I", t.total}, {"E", t.quantum}, {"ssr", to_string(t.ssr)}, {"converged", t.converged}};
  j["C"] = t.classical ? nlohmann::json(*t.classical) : nlohmann::json(nullptr);
  return j;
}

inline CorrelationTriple triple_from_json(const nlohmann::json& j) {
  CorrelationTriple t;
  t.total = j.at("I").get<double>();
  t.quantum = j.at("E").get<double>();
  if (!j.at("C").is_null()) t.classical = j.at("C").get<double>();
  t.ssr = ssr_from_string(j.at("ssr").get<std::string>());
  t.converged = j.at("converged").get<bool>();
  return t;
}

}  // namespace detail

inline nlohmann::json to_json(const AnalysisReport& r) {
  using nlohmann::json;
  json j;
  j["source"] = r.source;
  j["orbital_count"] = r.orbital_count;
  json orbs = json::array();
  for (int k : r.orbitals) orbs.push_back(k + 1);
  j["orbitals"] = orbs;
  j["electrons"] = r.electrons;
  j["ms2"] = r.ms2;
  j["ground_energy"] = r.ground_energy ? json(*r.ground_energy) : json(nullptr);
  j["intrinsic_correlation"] = r.intrinsic_correlation;
  j["slater_overlap"] = r.slater_overlap;
  json modes = json::array();
  for (SsrMode m : r.modes) modes.push_back(to_string(m));
  j["ssr_modes"] = modes;
  json single = json::object();
  for (const auto& [m, row] : r.single) {
    json arr = json::array();
    for (const auto& t : row) arr.push_back(detail::triple_to_json(t));
    single[to_string(m)] = arr;
  }
  j["single_orbital"] = single;
  json pair = json::object();
  for (const auto& [m, t] : r.pairwise) {
    pair[to_string(m)] = {{"I", detail::table_to_json(t.total)},
                          {"E", detail::table_to_json(t.quantum)},
                          {"C", detail::table_to_json(t.classical)}};
  }
  j["pairwise"] = pair;

  const auto& md = r.metadata;
  const auto& so = md.separable;
  json un = json::array();
  for (const auto& u : md.unconverged) {
    un.push_back({{"i", u.i + 1}, {"j", u.j + 1}, {"ssr", to_string(u.ssr)}, {"residual", u.residual}});
  }
  j["metadata"] = {
      {"version", md.version},
      {"units", md.units},
      {"optimizer_seed", md.optimizer_seed},
      {"ground_state_seed", md.ground_state_seed},
      {"optimizer",
       {{"multistarts", so.multistarts},
        {"patience", so.patience},
        {"improvement_tol", so.improvement_tol},
        {"gap_tol", so.gap_tol},
        {"max_iterations", so.max_iterations},
        {"refine_iterations", so.refine_iterations},
        {"max_atoms", so.max_atoms},
        {"tie_break_weights", so.tie_break_weights},
        {"tie_patience", so.tie_patience},
        {"tie_tol", so.tie_tol},
        {"tie_settle", so.tie_settle}}},
      {"degeneracy_gap", md.degeneracy_gap},
      {"zero_floor", md.zero_floor},
      {"ground_state_degenerate", md.ground_state_degenerate},
      {"ground_state_residual", md.ground_state_residual},
      {"all_converged", md.all_converged},
      {"unconverged", un}};
  return j;
}

inline AnalysisReport report_from_json(const nlohmann::json& j) {
  AnalysisReport r;
  r.source = j.at("source").get<std::string>();
  r.orbital_count = j.at("orbital_count").get<int>();
  for (const auto& k : j.at("orbitals")) r.orbitals.push_back(k.get<int>() - 1);
  r.electrons = j.at("electrons").get<int>();
  r.ms2 = j.at("ms2").get<int>();
  if (!j.at("ground_energy").is_null()) r.ground_energy = j.at("ground_energy").get<double>();
  r.intrinsic_correlation = j.at("intrinsic_correlation").get<double>();
  r.slater_overlap = j.at("slater_overlap").get<double>();
  for (const auto& m : j.at("ssr_modes")) r.modes.push_back(ssr_from_string(m.get<std::string>()));
  for (const auto& [key, arr] : j.at("single_orbital").items()) {
    auto& row = r.single[ssr_from_string(key)];
    for (const auto& t : arr) row.push_back(detail::triple_from_json(t));
  }
  for (const auto& [key, t] : j.at("pairwise").items()) {
    r.pairwise[ssr_from_string(key)] = {detail::table_from_json(t.at("I")), detail::table_from_json(t.at("E")),
                                        detail::table_from_json(t.at("C"))};
  }
  const auto& m = j.at("metadata");
  auto& md = r.metadata;
  md.version = m.at("version").get<std::string>();
  md.units = m.at("units").get<std::string>();
  md.optimizer_seed = m.at("optimizer_seed").get<std::uint64_t>();
  md.ground_state_seed = m.at("ground_state_seed").get<std::uint64_t>();
  const auto& o = m.at("optimizer");
  auto& so = md.separable;
  so.seed = md.optimizer_seed;
  so.multistarts = o.at("multistarts").get<int>();
  so.patience = o.at("patience").get<int>();
  so.improvement_tol = o.at("improvement_tol").get<double>();
  so.gap_tol = o.at("gap_tol").get<double>();
  so.max_iterations = o.at("max_iterations").get<int>();
  so.refine_iterations = o.at("refine_iterations").get<int>();
  so.max_atoms = o.at("max_atoms").get<int>();
  so.tie_break_weights = o.at("tie_break_weights").get<std::vector<double>>();
  so.tie_patience = o.at("tie_patience").get<int>();
  so.tie_tol = o.at("tie_tol").get<double>();
  so.tie_settle = o.at("tie_settle").get<double>();
  md.degeneracy_gap = m.at("degeneracy_gap").get<double>();
  md.zero_floor = m.at("zero_floor").get<double>();
  md.ground_state_degenerate = m.at("ground_state_degenerate").get<bool>();
  md.ground_state_residual = m.at("ground_state_residual").get<double>();
  md.all_converged = m.at("all_converged").get<bool>();
  for (const auto& u : m.at("unconverged")) {
    md.unconverged.push_back({u.at("i").get<int>() - 1, u.at("j").get<int>() - 1,
                              ssr_from_string(u.at("ssr").get<std::string>()), u.at("residual").get<double>()});
  }
  return r;
}

// -------------------------------------------------------- serialized states

/// {"modes": D, "electrons": N, "ms2": M, "amplitudes": [{"occupation": "1001", "re": x, "im": y}, ...]}
/// Occupation strings list n_1..n_D in mode order (orbital-major, up first).
inline nlohmann::json state_to_json(const StateVector& s) {
  nlohmann::json amps = nlohmann::json::array();
  for (std::size_t k = 0; k < s.basis().size(); ++k) {
    const cplx a = s.amplitudes()[static_cast<Eigen::Index>(k)];
    if (a == cplx{0.0, 0.0}) continue;
    amps.push_back({{"occupation", s.basis()[k].to_string()}, {"re", a.real()}, {"im", a.imag()}});
  }
  const auto& sec = s.basis().sector();
  nlohmann::json j{{"modes", s.mode_count()}, {"amplitudes", amps}};
  j["electrons"] = sec.particle_count ? nlohmann::json(*sec.particle_count) : nlohmann::json(nullptr);
  j["ms2"] = sec.twice_sz ? nlohmann::json(*sec.twice_sz) : nlohmann::json(nullptr);
  return j;
}

inline StateVector state_from_json(const nlohmann::json& j) {
  const int d = j.at("modes").get<int>();
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("serialized state needs an even mode count");
  SectorLabel sector;
  if (j.contains("electrons") && !j.at("electrons").is_null()) sector.particle_count = j.at("electrons").get<int>();
  if (j.contains("ms2") && !j.at("ms2").is_null()) sector.twice_sz = j.at("ms2").get<int>();
  auto basis = make_basis(d, sector);
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(basis->size()));
  for (const auto& e : j.at("amplitudes")) {
    const auto occ = OccupationConfig::from_string(e.at("occupation").get<std::string>());
    if (occ.mode_count() != d) throw std::invalid_argument("occupation string length differs from mode count");
    auto idx = basis->index_of(occ);
    if (!idx) throw SymmetryError("occupation " + occ.to_string() + " lies outside the declared sector");
    amps[static_cast<Eigen::Index>(*idx)] += cplx{e.at("re").get<double>(), e.value("im", 0.0)};
  }
  return StateVector(basis, amps);
}

// ----------------------------------------------------------------- CSV

namespace detail {

inline std::string fmt(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace detail

/// Matrix CSV with 1-based orbital labels on both axes; empty diagonal.
inline std::string table_csv(const PairTable& t, const std::vector<int>& orbitals, double scale = 1.0) {
  std::ostringstream out;
  out << "orbital";
  for (int k : orbitals) out << ',' << k + 1;
  out << '\n';
  for (std::size_t a = 0; a < t.size(); ++a) {
    out << orbitals[a] + 1;
    for (const auto& v : t[a]) {
      out << ',';
      if (v) out << detail::fmt(*v * scale);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string single_orbital_csv(const AnalysisReport& r, double scale = 1.0) {
  std::ostringstream out;
  out << "orbital,ssr,I,E\n";
  for (const auto& [m, row] : r.single)
    for (std::size_t a = 0; a < row.size(); ++a) {
      out << r.orbitals[a] + 1 << ',' << to_string(m) << ',' << detail::fmt(row[a].total * scale) << ','
          << detail::fmt(row[a].quantum * scale) << '\n';
    }
  return out.str();
}

// ----------------------------------------------------------------- SVG

/// Heatmap of one pairwise table: linear white-to-blue scale from 0 to the
/// table maximum, each cell annotated with its value.
inline std::string heatmap_svg(const PairTable& t, const std::vector<int>& orbitals, const std::string& title,
                               double scale = 1.0) {
  const int n = static_cast<int>(t.size());
  const int cell = 48, margin = 40, top = 56;
  const int width = margin + n * cell + 20, height = top + n * cell + 20;
  double vmax = 0.0;
  for (const auto& row : t)
    for (const auto& v : row)
      if (v) vmax = std::max(vmax, *v * scale);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"monospace\" font-size=\"11\">\n";
  out << "<text x=\"" << margin << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  out << "<text x=\"" << margin << "\" y=\"38\">max " << detail::fmt(vmax, 4) << "</text>\n";
  for (int a = 0; a < n; ++a) {
    const int x = margin + a * cell + cell / 2;
    out << "<text x=\"" << x << "\" y=\"" << top - 4 << "\" text-anchor=\"middle\">" << orbitals[static_cast<std::size_t>(a)] + 1
        << "</text>\n";
    out << "<text x=\"" << margin - 6 << "\" y=\"" << top + a * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
        << orbitals[static_cast<std::size_t>(a)] + 1 << "</text>\n";
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const auto& v = t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      const int x = margin + b * cell, y = top + a * cell;
      std::string fill = "#dddddd";
      if (v) {
        const double s = vmax > 0.0 ? std::clamp(*v * scale / vmax, 0.0, 1.0) : 0.0;
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(255 - 207 * s)),
                      static_cast<int>(std::lround(255 - 152 * s)), 255 - static_cast<int>(std::lround(74 * s)));
        fill = buf;
      }
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << fill << "\" stroke=\"#ffffff\"/>\n";
      if (v) {
        out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\">"
            << detail::fmt(*v * scale, 3) << "</text>\n";
      }
    }
  out << "</svg>\n";
  return out.str();
}

// --------------------------------------------------------------- sweeps

/// n points log-spaced from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw std::invalid_argument("log grid needs 0 < lo <= hi and n >= 1");
  std::vector<double> g;
  for (int k = 0; k < n; ++k) {
    g.push_back(n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (n - 1)));
  }
  return g;
}

struct SweepRow {
  double t_over_u = 0.0;
  std::map<SsrMode, CorrelationTriple> values;
  bool converged = true;
};

/// Correlation between the two sites of the half-filled Hubbard dimer at
/// U = 1 and t = t/U, for each grid point and superselection mode.
inline std::vector<SweepRow> hubbard_dimer_sweep(const std::vector<double>& grid, const AnalysisOptions& opt = {}) {
  for (double x : grid) {
    if (!(x > 0.0)) throw std::invalid_argument("t/U grid values must be positive");
  }
  std::vector<SweepRow> rows(grid.size());
  const std::size_t nm = opt.modes.size();
  std::vector<CorrelationTriple> results(grid.size() * nm);
  detail::parallel_for(results.size(), opt.threads, [&](std::size_t k) {
    const auto state = analytic_state(HubbardDimerState{{grid[k / nm], 1.0, 2}});
    results[k] = correlation_profile(state, 0, 1, opt.modes[k % nm], opt.separable);
  });
  for (std::size_t p = 0; p < grid.size(); ++p) {
    rows[p].t_over_u = grid[p];
    for (std::size_t m = 0; m < nm; ++m) {
      const auto& t = results[p * nm + m];
      rows[p].values[opt.modes[m]] = t;
      rows[p].converged = rows[p].converged && t.converged;
    }
  }
  return rows;
}

/// Columns: t_over_u, then I_<mode>, E_<mode>, C_<mode> per mode, then status
/// ("ok" or "unconverged").
inline std::string sweep_csv(const std::vector<SweepRow>& rows, const std::vector<SsrMode>& modes,
                             double scale = 1.0) {
  std::ostringstream out;
  out << "t_over_u";
  for (SsrMode m : modes) out << ",I_" << to_string(m) << ",E_" << to_string(m) << ",C_" << to_string(m);
  out << ",status\n";
  for (const auto& r : rows) {
    out << detail::fmt(r.t_over_u);
    for (SsrMode m : modes) {
      const auto& t = r.values.at(m);
      out << ',' << detail::fmt(t.total * scale) << ',' << detail::fmt(t.quantum * scale) << ','
          << detail::fmt(t.classical.value_or(0.0) * scale);
    }
    out << ',' << (r.converged ? "ok" : "unconverged") << '\n';
  }
  return out.str();
}

}  // namespace orbcorr
