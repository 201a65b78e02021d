#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "orbcorr/orbcorr.hpp"

namespace orbcorr::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_parse = 2;
inline constexpr int exit_unconverged = 3;

/// Input-format problems (FCIDUMP, serialized state, option values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string ssr = "all";
  std::string orbitals;
  std::string out;
  std::string format = "json,csv";
  bool bits = false;
  std::uint64_t seed = SeparableOptions{}.seed;
  double tol = SeparableOptions{}.improvement_tol;
  int max_iterations = SeparableOptions{}.max_iterations;
  bool strict = false;
  unsigned threads = 0;
};

struct InputFlags {
  std::string fcidump;
  std::string model;
  std::string state;
  int sites = 4;
  double t = 1.0;
  double u = 4.0;
  int electrons = -1;
  int ms2 = -1000;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<SsrMode> parse_modes(const std::string& s) {
  if (s == "all") return {SsrMode::none, SsrMode::parity, SsrMode::number};
  std::vector<SsrMode> out;
  for (const auto& m : split_list(s)) {
    try {
      out.push_back(ssr_from_string(m));
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  if (out.empty()) throw InputError("--ssr needs at least one mode");
  return out;
}

/// 1-based comma list to 0-based indices.
inline std::vector<int> parse_orbitals(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw InputError("bad orbital index: " + item);
    }
    if (used != item.size() || k < 1) throw InputError("bad orbital index: " + item);
    out.push_back(k - 1);
  }
  return out;
}

struct Formats {
  bool json = false, csv = false, svg = false;
};

inline Formats parse_formats(const std::string& s) {
  Formats f;
  for (const auto& item : split_list(s)) {
    if (item == "json") {
      f.json = true;
    } else if (item == "csv") {
      f.csv = true;
    } else if (item == "svg") {
      f.svg = true;
    } else {
      throw InputError("unknown output format: " + item);
    }
  }
  return f;
}

inline AnalysisOptions analysis_options(const CommonFlags& c) {
  AnalysisOptions o;
  o.modes = parse_modes(c.ssr);
  o.orbitals = parse_orbitals(c.orbitals);
  o.separable.seed = c.seed;
  if (!(c.tol > 0.0)) throw InputError("--tol must be positive");
  o.separable.improvement_tol = c.tol;
  if (c.max_iterations < 1) throw InputError("--max-iterations must be at least 1");
  o.separable.max_iterations = c.max_iterations;
  o.threads = c.threads;
  return o;
}

inline double unit_scale(bool bits) { return bits ? 1.0 / std::log(2.0) : 1.0; }

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

/// Writes report.json, the pairwise and single-orbital CSVs and the SVG
/// heatmaps under `dir`, as selected.
inline void emit_report(const AnalysisReport& r, const CommonFlags& c, std::ostream& log) {
  if (c.out.empty()) return;
  const Formats f = parse_formats(c.format);
  const std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  const double scale = unit_scale(c.bits);
  if (f.json) write_file(dir / "report.json", to_json(r).dump(2) + "\n");
  for (const auto& [m, tables] : r.pairwise) {
    const std::string tag = to_string(m);
    const std::pair<const char*, const PairTable*> parts[] = {
        {"I", &tables.total}, {"E", &tables.quantum}, {"C", &tables.classical}};
    for (const auto& [name, table] : parts) {
      if (f.csv) write_file(dir / ("pairwise_" + std::string(name) + "_" + tag + ".csv"), table_csv(*table, r.orbitals, scale));
      if (f.svg) {
        const std::string title = std::string(name) + " (" + tag + " SSR, " + (c.bits ? "bits" : "nats") + ")";
        write_file(dir / ("heatmap_" + std::string(name) + "_" + tag + ".svg"), heatmap_svg(*table, r.orbitals, title, scale));
      }
    }
  }
  if (f.csv) write_file(dir / "single_orbital.csv", single_orbital_csv(r, scale));
  log << "wrote report to " << dir.string() << "\n";
}

inline void print_summary(const AnalysisReport& r, bool bits, std::ostream& out) {
  const double scale = unit_scale(bits);
  const char* unit = bits ? "bits" : "nats";
  out << std::setprecision(10);
  if (r.ground_energy) out << "ground energy: " << *r.ground_energy << "\n";
  out << "electrons: " << r.electrons << "  2M: " << r.ms2 << "  intrinsic correlation: " << r.intrinsic_correlation
      << "\n";
  for (const auto& [m, tables] : r.pairwise) {
    out << "pairwise (" << to_string(m) << " SSR, " << unit << ")\n";
    for (std::size_t a = 0; a < r.orbitals.size(); ++a)
      for (std::size_t b = a + 1; b < r.orbitals.size(); ++b) {
        out << "  " << r.orbitals[a] + 1 << "-" << r.orbitals[b] + 1 << "  I=" << *tables.total[a][b] * scale
            << "  E=" << *tables.quantum[a][b] * scale << "  C=" << *tables.classical[a][b] * scale << "\n";
      }
  }
  if (!r.metadata.all_converged) out << "warning: " << r.metadata.unconverged.size() << " optimizations did not converge\n";
}

/// The 3x3 two-orbital table: rows I, E, C, columns per regime.
inline void print_pair_table(const AnalysisReport& r, bool bits, std::ostream& out) {
  const double scale = unit_scale(bits);
  out << (bits ? "bits" : "nats") << std::setw(14) << "";
  for (SsrMode m : r.modes) out << std::setw(16) << to_string(m);
  out << "\n" << std::fixed << std::setprecision(10);
  const std::pair<const char*, PairTable PairTables::*> rows[] = {
      {"Total (I)", &PairTables::total}, {"Quantum (E)", &PairTables::quantum}, {"Classical (C)", &PairTables::classical}};
  for (const auto& [label, member] : rows) {
    out << std::left << std::setw(18) << label << std::right;
    for (SsrMode m : r.modes) out << std::setw(16) << *(r.pairwise.at(m).*member)[0][1] * scale;
    out << "\n";
  }
  out << std::defaultfloat;
}

inline IntegralSet without_interaction(const IntegralSet& ints) {
  IntegralSet out = ints;
  const int n = ints.orbital_count();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) out.set_two_body(i, j, k, l, 0.0);
  return out;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

/// Ground state (or the given state) of the selected input, then the report.
inline AnalysisReport analyze_input(const InputFlags& in, const CommonFlags& c, bool noninteracting, std::ostream& log) {
  const int sources = !in.fcidump.empty() + !in.model.empty() + !in.state.empty();
  if (sources != 1) throw InputError("give exactly one of --fcidump, --model, --state");
  const AnalysisOptions opt = analysis_options(c);

  if (!in.state.empty()) {
    if (noninteracting) throw InputError("a serialized state carries no Hamiltonian to switch off");
    StateVector s = [&] {
      try {
        return state_from_json(read_json_file(in.state));
      } catch (const nlohmann::json::exception& e) {
        throw InputError(in.state + ": " + e.what());
      }
    }();
    AnalysisReport r = analyze_state(s, opt);
    r.source = "state:" + in.state;
    return r;
  }

  IntegralSet ints;
  std::string source;
  if (!in.fcidump.empty()) {
    std::ifstream f(in.fcidump);
    if (!f) throw std::runtime_error("cannot open " + in.fcidump);
    ints = parse_fcidump(f);
    source = "fcidump:" + in.fcidump;
  } else {
    if (in.model != "hubbard") throw InputError("unknown model: " + in.model);
    HubbardParams p{in.t, in.u, in.sites};
    p.validate();
    ints = hubbard_integrals(p, in.sites, in.sites % 2);
    std::ostringstream s;
    s << "hubbard:sites=" << in.sites << ",t=" << in.t << ",U=" << in.u;
    source = s.str();
  }
  if (in.electrons >= 0) ints.electron_count = in.electrons;
  if (in.ms2 != -1000) ints.ms2 = in.ms2;
  if (noninteracting) {
    ints = without_interaction(ints);
    source += ",V=0";
  }
  auto basis = make_basis(2 * ints.orbital_count(), SectorLabel::fixed(ints.electron_count, ints.ms2));
  log << "sector dimension " << basis->size() << "\n";
  AnalysisReport r = analyze_ground_state(build_hamiltonian(ints, basis), opt);
  r.source = source;
  return r;
}

inline int finish(const AnalysisReport& r, const CommonFlags& c, std::ostream& out, bool table) {
  if (table) {
    print_pair_table(r, c.bits, out);
  } else {
    print_summary(r, c.bits, out);
  }
  emit_report(r, c, out);
  return (c.strict && !r.metadata.all_converged) ? exit_unconverged : exit_ok;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Orbital correlation and entanglement under superselection rules"};
  app.require_subcommand(1);
  CommonFlags common;
  InputFlags input;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--ssr", common.ssr, "none|parity|number|all or a comma list")->capture_default_str();
    sub->add_option("--orbitals", common.orbitals, "comma-separated 1-based orbital indices");
    sub->add_option("--out", common.out, "output directory (nothing is written without it)");
    sub->add_option("--format", common.format, "comma list of json, csv, svg")->capture_default_str();
    sub->add_flag("--bits", common.bits, "display values in bits instead of nats");
    sub->add_option("--seed", common.seed, "optimizer base seed")->capture_default_str();
    sub->add_option("--tol", common.tol, "optimizer improvement tolerance")->capture_default_str();
    sub->add_option("--max-iterations", common.max_iterations, "optimizer iteration cap per pass")
        ->capture_default_str();
    sub->add_flag("--strict", common.strict, "exit with status 3 if any optimization fails to converge");
    sub->add_option("--threads", common.threads, "worker threads, 0 for all cores")->capture_default_str();
  };
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--fcidump", input.fcidump, "FCIDUMP integral file");
    sub->add_option("--model", input.model, "built-in model (hubbard)");
    sub->add_option("--state", input.state, "serialized state (JSON)");
    sub->add_option("--sites", input.sites, "Hubbard chain length")->capture_default_str();
    sub->add_option("--t", input.t, "Hubbard hopping")->capture_default_str();
    sub->add_option("--u", input.u, "Hubbard on-site repulsion")->capture_default_str();
    sub->add_option("--n-electrons", input.electrons, "electron count (overrides the input)");
    sub->add_option("--ms2", input.ms2, "twice the spin projection (overrides the input)");
  };

  std::string demo_name;
  double demo_t = 1.0, demo_u = 1.0;
  auto* demo = app.add_subcommand("demo", "two-orbital reference states: one-electron, h2, hubbard-dimer");
  demo->add_option("name", demo_name, "one-electron | h2 | hubbard-dimer")
      ->required()
      ->check(CLI::IsMember({"one-electron", "h2", "hubbard-dimer"}));
  demo->add_option("--t", demo_t, "dimer hopping")->capture_default_str();
  demo->add_option("--u", demo_u, "dimer on-site repulsion")->capture_default_str();
  add_common(demo);

  int points = 50;
  double lo = 1e-3, hi = 10.0;
  auto* sweep = app.add_subcommand("hubbard-sweep", "Hubbard dimer correlations over log-spaced t/U");
  sweep->add_option("--points", points, "grid size")->capture_default_str();
  sweep->add_option("--min", lo, "smallest t/U")->capture_default_str();
  sweep->add_option("--max", hi, "largest t/U")->capture_default_str();
  add_common(sweep);

  auto* analyze = app.add_subcommand("analyze", "ground-state correlation analysis");
  add_input(analyze);
  add_common(analyze);
  auto* nonint = app.add_subcommand("noninteracting", "as analyze with the two-electron interaction removed");
  add_input(nonint);
  add_common(nonint);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_parse;
  }

  try {
    if (*demo) {
      AnalysisOptions opt = analysis_options(common);
      opt.orbitals.clear();
      StateVector s = demo_name == "one-electron" ? analytic_state(OneElectronState{})
                      : demo_name == "h2"         ? analytic_state(DissociatedH2State{})
                                                  : analytic_state(HubbardDimerState{{demo_t, demo_u, 2}});
      AnalysisReport r = analyze_state(s, opt);
      r.source = "demo:" + demo_name;
      if (demo_name == "hubbard-dimer") r.ground_energy = hubbard_dimer_energy({demo_t, demo_u, 2});
      return finish(r, common, out, true);
    }
    if (*sweep) {
      AnalysisOptions opt = analysis_options(common);
      const auto rows = hubbard_dimer_sweep(log_grid(lo, hi, points), opt);
      const std::string csv = sweep_csv(rows, opt.modes, unit_scale(common.bits));
      bool ok = true;
      for (const auto& r : rows) ok = ok && r.converged;
      if (common.out.empty()) {
        out << csv;
      } else {
        std::filesystem::create_directories(common.out);
        write_file(std::filesystem::path(common.out) / "hubbard_sweep.csv", csv);
        out << "wrote " << (std::filesystem::path(common.out) / "hubbard_sweep.csv").string() << "\n";
      }
      return (common.strict && !ok) ? exit_unconverged : exit_ok;
    }
    const bool off = static_cast<bool>(*nonint);
    AnalysisReport r = analyze_input(input, common, off, err);
    return finish(r, common, out, false);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return exit_parse;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return exit_parse;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace orbcorr::cli
