#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"

namespace fs = std::filesystem;
using namespace orbcorr;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "orbcorr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orbcorr_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string samples(const std::string& name) { return std::string(ORBCORR_SAMPLES_DIR) + "/" + name; }

nlohmann::json load(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void expect_tables_close(const nlohmann::json& a, const nlohmann::json& b, double tol) {
  for (const char* mode : {"none", "parity", "number"})
    for (const char* q : {"I", "E", "C"}) {
      const auto& x = a["pairwise"][mode][q];
      const auto& y = b["pairwise"][mode][q];
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t r = 0; r < x.size(); ++r)
        for (std::size_t c = 0; c < x.size(); ++c) {
          if (x[r][c].is_null()) {
            EXPECT_TRUE(y[r][c].is_null());
            continue;
          }
          EXPECT_NEAR(x[r][c].get<double>(), y[r][c].get<double>(), tol) << mode << " " << q;
        }
    }
}

}  // namespace

TEST(Cli, DemoPrintsTable) {
  auto r = run_cli({"demo", "h2", "--bits"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Quantum (E)"), std::string::npos);
  EXPECT_NE(r.out.find("1.0000000000"), std::string::npos);
  EXPECT_NE(r.out.find("0.2075187"), std::string::npos);
}

TEST(Cli, ParseErrorsExitWithTwo) {
  EXPECT_EQ(run_cli({}).code, cli::exit_parse);
  EXPECT_EQ(run_cli({"bogus"}).code, cli::exit_parse);
  EXPECT_EQ(run_cli({"demo", "helium"}).code, cli::exit_parse);
  EXPECT_EQ(run_cli({"demo", "h2", "--ssr", "weird"}).code, cli::exit_parse);
  EXPECT_EQ(run_cli({"analyze", "--model", "hubbard", "--orbitals", "0,1"}).code, cli::exit_parse);
  EXPECT_EQ(run_cli({"analyze"}).code, cli::exit_parse);
  EXPECT_EQ(run_cli({"demo", "--help"}).code, cli::exit_ok);

  const auto dir = scratch("bad");
  std::ofstream(dir / "bad.fcidump") << "&FCI NORB=2,NELEC=2 &END\n 1.0 1 1 1 1\n 1.0 1 9 0 0\n";
  auto r = run_cli({"analyze", "--fcidump", (dir / "bad.fcidump").string()});
  EXPECT_EQ(r.code, cli::exit_parse);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  fs::remove_all(dir);
}

TEST(Cli, MissingFileIsAGeneralFailure) {
  EXPECT_EQ(run_cli({"analyze", "--fcidump", "/nonexistent/x.fcidump"}).code, cli::exit_failure);
}

TEST(Cli, StrictReportsNonConvergence) {
  const std::vector<std::string> base = {"demo", "h2", "--ssr", "none", "--max-iterations", "1"};
  auto loose = run_cli(base);
  EXPECT_EQ(loose.code, cli::exit_ok);
  auto strict = base;
  strict.push_back("--strict");
  EXPECT_EQ(run_cli(strict).code, cli::exit_unconverged);
  EXPECT_EQ(run_cli({"demo", "h2", "--strict"}).code, cli::exit_ok);
}

TEST(Cli, OrbitalRestrictionYieldsOnePair) {
  const auto dir = scratch("orbitals");
  auto r = run_cli({"analyze", "--fcidump", samples("hubbard_chain4.fcidump"), "--orbitals", "1,2", "--out",
                    dir.string(), "--format", "json,csv,svg"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = load(dir / "report.json");
  EXPECT_EQ(j["orbitals"], nlohmann::json({1, 2}));
  for (const char* mode : {"none", "parity", "number"}) {
    const auto& t = j["pairwise"][mode]["I"];
    ASSERT_EQ(t.size(), 2u);
    int pairs = 0;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = a + 1; b < 2; ++b) pairs += !t[a][b].is_null();
    EXPECT_EQ(pairs, 1);
  }
  EXPECT_TRUE(fs::exists(dir / "pairwise_E_parity.csv"));
  EXPECT_TRUE(fs::exists(dir / "heatmap_C_number.svg"));
  EXPECT_TRUE(fs::exists(dir / "single_orbital.csv"));
  fs::remove_all(dir);
}

TEST(Cli, FcidumpDimerMatchesDemo) {
  const auto a = scratch("dimer_fcidump"), b = scratch("dimer_demo");
  ASSERT_EQ(run_cli({"analyze", "--fcidump", samples("hubbard_dimer.fcidump"), "--out", a.string()}).code, 0);
  ASSERT_EQ(run_cli({"demo", "hubbard-dimer", "--t", "1", "--u", "1", "--out", b.string()}).code, 0);
  const auto ja = load(a / "report.json"), jb = load(b / "report.json");
  expect_tables_close(ja, jb, 1e-8);
  EXPECT_NEAR(ja["ground_energy"].get<double>(), jb["ground_energy"].get<double>(), 1e-12);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, NoninteractingCorrelationFollowsHoppingBlocks) {
  // Hopping couples 1-2 and 3-4 only; orbital energies split the blocks so
  // the ground state is unique.
  const auto dir = scratch("blocks");
  std::ofstream(dir / "blocks.fcidump") << "&FCI NORB=4,NELEC=4,MS2=0 &END\n"
                                        << " 0.8 1 1 1 1\n 0.8 2 2 2 2\n 0.8 3 3 3 3\n 0.8 4 4 4 4\n"
                                        << " 0.3 1 1 2 2\n"
                                        << " -1.0 2 1 0 0\n -0.7 4 3 0 0\n -0.2 3 3 0 0\n -0.2 4 4 0 0\n";
  auto r = run_cli({"noninteracting", "--fcidump", (dir / "blocks.fcidump").string(), "--out", (dir / "v0").string(),
                    "--ssr", "none"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = load(dir / "v0" / "report.json");
  EXPECT_NEAR(j["intrinsic_correlation"].get<double>(), 0.0, 1e-10);
  const auto& t = j["pairwise"]["none"]["I"];
  auto block = [](int k) { return k < 2 ? 0 : 1; };
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      const double v = t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].get<double>();
      if (block(a) == block(b)) {
        EXPECT_GT(v, 1e-3) << a << "," << b;
      } else {
        EXPECT_EQ(v, 0.0) << a << "," << b;
      }
    }

  // With the interaction already absent, analyze gives the same report.
  std::ifstream in(dir / "blocks.fcidump");
  auto ints = parse_fcidump(in);
  ints.clear_two_body();
  std::ofstream(dir / "free.fcidump") << to_fcidump(ints);
  ASSERT_EQ(run_cli({"analyze", "--fcidump", (dir / "free.fcidump").string(), "--out", (dir / "a").string(), "--ssr",
                     "none"}).code, 0);
  ASSERT_EQ(run_cli({"noninteracting", "--fcidump", (dir / "free.fcidump").string(), "--out",
                     (dir / "b").string(), "--ssr", "none"}).code, 0);
  EXPECT_EQ(load(dir / "a" / "report.json")["pairwise"], load(dir / "b" / "report.json")["pairwise"]);
  fs::remove_all(dir);
}

TEST(Cli, SerializedStateInput) {
  const auto dir = scratch("state");
  std::ofstream(dir / "h2.json") << state_to_json(analytic_state(DissociatedH2State{})).dump();
  auto r = run_cli({"analyze", "--state", (dir / "h2.json").string(), "--ssr", "number", "--bits"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("I=2"), std::string::npos) << r.out;
  std::ofstream(dir / "broken.json") << "{\"modes\": 4,";
  EXPECT_EQ(run_cli({"analyze", "--state", (dir / "broken.json").string()}).code, cli::exit_parse);
  fs::remove_all(dir);
}

TEST(Cli, SweepWritesCsv) {
  auto r = run_cli({"hubbard-sweep", "--points", "2", "--min", "0.5", "--max", "1", "--ssr", "none,number"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("t_over_u,I_none,E_none,C_none,I_number,E_number,C_number,status\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

TEST(Cli, BinaryExitCodes) {
  const std::string exe = ORBCORR_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("demo one-electron"), 0);
  EXPECT_EQ(status("demo nothing"), 2);
  EXPECT_EQ(status("demo h2 --ssr none --max-iterations 1 --strict"), 3);
}
