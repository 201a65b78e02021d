#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "orbcorr/groundstate.hpp"
#include "orbcorr/models.hpp"

using namespace orbcorr;

namespace {

const char* dimer_text = R"(&FCI NORB=2,NELEC=2,MS2=0,
 ORBSYM=1,1,
 ISYM=1,
&END
  1.0  1 1 1 1
  1.0  2 2 2 2
 -1.0  2 1 0 0
  0.5  0 0 0 0
)";

int parse_error_line(const std::string& text) {
  try {
    parse_fcidump(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Fcidump, ParsesHeaderAndBody) {
  auto ints = parse_fcidump(std::string(dimer_text));
  EXPECT_EQ(ints.orbital_count(), 2);
  EXPECT_EQ(ints.electron_count, 2);
  EXPECT_EQ(ints.ms2, 0);
  EXPECT_EQ(ints.orbsym, (std::vector<int>{1, 1}));
  EXPECT_EQ(ints.two_body(0, 0, 0, 0), 1.0);
  EXPECT_EQ(ints.two_body(1, 1, 1, 1), 1.0);
  EXPECT_EQ(ints.two_body(0, 0, 1, 1), 0.0);
  EXPECT_EQ(ints.one_body(0, 1), -1.0);
  EXPECT_EQ(ints.one_body(1, 0), -1.0);
  EXPECT_EQ(ints.core_energy, 0.5);
  EXPECT_NO_THROW(ints.validate());
}

TEST(Fcidump, SymmetryImagesAreFilled) {
  auto ints = parse_fcidump(std::string("&FCI NORB=3,NELEC=2 /\n 0.25 1 2 3 1\n"));
  for (auto [a, b, c, d] : IntegralSet::images(0, 1, 2, 0)) EXPECT_EQ(ints.two_body(a, b, c, d), 0.25);
  EXPECT_EQ(ints.two_body(0, 0, 1, 2), 0.0);
}

TEST(Fcidump, RoundTripIsExact) {
  std::mt19937_64 rng(11);
  for (int n : {1, 2, 3, 4}) {
    auto ints = oracle::random_integrals(n, rng);
    ints.core_energy = 0.1 + n;
    ints.electron_count = n;
    ints.ms2 = n % 2;
    ints.orbsym.assign(static_cast<std::size_t>(n), 1);
    auto back = parse_fcidump(to_fcidump(ints));
    EXPECT_TRUE(back == ints) << "n=" << n;
  }
}

TEST(Fcidump, ReportsLineNumbers) {
  EXPECT_EQ(parse_error_line("\n\n&FCI NORB=2,NELEC=2 &END\n 1.0 1 1 1 1\n 1.0 1 1 x 1\n"), 5);
  EXPECT_EQ(parse_error_line("&FCI NORB=2,NELEC=2 &END\n 1.0 1 3 1 1\n"), 2);
  EXPECT_EQ(parse_error_line("&FCI NORB=2,NELEC=2 &END\n 1.0 1 1 1\n"), 2);
  EXPECT_EQ(parse_error_line("&FCI NORB=2,NELEC=2 &END\n abc 1 1 1 1\n"), 2);
  EXPECT_EQ(parse_error_line("&FCI NORB=2,NELEC=2 &END\n 1.0 0 1 0 0\n"), 2);
  EXPECT_EQ(parse_error_line("NORB=2\n"), 1);
  EXPECT_EQ(parse_error_line("&FCI NELEC=2 &END\n"), 1);
  EXPECT_EQ(parse_error_line("&FCI NORB=x,NELEC=2 &END\n"), 1);
  EXPECT_GT(parse_error_line("&FCI NORB=2,NELEC=2\n 1.0 1 1 1 1\n"), 0);
  EXPECT_EQ(parse_error_line(""), 0);
}

TEST(Fcidump, AcceptsFortranExponents) {
  auto ints = parse_fcidump(std::string("&FCI NORB=1,NELEC=1,\n/\n 1.5D-01 1 1 0 0\n"));
  EXPECT_DOUBLE_EQ(ints.one_body(0, 0), 0.15);
}

TEST(Fcidump, SampleFilesParse) {
  for (const char* name : {"hubbard_dimer.fcidump", "hubbard_chain4.fcidump"}) {
    std::ifstream in(std::string(ORBCORR_SAMPLES_DIR) + "/" + name);
    ASSERT_TRUE(in) << name;
    auto ints = parse_fcidump(in);
    EXPECT_NO_THROW(ints.validate());
    EXPECT_EQ(ints.orbsym.size(), static_cast<std::size_t>(ints.orbital_count()));
    ints.orbsym.clear();
    HubbardParams p{1.0, ints.orbital_count() == 2 ? 1.0 : 4.0, ints.orbital_count()};
    EXPECT_TRUE(ints == hubbard_integrals(p, ints.electron_count, ints.ms2)) << name;
  }
}

TEST(Hamiltonian, MatchesOperatorOracleOnRandomIntegrals) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    auto ints = oracle::random_integrals(3, rng);
    ints.core_energy = 0.3;
    for (auto sector : {SectorLabel::fixed(2, 0), SectorLabel::fixed(3, 1), SectorLabel::particles(3)}) {
      auto basis = make_basis(6, sector);
      const Matrix ref = oracle::hamiltonian(ints, *basis);
      const Matrix got = build_hamiltonian(ints, basis).to_dense();
      EXPECT_LT((ref - got).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT(linalg::hermiticity_defect(got), 1e-14);
    }
  }
}

TEST(Hamiltonian, HubbardIntegralsMatchDirectModel) {
  for (int sites : {2, 3, 4}) {
    HubbardParams p{0.7, 2.5, sites};
    auto basis = make_basis(2 * sites, SectorLabel::fixed(sites, sites % 2));
    const Matrix direct = hubbard_hamiltonian(p, basis).to_dense();
    const Matrix via = build_hamiltonian(hubbard_integrals(p, sites, sites % 2), basis).to_dense();
    EXPECT_LT((direct - via).cwiseAbs().maxCoeff(), 1e-14) << sites;
  }
}

TEST(Hamiltonian, RejectsMismatchedBasis) {
  IntegralSet ints(2);
  EXPECT_THROW(build_hamiltonian(ints, make_basis(6, SectorLabel::particles(2))), std::invalid_argument);
  EXPECT_THROW(hubbard_hamiltonian({1.0, 1.0, 2}, make_basis(6, SectorLabel::particles(2))), std::invalid_argument);
  EXPECT_THROW((HubbardParams{0.0, 1.0, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((HubbardParams{1.0, -1.0, 2}.validate()), std::invalid_argument);
}

TEST(Hubbard, DimerEnergyAndStateAreEigenpairs) {
  for (double u : {0.0, 0.1, 1.0, 4.0, 100.0}) {
    HubbardParams p{1.0, u, 2};
    auto psi = analytic_state(HubbardDimerState{p});
    auto h = hubbard_hamiltonian(p, psi.basis_ptr());
    const double e = hubbard_dimer_energy(p);
    EXPECT_LT((h.apply(psi.amplitudes()) - e * psi.amplitudes()).norm(), 1e-12) << u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.to_dense().real());
    EXPECT_NEAR(es.eigenvalues()[0], e, 1e-12);
    const auto c = hubbard_dimer_coefficients(p);
    EXPECT_NEAR(c.a * c.a + c.b * c.b, 1.0, 1e-14);
  }
}

TEST(Analytic, StatesHaveExpectedStructure) {
  auto one = analytic_state(OneElectronState{});
  EXPECT_EQ(one.basis().size(), 2u);
  EXPECT_NEAR(std::abs(one.amplitudes()[0]), 1.0 / std::sqrt(2.0), 1e-15);
  auto h2 = analytic_state(DissociatedH2State{});
  EXPECT_EQ(*h2.basis().sector().particle_count, 2);
  EXPECT_EQ(*h2.basis().sector().twice_sz, 0);
  int nonzero = 0;
  for (Eigen::Index i = 0; i < h2.amplitudes().size(); ++i) nonzero += std::abs(h2.amplitudes()[i]) > 1e-12;
  EXPECT_EQ(nonzero, 2);
  // Singlet: S+ |psi> = 0 together with Sz = 0 gives S^2 = 0.
  const Vector full = oracle::embed(h2);
  Vector splus = Vector::Zero(full.size());
  for (int o = 0; o < 2; ++o) splus += oracle::create(2 * o, oracle::annihilate(2 * o + 1, full, 4), 4);
  EXPECT_LT(splus.norm(), 1e-14);
}
