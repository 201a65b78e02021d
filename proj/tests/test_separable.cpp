#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "orbcorr/correlation.hpp"
#include "orbcorr/models.hpp"

using namespace orbcorr;

namespace {

const double ln2 = std::log(2.0);
const double c_one_electron = std::log(4.0 / 3.0) / 2.0;

// Mixture of the returned product atoms, masked like the input.
DensityMatrix rebuild(const SeparableApproximation& s, const DensityMatrix& rho) {
  const auto k = kronecker_form(rho);
  Matrix m = Matrix::Zero(rho.dim(), rho.dim());
  for (const auto& a : s.ensemble) {
    const Vector v = linalg::kron(a.a, a.b);
    m += a.weight * v * v.adjoint();
  }
  auto out = from_kronecker(k, m, rho);
  out.apply_mask();
  return out;
}

}  // namespace

TEST(Separable, ProductStateHasZeroDistance) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto rho = oracle::random_masked_state(rng, 0);
    const auto s = closest_separable(rho);
    EXPECT_LT(s.distance, 1e-8) << trial;
    EXPECT_TRUE(s.converged);
  }
}

TEST(Separable, OneElectronState) {
  const auto s = analytic_state(OneElectronState{});
  const auto none = correlation_profile(s, 0, 1, SsrMode::none);
  EXPECT_NEAR(none.total, 2 * ln2, 1e-9);
  EXPECT_NEAR(none.quantum, ln2, 1e-5);
  EXPECT_NEAR(*none.classical, c_one_electron, 1e-5);
  for (SsrMode m : {SsrMode::parity, SsrMode::number}) {
    const auto t = correlation_profile(s, 0, 1, m);
    EXPECT_NEAR(t.total, ln2, 1e-9);
    EXPECT_NEAR(t.quantum, 0.0, 1e-5);
    EXPECT_NEAR(*t.classical, ln2, 1e-5);
  }
}

TEST(Separable, DissociatedH2IsIndependentOfSuperselection) {
  const auto s = analytic_state(DissociatedH2State{});
  for (SsrMode m : {SsrMode::none, SsrMode::parity, SsrMode::number}) {
    const auto t = correlation_profile(s, 0, 1, m);
    EXPECT_NEAR(t.total, 2 * ln2, 1e-9);
    EXPECT_NEAR(t.quantum, ln2, 1e-5);
    EXPECT_NEAR(*t.classical, c_one_electron, 1e-5);
    EXPECT_TRUE(t.converged);
  }
}

TEST(Separable, EnsembleReproducesSigmaStar) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    const auto rho = oracle::random_masked_state(rng, 1 + trial % 2);
    const auto s = closest_separable(rho);
    const auto back = rebuild(s, rho);
    EXPECT_LT((back.matrix - s.sigma_star.matrix).cwiseAbs().maxCoeff(), 1e-10);
    double w = 0.0;
    for (const auto& a : s.ensemble) {
      EXPECT_GE(a.weight, 0.0);
      EXPECT_NEAR(a.a.norm(), 1.0, 1e-10);
      EXPECT_NEAR(a.b.norm(), 1.0, 1e-10);
      w += a.weight;
    }
    EXPECT_NEAR(w, 1.0, 1e-10);
    EXPECT_NEAR(relative_entropy(rho, s.sigma_star), s.distance, 1e-8);
    EXPECT_TRUE(ppt_test(s.sigma_star).ppt);
    EXPECT_LT(s.sigma_star.mask_violation(), 1e-15);
  }
}

TEST(Separable, BoundedByMutualInformation) {
  // I is the distance to the nearest product state, so E <= I; random
  // product states are never closer than I.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    const auto rho = oracle::random_masked_state(rng, 1 + trial % 2);
    const double i = mutual_information(rho);
    const auto s = closest_separable(rho);
    EXPECT_LE(s.distance, i + 1e-8);
    EXPECT_GE(s.classical, 0.0);
    const auto k = kronecker_form(rho);
    for (int p = 0; p < 5; ++p) {
      const Vector a = oracle::random_vector(4, rng), b = oracle::random_vector(4, rng);
      const Matrix pa = 0.5 * a * a.adjoint() + 0.125 * Matrix::Identity(4, 4);
      const Matrix pb = 0.5 * b * b.adjoint() + 0.125 * Matrix::Identity(4, 4);
      EXPECT_GE(relative_entropy(k.matrix, linalg::kron(pa, pb)), i - 1e-10);
    }
  }
}

TEST(Separable, SuperselectionOrdersTheMeasures) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 4; ++trial) {
    const auto s = oracle::random_pair_state(rng);
    const auto e = correlation_profile(s, 0, 1, SsrMode::none);
    const auto ep = correlation_profile(s, 0, 1, SsrMode::parity);
    const auto en = correlation_profile(s, 0, 1, SsrMode::number);
    EXPECT_LE(en.quantum, ep.quantum + 1e-6);
    EXPECT_LE(ep.quantum, e.quantum + 1e-6);
    EXPECT_LE(en.total, ep.total + 1e-10);
    EXPECT_LE(ep.total, e.total + 1e-10);
  }
}

TEST(Separable, PptConsistencyOnRandomStates) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const auto rho = oracle::random_masked_state(rng, trial % 3);
    const auto s = closest_separable(rho);
    const bool ppt = ppt_test(rho).ppt;
    if (s.distance < 1e-6) {
      EXPECT_TRUE(ppt) << trial;
    }
    if (!ppt) {
      EXPECT_GT(s.distance, 1e-6) << trial;
    }
  }
}

TEST(Separable, DeterministicForFixedSeed) {
  std::mt19937_64 rng(6);
  const auto rho = oracle::random_masked_state(rng, 1);
  const auto a = closest_separable(rho);
  const auto b = closest_separable(rho);
  EXPECT_EQ(a.distance, b.distance);
  EXPECT_EQ(a.classical, b.classical);
  EXPECT_EQ(a.sigma_star.matrix, b.sigma_star.matrix);
}

TEST(Separable, RequiresBipartition) {
  std::mt19937_64 rng(7);
  auto rho = oracle::random_masked_state(rng, 0);
  rho.split = -1;
  EXPECT_THROW(closest_separable(rho), std::invalid_argument);
}

TEST(PairSeed, DistinctAcrossJobs) {
  EXPECT_NE(pair_seed(1, 0, 1, SsrMode::none), pair_seed(1, 0, 1, SsrMode::parity));
  EXPECT_NE(pair_seed(1, 0, 1, SsrMode::none), pair_seed(1, 1, 0, SsrMode::none));
  EXPECT_EQ(pair_seed(9, 2, 3, SsrMode::number), pair_seed(9, 2, 3, SsrMode::number));
}
