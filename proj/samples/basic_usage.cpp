// Pairwise orbital correlation of a small Hubbard chain.

#include <iostream>

#include "orbcorr/orbcorr.hpp"

int main() {
  using namespace orbcorr;

  const HubbardParams params{1.0, 4.0, 4};
  auto basis = make_basis(8, SectorLabel::fixed(4, 0));
  const EigenResult gs = ground_state(hubbard_hamiltonian(params, basis));
  std::cout << "ground energy " << gs.energy << "\n";

  for (SsrMode mode : {SsrMode::none, SsrMode::parity, SsrMode::number}) {
    const CorrelationTriple t = correlation_profile(gs.state, 0, 1, mode);
    std::cout << to_string(mode) << ": I=" << t.total << " E=" << t.quantum << " C=" << *t.classical << " nats\n";
  }

  const CorrelationTriple single = correlation_profile(gs.state, 0, SsrMode::number);
  std::cout << "orbital 1 vs rest under N-SSR: E=" << single.quantum << "\n";
}
