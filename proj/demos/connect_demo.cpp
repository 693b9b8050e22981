// Joins two i.i.d. binary microstates on the 30x30 torus by the lazy
// resampling walk and prints the per-step Hamming distances.

#include <cstdio>

#include "modelspaces/modelspaces.hpp"

int main() {
  using namespace msp;
  GroupPresentation lattice = integer_lattice(2);
  SoficApproximation sigma = torus_shift(30);
  Alphabet bits = Alphabet::finite(2);
  auto nu = DiscreteDistribution::uniform(2);

  Window window = Window::ball(lattice, 1);
  auto neighbourhood = NeighbourhoodSpec::marginal_tv(product_marginal(nu.probs(), bits, window), 0.1);

  WalkConfig config = default_walk_config(0.1, /*seed=*/42);
  RngStream stream = RngStream::root(config.seed);
  Microstate x = sample_iid_microstate(bits, nu, sigma.vertex_count(), stream.derive(1));
  Microstate y = sample_iid_microstate(bits, nu, sigma.vertex_count(), stream.derive(2));

  ConnectResult result = connect(sigma, x, y, config, neighbourhood, nu, stream.derive(3));
  std::printf("success=%d states=%zu attempts=%u\n", result.success ? 1 : 0, result.path.states.size(),
              result.attempts);
  for (std::size_t i = 0; i < result.path.step_distances.size(); ++i)
    std::printf("step %3zu  d=%.4f  tv=%.4f\n", i, result.path.step_distances[i],
                result.path.state_deviations[i]);
  return result.success ? 0 : 1;
}
