// Computes H^1 of small Schreier graphs over Z/2 and prints the measured
// separation between the coboundary coset and the nontrivial cosets.

#include <cstdio>

#include "modelspaces/modelspaces.hpp"

int main() {
  using namespace msp;
  for (std::uint32_t n : {4u, 8u, 16u}) {
    SchreierGraph graph(cyclic_shift(n));
    RelationLoopSet family = RelationLoopSet::with_trivials(free_group(1));
    CohomologySummary summary = solve_cocycles(graph, family, 2);
    std::printf("n=%2u  log2|Z1|=%.0f  log2|B1|=%.0f  H1 =", n, summary.z1_dim_log_m, summary.b1_dim_log_m);
    if (summary.invariant_factors.empty()) std::printf(" 0");
    for (long long f : summary.invariant_factors) std::printf(" Z/%lld", f);
    Frac gap = min_intercoset_distance(graph, summary, CosetDistanceMode::Exact);
    std::printf("  coset gap = %llu/%llu\n", static_cast<unsigned long long>(gap.num),
                static_cast<unsigned long long>(gap.den));
  }
  return 0;
}
