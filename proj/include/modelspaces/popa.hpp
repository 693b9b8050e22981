#pragma once

// Good models for the quotient-by-diagonal factor of the Bernoulli shift on
// (Z/m)^G, realized as cochains on Schreier graphs: Haar sampling from cosets
// of coboundaries, window-marginal verification against the exact window
// subgroup, and disconnection experiments.
//
// The edge process attaches to each vertex v the S-tuple (alpha(s,v))_s, so a
// cochain is equivalently a microstate over the alphabet (Z/m)^S.  Window
// patterns of that process over a word window E live in (Z/m)^{S x E} with
// coordinate (s,g) at digit position g_index * |S| + s.code.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohomology.hpp"
#include "counter_rng.hpp"
#include "intlinalg.hpp"
#include "model.hpp"
#include "presentation.hpp"
#include "sofic.hpp"
#include "walk.hpp"

namespace msp {

struct PopaModelSpec {
  SchreierGraph graph;
  std::uint32_t modulus = 2;
  Cochain1 class_rep;          // zero cochain for the coboundary coset
  RelationLoopSet relations;

  PopaModelSpec(SchreierGraph g, std::uint32_t m, Cochain1 rep, RelationLoopSet rels)
      : graph(std::move(g)), modulus(m), class_rep(std::move(rep)), relations(std::move(rels)) {
    if (class_rep.modulus != modulus || class_rep.values.size() != graph.edge_count())
      throw std::invalid_argument("popa spec: class representative does not fit the graph");
    if (near_cocycle_defect_exact(graph, class_rep, relations).num != 0)
      throw std::invalid_argument("popa spec: class representative must be an exact cocycle");
  }
};

// The finite-graph version of theta -> (theta_s - theta_e)_s: the vertex
// coboundary of theta read as an edge cochain.
inline Cochain1 popa_projection(const SchreierGraph& graph, const Microstate& theta) {
  if (theta.alphabet.kind() != Alphabet::Kind::Cyclic)
    throw std::invalid_argument("popa_projection: needs a cyclic vertex alphabet");
  if (theta.size() != graph.vertex_count()) throw std::invalid_argument("popa_projection: length mismatch");
  return coboundary_0(graph, theta.values, theta.alphabet.modulus());
}

// Haar sample from the coset class_rep + B^1: push the uniform measure on
// (Z/m)^V through the vertex coboundary and translate.
inline Cochain1 sample_popa_model(const PopaModelSpec& spec, const RngStream& stream) {
  const std::uint32_t m = spec.modulus;
  const std::uint32_t n = spec.graph.vertex_count();
  RngStream theta_s = stream.derive(rng_tag::popa_theta);
  std::vector<std::uint32_t> theta(n);
  for (std::uint32_t v = 0; v < n; ++v) theta[v] = theta_s.below(m, v);
  return cochain_add(spec.class_rep, coboundary_0(spec.graph, theta, m));
}

// Cochain <-> microstate over the tuple alphabet (Z/m)^S.
inline Microstate cochain_to_microstate(const SchreierGraph& graph, const Cochain1& alpha) {
  const std::uint32_t m = alpha.modulus;
  const std::uint16_t S = graph.symbol_count();
  Alphabet tuple = Alphabet::cyclic_tuple(m, S);
  std::vector<std::uint32_t> vals(graph.vertex_count());
  for (std::uint32_t v = 0; v < graph.vertex_count(); ++v) {
    std::uint32_t code = 0;
    for (std::uint16_t c = S; c-- > 0;)
      code = code * m + alpha.values[graph.edge_slot(GeneratorSymbol{c}, v)];
    vals[v] = code;
  }
  return Microstate(tuple, std::move(vals));
}

inline Cochain1 microstate_to_cochain(const SchreierGraph& graph, const Microstate& x) {
  if (x.alphabet.kind() != Alphabet::Kind::CyclicTuple || x.alphabet.arity() != graph.symbol_count())
    throw std::invalid_argument("microstate_to_cochain: alphabet mismatch");
  const std::uint32_t m = x.alphabet.modulus();
  Cochain1 alpha = Cochain1::zero(m, graph.edge_count());
  for (std::uint32_t v = 0; v < graph.vertex_count(); ++v) {
    std::uint32_t code = x.values[v];
    for (std::uint16_t c = 0; c < graph.symbol_count(); ++c) {
      alpha.values[graph.edge_slot(GeneratorSymbol{c}, v)] = code % m;
      code /= m;
    }
  }
  return alpha;
}

// Free words of C = E u SE identified through the approximation: words are
// equivalent when they act by the same permutation.  Within the injectivity
// radius this is exactly equality in the acting quotient group.
struct WordClasses {
  std::vector<Word> words;              // all distinct free words of C
  std::vector<std::size_t> class_of;    // word index -> class index
  std::vector<Word> representatives;    // first word of each class
};

inline WordClasses sigma_word_classes(const SoficApproximation& sigma, const GroupPresentation& p,
                                      const Window& window) {
  WordClasses out;
  for (const Word& g : window.words) out.words.push_back(g);
  for (const Word& g : window.words)
    for (std::uint16_t c = 0; c < p.symbol_count(); ++c) {
      Word sg = reduce_word(concat(Word::single(GeneratorSymbol{c}), g));
      bool seen = false;
      for (const Word& w : out.words) seen |= (w == sg);
      if (!seen) out.words.push_back(std::move(sg));
    }
  std::vector<std::vector<std::uint32_t>> perms;
  out.class_of.resize(out.words.size());
  for (std::size_t i = 0; i < out.words.size(); ++i) {
    std::vector<std::uint32_t> perm = sigma.word_permutation(out.words[i]);
    bool found = false;
    for (std::size_t k = 0; k < perms.size(); ++k)
      if (perms[k] == perm) {
        out.class_of[i] = k;
        found = true;
        break;
      }
    if (!found) {
      out.class_of[i] = perms.size();
      perms.push_back(std::move(perm));
      out.representatives.push_back(out.words[i]);
    }
  }
  return out;
}

inline std::size_t class_index_of_word(const WordClasses& classes, const Word& w) {
  for (std::size_t i = 0; i < classes.words.size(); ++i)
    if (classes.words[i] == w) return classes.class_of[i];
  throw std::invalid_argument("word not in C = E u SE");
}

// The window subgroup pi_E(Z) <= (Z/m)^{S x E}: patterns
// (theta_{sg} - theta_g)_{s,g} with theta running over (Z/m)^C, C = E u SE.
struct WindowSubgroup {
  std::uint32_t modulus = 2;
  std::size_t num_coords = 0;          // |S| * |E|
  IMat generators;                     // num_coords x #classes
  ModSolver membership_solver;
  std::vector<std::vector<std::uint32_t>> elements;  // enumerated; sorted lexicographically
  double log_m_size = 0.0;

  bool contains(const std::vector<std::uint32_t>& pattern) const {
    return membership_solver.solve(pattern).has_value();
  }
};

inline WindowSubgroup window_subgroup(const GroupPresentation& p, const Window& window, std::uint32_t m,
                                      const WordClasses& classes, std::uint64_t enumeration_limit = (1ull << 20)) {
  const std::uint16_t S = p.symbol_count();
  const std::size_t E = window.size();
  WindowSubgroup sub;
  sub.modulus = m;
  sub.num_coords = static_cast<std::size_t>(S) * E;

  const std::size_t num_classes = classes.representatives.size();
  IMat gens(static_cast<int>(sub.num_coords), static_cast<int>(num_classes));
  // theta = indicator of one class; pattern coordinate (s,g) = [sg in class] - [g in class].
  for (std::size_t gi = 0; gi < E; ++gi) {
    const Word& g = window.words[gi];
    std::size_t g_class = class_index_of_word(classes, g);
    for (std::uint16_t c = 0; c < S; ++c) {
      Word sg = reduce_word(concat(Word::single(GeneratorSymbol{c}), g));
      std::size_t sg_class = class_index_of_word(classes, sg);
      int coord = static_cast<int>(gi * S + c);
      gens.at(coord, static_cast<int>(sg_class)) += 1;
      gens.at(coord, static_cast<int>(g_class)) -= 1;
    }
  }
  sub.generators = gens;
  sub.membership_solver = ModSolver(gens, m);
  sub.log_m_size = static_cast<double>(num_classes) - kernel_mod_log_size(gens, m);

  // Enumerate the subgroup by closure under the generators.
  std::set<std::vector<std::uint32_t>> seen;
  std::vector<std::vector<std::uint32_t>> frontier;
  std::vector<std::uint32_t> zero(sub.num_coords, 0);
  seen.insert(zero);
  frontier.push_back(zero);
  while (!frontier.empty()) {
    std::vector<std::vector<std::uint32_t>> next;
    for (const auto& x : frontier)
      for (int j = 0; j < gens.cols; ++j) {
        std::vector<std::uint32_t> y(sub.num_coords);
        for (std::size_t i = 0; i < sub.num_coords; ++i)
          y[i] = static_cast<std::uint32_t>(mod_reduce(x[i] + gens.at(static_cast<int>(i), j), m));
        if (seen.insert(y).second) {
          if (seen.size() > enumeration_limit) throw std::invalid_argument("window subgroup too large to enumerate");
          next.push_back(std::move(y));
        }
      }
    frontier = std::move(next);
  }
  sub.elements.assign(seen.begin(), seen.end());
  return sub;
}

// Uniform (Haar) distribution on the window subgroup as a reference table for
// the tuple-alphabet process over the window E.
inline EmpiricalDistribution uniform_on_subgroup(const WindowSubgroup& sub, const Window& window,
                                                 std::uint16_t symbol_count) {
  Alphabet tuple = Alphabet::cyclic_tuple(sub.modulus, symbol_count);
  EmpiricalDistribution dist(window, tuple);
  const double p = 1.0 / static_cast<double>(sub.elements.size());
  for (const auto& el : sub.elements) {
    std::uint64_t code = 0;
    for (std::size_t i = el.size(); i-- > 0;) code = code * sub.modulus + el[i];
    dist.prob[code] = p;
  }
  dist.check_normalized();
  return dist;
}

struct MarginalCheckReport {
  std::size_t class_count = 0;              // |C| after sigma-identification
  std::size_t collapsed_words = 0;          // words merged by the identification
  double valid_vertex_fraction = 0.0;       // vertices passing the injectivity check
  std::uint64_t patterns_checked = 0;
  std::uint64_t membership_failures = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> failure_sites;  // (sample, vertex), truncated
  double tv_to_uniform = 1.0;
  double subgroup_log_m_size = 0.0;
  std::uint64_t subgroup_size = 0;
};

// Draws `samples` Haar samples from the configured coset and checks, at every
// vertex with a valid injectivity radius for C = E u SE, that the window
// pattern lies in the window subgroup; pools all patterns and compares their
// empirical law to uniform on the subgroup by total variation.
inline MarginalCheckReport popa_marginal_check(const GroupPresentation& p, const PopaModelSpec& spec,
                                               const Window& window, std::uint32_t samples,
                                               const RngStream& stream,
                                               std::size_t max_recorded_failures = 16) {
  const SchreierGraph& graph = spec.graph;
  const SoficApproximation& sigma = graph.approximation();
  const std::uint32_t m = spec.modulus;
  const std::uint16_t S = graph.symbol_count();

  WordClasses classes = sigma_word_classes(sigma, p, window);
  MarginalCheckReport report;
  report.class_count = classes.representatives.size();
  report.collapsed_words = classes.words.size() - classes.representatives.size();

  std::vector<std::uint32_t> valid;
  for (std::uint32_t v = 0; v < graph.vertex_count(); ++v)
    if (injectivity_radius_ok(sigma, classes.representatives, v)) valid.push_back(v);
  report.valid_vertex_fraction = static_cast<double>(valid.size()) / graph.vertex_count();
  if (valid.empty()) return report;

  WindowSubgroup sub = window_subgroup(p, window, m, classes);
  report.subgroup_log_m_size = sub.log_m_size;
  report.subgroup_size = sub.elements.size();

  std::set<std::vector<std::uint32_t>> subgroup_set(sub.elements.begin(), sub.elements.end());
  WindowImages images(sigma, window);

  std::map<std::vector<std::uint32_t>, std::uint64_t> counts;
  for (std::uint32_t trial = 0; trial < samples; ++trial) {
    Cochain1 sample = sample_popa_model(spec, stream.derive(rng_tag::trial).derive(trial));
    for (std::uint32_t v : valid) {
      std::vector<std::uint32_t> pattern(sub.num_coords);
      for (std::size_t gi = 0; gi < window.size(); ++gi) {
        std::uint32_t gv = images.img[gi][v];
        for (std::uint16_t c = 0; c < S; ++c)
          pattern[gi * S + c] = sample.values[graph.edge_slot(GeneratorSymbol{c}, gv)];
      }
      ++report.patterns_checked;
      if (!subgroup_set.count(pattern)) {
        ++report.membership_failures;
        if (report.failure_sites.size() < max_recorded_failures) report.failure_sites.push_back({trial, v});
      }
      ++counts[pattern];
    }
  }

  // TV between the pooled empirical pattern law and uniform on the subgroup.
  const double uniform_p = 1.0 / static_cast<double>(sub.elements.size());
  const double total = static_cast<double>(report.patterns_checked);
  double tv = 0.0;
  std::uint64_t seen_on_subgroup = 0;
  for (const auto& [pattern, count] : counts) {
    double emp = static_cast<double>(count) / total;
    if (subgroup_set.count(pattern)) {
      tv += std::abs(emp - uniform_p);
      ++seen_on_subgroup;
    } else {
      tv += emp;
    }
  }
  tv += uniform_p * static_cast<double>(sub.elements.size() - seen_on_subgroup);
  report.tv_to_uniform = tv / 2.0;
  return report;
}

struct DisconnectionVerdict {
  double epsilon = 0.0;
  std::vector<double> delta_grid;
  std::vector<std::size_t> components_per_delta;  // class groups linked through the near set
  std::vector<std::size_t> raw_components_per_delta;
  std::vector<std::vector<std::uint32_t>> classes_realized;
  std::optional<Frac> min_intercoset_distance;
  std::vector<ScanHistogramRow> histogram;
  // Sampling mode:
  bool ran_walk = false;
  bool walk_connect_success = false;
  std::uint32_t walk_attempts = 0;
  double walk_fraction_states_off_cocycle = 0.0;  // path states with positive defect
  double walk_max_defect = 0.0;
  std::vector<std::string> walk_failure_modes;
};

// Exhaustive mode: component scans across the delta grid.  Sampling mode
// additionally draws one sample from each coset and runs the Bernoulli walk
// connector on the pair with the window-subgroup neighbourhood; the expected
// outcome is that intermediate states leave the near-cocycle set.
inline DisconnectionVerdict disconnection_experiment(const GroupPresentation& p, const PopaModelSpec& zero_spec,
                                                     const PopaModelSpec& other_spec, const Window& window,
                                                     double epsilon, std::vector<double> delta_grid,
                                                     bool exhaustive, const WalkConfig& walk_config,
                                                     double walk_epsilon, const RngStream& stream,
                                                     std::uint64_t enumeration_limit = (1ull << 24)) {
  const SchreierGraph& graph = zero_spec.graph;
  const std::uint32_t m = zero_spec.modulus;
  DisconnectionVerdict verdict;
  verdict.epsilon = epsilon;
  verdict.delta_grid = delta_grid;

  if (exhaustive) {
    for (double delta : delta_grid) {
      ComponentScanReport scan =
          near_cocycle_component_scan(graph, zero_spec.relations, m, epsilon, delta, enumeration_limit);
      verdict.components_per_delta.push_back(scan.class_group_count);
      verdict.raw_components_per_delta.push_back(scan.raw_component_count);
      if (verdict.histogram.empty()) {
        verdict.histogram = scan.histogram;
        verdict.classes_realized = scan.classes_realized;
        verdict.min_intercoset_distance = scan.min_intercoset;
      }
    }
  } else {
    CohomologySummary summary = solve_cocycles(graph, zero_spec.relations, m);
    if (!summary.invariant_factors.empty())
      verdict.min_intercoset_distance = min_intercoset_distance(graph, summary);
  }

  // Walk diagnostics: try to join a sample of each coset with the Bernoulli
  // connector for the tuple-alphabet process.
  {
    verdict.ran_walk = true;
    Cochain1 x_cochain = sample_popa_model(zero_spec, stream.derive(1));
    Cochain1 y_cochain = sample_popa_model(other_spec, stream.derive(2));
    Microstate x = cochain_to_microstate(graph, x_cochain);
    Microstate y = cochain_to_microstate(graph, y_cochain);

    WordClasses classes = sigma_word_classes(graph.approximation(), p, window);
    WindowSubgroup sub = window_subgroup(p, window, m, classes);
    NeighbourhoodSpec spec =
        NeighbourhoodSpec::marginal_tv(uniform_on_subgroup(sub, window, graph.symbol_count()), walk_epsilon);

    DiscreteDistribution haar = DiscreteDistribution::uniform(x.alphabet.size());
    ConnectResult result =
        connect(graph.approximation(), x, y, walk_config, spec, haar, stream.derive(3));
    verdict.walk_connect_success = result.success;
    verdict.walk_attempts = result.attempts;

    std::size_t off = 0;
    double max_defect = 0.0;
    for (const Microstate& state : result.path.states) {
      double defect =
          near_cocycle_defect(graph, microstate_to_cochain(graph, state), zero_spec.relations);
      max_defect = std::max(max_defect, defect);
      if (defect > 0.0) ++off;
    }
    verdict.walk_fraction_states_off_cocycle =
        result.path.states.empty() ? 0.0 : static_cast<double>(off) / result.path.states.size();
    verdict.walk_max_defect = max_defect;
    if (off > 0)
      verdict.walk_failure_modes.push_back(
          "intermediate states leave the near-cocycle set (" + std::to_string(off) + "/" +
          std::to_string(result.path.states.size()) + " states, max defect " + std::to_string(max_defect) + ")");
    if (!result.success && result.first_bad_state >= 0)
      verdict.walk_failure_modes.push_back("first state outside the neighbourhood at index " +
                                           std::to_string(result.first_bad_state));
    if (!result.success && result.first_big_step >= 0)
      verdict.walk_failure_modes.push_back("first step of size >= delta at index " +
                                           std::to_string(result.first_big_step));
  }
  return verdict;
}

}  // namespace msp
