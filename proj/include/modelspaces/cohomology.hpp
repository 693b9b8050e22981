#pragma once

// 1-cochains, cocycles and coboundaries on Schreier graphs with coefficients
// in Z/m; exact Z^1 / B^1 / H^1 via integer Smith normal form; coset
// distances and near-cocycle component scans.
//
// Conventions.  A cochain assigns a Z/m value to every edge slot (s,v),
// s running over the full symmetric symbol set.  Walking a relation
// w = s_l ... s_1 from a base vertex v visits the edge labelled s_{i+1} at
// the vertex s_i...s_1 v, so
//   d alpha(v,w) = sum_{i=0}^{l-1} alpha(s_{i+1}, s_i...s_1 v).
// Coboundaries are d beta(s,v) = beta(sigma^s v) - beta(v).  The circle norm
// on Z/m is |k| = min(k, m-k)/m, and cochain distances are the vertex-average
// of the summed per-symbol norms.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "counter_rng.hpp"
#include "intlinalg.hpp"
#include "presentation.hpp"
#include "sofic.hpp"

namespace msp {

// Exact nonnegative rational, kept in lowest terms.
struct Frac {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  Frac() = default;
  Frac(std::uint64_t n, std::uint64_t d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Frac: zero denominator");
    std::uint64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Frac& o) const { return num == o.num && den == o.den; }
  bool operator<(const Frac& o) const {
    return static_cast<unsigned __int128>(num) * o.den < static_cast<unsigned __int128>(o.num) * den;
  }
  bool operator<=(const Frac& o) const { return *this == o || *this < o; }
};

struct Cochain1 {
  std::uint32_t modulus = 2;
  std::vector<std::uint32_t> values;  // indexed by edge slot s.code * |V| + v

  Cochain1() = default;
  Cochain1(std::uint32_t m, std::vector<std::uint32_t> vals) : modulus(m), values(std::move(vals)) {
    if (m < 2) throw std::invalid_argument("cochain modulus must be >= 2");
    for (std::uint32_t x : values)
      if (x >= m) throw std::invalid_argument("cochain value out of range");
  }
  static Cochain1 zero(std::uint32_t m, std::size_t edge_count) {
    return Cochain1(m, std::vector<std::uint32_t>(edge_count, 0));
  }
  bool operator==(const Cochain1& o) const { return modulus == o.modulus && values == o.values; }
};

inline Cochain1 cochain_add(const Cochain1& a, const Cochain1& b) {
  if (a.modulus != b.modulus || a.values.size() != b.values.size())
    throw std::invalid_argument("cochain_add: mismatch");
  Cochain1 r = a;
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = (r.values[i] + b.values[i]) % r.modulus;
  return r;
}

inline Cochain1 cochain_sub(const Cochain1& a, const Cochain1& b) {
  if (a.modulus != b.modulus || a.values.size() != b.values.size())
    throw std::invalid_argument("cochain_sub: mismatch");
  Cochain1 r = a;
  for (std::size_t i = 0; i < r.values.size(); ++i)
    r.values[i] = (r.values[i] + r.modulus - b.values[i]) % r.modulus;
  return r;
}

// Relation family for loop constraints.  The trivial relations s s^-1 are
// always appended for every symbol s.
struct RelationLoopSet {
  std::vector<Word> relations;

  static RelationLoopSet with_trivials(const GroupPresentation& p, std::vector<Word> extra = {}) {
    RelationLoopSet f;
    f.relations = p.relations;
    for (const Word& w : extra) f.relations.push_back(reduce_word(w));
    for (std::uint16_t c = 0; c < p.symbol_count(); ++c) {
      GeneratorSymbol s{c};
      f.relations.push_back(Word{{s, s.inverse()}});
    }
    // Deduplicate, preserving order.
    std::vector<Word> uniq;
    for (const Word& w : f.relations) {
      if (w.is_identity()) throw std::invalid_argument("relations must be nonempty");
      bool seen = false;
      for (const Word& u : uniq) seen |= (u == w);
      if (!seen) uniq.push_back(w);
    }
    f.relations = std::move(uniq);
    return f;
  }
};

// d beta for a vertex labelling beta: V -> Z/m.
inline Cochain1 coboundary_0(const SchreierGraph& graph, const std::vector<std::uint32_t>& beta,
                             std::uint32_t m) {
  if (beta.size() != graph.vertex_count()) throw std::invalid_argument("coboundary_0: size mismatch");
  for (std::uint32_t b : beta)
    if (b >= m) throw std::invalid_argument("coboundary_0: value out of range");
  Cochain1 out = Cochain1::zero(m, graph.edge_count());
  for (std::uint16_t c = 0; c < graph.symbol_count(); ++c) {
    GeneratorSymbol s{c};
    for (std::uint32_t v = 0; v < graph.vertex_count(); ++v)
      out.values[graph.edge_slot(s, v)] = (beta[graph.target(s, v)] + m - beta[v]) % m;
  }
  return out;
}

// Ordered sum of alpha along the based loop (v, w), first-applied generator
// first.
inline std::uint32_t loop_sum(const SchreierGraph& graph, const Cochain1& alpha, const Word& w,
                              std::uint32_t v) {
  if (alpha.values.size() != graph.edge_count()) throw std::invalid_argument("loop_sum: cochain size mismatch");
  std::uint64_t acc = 0;
  std::uint32_t u = v;
  for (auto it = w.symbols.rbegin(); it != w.symbols.rend(); ++it) {
    acc += alpha.values[graph.edge_slot(*it, u)];
    u = graph.target(*it, u);
  }
  return static_cast<std::uint32_t>(acc % alpha.modulus);
}

inline std::uint64_t circle_norm_num(std::uint32_t r, std::uint32_t m) { return std::min(r, m - r); }

// max over w in F of (1/|V|) sum_v |d alpha(v,w)|, as an exact fraction with
// denominator |V| * m.
inline Frac near_cocycle_defect_exact(const SchreierGraph& graph, const Cochain1& alpha,
                                      const RelationLoopSet& family) {
  const std::uint32_t m = alpha.modulus;
  std::uint64_t worst = 0;
  for (const Word& w : family.relations) {
    std::uint64_t num = 0;
    for (std::uint32_t v = 0; v < graph.vertex_count(); ++v)
      num += circle_norm_num(loop_sum(graph, alpha, w, v), m);
    worst = std::max(worst, num);
  }
  return Frac(worst, static_cast<std::uint64_t>(graph.vertex_count()) * m);
}

inline double near_cocycle_defect(const SchreierGraph& graph, const Cochain1& alpha,
                                  const RelationLoopSet& family) {
  return near_cocycle_defect_exact(graph, alpha, family).value();
}

// (1/|V|) sum_v sum_s |alpha(s,v) - alpha'(s,v)| with the circle norm, as an
// exact fraction over |V| * m.
inline Frac cochain_distance_exact(const SchreierGraph& graph, const Cochain1& a, const Cochain1& b) {
  if (a.modulus != b.modulus || a.values.size() != b.values.size() || a.values.size() != graph.edge_count())
    throw std::invalid_argument("cochain_distance: mismatch");
  std::uint64_t num = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    std::uint32_t d = (a.values[i] + a.modulus - b.values[i]) % a.modulus;
    num += circle_norm_num(d, a.modulus);
  }
  return Frac(num, static_cast<std::uint64_t>(graph.vertex_count()) * a.modulus);
}

inline double cochain_distance(const SchreierGraph& graph, const Cochain1& a, const Cochain1& b) {
  return cochain_distance_exact(graph, a, b).value();
}

// Integer constraint matrix: one row per based loop (w,v), one column per
// edge slot; entry = number of times the loop traverses the slot.
inline IMat loop_constraint_matrix(const SchreierGraph& graph, const RelationLoopSet& family) {
  const std::uint32_t n = graph.vertex_count();
  IMat m(static_cast<int>(family.relations.size() * n), static_cast<int>(graph.edge_count()));
  int row = 0;
  for (const Word& w : family.relations)
    for (std::uint32_t v = 0; v < n; ++v, ++row) {
      std::uint32_t u = v;
      for (auto it = w.symbols.rbegin(); it != w.symbols.rend(); ++it) {
        m.at(row, static_cast<int>(graph.edge_slot(*it, u))) += 1;
        u = graph.target(*it, u);
      }
    }
  return m;
}

// Matrix of d: K^V -> K^E.
inline IMat coboundary_matrix(const SchreierGraph& graph) {
  IMat m(static_cast<int>(graph.edge_count()), static_cast<int>(graph.vertex_count()));
  for (std::uint16_t c = 0; c < graph.symbol_count(); ++c) {
    GeneratorSymbol s{c};
    for (std::uint32_t v = 0; v < graph.vertex_count(); ++v) {
      int slot = static_cast<int>(graph.edge_slot(s, v));
      m.at(slot, static_cast<int>(graph.target(s, v))) += 1;
      m.at(slot, static_cast<int>(v)) -= 1;
    }
  }
  return m;
}

struct CohomologySummary {
  std::uint32_t modulus = 2;
  std::vector<std::vector<std::uint32_t>> z1_generators;  // generate Z^1 inside (Z/m)^E
  double z1_dim_log_m = 0.0;                              // log_m |Z^1|
  double b1_dim_log_m = 0.0;                              // log_m |B^1|
  std::vector<long long> invariant_factors;               // H^1 = direct sum of Z/d_i, d_1 | d_2 | ...
  std::vector<Cochain1> class_representatives;            // one exact cocycle per H^1 generator
};

// Exact Z^1, B^1 and H^1 = Z^1/B^1 over Z/m.  Kernels and quotients are
// computed by integer Smith normal form with the modulus folded in.
inline CohomologySummary solve_cocycles(const SchreierGraph& graph, const RelationLoopSet& family,
                                        std::uint32_t m) {
  if (m < 2) throw std::invalid_argument("solve_cocycles: modulus must be >= 2");
  CohomologySummary out;
  out.modulus = m;

  IMat constraints = loop_constraint_matrix(graph, family);
  IMat d = coboundary_matrix(graph);
  const int E = static_cast<int>(graph.edge_count());
  const int V = static_cast<int>(graph.vertex_count());

  out.z1_generators = kernel_mod(constraints, m);
  out.z1_dim_log_m = kernel_mod_log_size(constraints, m);
  out.b1_dim_log_m = static_cast<double>(V) - kernel_mod_log_size(d, m);

  // Present H^1 on the Z^1 generators: relations are the integer vectors c
  // with G c = D beta + m z for some beta, z.
  const int p = static_cast<int>(out.z1_generators.size());
  if (p == 0) return out;  // Z^1 trivial
  IMat stacked(E, p + V + E);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < E; ++i) stacked.at(i, j) = out.z1_generators[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  for (int j = 0; j < V; ++j)
    for (int i = 0; i < E; ++i) stacked.at(i, p + j) = -d.at(i, j);
  for (int i = 0; i < E; ++i) stacked.at(i, p + V + i) = -static_cast<long long>(m);

  std::vector<std::vector<long long>> kernel = integer_kernel_basis(stacked);
  IMat lam(p, static_cast<int>(kernel.size()));
  for (int j = 0; j < static_cast<int>(kernel.size()); ++j)
    for (int i = 0; i < p; ++i) lam.at(i, j) = kernel[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];

  SnfResult snf = smith_normal_form(lam, SnfOptions{.need_uinv = true});
  if (snf.rank != p) throw std::logic_error("H^1 presentation is not of full rank");

  for (int i = 0; i < p; ++i) {
    long long factor = snf.diag[static_cast<std::size_t>(i)];
    if (factor <= 1) continue;
    out.invariant_factors.push_back(factor);
    std::vector<std::uint32_t> rep(static_cast<std::size_t>(E), 0);
    for (int r = 0; r < E; ++r) {
      long long acc = 0;
      for (int j = 0; j < p; ++j)
        acc = mod_reduce(acc + mod_reduce(snf.uinv.at(j, i), m) *
                                   out.z1_generators[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)],
                         m);
      rep[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(acc);
    }
    out.class_representatives.emplace_back(m, std::move(rep));
  }

  // Consistency: representatives are exact cocycles outside B^1.
  ModSolver b1(d, m);
  for (const Cochain1& rep : out.class_representatives) {
    for (const Word& w : family.relations)
      for (std::uint32_t v = 0; v < graph.vertex_count(); ++v)
        if (loop_sum(graph, rep, w, v) != 0) throw std::logic_error("H^1 representative is not a cocycle");
    if (b1.solve(rep.values).has_value()) throw std::logic_error("H^1 representative lies in B^1");
  }
  return out;
}

// Membership oracle for B^1; returns the witness beta when solvable.
class CoboundaryMembership {
 public:
  CoboundaryMembership(const SchreierGraph& graph, std::uint32_t m)
      : solver_(coboundary_matrix(graph), m) {}
  std::optional<std::vector<std::uint32_t>> witness(const Cochain1& alpha) const {
    return solver_.solve(alpha.values);
  }

 private:
  ModSolver solver_;
};

// All H^1 class labels as tuples over the invariant factors.
inline std::vector<std::vector<std::uint32_t>> all_class_labels(const CohomologySummary& summary) {
  std::vector<std::vector<std::uint32_t>> out{{}};
  for (long long f : summary.invariant_factors) {
    std::vector<std::vector<std::uint32_t>> next;
    for (const auto& prefix : out)
      for (std::uint32_t c = 0; c < static_cast<std::uint32_t>(f); ++c) {
        auto t = prefix;
        t.push_back(c);
        next.push_back(std::move(t));
      }
    out = std::move(next);
  }
  return out;
}

inline Cochain1 class_combination(const CohomologySummary& summary, const std::vector<std::uint32_t>& label,
                                  std::size_t edge_count) {
  Cochain1 rep = Cochain1::zero(summary.modulus, edge_count);
  for (std::size_t i = 0; i < label.size(); ++i)
    for (std::uint32_t c = 0; c < label[i]; ++c) rep = cochain_add(rep, summary.class_representatives[i]);
  return rep;
}

// H^1 class of an exact cocycle, found by exact membership solves against
// every class combination.
inline std::optional<std::vector<std::uint32_t>> cocycle_class(const CohomologySummary& summary,
                                                               const CoboundaryMembership& b1,
                                                               const Cochain1& alpha) {
  for (const auto& label : all_class_labels(summary)) {
    Cochain1 rep = class_combination(summary, label, alpha.values.size());
    if (b1.witness(cochain_sub(alpha, rep)).has_value()) return label;
  }
  return std::nullopt;
}

struct CosetDistanceResult {
  Frac distance;                        // exact value, or the best found bound
  std::vector<std::uint32_t> witness;   // beta attaining it
  bool exact = true;                    // false: upper bound from local search
};

inline std::uint64_t pow_checked(std::uint64_t base, std::uint32_t exp, std::uint64_t limit) {
  std::uint64_t r = 1;
  for (std::uint32_t i = 0; i < exp; ++i) {
    if (r > limit / base) return limit + 1;
    r *= base;
  }
  return r;
}

// min over beta of d(alpha, d beta) by full enumeration of (Z/m)^V.
inline CosetDistanceResult coset_distance_exact(const SchreierGraph& graph, const Cochain1& alpha,
                                                std::uint64_t enumeration_limit = (1ull << 24)) {
  const std::uint32_t m = alpha.modulus;
  const std::uint32_t n = graph.vertex_count();
  if (pow_checked(m, n, enumeration_limit) > enumeration_limit)
    throw std::invalid_argument("coset_distance: m^|V| exceeds the exact-mode limit");
  std::vector<std::uint32_t> beta(n, 0);
  std::vector<std::uint32_t> best_beta = beta;
  std::uint64_t best = ~0ull;
  while (true) {
    Cochain1 db = coboundary_0(graph, beta, m);
    std::uint64_t num = 0;
    for (std::size_t i = 0; i < alpha.values.size(); ++i) {
      std::uint32_t diff = (alpha.values[i] + m - db.values[i]) % m;
      num += circle_norm_num(diff, m);
    }
    if (num < best) {
      best = num;
      best_beta = beta;
    }
    std::uint32_t pos = 0;
    while (pos < n && ++beta[pos] == m) beta[pos++] = 0;
    if (pos == n) break;
  }
  return CosetDistanceResult{Frac(best, static_cast<std::uint64_t>(n) * m), std::move(best_beta), true};
}

// Coordinate descent on beta with random restarts; each vertex update
// minimizes the summed norm over its 2|S| incident edge slots.  The result is
// an upper bound on the true coset distance.
inline CosetDistanceResult coset_distance_heuristic(const SchreierGraph& graph, const Cochain1& alpha,
                                                    std::uint32_t restarts = 32, std::uint64_t seed = 0) {
  const std::uint32_t m = alpha.modulus;
  const std::uint32_t n = graph.vertex_count();
  const std::uint16_t S = graph.symbol_count();

  // incoming[v]: slots (s,u) with target u -> v.
  std::vector<std::vector<std::pair<std::size_t, std::uint32_t>>> incoming(n);
  for (std::uint16_t c = 0; c < S; ++c) {
    GeneratorSymbol s{c};
    for (std::uint32_t u = 0; u < n; ++u) incoming[graph.target(s, u)].push_back({graph.edge_slot(s, u), u});
  }

  RngStream root = RngStream::root(seed).derive(rng_tag::coset_restart);
  std::uint64_t best = ~0ull;
  std::vector<std::uint32_t> best_beta;
  for (std::uint32_t restart = 0; restart < restarts; ++restart) {
    RngStream rs = root.derive(restart);
    std::vector<std::uint32_t> beta(n);
    for (std::uint32_t v = 0; v < n; ++v) beta[v] = restart == 0 ? 0 : rs.below(m, v);
    bool changed = true;
    std::uint32_t pass = 0;
    while (changed && pass < 200) {
      changed = false;
      ++pass;
      for (std::uint32_t v = 0; v < n; ++v) {
        std::uint64_t best_local = ~0ull;
        std::uint32_t best_c = beta[v];
        for (std::uint32_t cand = 0; cand < m; ++cand) {
          std::uint64_t cost = 0;
          for (std::uint16_t c = 0; c < S; ++c) {
            GeneratorSymbol s{c};
            std::uint32_t db = (beta[graph.target(s, v)] + m - cand) % m;
            // self-loops get re-evaluated with the candidate value
            if (graph.target(s, v) == v) db = 0;
            std::uint32_t diff = (alpha.values[graph.edge_slot(s, v)] + m - db) % m;
            cost += circle_norm_num(diff, m);
          }
          for (const auto& [slot, u] : incoming[v]) {
            if (u == v) continue;  // counted above
            std::uint32_t db = (cand + m - beta[u]) % m;
            std::uint32_t diff = (alpha.values[slot] + m - db) % m;
            cost += circle_norm_num(diff, m);
          }
          if (cost < best_local) {
            best_local = cost;
            best_c = cand;
          }
        }
        if (best_c != beta[v]) {
          beta[v] = best_c;
          changed = true;
        }
      }
    }
    Cochain1 db = coboundary_0(graph, beta, m);
    std::uint64_t num = 0;
    for (std::size_t i = 0; i < alpha.values.size(); ++i) {
      std::uint32_t diff = (alpha.values[i] + m - db.values[i]) % m;
      num += circle_norm_num(diff, m);
    }
    if (num < best) {
      best = num;
      best_beta = beta;
    }
  }
  return CosetDistanceResult{Frac(best, static_cast<std::uint64_t>(n) * m), std::move(best_beta), false};
}

enum class CosetDistanceMode { Exact, Heuristic, Auto };

inline CosetDistanceResult coset_distance(const SchreierGraph& graph, const Cochain1& alpha,
                                          CosetDistanceMode mode = CosetDistanceMode::Auto,
                                          std::uint64_t exact_limit = (1ull << 24), std::uint64_t seed = 0) {
  if (mode == CosetDistanceMode::Exact) return coset_distance_exact(graph, alpha, exact_limit);
  if (mode == CosetDistanceMode::Heuristic) return coset_distance_heuristic(graph, alpha, 32, seed);
  if (pow_checked(alpha.modulus, graph.vertex_count(), exact_limit) <= exact_limit)
    return coset_distance_exact(graph, alpha, exact_limit);
  return coset_distance_heuristic(graph, alpha, 32, seed);
}

// Smallest distance between distinct cosets of B^1 inside Z^1: the minimum of
// coset_distance over nonzero class combinations.
inline Frac min_intercoset_distance(const SchreierGraph& graph, const CohomologySummary& summary,
                                    CosetDistanceMode mode = CosetDistanceMode::Auto) {
  Frac best(0, 1);
  bool have = false;
  for (const auto& label : all_class_labels(summary)) {
    bool zero = true;
    for (std::uint32_t c : label) zero &= (c == 0);
    if (zero) continue;
    Cochain1 rep = class_combination(summary, label, graph.edge_count());
    Frac d = coset_distance(graph, rep, mode).distance;
    if (!have || d < best) {
      best = d;
      have = true;
    }
  }
  if (!have) throw std::invalid_argument("min_intercoset_distance: H^1 is trivial");
  return best;
}

struct ScanHistogramRow {
  Frac defect;
  Frac coset_dist;
  bool coset_exact = true;
  std::uint64_t count = 0;
};

struct ScanComponent {
  std::uint64_t size = 0;
  std::vector<std::vector<std::uint32_t>> classes;  // H^1 classes of exact cocycles inside
};

struct ComponentScanReport {
  std::uint64_t near_cochain_count = 0;
  std::vector<ScanComponent> components;            // raw delta-components of the near set
  std::size_t raw_component_count = 0;
  std::size_t class_group_count = 0;                // realized classes merged along components
  std::vector<std::vector<std::uint32_t>> classes_realized;
  std::optional<Frac> min_intercoset;               // among exact cocycles, when >= 2 classes realized
  std::vector<ScanHistogramRow> histogram;          // over all m^|E| cochains
};

// Exhaustive scan of all cochains with near-cocycle defect below epsilon
// (equal to zero when epsilon = 0); adjacency is cochain distance < delta.
// Components are labelled by the H^1 classes of the exact cocycles they
// contain; class_group_count is the number of realized classes remaining
// disconnected from each other through the near set.
inline ComponentScanReport near_cocycle_component_scan(const SchreierGraph& graph, const RelationLoopSet& family,
                                                       std::uint32_t m, double epsilon, double delta,
                                                       std::uint64_t enumeration_limit = (1ull << 24)) {
  const std::size_t E = graph.edge_count();
  const std::uint64_t total = pow_checked(m, static_cast<std::uint32_t>(E), enumeration_limit);
  if (total > enumeration_limit) throw std::invalid_argument("component scan: m^|E| exceeds the size limit");

  CohomologySummary summary = solve_cocycles(graph, family, m);
  CoboundaryMembership b1(graph, m);
  const bool coset_exact_ok =
      pow_checked(m, graph.vertex_count(), enumeration_limit) <= enumeration_limit;

  ComponentScanReport report;
  std::map<std::pair<std::pair<std::uint64_t, std::uint64_t>, std::pair<std::uint64_t, std::uint64_t>>,
           std::uint64_t>
      hist;

  constexpr std::uint64_t kNearLimit = 20000;  // pairwise adjacency bound
  std::vector<Cochain1> near;
  std::vector<std::optional<std::vector<std::uint32_t>>> near_class;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::vector<std::uint32_t> vals(E);
    std::uint64_t c = code;
    for (std::size_t i = 0; i < E; ++i) {
      vals[i] = static_cast<std::uint32_t>(c % m);
      c /= m;
    }
    Cochain1 alpha(m, std::move(vals));
    Frac defect = near_cocycle_defect_exact(graph, alpha, family);
    CosetDistanceResult cd = coset_exact_ok ? coset_distance_exact(graph, alpha, enumeration_limit)
                                            : coset_distance_heuristic(graph, alpha, 32, code);
    ++hist[{{defect.num, defect.den}, {cd.distance.num, cd.distance.den}}];
    bool admitted = (epsilon == 0.0) ? (defect.num == 0) : (defect.value() < epsilon);
    if (admitted) {
      if (near.size() >= kNearLimit)
        throw std::invalid_argument("component scan: near-cocycle set too large for pairwise adjacency");
      if (defect.num == 0)
        near_class.push_back(cocycle_class(summary, b1, alpha));
      else
        near_class.push_back(std::nullopt);
      near.push_back(std::move(alpha));
    }
  }
  for (const auto& [key, count] : hist) {
    ScanHistogramRow row;
    row.defect = Frac(key.first.first, key.first.second);
    row.coset_dist = Frac(key.second.first, key.second.second);
    row.coset_exact = coset_exact_ok;
    row.count = count;
    report.histogram.push_back(row);
  }
  report.near_cochain_count = near.size();

  // Union-find over the near set.
  std::vector<std::size_t> parent(near.size());
  for (std::size_t i = 0; i < near.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < near.size(); ++i)
    for (std::size_t j = i + 1; j < near.size(); ++j)
      if (cochain_distance(graph, near[i], near[j]) < delta) parent[find(i)] = find(j);

  std::map<std::size_t, ScanComponent> comps;
  for (std::size_t i = 0; i < near.size(); ++i) {
    ScanComponent& comp = comps[find(i)];
    ++comp.size;
    if (near_class[i].has_value()) {
      bool seen = false;
      for (const auto& t : comp.classes) seen |= (t == *near_class[i]);
      if (!seen) comp.classes.push_back(*near_class[i]);
    }
  }
  for (auto& [root, comp] : comps) report.components.push_back(std::move(comp));
  report.raw_component_count = report.components.size();

  // Merge realized classes along components.
  std::vector<std::vector<std::uint32_t>> realized;
  for (const auto& comp : report.components)
    for (const auto& t : comp.classes) {
      bool seen = false;
      for (const auto& u : realized) seen |= (u == t);
      if (!seen) realized.push_back(t);
    }
  std::map<std::vector<std::uint32_t>, std::size_t> class_group;
  for (std::size_t i = 0; i < realized.size(); ++i) class_group[realized[i]] = i;
  std::vector<std::size_t> gparent(realized.size());
  for (std::size_t i = 0; i < realized.size(); ++i) gparent[i] = i;
  std::function<std::size_t(std::size_t)> gf = [&](std::size_t i) {
    while (gparent[i] != i) i = gparent[i] = gparent[gparent[i]];
    return i;
  };
  for (const auto& comp : report.components)
    for (std::size_t a = 1; a < comp.classes.size(); ++a)
      gparent[gf(class_group[comp.classes[a]])] = gf(class_group[comp.classes[0]]);
  std::map<std::size_t, std::size_t> groups;
  for (std::size_t i = 0; i < realized.size(); ++i) ++groups[gf(i)];
  report.class_group_count = groups.size();
  report.classes_realized = realized;

  if (realized.size() >= 2) {
    // Minimum distance between exact cocycles of distinct classes.
    std::optional<Frac> best;
    for (std::size_t i = 0; i < near.size(); ++i)
      for (std::size_t j = i + 1; j < near.size(); ++j) {
        if (!near_class[i] || !near_class[j] || *near_class[i] == *near_class[j]) continue;
        Frac d = cochain_distance_exact(graph, near[i], near[j]);
        if (!best || d < *best) best = d;
      }
    report.min_intercoset = best;
  }
  return report;
}

}  // namespace msp
