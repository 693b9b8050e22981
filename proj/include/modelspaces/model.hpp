#pragma once

// Microstates, empirical distributions over finite windows, normalized
// Hamming metrics, good-model neighbourhoods, local functions and the
// conditional-expectation operators E_D, hereditary families.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "counter_rng.hpp"
#include "presentation.hpp"
#include "sofic.hpp"

namespace msp {

// A finite letter space with a metric of diameter <= 1.  All metrics here are
// rational: distance(a,b) = distance_num(a,b) / distance_den(), which keeps
// Hamming averages and empirical integrals exact.
//
//   Finite(k):          discrete metric, 0 or 1.
//   Cyclic(m):          Z/m with the circle norm |k| = min(k, m-k)/m.
//   CyclicTuple(m, r):  (Z/m)^r with the mean of circle norms per coordinate;
//                       letter = sum_i a_i m^i.  Used for edge processes.
class Alphabet {
 public:
  enum class Kind { Finite, Cyclic, CyclicTuple };

  static Alphabet finite(std::uint32_t letters) {
    if (letters == 0) throw std::invalid_argument("alphabet needs at least one letter");
    return Alphabet(Kind::Finite, letters, letters, 1);
  }
  static Alphabet cyclic(std::uint32_t m) {
    if (m < 2) throw std::invalid_argument("cyclic alphabet needs modulus >= 2");
    return Alphabet(Kind::Cyclic, m, m, 1);
  }
  static Alphabet cyclic_tuple(std::uint32_t m, std::uint32_t arity) {
    if (m < 2 || arity == 0) throw std::invalid_argument("cyclic_tuple needs modulus >= 2, arity >= 1");
    std::uint64_t size = 1;
    for (std::uint32_t i = 0; i < arity; ++i) {
      size *= m;
      if (size > (1ull << 31)) throw std::invalid_argument("cyclic_tuple alphabet too large");
    }
    return Alphabet(Kind::CyclicTuple, static_cast<std::uint32_t>(size), m, arity);
  }

  Kind kind() const { return kind_; }
  std::uint32_t size() const { return size_; }
  std::uint32_t modulus() const { return m_; }
  std::uint32_t arity() const { return arity_; }

  std::uint64_t distance_den() const {
    switch (kind_) {
      case Kind::Finite: return 1;
      case Kind::Cyclic: return m_;
      case Kind::CyclicTuple: return static_cast<std::uint64_t>(m_) * arity_;
    }
    return 1;
  }

  std::uint64_t distance_num(std::uint32_t a, std::uint32_t b) const {
    switch (kind_) {
      case Kind::Finite: return a == b ? 0 : 1;
      case Kind::Cyclic: {
        std::uint32_t d = a > b ? a - b : b - a;
        return std::min(d, m_ - d);
      }
      case Kind::CyclicTuple: {
        std::uint64_t num = 0;
        for (std::uint32_t i = 0; i < arity_; ++i) {
          std::uint32_t xa = a % m_, xb = b % m_;
          a /= m_;
          b /= m_;
          std::uint32_t d = xa > xb ? xa - xb : xb - xa;
          num += std::min(d, m_ - d);
        }
        return num;
      }
    }
    return 0;
  }

  double distance(std::uint32_t a, std::uint32_t b) const {
    return static_cast<double>(distance_num(a, b)) / static_cast<double>(distance_den());
  }

  bool operator==(const Alphabet& o) const {
    return kind_ == o.kind_ && size_ == o.size_ && m_ == o.m_ && arity_ == o.arity_;
  }

 private:
  Alphabet(Kind k, std::uint32_t size, std::uint32_t m, std::uint32_t arity)
      : kind_(k), size_(size), m_(m), arity_(arity) {}
  Kind kind_;
  std::uint32_t size_;
  std::uint32_t m_;      // modulus for cyclic kinds; = size for Finite
  std::uint32_t arity_;  // 1 except for CyclicTuple
};

// x in X^V as a flat array of letters.
struct Microstate {
  Alphabet alphabet;
  std::vector<std::uint32_t> values;

  Microstate(Alphabet a, std::vector<std::uint32_t> vals) : alphabet(a), values(std::move(vals)) {
    for (std::uint32_t x : values)
      if (x >= alphabet.size()) throw std::invalid_argument("letter out of alphabet range");
  }
  static Microstate constant(Alphabet a, std::uint32_t letter, std::uint32_t n) {
    if (letter >= a.size()) throw std::invalid_argument("letter out of alphabet range");
    return Microstate(a, std::vector<std::uint32_t>(n, letter));
  }
  std::uint32_t size() const { return static_cast<std::uint32_t>(values.size()); }

  bool operator==(const Microstate& o) const { return alphabet == o.alphabet && values == o.values; }
};

// Normalized Hamming average d^(V)(x,x') = (1/|V|) sum_v d(x_v, x'_v).
// Exact numerator over alphabet.distance_den() * |V|.
inline std::uint64_t hamming_distance_num(const Microstate& x, const Microstate& y) {
  if (!(x.alphabet == y.alphabet) || x.size() != y.size())
    throw std::invalid_argument("hamming_distance: alphabet or length mismatch");
  std::uint64_t num = 0;
  for (std::size_t v = 0; v < x.values.size(); ++v) num += x.alphabet.distance_num(x.values[v], y.values[v]);
  return num;
}

inline double hamming_distance(const Microstate& x, const Microstate& y) {
  return static_cast<double>(hamming_distance_num(x, y)) /
         (static_cast<double>(x.alphabet.distance_den()) * x.size());
}

// An ordered set of distinct reduced words containing the identity first.
struct Window {
  std::vector<Word> words;

  Window() : words{Word::identity()} {}
  explicit Window(std::vector<Word> ws) : words(std::move(ws)) {
    if (words.empty() || !words.front().is_identity())
      throw std::invalid_argument("window must list the identity first");
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (!is_reduced(words[i])) throw std::invalid_argument("window words must be reduced");
      for (std::size_t j = 0; j < i; ++j)
        if (words[i] == words[j]) throw std::invalid_argument("window words must be distinct");
    }
  }

  static Window ball(const GroupPresentation& p, std::size_t radius) { return Window(word_ball(p, radius)); }

  std::size_t size() const { return words.size(); }
  bool operator==(const Window& o) const { return words == o.words; }
};

// Patterns (tuples of letters indexed by window words) are packed into one
// integer with radix |alphabet|, word 0 in the least significant digit.
inline std::uint64_t pattern_space_size(const Alphabet& a, std::size_t window_size) {
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < window_size; ++i) {
    if (space > (1ull << 62) / a.size()) throw std::invalid_argument("pattern space too large to encode");
    space *= a.size();
  }
  return space;
}

// Cached vertex images sigma^w(v) for each window word.
struct WindowImages {
  std::vector<std::vector<std::uint32_t>> img;  // img[word_index][v]

  WindowImages(const SoficApproximation& sigma, const Window& window) {
    img.reserve(window.size());
    for (const Word& w : window.words) {
      std::vector<std::uint32_t> col(sigma.vertex_count());
      for (std::uint32_t v = 0; v < sigma.vertex_count(); ++v) col[v] = sigma.apply_word(w, v);
      img.push_back(std::move(col));
    }
  }
};

inline std::uint64_t encode_pattern(const std::vector<std::uint32_t>& pattern, const Alphabet& a) {
  std::uint64_t code = 0;
  for (std::size_t i = pattern.size(); i-- > 0;) code = code * a.size() + pattern[i];
  return code;
}

inline std::vector<std::uint32_t> decode_pattern(std::uint64_t code, const Alphabet& a, std::size_t window_size) {
  std::vector<std::uint32_t> pattern(window_size);
  for (std::size_t i = 0; i < window_size; ++i) {
    pattern[i] = static_cast<std::uint32_t>(code % a.size());
    code /= a.size();
  }
  return pattern;
}

// Pullback name of x at v restricted to the window: (x_{sigma^w(v)})_{w in D}.
inline std::vector<std::uint32_t> pullback_pattern(const SoficApproximation& sigma, const Microstate& x,
                                                   std::uint32_t v, const Window& window) {
  if (x.size() != sigma.vertex_count()) throw std::invalid_argument("microstate length mismatch");
  std::vector<std::uint32_t> pattern(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) pattern[i] = x.values[sigma.apply_word(window.words[i], v)];
  return pattern;
}

// A sparse probability table over window patterns.  Empirical tables carry
// exact integer counts; synthetic tables (products, Haar references) carry
// probabilities only.
struct EmpiricalDistribution {
  Window window;
  Alphabet alphabet;
  std::map<std::uint64_t, double> prob;
  std::map<std::uint64_t, std::uint64_t> counts;  // empty for synthetic tables
  std::uint64_t total = 0;                        // count denominator; 0 for synthetic

  EmpiricalDistribution(Window w, Alphabet a) : window(std::move(w)), alphabet(a) {}

  void check_normalized() const {
    double sum = 0.0;
    for (const auto& [k, p] : prob) {
      if (p < 0.0) throw std::invalid_argument("negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("probabilities must sum to 1");
  }
};

inline EmpiricalDistribution empirical_distribution(const SoficApproximation& sigma, const Microstate& x,
                                                    const Window& window, const WindowImages* cache = nullptr) {
  if (x.size() != sigma.vertex_count()) throw std::invalid_argument("microstate length mismatch");
  EmpiricalDistribution dist(window, x.alphabet);
  const std::uint64_t space = pattern_space_size(x.alphabet, window.size());
  std::optional<WindowImages> local;
  if (!cache) local.emplace(sigma, window);
  const auto& img = (cache ? *cache : *local).img;
  const std::uint32_t n = sigma.vertex_count();

  if (space <= (1ull << 22)) {
    std::vector<std::uint64_t> dense(space, 0);
    for (std::uint32_t v = 0; v < n; ++v) {
      std::uint64_t code = 0;
      for (std::size_t i = window.size(); i-- > 0;) code = code * x.alphabet.size() + x.values[img[i][v]];
      ++dense[code];
    }
    for (std::uint64_t code = 0; code < space; ++code)
      if (dense[code]) {
        dist.counts[code] = dense[code];
        dist.prob[code] = static_cast<double>(dense[code]) / n;
      }
  } else {
    for (std::uint32_t v = 0; v < n; ++v) {
      std::uint64_t code = 0;
      for (std::size_t i = window.size(); i-- > 0;) code = code * x.alphabet.size() + x.values[img[i][v]];
      ++dist.counts[code];
    }
    for (const auto& [code, c] : dist.counts) dist.prob[code] = static_cast<double>(c) / n;
  }
  dist.total = n;
  return dist;
}

// Window marginal of the product measure nu^{x G}: one nu factor per word.
inline EmpiricalDistribution product_marginal(const std::vector<double>& nu, const Alphabet& alphabet,
                                              const Window& window) {
  if (nu.size() != alphabet.size()) throw std::invalid_argument("product_marginal: distribution size mismatch");
  const std::uint64_t space = pattern_space_size(alphabet, window.size());
  if (space > (1ull << 22)) throw std::invalid_argument("product_marginal: pattern space too large");
  EmpiricalDistribution dist(window, alphabet);
  for (std::uint64_t code = 0; code < space; ++code) {
    double p = 1.0;
    std::uint64_t c = code;
    for (std::size_t i = 0; i < window.size(); ++i) {
      p *= nu[c % alphabet.size()];
      c /= alphabet.size();
    }
    if (p > 0.0) dist.prob[code] = p;
  }
  dist.check_normalized();
  return dist;
}

// (1/2) sum over patterns |P - Q|.
inline double tv_distance(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  if (!(p.window == q.window) || !(p.alphabet == q.alphabet))
    throw std::invalid_argument("tv_distance: window or alphabet mismatch");
  double sum = 0.0;
  auto it = p.prob.begin();
  auto jt = q.prob.begin();
  while (it != p.prob.end() || jt != q.prob.end()) {
    if (jt == q.prob.end() || (it != p.prob.end() && it->first < jt->first)) {
      sum += it->second;
      ++it;
    } else if (it == p.prob.end() || jt->first < it->first) {
      sum += jt->second;
      ++jt;
    } else {
      sum += std::abs(it->second - jt->second);
      ++it;
      ++jt;
    }
  }
  return sum / 2.0;
}

// An F-local real function given by a dense table over window patterns.
struct LocalFunction {
  Window window;
  Alphabet alphabet;
  std::vector<double> table;  // indexed by encoded pattern
  double lipschitz_bound = 1.0;

  LocalFunction(Window w, Alphabet a, std::vector<double> t, double lip = 1.0)
      : window(std::move(w)), alphabet(a), table(std::move(t)), lipschitz_bound(lip) {
    if (table.size() != pattern_space_size(alphabet, window.size()))
      throw std::invalid_argument("local function table has wrong size");
  }
};

// Normalized Hamming metric between two encoded patterns of one window.
inline double pattern_distance(const Alphabet& a, std::size_t window_size, std::uint64_t p, std::uint64_t q) {
  std::uint64_t num = 0;
  for (std::size_t i = 0; i < window_size; ++i) {
    num += a.distance_num(static_cast<std::uint32_t>(p % a.size()), static_cast<std::uint32_t>(q % a.size()));
    p /= a.size();
    q /= a.size();
  }
  return static_cast<double>(num) / (static_cast<double>(a.distance_den()) * window_size);
}

// Smallest L with |f(p) - f(q)| <= L d(p,q) over all pattern pairs.
// Exhaustive; intended for small alphabets and windows.
inline double measured_lipschitz_bound(const LocalFunction& f) {
  double best = 0.0;
  const std::uint64_t space = f.table.size();
  for (std::uint64_t p = 0; p < space; ++p)
    for (std::uint64_t q = p + 1; q < space; ++q) {
      double d = pattern_distance(f.alphabet, f.window.size(), p, q);
      if (d > 0.0) best = std::max(best, std::abs(f.table[p] - f.table[q]) / d);
    }
  return best;
}

inline double integral(const LocalFunction& f, const EmpiricalDistribution& dist) {
  if (!(f.window == dist.window) || !(f.alphabet == dist.alphabet))
    throw std::invalid_argument("integral: window or alphabet mismatch");
  double sum = 0.0;
  for (const auto& [code, p] : dist.prob) sum += p * f.table[code];
  return sum;
}

// E_D f with D given positionally: integrate out the window coordinates with
// keep[i] == false against nu.  The result is a table on the same window,
// constant in the integrated-out coordinates; the Lipschitz bound carries
// over.
inline LocalFunction conditional_expectation_positions(const LocalFunction& f, const std::vector<bool>& keep,
                                                       const std::vector<double>& nu) {
  if (nu.size() != f.alphabet.size()) throw std::invalid_argument("conditional_expectation: nu size mismatch");
  if (keep.size() != f.window.size()) throw std::invalid_argument("conditional_expectation: mask size mismatch");
  std::vector<std::size_t> out_positions;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (!keep[i]) out_positions.push_back(i);

  const std::uint32_t A = f.alphabet.size();
  const std::uint64_t space = f.table.size();
  std::vector<std::uint64_t> radix(f.window.size(), 1);
  for (std::size_t i = 1; i < f.window.size(); ++i) radix[i] = radix[i - 1] * A;

  std::uint64_t out_space = 1;
  for (std::size_t i = 0; i < out_positions.size(); ++i) out_space *= A;

  std::vector<double> out(space, 0.0);
  for (std::uint64_t code = 0; code < space; ++code) {
    // Average once per canonical code (integrated-out digits all zero), then
    // copy the value across the integrated-out fibre.
    bool canonical = true;
    for (std::size_t pos : out_positions)
      if ((code / radix[pos]) % A != 0) {
        canonical = false;
        break;
      }
    if (!canonical) continue;
    double acc = 0.0;
    for (std::uint64_t q = 0; q < out_space; ++q) {
      std::uint64_t full = code;
      std::uint64_t qq = q;
      double weight = 1.0;
      for (std::size_t pos : out_positions) {
        std::uint32_t letter = static_cast<std::uint32_t>(qq % A);
        qq /= A;
        weight *= nu[letter];
        full += radix[pos] * letter;
      }
      acc += weight * f.table[full];
    }
    for (std::uint64_t q = 0; q < out_space; ++q) {
      std::uint64_t full = code;
      std::uint64_t qq = q;
      for (std::size_t pos : out_positions) {
        full += radix[pos] * static_cast<std::uint32_t>(qq % A);
        qq /= A;
      }
      out[full] = acc;
    }
  }
  return LocalFunction(f.window, f.alphabet, std::move(out), f.lipschitz_bound);
}

// E_D f where D is a sub-window of f.window (matched by word).
inline LocalFunction conditional_expectation(const LocalFunction& f, const std::vector<Word>& sub,
                                             const std::vector<double>& nu) {
  std::vector<bool> keep(f.window.size(), false);
  for (const Word& w : sub) {
    bool found = false;
    for (std::size_t i = 0; i < f.window.size(); ++i)
      if (f.window.words[i] == w) {
        keep[i] = true;
        found = true;
      }
    if (!found) throw std::invalid_argument("conditional_expectation: word not contained in window");
  }
  return conditional_expectation_positions(f, keep, nu);
}

inline bool tables_equal(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

// Closure of a family under every E_D, D a subset of the shared window.
// Deduplicates tables equal within 1e-12.
inline std::vector<LocalFunction> hereditary_closure(const std::vector<LocalFunction>& family,
                                                     const std::vector<double>& nu) {
  if (family.empty()) return {};
  for (const LocalFunction& f : family)
    if (!(f.window == family.front().window)) throw std::invalid_argument("family must share one window");
  std::vector<LocalFunction> out = family;
  const std::size_t d = family.front().window.size();
  for (const LocalFunction& f : family) {
    for (std::uint64_t mask = 0; mask + 1 < (1ull << d); ++mask) {
      std::vector<bool> keep(d, false);
      for (std::size_t i = 0; i < d; ++i) keep[i] = ((mask >> i) & 1ull) != 0;
      LocalFunction g = conditional_expectation_positions(f, keep, nu);
      bool dup = false;
      for (const LocalFunction& h : out)
        if (tables_equal(h.table, g.table)) {
          dup = true;
          break;
        }
      if (!dup) out.push_back(std::move(g));
    }
  }
  return out;
}

// Local map psi: A^D -> B applied vertexwise through pullback patterns.
struct LocalMap {
  Window window;
  Alphabet source;
  Alphabet target;
  std::vector<std::uint32_t> table;  // indexed by encoded source pattern

  LocalMap(Window w, Alphabet src, Alphabet tgt, std::vector<std::uint32_t> t)
      : window(std::move(w)), source(src), target(tgt), table(std::move(t)) {
    if (table.size() != pattern_space_size(source, window.size()))
      throw std::invalid_argument("local map table has wrong size");
    for (std::uint32_t letter : table)
      if (letter >= target.size()) throw std::invalid_argument("local map image out of range");
  }
};

inline Microstate apply_local_map(const SoficApproximation& sigma, const Microstate& x, const LocalMap& psi) {
  if (!(x.alphabet == psi.source)) throw std::invalid_argument("apply_local_map: alphabet mismatch");
  if (x.size() != sigma.vertex_count()) throw std::invalid_argument("apply_local_map: length mismatch");
  WindowImages img(sigma, psi.window);
  std::vector<std::uint32_t> out(x.size());
  for (std::uint32_t v = 0; v < x.size(); ++v) {
    std::uint64_t code = 0;
    for (std::size_t i = psi.window.size(); i-- > 0;) code = code * x.alphabet.size() + x.values[img.img[i][v]];
    out[v] = psi.table[code];
  }
  return Microstate(psi.target, std::move(out));
}

// A good-model neighbourhood: either a TV ball around a reference window
// marginal, or a finite function family with reference integrals.
struct NeighbourhoodSpec {
  enum class Kind { MarginalTV, FunctionFamily };

  Kind kind;
  double epsilon;
  Window window;
  // MarginalTV
  std::vector<EmpiricalDistribution> reference;  // exactly one entry when MarginalTV
  // FunctionFamily
  std::vector<LocalFunction> family;
  std::vector<double> reference_integrals;

  static NeighbourhoodSpec marginal_tv(EmpiricalDistribution ref, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("neighbourhood needs epsilon > 0");
    NeighbourhoodSpec s{Kind::MarginalTV, eps, ref.window, {}, {}, {}};
    s.reference.push_back(std::move(ref));
    return s;
  }
  static NeighbourhoodSpec function_family(std::vector<LocalFunction> fam, std::vector<double> refs, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("neighbourhood needs epsilon > 0");
    if (fam.empty() || fam.size() != refs.size())
      throw std::invalid_argument("function family and reference integrals must align");
    NeighbourhoodSpec s{Kind::FunctionFamily, eps, fam.front().window, {}, std::move(fam), std::move(refs)};
    return s;
  }
};

inline bool is_good_model(const SoficApproximation& sigma, const Microstate& x, const NeighbourhoodSpec& spec,
                          double* deviation_out = nullptr, const WindowImages* cache = nullptr) {
  EmpiricalDistribution emp = empirical_distribution(sigma, x, spec.window, cache);
  if (spec.kind == NeighbourhoodSpec::Kind::MarginalTV) {
    double tv = tv_distance(emp, spec.reference.front());
    if (deviation_out) *deviation_out = tv;
    return tv < spec.epsilon;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < spec.family.size(); ++i)
    worst = std::max(worst, std::abs(integral(spec.family[i], emp) - spec.reference_integrals[i]));
  if (deviation_out) *deviation_out = worst;
  return worst < spec.epsilon;
}

struct PairIdentityResult {
  double integral_side;
  double hamming_side;
  bool equal;
};

// Integral of F(x,x') = d(x_e, x'_e) against the joint empirical distribution
// of (x,z) over the window {e}, compared with the normalized Hamming distance.
// Both sides are assembled from the same exact integer numerators.
inline PairIdentityResult pair_distance_identity_check(const SoficApproximation& sigma, const Microstate& x,
                                                       const Microstate& z) {
  if (!(x.alphabet == z.alphabet) || x.size() != z.size())
    throw std::invalid_argument("pair_distance_identity_check: alphabet or length mismatch");
  if (x.size() != sigma.vertex_count()) throw std::invalid_argument("microstate length mismatch");
  // Joint empirical distribution over the product alphabet, window {e}:
  // counts of the pair letters (x_v, z_v).
  std::map<std::uint64_t, std::uint64_t> joint;
  for (std::uint32_t v = 0; v < x.size(); ++v)
    ++joint[static_cast<std::uint64_t>(x.values[v]) * x.alphabet.size() + z.values[v]];
  std::uint64_t lhs_num = 0;
  for (const auto& [pair_code, count] : joint) {
    std::uint32_t a = static_cast<std::uint32_t>(pair_code / x.alphabet.size());
    std::uint32_t b = static_cast<std::uint32_t>(pair_code % x.alphabet.size());
    lhs_num += count * x.alphabet.distance_num(a, b);
  }
  std::uint64_t rhs_num = hamming_distance_num(x, z);
  double den = static_cast<double>(x.alphabet.distance_den()) * x.size();
  return PairIdentityResult{static_cast<double>(lhs_num) / den, static_cast<double>(rhs_num) / den,
                            lhs_num == rhs_num};
}

// Draw an i.i.d. nu microstate, one counter-addressed draw per vertex.
inline Microstate sample_iid_microstate(const Alphabet& alphabet, const DiscreteDistribution& nu, std::uint32_t n,
                                        const RngStream& stream) {
  if (nu.size() != alphabet.size()) throw std::invalid_argument("sample_iid_microstate: nu size mismatch");
  std::vector<std::uint32_t> vals(n);
  for (std::uint32_t v = 0; v < n; ++v) vals[v] = nu.sample(stream.u01(v));
  return Microstate(alphabet, std::move(vals));
}

}  // namespace msp
