#pragma once

// Finite approximations sigma: S -> Sym(V), their quality metrics, and the
// Schreier graphs they induce.  Formal inverses always act by the exact
// inverse permutation; relation defects may be nonzero and are reported, not
// assumed away.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "presentation.hpp"

namespace msp {

class SoficApproximation {
 public:
  SoficApproximation() = default;

  // One permutation per non-inverse generator; inverses are derived.
  explicit SoficApproximation(std::vector<std::vector<std::uint32_t>> generator_perms) {
    if (generator_perms.empty()) throw std::invalid_argument("approximation needs at least one generator");
    n_ = static_cast<std::uint32_t>(generator_perms.front().size());
    if (n_ == 0) throw std::invalid_argument("approximation needs a nonempty vertex set");
    k_ = static_cast<std::uint16_t>(generator_perms.size());
    perms_.resize(2 * static_cast<std::size_t>(k_));
    for (std::uint16_t g = 0; g < k_; ++g) {
      const auto& p = generator_perms[g];
      if (p.size() != n_) throw std::invalid_argument("permutations must share one vertex set");
      std::vector<std::uint32_t> inv(n_, n_);
      for (std::uint32_t v = 0; v < n_; ++v) {
        if (p[v] >= n_) throw std::invalid_argument("permutation image out of range");
        if (inv[p[v]] != n_) throw std::invalid_argument("permutation line is not a bijection");
        inv[p[v]] = v;
      }
      perms_[GeneratorSymbol::plain(g).code] = p;
      perms_[GeneratorSymbol::inv(g).code] = std::move(inv);
    }
  }

  std::uint32_t vertex_count() const { return n_; }
  std::uint16_t generator_count() const { return k_; }
  std::uint16_t symbol_count() const { return static_cast<std::uint16_t>(2 * k_); }

  const std::vector<std::uint32_t>& perm(GeneratorSymbol s) const {
    if (s.id() >= k_) throw std::invalid_argument("unknown generator symbol " + symbol_name(s));
    return perms_[s.code];
  }

  std::uint32_t apply(GeneratorSymbol s, std::uint32_t v) const { return perm(s)[v]; }

  // sigma^w(v): first-applied symbol is the last list element.
  std::uint32_t apply_word(const Word& w, std::uint32_t v) const {
    for (auto it = w.symbols.rbegin(); it != w.symbols.rend(); ++it) v = perm(*it)[v];
    return v;
  }

  std::vector<std::uint32_t> word_permutation(const Word& w) const {
    std::vector<std::uint32_t> out(n_);
    for (std::uint32_t v = 0; v < n_; ++v) out[v] = v;
    for (auto it = w.symbols.rbegin(); it != w.symbols.rend(); ++it) {
      const auto& p = perm(*it);
      for (std::uint32_t v = 0; v < n_; ++v) out[v] = p[out[v]];
    }
    return out;
  }

 private:
  std::uint32_t n_ = 0;
  std::uint16_t k_ = 0;
  std::vector<std::vector<std::uint32_t>> perms_;  // indexed by symbol code
};

inline std::uint32_t evaluate_word(const SoficApproximation& sigma, const Word& w, std::uint32_t v) {
  if (v >= sigma.vertex_count()) throw std::invalid_argument("vertex out of range");
  return sigma.apply_word(w, v);
}

// Fraction of vertices moved by sigma^w; zero exactly when sigma^w = id.
inline double relation_defect(const SoficApproximation& sigma, const Word& w) {
  std::uint32_t moved = 0;
  for (std::uint32_t v = 0; v < sigma.vertex_count(); ++v)
    if (sigma.apply_word(w, v) != v) ++moved;
  return static_cast<double>(moved) / sigma.vertex_count();
}

// Fraction of fixed points of sigma^w for a reduced nonempty word; small
// values certify approximation quality for that word.
inline double freeness_fraction(const SoficApproximation& sigma, const Word& w) {
  if (w.is_identity() || !is_reduced(w))
    throw std::invalid_argument("freeness_fraction needs a nonempty reduced word");
  std::uint32_t fixed = 0;
  for (std::uint32_t v = 0; v < sigma.vertex_count(); ++v)
    if (sigma.apply_word(w, v) == v) ++fixed;
  return static_cast<double>(fixed) / sigma.vertex_count();
}

// Z or Z/n acting by the cyclic shift v -> v+1 on n vertices.
inline SoficApproximation cyclic_shift(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("cyclic_shift: need a positive vertex count");
  std::vector<std::uint32_t> p(n);
  for (std::uint32_t v = 0; v < n; ++v) p[v] = (v + 1) % n;
  return SoficApproximation({std::move(p)});
}

// Z^2 acting by the two coordinate shifts on the n x n torus.
// Vertex (i,j) is indexed i*n + j.
inline SoficApproximation torus_shift(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("torus_shift: need a positive side length");
  std::vector<std::uint32_t> pa(n * n), pb(n * n);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) {
      pa[i * n + j] = ((i + 1) % n) * n + j;
      pb[i * n + j] = i * n + (j + 1) % n;
    }
  return SoficApproximation({std::move(pa), std::move(pb)});
}

// True iff g -> sigma^g(v) is injective on the given word list and every
// Schreier edge between two images is certified by an edge of the acting
// quotient: sigma^s o sigma^{w_i} = sigma^{w_j} as permutations.
inline bool injectivity_radius_ok(const SoficApproximation& sigma, const std::vector<Word>& words,
                                  std::uint32_t v) {
  bool has_identity = false;
  for (const Word& w : words) has_identity |= w.is_identity();
  if (!has_identity) throw std::invalid_argument("word set must contain the identity");

  std::vector<std::vector<std::uint32_t>> perms;
  perms.reserve(words.size());
  for (const Word& w : words) perms.push_back(sigma.word_permutation(w));

  std::vector<std::uint32_t> image(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    image[i] = perms[i][v];
    for (std::size_t j = 0; j < i; ++j)
      if (image[j] == image[i]) return false;
  }
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::uint16_t c = 0; c < sigma.symbol_count(); ++c) {
      GeneratorSymbol s{c};
      std::uint32_t target = sigma.apply(s, image[i]);
      for (std::size_t j = 0; j < words.size(); ++j) {
        if (image[j] != target) continue;
        const auto& sp = sigma.perm(s);
        bool cayley = true;
        for (std::uint32_t u = 0; u < sigma.vertex_count() && cayley; ++u)
          cayley = (sp[perms[i][u]] == perms[j][u]);
        if (!cayley) return false;
      }
    }
  return true;
}

// Directed Schreier graph: edge set E = S x V with target(s,v) = sigma^s(v).
// Edge slot (s,v) has flat index s.code * |V| + v.
class SchreierGraph {
 public:
  SchreierGraph() = default;
  explicit SchreierGraph(SoficApproximation sigma) : sigma_(std::move(sigma)) {}

  const SoficApproximation& approximation() const { return sigma_; }
  std::uint32_t vertex_count() const { return sigma_.vertex_count(); }
  std::uint16_t symbol_count() const { return sigma_.symbol_count(); }
  std::size_t edge_count() const { return static_cast<std::size_t>(sigma_.symbol_count()) * sigma_.vertex_count(); }

  std::size_t edge_slot(GeneratorSymbol s, std::uint32_t v) const {
    return static_cast<std::size_t>(s.code) * sigma_.vertex_count() + v;
  }
  std::uint32_t target(GeneratorSymbol s, std::uint32_t v) const { return sigma_.apply(s, v); }

 private:
  SoficApproximation sigma_;
};

}  // namespace msp
