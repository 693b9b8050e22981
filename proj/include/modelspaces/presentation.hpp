#pragma once

// Finitely presented groups: symmetric generator sets, reduced words over
// them, relation families, and the builtin example families.

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msp {

// One symbol of the symmetric generating set S.  Generator i carries code 2i,
// its formal inverse code 2i+1; inversion flips the low bit, so it is an
// involution by construction.
struct GeneratorSymbol {
  std::uint16_t code = 0;

  static GeneratorSymbol plain(std::uint16_t id) { return GeneratorSymbol{static_cast<std::uint16_t>(2 * id)}; }
  static GeneratorSymbol inv(std::uint16_t id) { return GeneratorSymbol{static_cast<std::uint16_t>(2 * id + 1)}; }

  std::uint16_t id() const { return static_cast<std::uint16_t>(code >> 1); }
  bool is_inverse() const { return (code & 1u) != 0; }
  GeneratorSymbol inverse() const { return GeneratorSymbol{static_cast<std::uint16_t>(code ^ 1u)}; }

  auto operator<=>(const GeneratorSymbol&) const = default;
};

// A word w = s_l s_{l-1} ... s_1 stored left-to-right, so the FIRST-applied
// symbol is the LAST element.  The empty word is the identity.
struct Word {
  std::vector<GeneratorSymbol> symbols;

  static Word identity() { return Word{}; }
  static Word single(GeneratorSymbol s) { return Word{{s}}; }

  bool is_identity() const { return symbols.empty(); }
  std::size_t length() const { return symbols.size(); }

  // Group inverse: reverse the order and invert every symbol.
  Word inverse() const {
    Word w;
    w.symbols.reserve(symbols.size());
    for (auto it = symbols.rbegin(); it != symbols.rend(); ++it) w.symbols.push_back(it->inverse());
    return w;
  }

  auto operator<=>(const Word&) const = default;
};

// u * w: u applied after w.
inline Word concat(const Word& u, const Word& w) {
  Word r = u;
  r.symbols.insert(r.symbols.end(), w.symbols.begin(), w.symbols.end());
  return r;
}

// Free reduction: cancel adjacent s s^-1 pairs until none remain.
// Idempotent; never increases length.
inline Word reduce_word(const Word& w) {
  Word r;
  r.symbols.reserve(w.symbols.size());
  for (GeneratorSymbol s : w.symbols) {
    if (!r.symbols.empty() && r.symbols.back() == s.inverse())
      r.symbols.pop_back();
    else
      r.symbols.push_back(s);
  }
  return r;
}

inline bool is_reduced(const Word& w) { return reduce_word(w) == w; }

struct GroupPresentation {
  std::uint16_t generator_count = 0;  // k; the symbol set has 2k elements
  std::vector<Word> relations;        // nonempty reduced words

  GroupPresentation() = default;
  GroupPresentation(std::uint16_t k, std::vector<Word> rels) : generator_count(k), relations(std::move(rels)) {
    if (k == 0) throw std::invalid_argument("presentation needs at least one generator");
    for (const Word& r : relations) {
      if (r.is_identity()) throw std::invalid_argument("relations must be nonempty");
      if (!is_reduced(r)) throw std::invalid_argument("relations must be reduced words");
      for (GeneratorSymbol s : r.symbols)
        if (s.id() >= generator_count) throw std::invalid_argument("relation uses unknown generator");
    }
  }

  std::uint16_t symbol_count() const { return static_cast<std::uint16_t>(2 * generator_count); }

  std::vector<GeneratorSymbol> symbols() const {
    std::vector<GeneratorSymbol> out;
    out.reserve(symbol_count());
    for (std::uint16_t c = 0; c < symbol_count(); ++c) out.push_back(GeneratorSymbol{c});
    return out;
  }
};

// All distinct reduced words of length <= radius, identity first, in
// (length, symbol-code) order.  No quotienting by relations: distinctness is
// as free-group elements.
inline std::vector<Word> word_ball(const GroupPresentation& p, std::size_t radius) {
  std::vector<Word> ball{Word::identity()};
  std::vector<Word> frontier{Word::identity()};
  for (std::size_t len = 1; len <= radius; ++len) {
    std::vector<Word> next;
    for (const Word& w : frontier)
      for (std::uint16_t c = 0; c < p.symbol_count(); ++c) {
        GeneratorSymbol s{c};
        if (!w.symbols.empty() && w.symbols.front() == s.inverse()) continue;
        Word nw = Word::single(s);
        nw.symbols.insert(nw.symbols.end(), w.symbols.begin(), w.symbols.end());
        next.push_back(std::move(nw));
      }
    ball.insert(ball.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return ball;
}

// w1 * w2 * w1^-1 * w2^-1 as a (reduced) word string.
inline Word commutator(GeneratorSymbol a, GeneratorSymbol b) {
  return Word{{a, b, a.inverse(), b.inverse()}};
}

inline GroupPresentation free_group(std::uint16_t k) { return GroupPresentation(k, {}); }

inline GroupPresentation cyclic_group(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("cyclic_group: order must be positive");
  Word rel;
  rel.symbols.assign(n, GeneratorSymbol::plain(0));
  return GroupPresentation(1, {rel});
}

// Z^d: generators a_1..a_d, all pairwise commutators.
inline GroupPresentation integer_lattice(std::uint16_t d) {
  std::vector<Word> rels;
  for (std::uint16_t i = 0; i < d; ++i)
    for (std::uint16_t j = static_cast<std::uint16_t>(i + 1); j < d; ++j)
      rels.push_back(commutator(GeneratorSymbol::plain(i), GeneratorSymbol::plain(j)));
  return GroupPresentation(d, std::move(rels));
}

// Genus-g surface group: 2g generators, one relation [a_1,b_1]...[a_g,b_g].
inline GroupPresentation surface_group(std::uint16_t genus) {
  if (genus == 0) throw std::invalid_argument("surface_group: genus must be positive");
  Word rel;
  for (std::uint16_t i = 0; i < genus; ++i) {
    Word c = commutator(GeneratorSymbol::plain(static_cast<std::uint16_t>(2 * i)),
                        GeneratorSymbol::plain(static_cast<std::uint16_t>(2 * i + 1)));
    rel.symbols.insert(rel.symbols.end(), c.symbols.begin(), c.symbols.end());
  }
  return GroupPresentation(static_cast<std::uint16_t>(2 * genus), {rel});
}

// Textual symbol names: g0..g_{k-1} and G0..G_{k-1} for the inverses.
inline std::string symbol_name(GeneratorSymbol s) {
  return (s.is_inverse() ? "G" : "g") + std::to_string(s.id());
}

inline std::string word_name(const Word& w) {
  if (w.is_identity()) return "e";
  std::string out;
  for (std::size_t i = 0; i < w.symbols.size(); ++i) {
    if (i) out += ' ';
    out += symbol_name(w.symbols[i]);
  }
  return out;
}

inline GeneratorSymbol parse_symbol(const std::string& tok, std::uint16_t generator_count) {
  if (tok.size() < 2 || (tok[0] != 'g' && tok[0] != 'G'))
    throw std::runtime_error("unknown symbol '" + tok + "'");
  for (std::size_t i = 1; i < tok.size(); ++i)
    if (tok[i] < '0' || tok[i] > '9') throw std::runtime_error("unknown symbol '" + tok + "'");
  unsigned long id = std::stoul(tok.substr(1));
  if (id >= generator_count) throw std::runtime_error("unknown symbol '" + tok + "'");
  return tok[0] == 'g' ? GeneratorSymbol::plain(static_cast<std::uint16_t>(id))
                       : GeneratorSymbol::inv(static_cast<std::uint16_t>(id));
}

}  // namespace msp
