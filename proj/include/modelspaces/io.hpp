#pragma once

// File formats:
//   presentation:  line 1 "generators k", then one relation word per line as
//                  space-separated symbols g0../G0..
//   permutations:  line 1 "vertices N", then one line of N images per
//                  non-inverse generator, in presentation order.
//   microstate:    line 1 "alphabet finite k" or "alphabet cyclic m",
//                  line 2 the |V| letter indices.
//   empirical CSV: one row per pattern, columns = window words then
//                  probability.
// Parsing is strict: unknown tokens, wrong counts and non-bijections are
// rejected.

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "presentation.hpp"
#include "sofic.hpp"

namespace msp {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline Word parse_word(const std::string& text, std::uint16_t generator_count) {
  if (text == "e") return Word::identity();
  Word w;
  for (const std::string& tok : split_tokens(text)) {
    if (tok == "e") continue;
    w.symbols.push_back(parse_symbol(tok, generator_count));
  }
  return w;
}

inline GroupPresentation parse_presentation(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("presentation file: missing header");
  auto toks = split_tokens(line);
  if (toks.size() != 2 || toks[0] != "generators")
    throw std::runtime_error("presentation file: header must read 'generators k'");
  int k = std::stoi(toks[1]);
  if (k <= 0 || k > 0x7fff) throw std::runtime_error("presentation file: bad generator count");
  std::vector<Word> relations;
  while (std::getline(in, line)) {
    if (split_tokens(line).empty()) continue;
    Word w = parse_word(line, static_cast<std::uint16_t>(k));
    if (!is_reduced(w)) w = reduce_word(w);
    if (w.is_identity()) throw std::runtime_error("presentation file: relation reduces to the identity");
    relations.push_back(std::move(w));
  }
  return GroupPresentation(static_cast<std::uint16_t>(k), std::move(relations));
}

inline void write_presentation(std::ostream& out, const GroupPresentation& p) {
  out << "generators " << p.generator_count << "\n";
  for (const Word& r : p.relations) out << word_name(r) << "\n";
}

inline SoficApproximation parse_permutation_file(std::istream& in, const GroupPresentation& p) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("permutation file: missing header");
  auto toks = split_tokens(line);
  if (toks.size() != 2 || toks[0] != "vertices")
    throw std::runtime_error("permutation file: header must read 'vertices N'");
  long n = std::stol(toks[1]);
  if (n <= 0) throw std::runtime_error("permutation file: bad vertex count");
  std::vector<std::vector<std::uint32_t>> perms;
  for (std::uint16_t g = 0; g < p.generator_count; ++g) {
    if (!std::getline(in, line))
      throw std::runtime_error("permutation file: missing line for generator g" + std::to_string(g));
    auto imgs = split_tokens(line);
    if (static_cast<long>(imgs.size()) != n)
      throw std::runtime_error("permutation file: generator g" + std::to_string(g) + " needs " +
                               std::to_string(n) + " images");
    std::vector<std::uint32_t> perm;
    perm.reserve(imgs.size());
    for (const std::string& t : imgs) {
      long v = std::stol(t);
      if (v < 0 || v >= n) throw std::runtime_error("permutation file: image out of range");
      perm.push_back(static_cast<std::uint32_t>(v));
    }
    perms.push_back(std::move(perm));
  }
  while (std::getline(in, line))
    if (!split_tokens(line).empty()) throw std::runtime_error("permutation file: trailing data");
  return SoficApproximation(std::move(perms));  // bijection check happens in the constructor
}

inline void write_permutation_file(std::ostream& out, const SoficApproximation& sigma) {
  out << "vertices " << sigma.vertex_count() << "\n";
  for (std::uint16_t g = 0; g < sigma.generator_count(); ++g) {
    const auto& perm = sigma.perm(GeneratorSymbol::plain(g));
    for (std::uint32_t v = 0; v < sigma.vertex_count(); ++v) out << (v ? " " : "") << perm[v];
    out << "\n";
  }
}

inline Microstate parse_microstate(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("microstate file: missing header");
  auto toks = split_tokens(line);
  if (toks.size() != 3 || toks[0] != "alphabet")
    throw std::runtime_error("microstate file: header must read 'alphabet finite k' or 'alphabet cyclic m'");
  Alphabet alphabet = [&] {
    long param = std::stol(toks[2]);
    if (param <= 0) throw std::runtime_error("microstate file: bad alphabet parameter");
    if (toks[1] == "finite") return Alphabet::finite(static_cast<std::uint32_t>(param));
    if (toks[1] == "cyclic") return Alphabet::cyclic(static_cast<std::uint32_t>(param));
    throw std::runtime_error("microstate file: unknown alphabet kind '" + toks[1] + "'");
  }();
  if (!std::getline(in, line)) throw std::runtime_error("microstate file: missing values");
  std::vector<std::uint32_t> values;
  for (const std::string& t : split_tokens(line)) {
    long v = std::stol(t);
    if (v < 0 || static_cast<std::uint64_t>(v) >= alphabet.size())
      throw std::runtime_error("microstate file: letter out of range");
    values.push_back(static_cast<std::uint32_t>(v));
  }
  if (values.empty()) throw std::runtime_error("microstate file: empty state");
  return Microstate(alphabet, std::move(values));
}

inline void write_microstate(std::ostream& out, const Microstate& x) {
  if (x.alphabet.kind() == Alphabet::Kind::Finite)
    out << "alphabet finite " << x.alphabet.size() << "\n";
  else if (x.alphabet.kind() == Alphabet::Kind::Cyclic)
    out << "alphabet cyclic " << x.alphabet.modulus() << "\n";
  else
    throw std::invalid_argument("tuple alphabets have no file form");
  for (std::size_t v = 0; v < x.values.size(); ++v) out << (v ? " " : "") << x.values[v];
  out << "\n";
}

// CSV cell for a word: tokens joined by '.', identity printed as "e".
inline std::string word_csv_cell(const Word& w) {
  if (w.is_identity()) return "e";
  std::string out;
  for (std::size_t i = 0; i < w.symbols.size(); ++i) {
    if (i) out += '.';
    out += symbol_name(w.symbols[i]);
  }
  return out;
}

inline void write_empirical_csv(std::ostream& out, const EmpiricalDistribution& dist) {
  for (std::size_t i = 0; i < dist.window.size(); ++i) out << word_csv_cell(dist.window.words[i]) << ",";
  out << "probability\n";
  for (const auto& [code, p] : dist.prob) {
    std::vector<std::uint32_t> pattern = decode_pattern(code, dist.alphabet, dist.window.size());
    for (std::uint32_t letter : pattern) out << letter << ",";
    out << fmt_double(p) << "\n";
  }
}

}  // namespace msp
