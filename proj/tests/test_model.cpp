#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "modelspaces/modelspaces.hpp"

using namespace msp;

namespace {
Word spell(const std::string& s) {
  Word w;
  for (char ch : s)
    w.symbols.push_back(ch >= 'a' ? GeneratorSymbol::plain(static_cast<std::uint16_t>(ch - 'a'))
                                  : GeneratorSymbol::inv(static_cast<std::uint16_t>(ch - 'A')));
  return w;
}

double prob_at(const EmpiricalDistribution& d, const std::vector<std::uint32_t>& pattern) {
  auto it = d.prob.find(encode_pattern(pattern, d.alphabet));
  return it == d.prob.end() ? 0.0 : it->second;
}
}  // namespace

TEST_CASE("pullback patterns") {
  SoficApproximation sigma = cyclic_shift(4);
  Alphabet bin = Alphabet::finite(2);
  Window ea(std::vector<Word>{Word::identity(), spell("a")});
  Microstate zeros = Microstate::constant(bin, 0, 4);
  for (std::uint32_t v = 0; v < 4; ++v)
    CHECK(pullback_pattern(sigma, zeros, v, ea) == std::vector<std::uint32_t>{0, 0});

  Microstate x(bin, {0, 1, 0, 1});
  CHECK(pullback_pattern(sigma, x, 0, ea) == std::vector<std::uint32_t>{0, 1});
  Window just_e{};
  for (std::uint32_t v = 0; v < 4; ++v)
    CHECK(pullback_pattern(sigma, x, v, just_e) == std::vector<std::uint32_t>{x.values[v]});
}

TEST_CASE("empirical distributions") {
  SoficApproximation sigma = cyclic_shift(4);
  Alphabet bin = Alphabet::finite(2);
  Microstate x(bin, {0, 1, 0, 1});
  Window ea(std::vector<Word>{Word::identity(), spell("a")});

  EmpiricalDistribution d = empirical_distribution(sigma, x, ea);
  CHECK(d.prob.size() == 2);
  CHECK(prob_at(d, {0, 1}) == 0.5);
  CHECK(prob_at(d, {1, 0}) == 0.5);

  EmpiricalDistribution point = empirical_distribution(sigma, Microstate::constant(bin, 1, 4), ea);
  CHECK(point.prob.size() == 1);
  CHECK(prob_at(point, {1, 1}) == 1.0);

  EmpiricalDistribution letters = empirical_distribution(sigma, x, Window{});
  CHECK(prob_at(letters, {0}) == 0.5);
  CHECK(prob_at(letters, {1}) == 0.5);
}

TEST_CASE("hamming distance") {
  Alphabet bin = Alphabet::finite(2);
  Microstate a(bin, {0, 0, 0, 0}), b(bin, {0, 1, 0, 1});
  CHECK(hamming_distance(a, a) == 0.0);
  CHECK(hamming_distance(a, b) == 0.5);

  Alphabet z4 = Alphabet::cyclic(4);
  Microstate u(z4, {0, 0}), v(z4, {2, 1});
  CHECK(hamming_distance(u, v) == 0.375);

  Microstate c(bin, {0, 0, 0});
  CHECK_THROWS_AS(hamming_distance(a, c), std::invalid_argument);
  CHECK_THROWS_AS(hamming_distance(a, Microstate(z4, {0, 0, 0, 0})), std::invalid_argument);
}

TEST_CASE("total variation distance") {
  Alphabet bin = Alphabet::finite(2);
  Window e{};
  auto table = [&](double p0, double p1) {
    EmpiricalDistribution d(e, bin);
    if (p0 > 0) d.prob[0] = p0;
    if (p1 > 0) d.prob[1] = p1;
    return d;
  };
  auto p = table(0.5, 0.5);
  CHECK(tv_distance(p, p) == 0.0);
  CHECK(tv_distance(table(1, 0), table(0, 1)) == 1.0);
  CHECK(tv_distance(table(0.5, 0.5), table(0.75, 0.25)) == 0.25);
}

TEST_CASE("product marginals") {
  Alphabet bin = Alphabet::finite(2);
  Window two(std::vector<Word>{Word::identity(), spell("a")});
  auto uniform = product_marginal({0.5, 0.5}, bin, two);
  CHECK(uniform.prob.size() == 4);
  for (const auto& [code, p] : uniform.prob) CHECK(p == 0.25);

  auto point = product_marginal({1.0, 0.0}, bin, two);
  CHECK(point.prob.size() == 1);
  CHECK(prob_at(point, {0, 0}) == 1.0);

  auto skew = product_marginal({0.3, 0.7}, bin, two);
  CHECK(prob_at(skew, {0, 0}) == Catch::Approx(0.09).epsilon(1e-12));
  CHECK(prob_at(skew, {1, 0}) == Catch::Approx(0.21).epsilon(1e-12));
  CHECK(prob_at(skew, {0, 1}) == Catch::Approx(0.21).epsilon(1e-12));
  CHECK(prob_at(skew, {1, 1}) == Catch::Approx(0.49).epsilon(1e-12));
}

TEST_CASE("good-model membership") {
  GroupPresentation p = integer_lattice(2);
  SoficApproximation sigma = torus_shift(100);
  Alphabet bin = Alphabet::finite(2);
  Window win = Window::ball(p, 1);
  auto nu = DiscreteDistribution::uniform(2);
  auto spec = NeighbourhoodSpec::marginal_tv(product_marginal(nu.probs(), bin, win), 0.05);

  // i.i.d. uniform samples are good models with high empirical frequency
  RngStream rng = RngStream::root(17);
  int good = 0;
  for (int trial = 0; trial < 100; ++trial)
    if (is_good_model(sigma, sample_iid_microstate(bin, nu, sigma.vertex_count(), rng.derive(trial)), spec))
      ++good;
  CHECK(good >= 99);

  // a constant state is far from the uniform reference
  SoficApproximation small = cyclic_shift(10);
  Window just_e{};
  auto spec_e = NeighbourhoodSpec::marginal_tv(product_marginal(nu.probs(), bin, just_e), 0.1);
  CHECK_FALSE(is_good_model(small, Microstate::constant(bin, 0, 10), spec_e));

  // every state is inside any ball around its own empirical distribution
  Microstate x = sample_iid_microstate(bin, nu, 10, rng.derive(999));
  auto self = NeighbourhoodSpec::marginal_tv(empirical_distribution(small, x, just_e), 1e-9);
  CHECK(is_good_model(small, x, self));
}

TEST_CASE("function-family neighbourhoods") {
  GroupPresentation p = integer_lattice(2);
  SoficApproximation sigma = torus_shift(40);
  Alphabet bin = Alphabet::finite(2);
  auto nu = DiscreteDistribution::uniform(2);
  Window win = Window::ball(p, 1);

  // hereditary family generated by the mean window letter
  const std::uint64_t space = pattern_space_size(bin, win.size());
  std::vector<double> table(space);
  for (std::uint64_t c = 0; c < space; ++c) {
    std::uint32_t pop = 0;
    for (std::uint64_t bits = c; bits; bits >>= 1) pop += bits & 1;
    table[c] = static_cast<double>(pop) / win.size();
  }
  auto family = hereditary_closure({LocalFunction(win, bin, table, 1.0)}, nu.probs());
  CHECK(family.size() > 1);

  EmpiricalDistribution prod = product_marginal(nu.probs(), bin, win);
  std::vector<double> refs;
  for (const auto& f : family) refs.push_back(integral(f, prod));
  auto spec = NeighbourhoodSpec::function_family(family, refs, 0.05);

  RngStream rng = RngStream::root(33);
  Microstate x = sample_iid_microstate(bin, nu, sigma.vertex_count(), rng.derive(0));
  CHECK(is_good_model(sigma, x, spec));
  CHECK_FALSE(is_good_model(sigma, Microstate::constant(bin, 1, sigma.vertex_count()), spec));
}

TEST_CASE("conditional expectation operators") {
  Alphabet bin = Alphabet::finite(2);
  Window two(std::vector<Word>{Word::identity(), spell("a")});
  std::vector<double> nu{0.5, 0.5};
  // f(p,q) = p*q with p the identity coordinate, q the a-coordinate
  std::vector<double> table(4);
  for (std::uint64_t code = 0; code < 4; ++code) table[code] = static_cast<double>((code % 2) * (code / 2));
  LocalFunction f(two, bin, table, 2.0);

  auto keep_first = conditional_expectation_positions(f, {true, false}, nu);
  for (std::uint64_t code = 0; code < 4; ++code)
    CHECK(keep_first.table[code] == Catch::Approx(static_cast<double>(code % 2) / 2.0).epsilon(1e-12));

  auto keep_all = conditional_expectation(f, two.words, nu);
  CHECK(tables_equal(keep_all.table, f.table));

  auto keep_none = conditional_expectation_positions(f, {false, false}, nu);
  for (double v : keep_none.table) CHECK(v == Catch::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(conditional_expectation(f, {spell("b")}, nu), std::invalid_argument);
}

TEST_CASE("conditional expectation preserves Lipschitz bounds") {
  RngStream rng = RngStream::root(5);
  for (std::uint32_t letters : {2u, 3u, 4u}) {
    Alphabet a = Alphabet::finite(letters);
    for (std::size_t wsize : {1u, 2u, 3u}) {
      std::vector<Word> words{Word::identity()};
      if (wsize >= 2) words.push_back(spell("a"));
      if (wsize >= 3) words.push_back(spell("A"));
      Window win(words);
      std::uint64_t space = pattern_space_size(a, win.size());
      std::vector<double> table(space);
      for (std::uint64_t c = 0; c < space; ++c) table[c] = rng.u01(letters * 100 + wsize, c);
      LocalFunction raw(win, a, table, 1.0);
      double scale = measured_lipschitz_bound(raw);
      for (auto& v : table) v /= scale;  // now exactly 1-Lipschitz
      LocalFunction f(win, a, table, 1.0);
      std::vector<double> nu(letters, 1.0 / letters);
      for (std::uint64_t mask = 0; mask < (1ull << wsize); ++mask) {
        std::vector<bool> keep(wsize);
        for (std::size_t i = 0; i < wsize; ++i) keep[i] = (mask >> i) & 1;
        CHECK(measured_lipschitz_bound(conditional_expectation_positions(f, keep, nu)) <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("hereditary closure") {
  Alphabet bin = Alphabet::finite(2);
  Window two(std::vector<Word>{Word::identity(), spell("a")});
  std::vector<double> nu{0.5, 0.5};

  LocalFunction constant(two, bin, std::vector<double>(4, 3.0), 0.0);
  CHECK(hereditary_closure({constant}, nu).size() == 1);

  std::vector<double> table(4);
  for (std::uint64_t code = 0; code < 4; ++code) table[code] = static_cast<double>((code % 2) * (code / 2));
  LocalFunction f(two, bin, table, 2.0);
  auto closed = hereditary_closure({f}, nu);
  REQUIRE(closed.size() == 4);  // pq, p/2, q/2, 1/4
  CHECK(hereditary_closure(closed, nu).size() == 4);

  bool saw_half_p = false, saw_half_q = false, saw_quarter = false;
  for (const auto& g : closed) {
    std::vector<double> half_p(4), half_q(4);
    for (std::uint64_t c = 0; c < 4; ++c) {
      half_p[c] = static_cast<double>(c % 2) / 2.0;
      half_q[c] = static_cast<double>(c / 2) / 2.0;
    }
    if (tables_equal(g.table, half_p)) saw_half_p = true;
    if (tables_equal(g.table, half_q)) saw_half_q = true;
    if (tables_equal(g.table, std::vector<double>(4, 0.25))) saw_quarter = true;
  }
  CHECK(saw_half_p);
  CHECK(saw_half_q);
  CHECK(saw_quarter);
}

TEST_CASE("local maps") {
  SoficApproximation sigma = cyclic_shift(4);
  Alphabet z4 = Alphabet::cyclic(4);
  Window ea(std::vector<Word>{Word::identity(), spell("a")});

  // projection to the identity coordinate is the identity map
  std::vector<std::uint32_t> proj(16);
  for (std::uint64_t code = 0; code < 16; ++code) proj[code] = static_cast<std::uint32_t>(code % 4);
  LocalMap projection(ea, z4, z4, proj);
  Microstate x(z4, {0, 1, 2, 3});
  CHECK(apply_local_map(sigma, x, projection) == x);

  // psi(theta) = theta_a - theta_e mod 4
  std::vector<std::uint32_t> diff(16);
  for (std::uint64_t code = 0; code < 16; ++code)
    diff[code] = static_cast<std::uint32_t>((code / 4 + 4 - code % 4) % 4);
  LocalMap difference(ea, z4, z4, diff);
  CHECK(apply_local_map(sigma, x, difference).values == std::vector<std::uint32_t>{1, 1, 1, 1});

  LocalMap constant(ea, z4, z4, std::vector<std::uint32_t>(16, 2));
  CHECK(apply_local_map(sigma, x, constant).values == std::vector<std::uint32_t>(4, 2));
}

TEST_CASE("pair distance identity") {
  SoficApproximation sigma = cyclic_shift(4);
  Alphabet bin = Alphabet::finite(2);
  Microstate x(bin, {0, 0, 0, 0}), z(bin, {0, 1, 0, 1});

  auto res_same = pair_distance_identity_check(sigma, x, x);
  CHECK(res_same.integral_side == 0.0);
  CHECK(res_same.hamming_side == 0.0);
  CHECK(res_same.equal);

  auto res = pair_distance_identity_check(sigma, x, z);
  CHECK(res.integral_side == 0.5);
  CHECK(res.hamming_side == 0.5);
  CHECK(res.equal);

  SoficApproximation big = cyclic_shift(100);
  Alphabet z16 = Alphabet::cyclic(16);
  RngStream rng = RngStream::root(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto nu = DiscreteDistribution::uniform(16);
    Microstate a = sample_iid_microstate(z16, nu, 100, rng.derive(2 * trial));
    Microstate b = sample_iid_microstate(z16, nu, 100, rng.derive(2 * trial + 1));
    CHECK(pair_distance_identity_check(big, a, b).equal);
  }
}

TEST_CASE("windows tolerate words naming the same group element") {
  // On exact quotients, pullback coordinates at words with equal action
  // simply agree: the observed patterns sit on the diagonal of those
  // coordinates.
  SoficApproximation sigma = torus_shift(4);
  Alphabet bin = Alphabet::finite(2);
  Word ab{{GeneratorSymbol::plain(0), GeneratorSymbol::plain(1)}};
  Word ba{{GeneratorSymbol::plain(1), GeneratorSymbol::plain(0)}};
  Window win(std::vector<Word>{Word::identity(), ab, ba});

  RngStream rng = RngStream::root(34);
  Microstate x =
      sample_iid_microstate(bin, DiscreteDistribution::uniform(2), sigma.vertex_count(), rng.derive(0));
  EmpiricalDistribution dist = empirical_distribution(sigma, x, win);
  for (const auto& [code, prob] : dist.prob) {
    auto pattern = decode_pattern(code, bin, win.size());
    CHECK(pattern[1] == pattern[2]);
  }
}

TEST_CASE("empirical integrals concentrate as the vertex set grows") {
  GroupPresentation p = free_group(1);
  Window win = Window::ball(p, 1);
  Alphabet bin = Alphabet::finite(2);
  auto nu = DiscreteDistribution::uniform(2);
  // f = average of the three window letters: 1-Lipschitz for the normalized
  // pattern metric
  std::vector<double> table(8);
  for (std::uint64_t c = 0; c < 8; ++c)
    table[c] = static_cast<double>((c & 1) + ((c >> 1) & 1) + ((c >> 2) & 1)) / 3.0;
  LocalFunction f(win, bin, table, 1.0);

  RngStream rng = RngStream::root(1234);
  std::vector<double> stds;
  for (std::uint32_t n : {100u, 1000u, 10000u}) {
    SoficApproximation sigma = cyclic_shift(n);
    double sum = 0, sumsq = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
      Microstate x = sample_iid_microstate(bin, nu, n, rng.derive(n).derive(t));
      double val = integral(f, empirical_distribution(sigma, x, win));
      sum += val;
      sumsq += val * val;
    }
    double mean = sum / trials;
    stds.push_back(std::sqrt(std::max(0.0, sumsq / trials - mean * mean)));
  }
  CHECK(stds[1] < stds[0]);
  CHECK(stds[2] < stds[1]);
}
