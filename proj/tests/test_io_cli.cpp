#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "modelspaces/modelspaces.hpp"

namespace fs = std::filesystem;
using namespace msp;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("modelspaces_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("MODELCLI");
  REQUIRE(cli != nullptr);
  std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

// manifest text with the volatile timestamp line removed
std::string manifest_stable(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line))
    if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
  return out;
}

void require_same_outputs(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(a)) names.push_back(entry.path().filename());
  REQUIRE(!names.empty());
  std::size_t compared = 0;
  for (const auto& name : names) {
    REQUIRE(fs::exists(b / name));
    if (name == "manifest.json") {
      CHECK(manifest_stable(a / name) == manifest_stable(b / name));
    } else {
      CHECK(slurp(a / name) == slurp(b / name));
    }
    ++compared;
  }
  CHECK(compared == std::distance(fs::directory_iterator(b), fs::directory_iterator{}));
}

}  // namespace

TEST_CASE("presentation files") {
  GroupPresentation p = integer_lattice(2);
  std::stringstream ss;
  write_presentation(ss, p);
  GroupPresentation back = parse_presentation(ss);
  CHECK(back.generator_count == p.generator_count);
  CHECK(back.relations == p.relations);

  std::stringstream bad("generators 1\ng0 g1\n");
  CHECK_THROWS_WITH(parse_presentation(bad), Catch::Matchers::ContainsSubstring("unknown symbol"));
  std::stringstream nohdr("nonsense\n");
  CHECK_THROWS(parse_presentation(nohdr));
}

TEST_CASE("permutation files") {
  GroupPresentation p = free_group(1);
  SoficApproximation sigma = cyclic_shift(5);
  std::stringstream ss;
  write_permutation_file(ss, sigma);
  SoficApproximation back = parse_permutation_file(ss, p);
  CHECK(back.vertex_count() == 5);
  CHECK(back.perm(GeneratorSymbol::plain(0)) == sigma.perm(GeneratorSymbol::plain(0)));
  CHECK(back.perm(GeneratorSymbol::inv(0)) == sigma.perm(GeneratorSymbol::inv(0)));

  std::stringstream notbij("vertices 3\n0 0 1\n");
  CHECK_THROWS(parse_permutation_file(notbij, p));
  std::stringstream short_line("vertices 3\n0 1\n");
  CHECK_THROWS(parse_permutation_file(short_line, p));
  std::stringstream trailing("vertices 2\n1 0\n0 1\n");
  CHECK_THROWS(parse_permutation_file(trailing, p));
}

TEST_CASE("microstate files and empirical CSV") {
  Microstate x(Alphabet::cyclic(4), {0, 3, 2, 1});
  std::stringstream ss;
  write_microstate(ss, x);
  Microstate back = parse_microstate(ss);
  CHECK(back == x);

  std::stringstream out_of_range("alphabet finite 2\n0 1 2\n");
  CHECK_THROWS(parse_microstate(out_of_range));

  SoficApproximation sigma = cyclic_shift(4);
  Window ea(std::vector<Word>{Word::identity(), Word::single(GeneratorSymbol::plain(0))});
  Microstate bits(Alphabet::finite(2), {0, 1, 0, 1});
  EmpiricalDistribution dist = empirical_distribution(sigma, bits, ea);
  std::stringstream csv;
  write_empirical_csv(csv, dist);
  std::string text = csv.str();
  CHECK(text.find("e,g0,probability\n") == 0);
  CHECK(text.find("0,1,0.5") != std::string::npos);
  CHECK(text.find("1,0,0.5") != std::string::npos);
}

TEST_CASE("cli identity checks pass") {
  fs::path dir = fresh_dir("ident");
  CHECK(run_cli("identity-checks --out " + (dir / "run").string()) == 0);
  std::string csv = slurp(dir / "run" / "identities.csv");
  CHECK(csv.find("FAIL") == std::string::npos);
  CHECK(csv.find("pass") != std::string::npos);
}

TEST_CASE("cli rejects bad configs") {
  fs::path dir = fresh_dir("badcfg");
  {
    std::ofstream f(dir / "broken.json");
    f << "{ not json";
  }
  CHECK(run_cli("connect --config " + (dir / "broken.json").string() + " --out " + (dir / "o1").string()) == 2);
  {
    std::ofstream f(dir / "missing.json");
    f << R"({"presentation": {"family": "free", "k": 1}})";
  }
  CHECK(run_cli("connect --config " + (dir / "missing.json").string() + " --out " + (dir / "o2").string()) == 2);
  CHECK(run_cli("no-such-subcommand") == 2);
}

TEST_CASE("cli empirical and cohomology outputs carry the expected content") {
  fs::path dir = fresh_dir("content");
  {
    std::ofstream f(dir / "emp.json");
    f << R"({
      "presentation": {"family": "free", "k": 1},
      "approximation": {"kind": "cyclic_shift", "n": 6},
      "alphabet": {"kind": "finite", "size": 2},
      "window_radius": 1,
      "source": {"kind": "constant", "letter": 1}
    })";
  }
  REQUIRE(run_cli("empirical --config " + (dir / "emp.json").string() + " --out " + (dir / "emp").string()) == 0);
  std::string csv = slurp(dir / "emp" / "distribution.csv");
  CHECK(csv == "e,g0,G0,probability\n1,1,1,1\n");

  {
    std::ofstream f(dir / "coh.json");
    f << R"({
      "presentation": {"family": "integer_lattice", "d": 2},
      "approximation": {"kind": "torus_shift", "n": 2},
      "modulus": 2
    })";
  }
  REQUIRE(run_cli("cohomology --config " + (dir / "coh.json").string() + " --out " + (dir / "coh").string()) ==
          0);
  auto summary = nlohmann::json::parse(slurp(dir / "coh" / "summary.json"));
  CHECK(summary.at("invariant_factors") == nlohmann::json::array({2, 2}));
  CHECK(summary.at("representatives").size() == 2);
  CHECK(summary.at("z1_dim_log_m").get<double>() == 5.0);
  CHECK(summary.at("b1_dim_log_m").get<double>() == 3.0);
}

TEST_CASE("cli runs are reproducible across workers and reruns") {
  fs::path dir = fresh_dir("repro");
  {
    std::ofstream f(dir / "connect.json");
    f << R"({
      "presentation": {"family": "integer_lattice", "d": 2},
      "approximation": {"kind": "torus_shift", "n": 10},
      "alphabet": {"kind": "finite", "size": 2},
      "nu": "uniform",
      "delta": 0.3, "kappa": 0.9, "steps": 30,
      "window_radius": 1, "epsilon": 0.4,
      "trials": 6, "seed": 11, "plots": true
    })";
  }
  REQUIRE(run_cli("connect --config " + (dir / "connect.json").string() + " --out " + (dir / "a").string() +
                  " --workers 1") == 0);
  REQUIRE(run_cli("rerun " + (dir / "a" / "manifest.json").string() + " --out " + (dir / "b").string() +
                  " --workers 4") == 0);
  require_same_outputs(dir / "a", dir / "b");

  std::string csv = slurp(dir / "a" / "trials.csv");
  CHECK(csv.find("trial,success,") == 0);
}
