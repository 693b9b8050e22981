// Experiment driver: subcommand dispatch, JSON configuration, CSV/JSON
// results, reproducibility manifests.
//
// Exit codes: 0 success, 1 assertion failure in the identity suites,
// 2 configuration / parse / I-O error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modelspaces/modelspaces.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace msp;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

const json& require_key(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing config key: " + key);
  return j.at(key);
}

template <typename T>
T require_as(const json& j, const std::string& key) {
  try {
    return require_key(j, key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key has the wrong type: " + key);
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key has the wrong type: " + key);
  }
}

struct Options {
  fs::path out_dir;
  std::optional<std::uint64_t> seed_override;
  unsigned workers = 1;
};

std::ofstream open_output(const Options& opt, const std::string& name) {
  fs::create_directories(opt.out_dir);
  std::ofstream out(opt.out_dir / name);
  if (!out) throw ConfigError("cannot write output file: " + (opt.out_dir / name).string());
  return out;
}

// ---------------------------------------------------------------------------
// Config fragments

GroupPresentation parse_presentation_cfg(const json& j) {
  if (j.contains("file")) {
    std::ifstream in(j.at("file").get<std::string>());
    if (!in) throw ConfigError("cannot open presentation file");
    return parse_presentation(in);
  }
  std::string family = require_as<std::string>(j, "family");
  if (family == "free") return free_group(require_as<std::uint16_t>(j, "k"));
  if (family == "integer_lattice") return integer_lattice(require_as<std::uint16_t>(j, "d"));
  if (family == "cyclic") return cyclic_group(require_as<std::uint32_t>(j, "n"));
  if (family == "surface") return surface_group(require_as<std::uint16_t>(j, "g"));
  throw ConfigError("unsupported presentation family: " + family);
}

SoficApproximation parse_quotient_cfg(const json& j, const GroupPresentation& p) {
  std::string kind = require_as<std::string>(j, "kind");
  SoficApproximation sigma;
  if (kind == "cyclic_shift") {
    sigma = cyclic_shift(require_as<std::uint32_t>(j, "n"));
  } else if (kind == "torus_shift") {
    sigma = torus_shift(require_as<std::uint32_t>(j, "n"));
  } else if (kind == "file") {
    std::ifstream in(require_as<std::string>(j, "path"));
    if (!in) throw ConfigError("cannot open permutation file");
    sigma = parse_permutation_file(in, p);
  } else {
    throw ConfigError("unsupported approximation kind: " + kind);
  }
  if (sigma.generator_count() != p.generator_count)
    throw ConfigError("approximation generator count does not match the presentation");
  return sigma;
}

Alphabet parse_alphabet_cfg(const json& j) {
  std::string kind = require_as<std::string>(j, "kind");
  if (kind == "finite") return Alphabet::finite(require_as<std::uint32_t>(j, "size"));
  if (kind == "cyclic") return Alphabet::cyclic(require_as<std::uint32_t>(j, "modulus"));
  throw ConfigError("unsupported alphabet kind: " + kind);
}

DiscreteDistribution parse_nu_cfg(const json& j, const Alphabet& alphabet) {
  if (j.is_string() && j.get<std::string>() == "uniform") return DiscreteDistribution::uniform(alphabet.size());
  if (j.is_array()) {
    std::vector<double> p = j.get<std::vector<double>>();
    if (p.size() != alphabet.size()) throw ConfigError("nu has the wrong number of entries");
    return DiscreteDistribution(std::move(p));
  }
  throw ConfigError("nu must be \"uniform\" or an array of probabilities");
}

Window parse_window_cfg(const json& j, const GroupPresentation& p) {
  if (j.contains("window")) {
    std::vector<Word> words;
    for (const auto& cell : require_key(j, "window")) {
      Word w = parse_word(cell.get<std::string>(), p.generator_count);
      words.push_back(reduce_word(w));
    }
    return Window(std::move(words));
  }
  return Window::ball(p, require_as<std::uint32_t>(j, "window_radius"));
}

RelationLoopSet parse_relations_cfg(const json& j, const GroupPresentation& p) {
  std::vector<Word> extra;
  if (j.contains("relations")) {
    const json& r = j.at("relations");
    std::string kind = get_or<std::string>(r, "kind", "presentation");
    if (kind == "list") {
      GroupPresentation q(p.generator_count, {});
      for (const auto& cell : require_key(r, "words"))
        extra.push_back(reduce_word(parse_word(cell.get<std::string>(), p.generator_count)));
      return RelationLoopSet::with_trivials(q, std::move(extra));
    }
    if (kind != "presentation") throw ConfigError("unsupported relations kind: " + kind);
  }
  return RelationLoopSet::with_trivials(p);
}

json window_to_json(const Window& w) {
  json arr = json::array();
  for (const Word& word : w.words) arr.push_back(word_name(word));
  return arr;
}

void write_manifest(const Options& opt, const std::string& subcommand, const json& resolved_config) {
  // The worker count is deliberately not recorded: results are independent
  // of it, and a manifest identifies the experiment, not the machine.
  json manifest;
  manifest["subcommand"] = subcommand;
  manifest["config"] = resolved_config;
  manifest["version"] = kVersion;
  auto now = std::chrono::system_clock::now();
  manifest["timestamp"] = static_cast<std::int64_t>(std::chrono::system_clock::to_time_t(now));
  auto out = open_output(opt, "manifest.json");
  out << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// check-sofic: relation-defect and freeness tables.

int run_check_sofic(const json& cfg, const Options& opt) {
  GroupPresentation p = parse_presentation_cfg(require_key(cfg, "presentation"));
  SoficApproximation sigma = parse_quotient_cfg(require_key(cfg, "approximation"), p);

  std::vector<Word> words;
  const json& wcfg = require_key(cfg, "words");
  std::string kind = require_as<std::string>(wcfg, "kind");
  if (kind == "relations") {
    words = RelationLoopSet::with_trivials(p).relations;
  } else if (kind == "ball") {
    words = word_ball(p, require_as<std::uint32_t>(wcfg, "radius"));
  } else if (kind == "list") {
    for (const auto& cell : require_key(wcfg, "words"))
      words.push_back(reduce_word(parse_word(cell.get<std::string>(), p.generator_count)));
  } else {
    throw ConfigError("unsupported words kind: " + kind);
  }

  auto out = open_output(opt, "defects.csv");
  out << "word,length,relation_defect_fraction,fixed_point_fraction\n";
  for (const Word& w : words) {
    double defect = relation_defect(sigma, w);
    double fixed = w.is_identity() ? 1.0 : freeness_fraction(sigma, w);
    out << word_csv_cell(w) << "," << w.length() << "," << fmt_double(defect) << "," << fmt_double(fixed) << "\n";
  }
  write_manifest(opt, "check-sofic", cfg);
  return 0;
}

// ---------------------------------------------------------------------------
// empirical: window distributions and TV to a reference.

int run_empirical(const json& cfg, const Options& opt) {
  GroupPresentation p = parse_presentation_cfg(require_key(cfg, "presentation"));
  SoficApproximation sigma = parse_quotient_cfg(require_key(cfg, "approximation"), p);
  Alphabet alphabet = parse_alphabet_cfg(require_key(cfg, "alphabet"));
  Window window = parse_window_cfg(cfg, p);
  std::uint32_t trials = get_or<std::uint32_t>(cfg, "trials", 1);
  if (trials == 0) throw ConfigError("trials must be positive");
  std::uint64_t seed = opt.seed_override.value_or(get_or<std::uint64_t>(cfg, "seed", 1));

  const json& src = require_key(cfg, "source");
  std::string src_kind = require_as<std::string>(src, "kind");

  std::optional<EmpiricalDistribution> reference;
  if (cfg.contains("reference")) {
    const json& ref = cfg.at("reference");
    if (require_as<std::string>(ref, "kind") != "product") throw ConfigError("unsupported reference kind");
    DiscreteDistribution nu = parse_nu_cfg(require_key(ref, "nu"), alphabet);
    reference = product_marginal(nu.probs(), alphabet, window);
  }

  auto make_state = [&](std::uint32_t trial) -> Microstate {
    if (src_kind == "iid") {
      DiscreteDistribution nu = parse_nu_cfg(require_key(src, "nu"), alphabet);
      return sample_iid_microstate(alphabet, nu, sigma.vertex_count(),
                                   RngStream::root(seed).derive(rng_tag::trial).derive(trial).derive(rng_tag::iid_sample));
    }
    if (src_kind == "constant")
      return Microstate::constant(alphabet, require_as<std::uint32_t>(src, "letter"), sigma.vertex_count());
    if (src_kind == "file") {
      std::ifstream in(require_as<std::string>(src, "path"));
      if (!in) throw ConfigError("cannot open microstate file");
      Microstate x = parse_microstate(in);
      if (x.size() != sigma.vertex_count()) throw ConfigError("microstate length does not match |V|");
      return x;
    }
    throw ConfigError("unsupported source kind: " + src_kind);
  };

  std::vector<double> tvs(trials, 0.0);
  std::vector<EmpiricalDistribution> first;
  for (std::uint32_t trial = 0; trial < trials; ++trial) {
    Microstate x = make_state(trial);
    EmpiricalDistribution dist = empirical_distribution(sigma, x, window);
    if (trial == 0) first.push_back(dist);
    if (reference) tvs[trial] = tv_distance(dist, *reference);
  }
  {
    auto out = open_output(opt, "distribution.csv");
    write_empirical_csv(out, first.front());
  }
  if (reference) {
    double eps = get_or<double>(cfg, "epsilon", 0.0);
    auto out = open_output(opt, "trials.csv");
    out << "trial,tv_to_reference,inside_epsilon_ball\n";
    for (std::uint32_t t = 0; t < trials; ++t)
      out << t << "," << fmt_double(tvs[t]) << "," << (eps > 0.0 ? (tvs[t] < eps ? "1" : "0") : "") << "\n";
  }
  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["window_resolved"] = window_to_json(window);
  write_manifest(opt, "empirical", resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// connect: Bernoulli delta-path experiments.

int run_connect(const json& cfg, const Options& opt) {
  GroupPresentation p = parse_presentation_cfg(require_key(cfg, "presentation"));
  SoficApproximation sigma = parse_quotient_cfg(require_key(cfg, "approximation"), p);
  Alphabet alphabet = parse_alphabet_cfg(require_key(cfg, "alphabet"));
  DiscreteDistribution nu = parse_nu_cfg(require_key(cfg, "nu"), alphabet);
  Window window = parse_window_cfg(cfg, p);

  double delta = require_as<double>(cfg, "delta");
  double epsilon = require_as<double>(cfg, "epsilon");
  std::uint32_t trials = require_as<std::uint32_t>(cfg, "trials");
  if (trials == 0) throw ConfigError("trials must be positive");
  std::uint64_t seed = opt.seed_override.value_or(get_or<std::uint64_t>(cfg, "seed", 1));

  WalkConfig wcfg = default_walk_config(delta, seed);
  if (cfg.contains("kappa")) wcfg.kappa = require_as<double>(cfg, "kappa");
  if (cfg.contains("steps")) wcfg.steps = require_as<std::uint32_t>(cfg, "steps");
  wcfg.retry_budget = get_or<std::uint32_t>(cfg, "retry_budget", 16);
  wcfg.validate_connect();

  EmpiricalDistribution reference = product_marginal(nu.probs(), alphabet, window);
  NeighbourhoodSpec spec = NeighbourhoodSpec::marginal_tv(reference, epsilon);

  struct Row {
    bool success;
    double max_step;
    double worst_tv;
    std::uint32_t attempts;
  };
  std::vector<Row> rows(trials);
  std::vector<ConnectResult> keep_first(1);
  parallel_for(trials, opt.workers, [&](std::size_t trial) {
    RngStream ts = RngStream::root(seed).derive(rng_tag::trial).derive(trial);
    Microstate x = sample_iid_microstate(alphabet, nu, sigma.vertex_count(), ts.derive(100));
    Microstate y = sample_iid_microstate(alphabet, nu, sigma.vertex_count(), ts.derive(101));
    ConnectResult res = connect(sigma, x, y, wcfg, spec, nu, ts);
    double max_step = 0.0, worst_tv = 0.0;
    for (double d : res.path.step_distances) max_step = std::max(max_step, d);
    for (double d : res.path.state_deviations) worst_tv = std::max(worst_tv, d);
    rows[trial] = Row{res.success, max_step, worst_tv, res.attempts};
    if (trial == 0) keep_first[0] = std::move(res);
  });

  {
    auto out = open_output(opt, "trials.csv");
    out << "trial,success,max_step_hamming,worst_tv_along_path,attempts\n";
    for (std::uint32_t t = 0; t < trials; ++t)
      out << t << "," << (rows[t].success ? 1 : 0) << "," << fmt_double(rows[t].max_step) << ","
          << fmt_double(rows[t].worst_tv) << "," << rows[t].attempts << "\n";
  }
  if (get_or<bool>(cfg, "plots", false)) {
    const ConnectResult& res = keep_first[0];
    SvgSeries steps;
    for (std::size_t i = 0; i < res.path.step_distances.size(); ++i) {
      steps.x.push_back(static_cast<double>(i));
      steps.y.push_back(res.path.step_distances[i]);
    }
    SvgSeries tv;
    tv.color = "#d62728";
    for (std::size_t i = 0; i < res.path.state_deviations.size(); ++i) {
      tv.x.push_back(static_cast<double>(i));
      tv.y.push_back(res.path.state_deviations[i]);
    }
    auto out = open_output(opt, "path_trial0.svg");
    write_svg_plot(out, {steps, tv}, "trial 0: step distance (blue), state TV (red)", "path index", "value");
  }

  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["kappa"] = wcfg.kappa;
  resolved["steps"] = wcfg.steps;
  resolved["retry_budget"] = wcfg.retry_budget;
  resolved["window_resolved"] = window_to_json(window);
  write_manifest(opt, "connect", resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// cohomology: Z^1 / B^1 / H^1 summaries.

json summary_to_json(const CohomologySummary& summary) {
  json out;
  out["modulus"] = summary.modulus;
  out["invariant_factors"] = summary.invariant_factors;
  json reps = json::array();
  for (const Cochain1& rep : summary.class_representatives) reps.push_back(rep.values);
  out["representatives"] = reps;
  out["z1_dim_log_m"] = summary.z1_dim_log_m;
  out["b1_dim_log_m"] = summary.b1_dim_log_m;
  return out;
}

int run_cohomology(const json& cfg, const Options& opt) {
  GroupPresentation p = parse_presentation_cfg(require_key(cfg, "presentation"));
  SoficApproximation sigma = parse_quotient_cfg(require_key(cfg, "approximation"), p);
  std::uint32_t m = require_as<std::uint32_t>(cfg, "modulus");
  RelationLoopSet family = parse_relations_cfg(cfg, p);

  SchreierGraph graph(sigma);
  CohomologySummary summary = solve_cocycles(graph, family, m);
  json out = summary_to_json(summary);
  out["edge_count"] = graph.edge_count();
  out["vertex_count"] = graph.vertex_count();
  out["edge_slot_order"] = "slot(s,v) = s.code * |V| + v";
  auto f = open_output(opt, "summary.json");
  f << out.dump(2) << "\n";
  write_manifest(opt, "cohomology", cfg);
  return 0;
}

// ---------------------------------------------------------------------------
// coset-scan: exhaustive near-cocycle component scans.

int run_coset_scan(const json& cfg, const Options& opt) {
  GroupPresentation p = parse_presentation_cfg(require_key(cfg, "presentation"));
  SoficApproximation sigma = parse_quotient_cfg(require_key(cfg, "approximation"), p);
  std::uint32_t m = require_as<std::uint32_t>(cfg, "modulus");
  RelationLoopSet family = parse_relations_cfg(cfg, p);
  double epsilon = require_as<double>(cfg, "epsilon");
  std::vector<double> delta_grid = require_as<std::vector<double>>(cfg, "delta_grid");
  if (delta_grid.empty()) throw ConfigError("delta_grid must be nonempty");

  SchreierGraph graph(sigma);
  json per_delta = json::array();
  std::vector<ScanHistogramRow> histogram;
  json classes;
  std::optional<Frac> min_inter;
  for (double delta : delta_grid) {
    ComponentScanReport scan = near_cocycle_component_scan(graph, family, m, epsilon, delta);
    json entry;
    entry["delta"] = delta;
    entry["near_cochains"] = scan.near_cochain_count;
    entry["raw_components"] = scan.raw_component_count;
    entry["class_groups"] = scan.class_group_count;
    per_delta.push_back(entry);
    if (histogram.empty()) {
      histogram = scan.histogram;
      classes = json::array();
      for (const auto& t : scan.classes_realized) classes.push_back(t);
      min_inter = scan.min_intercoset;
    }
  }

  json out;
  out["epsilon"] = epsilon;
  out["per_delta"] = per_delta;
  out["classes_realized"] = classes;
  if (min_inter) {
    out["min_intercoset_distance"] = {{"num", min_inter->num}, {"den", min_inter->den}, {"value", min_inter->value()}};
  } else {
    out["min_intercoset_distance"] = nullptr;
  }
  {
    auto f = open_output(opt, "components.json");
    f << out.dump(2) << "\n";
  }
  {
    auto f = open_output(opt, "histogram.csv");
    f << "defect_mean_circle_norm,coset_distance_mean_circle_norm,coset_distance_is_exact,count\n";
    for (const auto& row : histogram)
      f << fmt_double(row.defect.value()) << "," << fmt_double(row.coset_dist.value()) << ","
        << (row.coset_exact ? 1 : 0) << "," << row.count << "\n";
  }
  if (get_or<bool>(cfg, "plots", false)) {
    SvgSeries pts;
    pts.lines = false;
    for (const auto& row : histogram) {
      pts.x.push_back(row.defect.value());
      pts.y.push_back(row.coset_dist.value());
    }
    auto f = open_output(opt, "defect_vs_distance.svg");
    write_svg_plot(f, {pts}, "near-cocycle defect vs distance to coboundaries", "defect", "coset distance");
  }
  write_manifest(opt, "coset-scan", cfg);
  return 0;
}

// ---------------------------------------------------------------------------
// popa: coset sampling, window-law verification, disconnection verdicts.

int run_popa(const json& cfg, const Options& opt) {
  GroupPresentation p = parse_presentation_cfg(require_key(cfg, "presentation"));
  SoficApproximation sigma = parse_quotient_cfg(require_key(cfg, "approximation"), p);
  std::uint32_t m = require_as<std::uint32_t>(cfg, "modulus");
  RelationLoopSet family = parse_relations_cfg(cfg, p);
  Window window = parse_window_cfg(cfg, p);
  std::string mode = get_or<std::string>(cfg, "mode", "sampling");
  std::uint32_t samples = get_or<std::uint32_t>(cfg, "samples", 1000);
  std::uint64_t seed = opt.seed_override.value_or(get_or<std::uint64_t>(cfg, "seed", 1));

  SchreierGraph graph(sigma);
  CohomologySummary summary = solve_cocycles(graph, family, m);

  Cochain1 zero_rep = Cochain1::zero(m, graph.edge_count());
  PopaModelSpec zero_spec(graph, m, zero_rep, family);
  std::optional<PopaModelSpec> other_spec;
  if (!summary.class_representatives.empty())
    other_spec.emplace(graph, m, summary.class_representatives.front(), family);

  // Window-law verification on the coboundary coset.
  MarginalCheckReport marginal = popa_marginal_check(p, zero_spec, window, samples, RngStream::root(seed));
  {
    auto f = open_output(opt, "marginal.csv");
    f << "samples,word_classes,collapsed_words,valid_vertex_fraction,patterns_checked,membership_failures,"
         "tv_to_uniform,subgroup_size\n";
    f << samples << "," << marginal.class_count << "," << marginal.collapsed_words << ","
      << fmt_double(marginal.valid_vertex_fraction) << "," << marginal.patterns_checked << ","
      << marginal.membership_failures << "," << fmt_double(marginal.tv_to_uniform) << ","
      << marginal.subgroup_size << "\n";
  }

  json out;
  out["classes_in_h1"] = summary.invariant_factors;
  if (other_spec) {
    double epsilon = get_or<double>(cfg, "epsilon", 0.0);
    std::vector<double> delta_grid = get_or<std::vector<double>>(cfg, "delta_grid", {0.125, 1.0});
    const json wj = get_or<json>(cfg, "walk", json::object());
    double walk_delta = get_or<double>(wj, "delta", 0.25);
    WalkConfig wcfg = default_walk_config(walk_delta, seed);
    if (wj.contains("kappa")) wcfg.kappa = wj.at("kappa").get<double>();
    if (wj.contains("steps")) wcfg.steps = wj.at("steps").get<std::uint32_t>();
    wcfg.retry_budget = get_or<std::uint32_t>(wj, "retry_budget", 2);
    double walk_epsilon = get_or<double>(wj, "epsilon", 1.0);

    DisconnectionVerdict verdict =
        disconnection_experiment(p, zero_spec, *other_spec, window, epsilon, delta_grid, mode == "exhaustive",
                                 wcfg, walk_epsilon, RngStream::root(seed).derive(77));
    out["epsilon"] = verdict.epsilon;
    out["delta_grid"] = verdict.delta_grid;
    out["components"] = verdict.components_per_delta;
    out["raw_components"] = verdict.raw_components_per_delta;
    json classes = json::array();
    for (const auto& t : verdict.classes_realized) classes.push_back(t);
    out["classes_realized"] = classes;
    if (verdict.min_intercoset_distance) {
      out["min_intercoset_distance"] = {{"num", verdict.min_intercoset_distance->num},
                                        {"den", verdict.min_intercoset_distance->den},
                                        {"value", verdict.min_intercoset_distance->value()}};
    } else {
      out["min_intercoset_distance"] = nullptr;
    }
    out["walk_failure_modes"] = verdict.walk_failure_modes;
    out["walk_connect_success"] = verdict.walk_connect_success;
    out["walk_fraction_states_off_cocycle"] = verdict.walk_fraction_states_off_cocycle;
    out["walk_max_defect"] = verdict.walk_max_defect;
    if (mode == "exhaustive") {
      auto f = open_output(opt, "histogram.csv");
      f << "defect_mean_circle_norm,coset_distance_mean_circle_norm,coset_distance_is_exact,count\n";
      for (const auto& row : verdict.histogram)
        f << fmt_double(row.defect.value()) << "," << fmt_double(row.coset_dist.value()) << ","
          << (row.coset_exact ? 1 : 0) << "," << row.count << "\n";
    }
  }
  out["marginal_check"] = {{"membership_failures", marginal.membership_failures},
                           {"tv_to_uniform", marginal.tv_to_uniform},
                           {"valid_vertex_fraction", marginal.valid_vertex_fraction}};
  {
    auto f = open_output(opt, "verdict.json");
    f << out.dump(2) << "\n";
  }
  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["window_resolved"] = window_to_json(window);
  write_manifest(opt, "popa", resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// identity-checks: exact-identity suites over the TRIVIAL examples.

struct IdentitySuite {
  std::ofstream out;
  bool all_ok = true;

  void row(const std::string& name, std::uint64_t instances, std::uint64_t failures) {
    out << name << "," << instances << "," << failures << "," << (failures == 0 ? "pass" : "FAIL") << "\n";
    if (failures) all_ok = false;
  }
};

Word random_word(const GroupPresentation& p, const RngStream& rng, std::uint64_t i, std::size_t max_len) {
  std::size_t len = rng.below(static_cast<std::uint32_t>(max_len + 1), i, 0);
  Word w;
  for (std::size_t k = 0; k < len; ++k)
    w.symbols.push_back(GeneratorSymbol{static_cast<std::uint16_t>(rng.below(p.symbol_count(), i, k + 1))});
  return w;
}

int run_identity_checks(const json& cfg, const Options& opt) {
  std::uint64_t seed = opt.seed_override.value_or(get_or<std::uint64_t>(cfg, "seed", 1));
  std::uint32_t trials = get_or<std::uint32_t>(cfg, "trials", 200);
  RngStream rng = RngStream::root(seed);

  IdentitySuite suite;
  suite.out = open_output(opt, "identities.csv");
  suite.out << "check,instances,failures,status\n";

  GroupPresentation f2 = free_group(2);
  {
    std::uint64_t failures = 0;
    RngStream r = rng.derive(1);
    for (std::uint64_t i = 0; i < trials; ++i) {
      Word w = random_word(f2, r, i, 50);
      Word red = reduce_word(w);
      if (!(reduce_word(red) == red)) ++failures;
      if (!reduce_word(concat(w, w.inverse())).is_identity()) ++failures;
    }
    suite.row("free_reduction_idempotent_and_inverse_cancels", trials, failures);
  }
  {
    std::uint64_t failures = 0;
    for (std::uint16_t k = 1; k <= 3; ++k)
      for (std::size_t radius = 0; radius <= 3; ++radius) {
        std::size_t expect = 1, layer = 1;
        for (std::size_t j = 1; j <= radius; ++j) {
          layer = (j == 1) ? 2 * static_cast<std::size_t>(k) : layer * (2 * static_cast<std::size_t>(k) - 1);
          expect += layer;
        }
        if (word_ball(free_group(k), radius).size() != expect) ++failures;
      }
    suite.row("word_ball_free_group_counts", 12, failures);
  }
  {
    std::uint64_t failures = 0;
    SoficApproximation sigma = torus_shift(5);
    GroupPresentation p = integer_lattice(2);
    RngStream r = rng.derive(2);
    for (std::uint64_t i = 0; i < trials; ++i) {
      Word u = reduce_word(random_word(p, r.derive(0), i, 6));
      Word w = reduce_word(random_word(p, r.derive(1), i, 6));
      std::uint32_t v = r.below(sigma.vertex_count(), i);
      if (evaluate_word(sigma, reduce_word(concat(u, w)), v) !=
          evaluate_word(sigma, u, evaluate_word(sigma, w, v)))
        ++failures;
    }
    suite.row("word_evaluation_composes", trials, failures);
  }
  {
    std::uint64_t failures = 0, instances = 0;
    for (std::uint32_t n : {3u, 4u, 7u}) {
      SoficApproximation sigma = cyclic_shift(n);
      for (const Word& rel : RelationLoopSet::with_trivials(cyclic_group(n)).relations) {
        ++instances;
        if (relation_defect(sigma, rel) != 0.0) ++failures;
      }
    }
    for (std::uint32_t n : {2u, 3u, 5u}) {
      SoficApproximation sigma = torus_shift(n);
      for (const Word& rel : RelationLoopSet::with_trivials(integer_lattice(2)).relations) {
        ++instances;
        if (relation_defect(sigma, rel) != 0.0) ++failures;
      }
    }
    suite.row("builtin_quotients_have_zero_relation_defect", instances, failures);
  }
  {
    std::uint64_t failures = 0;
    SoficApproximation sigma = cyclic_shift(16);
    Alphabet a = Alphabet::cyclic(4);
    RngStream r = rng.derive(3);
    for (std::uint64_t i = 0; i < trials; ++i) {
      auto draw = [&](std::uint64_t tag) {
        std::vector<std::uint32_t> vals(16);
        for (std::uint32_t v = 0; v < 16; ++v) vals[v] = r.derive(tag).below(4, i, v);
        return Microstate(a, std::move(vals));
      };
      Microstate x = draw(0), y = draw(1), z = draw(2);
      if (std::abs(hamming_distance(x, y) - hamming_distance(y, x)) != 0.0) ++failures;
      if (hamming_distance(x, z) > hamming_distance(x, y) + hamming_distance(y, z) + 1e-15) ++failures;
      auto res = pair_distance_identity_check(sigma, x, y);
      if (!res.equal) ++failures;
    }
    suite.row("hamming_metric_and_pair_identity", trials, failures);
  }
  {
    std::uint64_t failures = 0;
    SoficApproximation sigma = torus_shift(4);
    GroupPresentation p = integer_lattice(2);
    Window win = Window::ball(p, 1);
    Alphabet bin = Alphabet::finite(2);
    RngStream r = rng.derive(4);
    for (std::uint64_t i = 0; i < 50; ++i) {
      Microstate x = sample_iid_microstate(bin, DiscreteDistribution::uniform(2), sigma.vertex_count(),
                                           r.derive(i));
      EmpiricalDistribution dist = empirical_distribution(sigma, x, win);
      double sum = 0.0;
      for (const auto& [code, prob] : dist.prob) sum += prob;
      if (std::abs(sum - 1.0) > 1e-12) ++failures;
      // integral identity: table integral == direct vertex average
      std::vector<double> table(pattern_space_size(bin, win.size()));
      for (std::size_t c = 0; c < table.size(); ++c) table[c] = static_cast<double>((c * 2654435761u) % 97) / 97.0;
      LocalFunction f(win, bin, table, 97.0);
      double direct = 0.0;
      for (std::uint32_t v = 0; v < sigma.vertex_count(); ++v)
        direct += f.table[encode_pattern(pullback_pattern(sigma, x, v, win), bin)];
      direct /= sigma.vertex_count();
      if (std::abs(integral(f, dist) - direct) > 1e-12) ++failures;
    }
    suite.row("empirical_tables_normalized_and_integral_identity", 50, failures);
  }
  {
    std::uint64_t failures = 0, instances = 0;
    Alphabet a3 = Alphabet::finite(3);
    GroupPresentation p = free_group(1);
    Window win = Window::ball(p, 1);  // size 3
    std::vector<double> nu{0.2, 0.5, 0.3};
    RngStream r = rng.derive(5);
    for (std::uint64_t i = 0; i < 50; ++i) {
      std::vector<double> table(27);
      for (std::size_t c = 0; c < 27; ++c) table[c] = r.u01(i, c);
      LocalFunction f(win, a3, table, 100.0);
      for (std::uint32_t mask1 = 0; mask1 < 8; ++mask1)
        for (std::uint32_t mask2 = 0; mask2 < 8; ++mask2) {
          ++instances;
          std::vector<bool> k1{(mask1 & 1) != 0, (mask1 & 2) != 0, (mask1 & 4) != 0};
          std::vector<bool> k2{(mask2 & 1) != 0, (mask2 & 2) != 0, (mask2 & 4) != 0};
          std::vector<bool> k12{k1[0] && k2[0], k1[1] && k2[1], k1[2] && k2[2]};
          auto lhs = conditional_expectation_positions(conditional_expectation_positions(f, k2, nu), k1, nu);
          auto rhs = conditional_expectation_positions(f, k12, nu);
          if (!tables_equal(lhs.table, rhs.table)) ++failures;
        }
      // measure preservation against the product marginal
      EmpiricalDistribution prod = product_marginal(nu, a3, win);
      auto e0 = conditional_expectation_positions(f, {false, false, false}, nu);
      if (std::abs(integral(f, prod) - integral(e0, prod)) > 1e-12) ++failures;
      ++instances;
    }
    suite.row("conditional_expectation_composition_and_measure_preservation", instances, failures);
  }
  {
    std::uint64_t failures = 0, instances = 0;
    RngStream r = rng.derive(6);
    for (std::uint32_t m : {2u, 3u}) {
      SchreierGraph graph(torus_shift(3));
      RelationLoopSet F = RelationLoopSet::with_trivials(integer_lattice(2));
      for (std::uint64_t i = 0; i < 200; ++i) {
        ++instances;
        std::vector<std::uint32_t> beta(graph.vertex_count());
        for (std::uint32_t v = 0; v < graph.vertex_count(); ++v) beta[v] = r.below(m, i, v);
        if (near_cocycle_defect_exact(graph, coboundary_0(graph, beta, m), F).num != 0) ++failures;
      }
    }
    suite.row("coboundaries_have_zero_defect", instances, failures);
  }
  {
    std::uint64_t failures = 0;
    SchreierGraph graph(cyclic_shift(4));
    RelationLoopSet F = RelationLoopSet::with_trivials(free_group(1));
    CohomologySummary summary = solve_cocycles(graph, F, 2);
    Cochain1 rep = summary.class_representatives.at(0);
    Frac base = coset_distance_exact(graph, rep).distance;
    RngStream r = rng.derive(7);
    for (std::uint64_t i = 0; i < 20; ++i) {
      std::vector<std::uint32_t> beta(4);
      for (std::uint32_t v = 0; v < 4; ++v) beta[v] = r.below(2, i, v);
      Cochain1 shifted = cochain_add(rep, coboundary_0(graph, beta, 2));
      if (!(coset_distance_exact(graph, shifted).distance == base)) ++failures;
    }
    suite.row("coset_distance_is_coset_invariant", 20, failures);
  }

  write_manifest(opt, "identity-checks", cfg);
  return suite.all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

int dispatch(const std::string& subcommand, const json& cfg, const Options& opt) {
  if (subcommand == "check-sofic") return run_check_sofic(cfg, opt);
  if (subcommand == "empirical") return run_empirical(cfg, opt);
  if (subcommand == "connect") return run_connect(cfg, opt);
  if (subcommand == "cohomology") return run_cohomology(cfg, opt);
  if (subcommand == "coset-scan") return run_coset_scan(cfg, opt);
  if (subcommand == "popa") return run_popa(cfg, opt);
  if (subcommand == "identity-checks") return run_identity_checks(cfg, opt);
  throw ConfigError("unknown subcommand: " + subcommand);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modelspaces experiment driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--workers", workers, "worker threads (outputs do not depend on this)");
  };

  const std::vector<std::string> names{"check-sofic", "empirical", "connect",        "cohomology",
                                       "coset-scan",  "popa",      "identity-checks"};
  for (const auto& name : names) add_common(app.add_subcommand(name), name != "identity-checks");
  app.get_subcommand("identity-checks")->add_option("--config", config_path, "JSON config file");

  CLI::App* rerun = app.add_subcommand("rerun", "re-run an experiment from its manifest");
  std::string manifest_path;
  rerun->add_option("manifest", manifest_path, "manifest.json of a previous run")->required();
  add_common(rerun, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::string subcommand;
    json cfg = json::object();
    if (rerun->parsed()) {
      json manifest = load_json(manifest_path);
      subcommand = require_as<std::string>(manifest, "subcommand");
      cfg = require_key(manifest, "config");
    } else {
      subcommand = app.get_subcommands().front()->get_name();
      if (!config_path.empty()) cfg = load_json(config_path);
    }
    Options opt;
    opt.out_dir = out_dir.empty() ? fs::path("out-" + subcommand) : fs::path(out_dir);
    opt.seed_override = seed;
    opt.workers = workers == 0 ? 1 : workers;
    return dispatch(subcommand, cfg, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
