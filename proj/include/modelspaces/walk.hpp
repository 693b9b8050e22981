#pragma once

// The kappa-lazy resampling random walk on microstate space, the endpoint
// coupling, and the full path builder joining two good models.
//
// One walk step resamples each coordinate independently from nu with
// probability 1-kappa and keeps it with probability kappa, so the time-s
// marginal started from x is the product over vertices of
// kappa^s delta_{x_v} + (1-kappa^s) nu.  The path builder couples two walks
// through a shared sample alpha at time s and fills in the intermediate
// states by conditional bridge resampling: a vertex kept at time s was kept
// at all times; a vertex resampled by time s has its last resample time drawn
// from the truncated geometric law on 1..s, earlier resamples drawn
// unconditionally, and the value from the last resample onward equal to the
// coupled letter.  Every per-step transition law then matches the walk kernel
// exactly.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "counter_rng.hpp"
#include "model.hpp"

namespace msp {

struct WalkConfig {
  double kappa = 0.95;
  double delta = 0.1;
  std::uint32_t steps = 72;
  std::uint64_t seed = 1;
  std::uint32_t retry_budget = 16;

  void validate_step() const {
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("walk config: kappa must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("walk config: delta must lie in (0,1)");
  }
  void validate_connect() const {
    validate_step();
    if (!(1.0 - kappa < delta)) throw std::invalid_argument("walk config: need 1 - kappa < delta");
    if (!(std::pow(kappa, static_cast<double>(steps)) < delta / 4.0))
      throw std::invalid_argument("walk config: need kappa^steps < delta/4");
    if (retry_budget == 0) throw std::invalid_argument("walk config: retry budget must be positive");
  }
};

// kappa = max(0.95, 1 - delta/2), s the smallest integer with kappa^s < delta/4.
inline WalkConfig default_walk_config(double delta, std::uint64_t seed) {
  WalkConfig c;
  c.delta = delta;
  c.kappa = std::max(0.95, 1.0 - delta / 2.0);
  c.steps = static_cast<std::uint32_t>(std::ceil(std::log(delta / 4.0) / std::log(c.kappa)));
  while (std::pow(c.kappa, static_cast<double>(c.steps)) >= delta / 4.0) ++c.steps;
  c.seed = seed;
  return c;
}

// One lazy resampling step.  Draws are addressed by (time, vertex) so the
// result is independent of evaluation order.  The degenerate kappa = 0 and
// kappa = 1 walks are allowed here (full resample, frozen state).
inline Microstate walk_step(const Microstate& x, double kappa, const DiscreteDistribution& nu,
                            const RngStream& stream, std::uint64_t time = 1) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("walk_step: kappa must lie in [0,1]");
  if (nu.size() != x.alphabet.size()) throw std::invalid_argument("walk_step: nu size mismatch");
  RngStream keep = stream.derive(rng_tag::walk_keep);
  RngStream fresh = stream.derive(rng_tag::walk_fresh);
  std::vector<std::uint32_t> out(x.values);
  for (std::uint32_t v = 0; v < x.size(); ++v)
    if (keep.u01(time, v) >= kappa) out[v] = nu.sample(fresh.u01(time, v));
  return Microstate(x.alphabet, std::move(out));
}

// The trajectory x = xi_0, xi_1, ..., xi_s.
inline std::vector<Microstate> iterate_walk(const Microstate& x, const WalkConfig& config,
                                            const DiscreteDistribution& nu, const RngStream& stream) {
  config.validate_step();
  std::vector<Microstate> states;
  states.reserve(config.steps + 1);
  states.push_back(x);
  for (std::uint32_t t = 1; t <= config.steps; ++t)
    states.push_back(walk_step(states.back(), config.kappa, nu, stream, t));
  return states;
}

// Coupled time-s states for walks started at x and y: a shared sample alpha
// from nu^{x V}, and independent keep bits eta, omega with mean kappa^s.
struct CoupledEndpoints {
  Microstate xi;
  Microstate zeta;
  std::vector<std::uint8_t> eta;    // 1 where xi kept its start value
  std::vector<std::uint8_t> omega;  // 1 where zeta kept its start value
};

inline CoupledEndpoints couple_endpoints(const Microstate& x, const Microstate& y, const WalkConfig& config,
                                         const DiscreteDistribution& nu, const RngStream& stream) {
  config.validate_connect();
  if (!(x.alphabet == y.alphabet) || x.size() != y.size())
    throw std::invalid_argument("couple_endpoints: alphabet or length mismatch");
  const double keep_prob = std::pow(config.kappa, static_cast<double>(config.steps));
  RngStream alpha_s = stream.derive(rng_tag::couple_alpha);
  RngStream eta_s = stream.derive(rng_tag::couple_eta);
  RngStream omega_s = stream.derive(rng_tag::couple_omega);

  const std::uint32_t n = x.size();
  std::vector<std::uint32_t> xi(n), zeta(n);
  std::vector<std::uint8_t> eta(n), omega(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    std::uint32_t a = nu.sample(alpha_s.u01(v));
    eta[v] = eta_s.u01(v) < keep_prob ? 1 : 0;
    omega[v] = omega_s.u01(v) < keep_prob ? 1 : 0;
    xi[v] = eta[v] ? x.values[v] : a;
    zeta[v] = omega[v] ? y.values[v] : a;
  }
  return CoupledEndpoints{Microstate(x.alphabet, std::move(xi)), Microstate(x.alphabet, std::move(zeta)),
                          std::move(eta), std::move(omega)};
}

// Trajectory from `start` to the prescribed time-s state, conditioned on the
// per-vertex kept flags.  States are indexed 0..s.
inline std::vector<Microstate> bridge_trajectory(const Microstate& start, const Microstate& final_state,
                                                 const std::vector<std::uint8_t>& kept, const WalkConfig& config,
                                                 const DiscreteDistribution& nu, const RngStream& stream) {
  const std::uint32_t n = start.size();
  const std::uint32_t s = config.steps;
  const double kappa = config.kappa;
  RngStream last_s = stream.derive(rng_tag::bridge_last);
  RngStream res_s = stream.derive(rng_tag::bridge_resample);
  RngStream val_s = stream.derive(rng_tag::bridge_value);

  std::vector<Microstate> states(s + 1, start);
  // Column-by-column: fill the whole time axis of each vertex at once.
  for (std::uint32_t v = 0; v < n; ++v) {
    if (kept[v]) continue;  // kept at time s means kept at every time
    // Last resample time L on 1..s: P(L = t) proportional to kappa^(s-t).
    double u = last_s.u01(v);
    double kappas = std::pow(kappa, static_cast<double>(s));
    double cdf = 0.0;
    std::uint32_t L = s;
    const double norm = (1.0 - kappas) / (1.0 - kappa);  // sum of kappa^(s-t)
    for (std::uint32_t t = 1; t <= s; ++t) {
      cdf += std::pow(kappa, static_cast<double>(s - t)) / norm;
      if (u < cdf) {
        L = t;
        break;
      }
    }
    // Before L: unconditioned walk from the start value.
    std::uint32_t val = start.values[v];
    for (std::uint32_t t = 1; t < L; ++t) {
      if (res_s.u01(t, v) < 1.0 - kappa) val = nu.sample(val_s.u01(t, v));
      states[t].values[v] = val;
    }
    for (std::uint32_t t = L; t <= s; ++t) states[t].values[v] = final_state.values[v];
  }
  return states;
}

struct WalkPath {
  std::vector<Microstate> states;
  std::vector<double> step_distances;       // states.size() - 1 entries
  std::vector<std::uint8_t> membership_flags;  // good-model flag per state
  std::vector<double> state_deviations;     // TV (or worst integral error) per state
};

struct ConnectResult {
  bool success = false;
  WalkPath path;
  std::uint32_t attempts = 0;
  // Diagnostics of the reported attempt (the successful one, or the best):
  int first_bad_state = -1;  // index of the first state outside the neighbourhood
  int first_big_step = -1;   // index of the first step with distance >= delta
};

// Builds the path x = xi_0, ..., xi_s, zeta_{s-1}, ..., zeta_0 = y
// (2s+1 states): forward trajectory from x, reversed trajectory from y, the
// junction resolved by the endpoint coupling.  Success requires every step
// below delta and every state inside the neighbourhood; retries with fresh
// randomness up to the retry budget and otherwise reports the best attempt.
inline ConnectResult connect(const SoficApproximation& sigma, const Microstate& x, const Microstate& y,
                             const WalkConfig& config, const NeighbourhoodSpec& spec,
                             const DiscreteDistribution& nu, const RngStream& stream) {
  if (!(x.alphabet == y.alphabet) || x.size() != y.size())
    throw std::invalid_argument("connect: alphabet or length mismatch");
  if (config.steps == 0) {
    if (!(x == y)) throw std::invalid_argument("connect: steps = 0 requires equal endpoints");
    WalkPath path;
    path.states.push_back(x);
    double dev = 0.0;
    bool good = is_good_model(sigma, x, spec, &dev);
    path.membership_flags.push_back(good ? 1 : 0);
    path.state_deviations.push_back(dev);
    return ConnectResult{good, std::move(path), 1, good ? -1 : 0, -1};
  }
  config.validate_connect();

  WindowImages cache(sigma, spec.window);
  const std::uint32_t s = config.steps;
  ConnectResult best;
  int best_score = -1;

  for (std::uint32_t attempt = 0; attempt < config.retry_budget; ++attempt) {
    RngStream astream = stream.derive(rng_tag::connect_attempt).derive(attempt);
    CoupledEndpoints ends = couple_endpoints(x, y, config, nu, astream);
    std::vector<Microstate> forward =
        bridge_trajectory(x, ends.xi, ends.eta, config, nu, astream.derive(rng_tag::side_forward));
    std::vector<Microstate> backward =
        bridge_trajectory(y, ends.zeta, ends.omega, config, nu, astream.derive(rng_tag::side_backward));

    WalkPath path;
    path.states.reserve(2 * s + 1);
    for (std::uint32_t t = 0; t <= s; ++t) path.states.push_back(std::move(forward[t]));
    for (std::uint32_t t = s - 1; t != static_cast<std::uint32_t>(-1); --t)
      path.states.push_back(std::move(backward[t]));

    path.step_distances.resize(path.states.size() - 1);
    for (std::size_t i = 0; i + 1 < path.states.size(); ++i)
      path.step_distances[i] = hamming_distance(path.states[i], path.states[i + 1]);

    path.membership_flags.resize(path.states.size());
    path.state_deviations.resize(path.states.size());
    int first_bad_state = -1, first_big_step = -1;
    for (std::size_t i = 0; i < path.states.size(); ++i) {
      double dev = 0.0;
      bool good = is_good_model(sigma, path.states[i], spec, &dev, &cache);
      path.membership_flags[i] = good ? 1 : 0;
      path.state_deviations[i] = dev;
      if (!good && first_bad_state < 0) first_bad_state = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < path.step_distances.size(); ++i)
      if (path.step_distances[i] >= config.delta) {
        first_big_step = static_cast<int>(i);
        break;
      }

    bool ok = first_bad_state < 0 && first_big_step < 0;
    int score;
    if (ok) {
      score = static_cast<int>(2 * path.states.size());
    } else {
      score = static_cast<int>(path.states.size());
      if (first_bad_state >= 0) score = std::min(score, first_bad_state);
      if (first_big_step >= 0) score = std::min(score, first_big_step);
    }
    if (score > best_score) {
      best_score = score;
      best.path = std::move(path);
      best.first_bad_state = first_bad_state;
      best.first_big_step = first_big_step;
      best.success = ok;
    }
    best.attempts = attempt + 1;
    if (ok) break;
  }
  return best;
}

}  // namespace msp
