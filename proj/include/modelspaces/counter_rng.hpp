#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace msp {

// SplitMix64 finalizer, used as the mixing core of the counter-based streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stateless stream of pseudo-random words addressed by counters.  Every draw
// is a pure function of (root seed, derivation path, counter pair), so
// trajectories are reproducible and can be evaluated in any order by any
// number of workers.
class RngStream {
 public:
  RngStream() = default;

  static RngStream root(std::uint64_t seed) {
    return RngStream(mix64(seed ^ 0x5851f42d4c957f2dull));
  }

  // Independent substream labelled by a tag (purpose, trial index, ...).
  RngStream derive(std::uint64_t tag) const {
    return RngStream(mix64(state_ ^ mix64(tag + 0x632be59bd9b4e019ull)));
  }

  std::uint64_t at(std::uint64_t i, std::uint64_t j = 0) const {
    std::uint64_t h = state_ + 0x9e3779b97f4a7c15ull * (i + 1);
    h = mix64(h);
    h += 0xc2b2ae3d27d4eb4full * (j + 1);
    return mix64(h);
  }

  // Uniform double in [0,1) with 53 random bits.
  double u01(std::uint64_t i, std::uint64_t j = 0) const {
    return static_cast<double>(at(i, j) >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0,n).
  std::uint32_t below(std::uint32_t n, std::uint64_t i, std::uint64_t j = 0) const {
    if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
    return static_cast<std::uint32_t>((static_cast<unsigned __int128>(at(i, j)) * n) >> 64);
  }

 private:
  explicit RngStream(std::uint64_t s) : state_(s) {}
  std::uint64_t state_ = 0;
};

// Derivation tags.  Streams are derived as
// root(master_seed).derive(tag).derive(trial).derive(attempt)... so that every
// draw has a documented address.
namespace rng_tag {
inline constexpr std::uint64_t walk_keep = 0x11;
inline constexpr std::uint64_t walk_fresh = 0x12;
inline constexpr std::uint64_t couple_alpha = 0x21;
inline constexpr std::uint64_t couple_eta = 0x22;
inline constexpr std::uint64_t couple_omega = 0x23;
inline constexpr std::uint64_t bridge_last = 0x24;
inline constexpr std::uint64_t bridge_resample = 0x25;
inline constexpr std::uint64_t bridge_value = 0x26;
inline constexpr std::uint64_t connect_attempt = 0x27;
inline constexpr std::uint64_t side_forward = 0x28;
inline constexpr std::uint64_t side_backward = 0x29;
inline constexpr std::uint64_t iid_sample = 0x31;
inline constexpr std::uint64_t popa_theta = 0x41;
inline constexpr std::uint64_t coset_restart = 0x51;
inline constexpr std::uint64_t trial = 0x61;
}  // namespace rng_tag

// A probability vector over alphabet letters, sampled by CDF inversion.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;

  explicit DiscreteDistribution(std::vector<double> probs) : p_(std::move(probs)) {
    double sum = 0.0;
    for (double x : p_) {
      if (x < 0.0) throw std::invalid_argument("DiscreteDistribution: negative probability");
      sum += x;
    }
    if (p_.empty() || sum < 1.0 - 1e-9 || sum > 1.0 + 1e-9)
      throw std::invalid_argument("DiscreteDistribution: probabilities must sum to 1");
    cdf_.resize(p_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      acc += p_[i];
      cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
  }

  static DiscreteDistribution uniform(std::size_t n) {
    return DiscreteDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static DiscreteDistribution point_mass(std::size_t n, std::size_t letter) {
    std::vector<double> p(n, 0.0);
    p.at(letter) = 1.0;
    return DiscreteDistribution(std::move(p));
  }

  std::size_t size() const { return p_.size(); }
  double prob(std::size_t letter) const { return p_.at(letter); }
  const std::vector<double>& probs() const { return p_; }

  std::uint32_t sample(double u) const {
    // Inverse CDF; u in [0,1).
    std::size_t lo = 0, hi = p_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (u < cdf_[mid]) hi = mid; else lo = mid + 1;
    }
    return static_cast<std::uint32_t>(lo);
  }

 private:
  std::vector<double> p_;
  std::vector<double> cdf_;
};

}  // namespace msp
