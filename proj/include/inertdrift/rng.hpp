#pragma once

// Counter-based randomness. Every Brownian increment is a pure function of
// (seed, stream_id, step index), so paths can be restarted at any step and
// worker lanes never share generator state.

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace inertdrift {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr PhiloxCounter philox_round(const PhiloxCounter& c, const PhiloxKey& k) {
  const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
}

}  // namespace detail

/// Philox4x32 with 10 rounds, as in Random123.
constexpr PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    ctr = detail::philox_round(ctr, key);
  }
  return ctr;
}

/// 64-bit word stream for one (key, counter prefix). Satisfies
/// UniformRandomBitGenerator so it can feed boost's ziggurat normal sampler.
class CounterWordEngine {
 public:
  using result_type = std::uint64_t;

  CounterWordEngine(PhiloxKey key, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2, std::uint32_t domain)
      : key_(key), c0_(c0), c1_(c1), c2_(c2), domain_(domain) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ % 2 == 0) {
      // low 24 bits of the last counter word index 128-bit blocks
      block_ = philox4x32_10({c0_, c1_, c2_, domain_ | (used_ / 2)}, key_);
    }
    const std::size_t w = (used_ % 2) * 2;
    ++used_;
    return (std::uint64_t{block_[w]} << 32) | block_[w + 1];
  }

 private:
  PhiloxKey key_;
  std::uint32_t c0_, c1_, c2_, domain_;
  std::uint32_t used_ = 0;
  PhiloxCounter block_{};
};

/// Driving noise of one simulation lane.
class NoiseSource {
 public:
  static constexpr std::uint32_t kNormalDomain = 0x00000000u;
  static constexpr std::uint32_t kUniformDomain = 0x01000000u;

  NoiseSource(std::uint64_t seed, std::uint32_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }

  /// N(0,1) draw attached to the given step.
  double standard_normal(std::uint64_t step) const {
    CounterWordEngine eng = engine(step, kNormalDomain);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    return normal(eng);
  }

  /// U(0,1) draw attached to the given step, independent of standard_normal(step).
  /// Different slots give independent draws for the same step.
  double uniform(std::uint64_t step, std::uint32_t slot = 0) const {
    CounterWordEngine eng = engine(step, kUniformDomain + (slot % 127u) * 0x01000000u);
    return static_cast<double>(eng() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

 private:
  CounterWordEngine engine(std::uint64_t step, std::uint32_t domain) const {
    const PhiloxKey key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    return CounterWordEngine(key, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                             stream_id_, domain);
  }

  std::uint64_t seed_;
  std::uint32_t stream_id_;
};

/// splitmix64 finaliser, used to derive independent seeds from a base seed and labels.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(base) ^ a) ^ b);
}

/// Noise that is identically zero: the deterministic (noise-free) system.
struct ZeroNoise {
  double standard_normal(std::uint64_t) const { return 0.0; }
  double uniform(std::uint64_t, std::uint32_t = 0) const { return 0.5; }
};

}  // namespace inertdrift
