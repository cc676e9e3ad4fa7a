#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace bondpf {

/// Counter-keyed random stream. Each (seed, key...) tuple yields an
/// independent SplitMix64 sequence, so per-particle draws do not depend on
/// how particles are scheduled across worker threads.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t state) noexcept : state_(state) {}

  static Rng stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) noexcept {
    std::uint64_t h = mix(seed ^ 0x6a09e667f3bcc909ULL);
    h = mix(h ^ (a + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ (b + 0xbb67ae8584caa73bULL));
    h = mix(h ^ (c + 0x3c6ef372fe94f82bULL));
    return Rng(h);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1), safe to pass to log().
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() noexcept { return boost::random::normal_distribution<double>()(*this); }

  double exponential() noexcept { return -std::log(uniform_open()); }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

// Stream tags keep the different draw purposes of one event apart.
namespace stream_tag {
inline constexpr std::uint64_t kPrior = 1;
inline constexpr std::uint64_t kParticle = 2;
inline constexpr std::uint64_t kResample = 3;
inline constexpr std::uint64_t kPredict = 4;
inline constexpr std::uint64_t kSimulator = 5;
}  // namespace stream_tag

}  // namespace bondpf
