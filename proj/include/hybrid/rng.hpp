#pragma once

#include <cmath>
#include <cstdint>

namespace hybrid {

// Counter-seeded SplitMix64. Each (seed, stream, substream) triple yields an
// independent, reproducible sequence regardless of thread scheduling, which is
// what the byte-identical-under-parallelism guarantee rests on.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
    state_ = mix(mix(mix(0x9e3779b97f4a7c15ull ^ seed) + stream) + substream);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller, no caching: every call consumes exactly two uniforms so the
  // draw count per trajectory is fixed.
  double normal() {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

// Stream domain tags keep benchmark data, the Monte-Carlo truth oracle, and
// auxiliary draws on disjoint sequences even under identical seeds.
namespace stream_tag {
inline constexpr std::uint64_t kBenchmark = 0x01;
inline constexpr std::uint64_t kTruthMc = 0x02;
}  // namespace stream_tag

}  // namespace hybrid
