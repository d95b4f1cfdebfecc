#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace vrjp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// xoshiro256** generator whose state is derived from a (seed, stream id) key.
///
/// Every replica of an experiment owns one stream keyed by (seed, replica id),
/// so results do not depend on scheduling or thread count. All variates are
/// produced by code in this header, never by <random> distributions, so
/// draws are bit-identical across standard libraries.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
    std::uint64_t key = seed;
    const std::uint64_t mix = detail::splitmix64(key) ^ (stream_id * 0xd1342543de82ef95ULL);
    std::uint64_t sm = mix + 0x632be59bd9b4e019ULL * (stream_id + 1);
    for (auto& s : state_) s = detail::splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by the Marsaglia polar method (second variate discarded).
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's nearly-divisionless method.
    unsigned __int128 prod = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(prod);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        prod = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(prod);
      }
    }
    return static_cast<std::uint64_t>(prod >> 64);
  }

 private:
  std::uint64_t state_[4];
};

}  // namespace vrjp
