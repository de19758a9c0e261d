#pragma once

#include <cstdint>
#include <limits>

namespace ospca {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Purpose tags that separate the random streams of one replica.
enum class StreamPurpose : std::uint64_t {
  Signal = 1,
  InitialEstimate = 2,
  Sample = 3,
};

/// Key of a random stream: every draw in the library is a function of
/// (seed, replica, purpose, counter) only, so replicas can run in any order.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replica,
                                   StreamPurpose purpose,
                                   std::uint64_t counter = 0) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ replica);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ counter);
}

/// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t key) noexcept {
    std::uint64_t z = key;
    for (auto& word : s_) {
      z += 0x9e3779b97f4a7c15ULL;
      word = splitmix64(z);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

}  // namespace ospca
