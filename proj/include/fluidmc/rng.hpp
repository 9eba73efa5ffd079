#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace fluidmc {

/// Deterministic 64-bit generator with cheap stream splitting.
///
/// Streams are derived from (master_seed, stream_id) through SplitMix64, so
/// replica r always consumes the same draws regardless of scheduling. The
/// core generator is xoshiro256++; no libc or libstdc++ distribution code is
/// involved, which keeps sample paths bit-identical across platforms.
class Rng {
 public:
  Rng() : Rng(0, 0) {}

  Rng(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::uint64_t s = master_seed;
    (void)splitmix(s);  // whiten the raw seed
    s ^= 0xD1B54A32D192ED03ULL * (stream_id + 0x632BE59BD9B4E019ULL);
    for (auto& w : state_) w = splitmix(s);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform draw in (0, 1]; safe as argument of std::log.
  double unit_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform draw in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Inverse-CDF exponential sample with the given rate.
  double exponential(double rate) { return -std::log(unit_positive()) / rate; }

  /// Exactly uniform integer in [0, n), n >= 1 (Lemire rejection).
  std::uint64_t bounded(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_;
};

}  // namespace fluidmc
