#pragma once

#include <cmath>
#include <cstdint>

namespace qsim {

// Counter-based pseudorandom stream (splitmix64). Output n is a bijective
// hash of seed + n*gamma, so streams are cheap to fork: substream(base, i)
// derives an independent stream key by hashing (base, i), which makes batch
// replicate i reproducible regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream substream(std::uint64_t base_seed, std::uint64_t index) {
    // Key derivation: finalize base and index through distinct mix rounds.
    std::uint64_t k = mix(base_seed + 0x9E3779B97F4A7C15ULL * (index + 1));
    return RngStream(mix(k ^ 0xBF58476D1CE4E5B9ULL));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1], safe as a log argument.
  double uniform01_open_left() { return 1.0 - uniform01(); }

  double exponential(double rate) { return -std::log(uniform01_open_left()) / rate; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace qsim
