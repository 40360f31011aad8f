#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace reshuffle {

// Counter-based deterministic generator (splitmix64 core). A stream is
// identified by (seed, stream_id); equal pairs yield equal draw sequences on
// every platform for the integer and uniform paths. Substreams are derived
// from the identifying pair alone, never from the advanced counter, so a
// consumer can re-derive e.g. the epoch-k permutation stream at any time.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed),
        stream_id_(stream_id),
        state_(mix(seed ^ mix(stream_id + kGamma))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Value fork: child streams depend only on (seed, stream_id, child).
  RandomStream substream(std::uint64_t child) const {
    return RandomStream(seed_, mix(stream_id_ + kGamma * (child + 1)));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on {0, ..., bound-1}; rejection sampling, no modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) {
      throw std::invalid_argument("RandomStream::next_below: bound must be positive");
    }
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r = next_u64();
    while (r < threshold) r = next_u64();
    return r % bound;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal, Marsaglia polar method.
  double next_normal() {
    for (;;) {
      const double u = 2.0 * next_double() - 1.0;
      const double v = 2.0 * next_double() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        return u * std::sqrt(-2.0 * std::log(s) / s);
      }
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
};

}  // namespace reshuffle
