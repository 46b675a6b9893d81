#pragma once

// Counter-based random streams. Output k of a stream is a pure function of
// (key, k), so streams can be created anywhere from (seed, n, trial, tag)
// without shared state and replayed bit-for-bit on any thread.

#include <cstdint>
#include <limits>

namespace scm {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class StreamTag : std::uint64_t {
  Design = 1,
  Response = 2,
  ResponseFlip = 3,
  Sketch = 4,
  Bootstrap = 5,
  Directions = 6,
  MonteCarlo = 7,
  Support = 8,
  Misc = 9,
};

inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, StreamTag tag) {
  std::uint64_t k = splitmix64(seed ^ 0x5CA1AB1E0DDBA11ULL);
  k = splitmix64(k ^ a);
  k = splitmix64(k ^ (b + 0x632BE59BD9B4E019ULL));
  return splitmix64(k ^ static_cast<std::uint64_t>(tag));
}

/// UniformRandomBitGenerator over a keyed counter.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, StreamTag tag) : key_(stream_key(seed, a, b, tag)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace scm
