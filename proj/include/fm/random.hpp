#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace fm {

// Counter-based pseudo-random generator. Draw i of a stream is a pure
// function of (key, i), so a stream can be split into independent child
// streams and replayed exactly from a recorded (key, counter) pair.
// The output function is the splitmix64 finalizer.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(mix64(seed + kGolden) ^ mix64(stream ^ kStreamSalt))) {}

  // Resume a stream recorded in a trace.
  static SplitRng resume(std::uint64_t key, std::uint64_t counter) {
    SplitRng r;
    r.key_ = key;
    r.counter_ = counter;
    return r;
  }

  std::uint64_t next_u64() { return mix64(key_ + ++counter_ * kGolden); }

  // Uniform in the open interval (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), bias-free by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  // Child stream independent of the parent and of other substream ids.
  SplitRng split(std::uint64_t substream) const {
    SplitRng r;
    r.key_ = mix64(key_ ^ mix64(substream + kStreamSalt));
    return r;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t consumed() const { return counter_; }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

 private:
  SplitRng() = default;

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Deterministic sub-seed for a nested experiment cell, e.g.
// derive_seed(base, {repeat, fold}).
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = SplitRng::mix64(base + 0x9E3779B97F4A7C15ULL);
  for (std::uint64_t p : path) {
    h = SplitRng::mix64(h ^ SplitRng::mix64(p + 0x9E3779B97F4A7C15ULL));
  }
  return h;
}

// Standard normal deviate via Box-Muller; consumes two uniforms.
inline double normal_sample(SplitRng& rng) {
  const double u1 = rng.next_unit();
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace fm
