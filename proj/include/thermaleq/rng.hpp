#ifndef THERMALEQ_RNG_HPP
#define THERMALEQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>

namespace thermaleq::rng {

// Counter-based generator: draw i of a stream is a pure function of
// (key, i), so streams can be reproduced from the documented recipe in
// any language.
//
//   key       = mix64(seed XOR fnv1a64(label))
//   output_i  = mix64(key + (i + 1) * 0x9E3779B97F4A7C15)
//
// mix64 is the SplitMix64 finalizer, fnv1a64 the 64-bit FNV-1a hash of
// the label bytes. Uniform doubles take the top 53 bits; Gaussians are
// Box-Muller pairs, two uniforms per pair.

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view label) {
  return mix64(seed ^ fnv1a64(label));
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view label)
      : key_(derive_key(seed, label)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * golden_gamma); }

  // uniform in [0, 1), 53-bit resolution
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller; consumes exactly two u64 draws
  std::pair<double, double> next_gaussian_pair() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double next_gaussian() { return next_gaussian_pair().first; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace thermaleq::rng

#endif
