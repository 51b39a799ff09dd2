#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace restfuse {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based generator: output i is a pure function of (key, i).
///
/// Streams are keyed by an experiment seed and a purpose tag, e.g.
/// `Rng(seed, "dropout")`, so draws for one purpose never depend on how many
/// values another purpose consumed.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::string_view tag)
      : key_(detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a(tag)))) {}
  Rng(std::uint64_t seed, std::string_view tag, std::uint64_t index)
      : Rng(seed ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL), tag) {}

  /// Derived stream; does not advance this one.
  Rng fork(std::string_view tag) const {
    Rng r;
    r.key_ = detail::splitmix64(key_ ^ detail::fnv1a(tag));
    return r;
  }

  std::uint64_t next_u64() { return detail::splitmix64(key_ + counter_++ * 0xD1B54A32D192ED03ULL); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller; no cached second value, so every call
  /// consumes exactly two counters.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace restfuse
