#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, stream key, counter), so results do not depend on thread scheduling
// or evaluation order.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace tplmon {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a list of keys into a seed for an independent sub-stream.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t s = mix64(seed);
  for (const auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n) without modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x = 0;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal draw (Box-Muller, cached pair).
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tplmon
