#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace qsrlab {

// Counter-based random streams. Every draw is a pure function of
// (key, counter), so results are independent of thread scheduling and
// identical across reruns with the same seed.

inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream tags keep draws for different purposes decorrelated even when the
// remaining key words coincide.
namespace stream_tag {
inline constexpr std::uint64_t sample = 0x5a11;
inline constexpr std::uint64_t noise = 0x1707;
inline constexpr std::uint64_t permutation = 0x9e52;
inline constexpr std::uint64_t init = 0x1217;
inline constexpr std::uint64_t sde = 0x50de;
inline constexpr std::uint64_t data = 0xdada;
}  // namespace stream_tag

class RngStream {
 public:
  RngStream() = default;

  // Folds an arbitrary tuple of key words (seed, worker, tag, step, ...)
  // into one stream key.
  static RngStream keyed(std::initializer_list<std::uint64_t> words) {
    std::uint64_t k = 0x243f6a8885a308d3ULL;
    for (std::uint64_t w : words) k = mix64(k ^ mix64(w));
    RngStream s;
    s.key_ = k;
    return s;
  }

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  // Uniform in (0, 1]; never returns 0 so it is safe inside log().
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // 64-bit multiply-shift; bias is negligible for the n used here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; draws come in pairs, the spare is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qsrlab
