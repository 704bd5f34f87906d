#ifndef PGNN_RNG_HPP
#define PGNN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pgnn {

// Deterministic generator used everywhere randomness is needed.
// splitmix64 state update with strong output mixing; the standard library
// distributions are avoided because their output sequences are
// implementation-defined, which would break bit-reproducible datasets
// and training runs across toolchains.
class rng64 {
 public:
  explicit rng64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform on (0, 1]
  double next_unit() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // uniform on [lo, hi)
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(next_u64() >> 11) * 0x1.0p-53);
  }

  // integer uniform on [lo, hi] inclusive
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // standard normal via Box-Muller; one value per call, pairs drawn together
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double next_exponential(double mean) { return -mean * std::log(next_unit()); }

  // decorrelated stream for a given index; used for per-sample parallelism
  static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
    rng64 g(seed ^ (0xA24BAED4963EE407ULL + index * 0x9FB21C651E98DF25ULL));
    return g.next_u64();
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace pgnn

#endif
