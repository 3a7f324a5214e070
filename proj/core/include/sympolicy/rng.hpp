#pragma once

// Deterministic random streams. Every stochastic component derives its own
// substream from a master seed, so results do not depend on evaluation order
// or worker scheduling. Distributions are implemented here rather than taken
// from <random> so that sampled sequences are identical across standard
// libraries.

#include <array>
#include <cmath>
#include <cstdint>

namespace sympolicy {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable substream derivation: derive_seed(seed, a, b, ...) hashes each tag
// in turn. Changing any tag decorrelates the whole stream.
inline std::uint64_t derive_seed(std::uint64_t base) { return splitmix64(base); }

template <class... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Rest... rest) {
  return derive_seed(splitmix64(base ^ splitmix64(tag + 0x9e3779b97f4a7c15ULL)), rest...);
}

// xoshiro256++ (Blackman & Vigna), seeded through splitmix64 as recommended.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) {
      x = splitmix64(x);
      word = x;
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

  result_type operator()() { return next(); }

  std::uint64_t next() {
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

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform01_open_low() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;  // (2^64 - n) mod n
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal();  // standard normal, ziggurat

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
};

namespace detail {

// 128-strip ziggurat for the standard normal (Marsaglia & Tsang constants,
// Doornik's table layout: X[0] is the widened base block, X[1] = R).
struct ZigguratTables {
  static constexpr int kBlocks = 128;
  static constexpr double kR = 3.442619855899;
  static constexpr double kV = 9.91256303526217e-3;
  std::array<double, kBlocks + 1> x{};
  std::array<double, kBlocks> ratio{};

  ZigguratTables() {
    double f = std::exp(-0.5 * kR * kR);
    x[0] = kV / f;
    x[1] = kR;
    x[kBlocks] = 0.0;
    for (int i = 2; i < kBlocks; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kBlocks; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

inline double RngStream::normal() {
  const auto& zt = detail::ziggurat();
  for (;;) {
    const std::uint64_t bits = next();
    const int i = static_cast<int>(bits & 127u);
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    if (std::abs(u) < zt.ratio[i]) return u * zt.x[i];
    if (i == 0) {
      // tail beyond R
      double xx, yy;
      do {
        xx = -std::log(uniform01_open_low()) / detail::ZigguratTables::kR;
        yy = -std::log(uniform01_open_low());
      } while (yy + yy < xx * xx);
      const double t = detail::ZigguratTables::kR + xx;
      return u < 0 ? -t : t;
    }
    const double z = u * zt.x[i];
    const double z2 = z * z;
    const double f_hi = std::exp(-0.5 * (zt.x[i] * zt.x[i] - z2));
    const double f_lo = std::exp(-0.5 * (zt.x[i + 1] * zt.x[i + 1] - z2));
    if (f_lo + uniform01() * (f_hi - f_lo) < 1.0) return z;
  }
}

}  // namespace sympolicy
