#pragma once

// Seedable deterministic random source used everywhere in the simulator.
// The generator and every sampler are self-contained so that a given seed
// reproduces the same stream on any platform and stdlib.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qkd {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable 64-bit mix for deriving worker/substream seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0xdeadbeefcafef00dULL) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
    if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0)
      state_[0] = 1;
  }

  // xoshiro256**
  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  Rng fork(std::uint64_t tag) { return Rng(derive_seed(next(), tag)); }

  // uniform in [0,1) with 53-bit resolution
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }

  // standard normal, Marsaglia polar method
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exact Poisson for small means (Knuth), chunked via additivity for
  // moderate means, Gaussian rounding above kHugeMean where the
  // approximation error is far below sampling noise.
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("Rng::poisson: mean must be >= 0");
    if (mean == 0.0) return 0;
    if (mean > kHugeMean) {
      const double draw = std::round(normal(mean, std::sqrt(mean)));
      return draw < 0.0 ? 0 : static_cast<std::uint64_t>(draw);
    }
    std::uint64_t total = 0;
    double remaining = mean;
    while (remaining > kChunkMean) {
      total += poisson_knuth(kChunkMean);
      remaining -= kChunkMean;
    }
    return total + poisson_knuth(remaining);
  }

  // Exact inverse-transform binomial (chunked); Gaussian rounding for
  // huge means, where exact stepping would dominate the run time.
  std::uint64_t binomial(std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (p > 0.5) return n - binomial(n, 1.0 - p);
    const double mean = static_cast<double>(n) * p;
    if (mean > kHugeMean) {
      const double sd = std::sqrt(mean * (1.0 - p));
      double draw = std::round(normal(mean, sd));
      if (draw < 0.0) draw = 0.0;
      if (draw > static_cast<double>(n)) draw = static_cast<double>(n);
      return static_cast<std::uint64_t>(draw);
    }
    if (n <= 16) {
      std::uint64_t k = 0;
      for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(p);
      return k;
    }
    // chunk so that each inverse-transform start value (1-p)^m stays
    // comfortably inside double range
    const auto chunk = static_cast<std::uint64_t>(std::max(1.0, kChunkMean / p));
    std::uint64_t total = 0, left = n;
    while (left > 0) {
      const std::uint64_t m = left < chunk ? left : chunk;
      total += binomial_invert(m, p);
      left -= m;
    }
    return total;
  }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr double kChunkMean = 32.0;
  static constexpr double kHugeMean = 1.0e4;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t poisson_knuth(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::uint64_t binomial_invert(std::uint64_t n, double p) {
    const double q = 1.0 - p;
    const double ratio = p / q;
    double pk = std::pow(q, static_cast<double>(n));
    double cdf = pk;
    const double u = uniform();
    std::uint64_t k = 0;
    while (u > cdf && k < n) {
      ++k;
      pk *= ratio * static_cast<double>(n - k + 1) / static_cast<double>(k);
      cdf += pk;
    }
    return k;
  }

  std::array<std::uint64_t, 4> state_{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qkd
