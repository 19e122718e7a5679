#pragma once

// Y00 quantum-noise randomized cipher: LFSR running-key expansion,
// M-ary phase encryption, homodyne/heterodyne reception and the
// nearest-state attacker harnesses with the noise-masking count.
//
// Quadrature convention: x = (a + a*)/2, coherent-state variance 1/4
// per quadrature; heterodyne splits the field and adds one vacuum unit
// (variance 1/2 per quadrature).

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iostream>
#include <vector>

#include "qkdsim/errors.hpp"
#include "qkdsim/mathx.hpp"
#include "qkdsim/rng.hpp"

namespace qkd::qnrc {

struct Y00Config {
  std::uint32_t m = 64;        // number of running-key values, even
  double alpha = 5.0;          // coherent amplitude at the source
  double channel_eta = 1.0;    // power transmittance
  double excess_noise = 0.0;   // added quadrature variance

  double received_amplitude() const { return alpha * std::sqrt(channel_eta); }

  void validate() const {
    if (m < 2 || m % 2 != 0) throw ConfigError("y00: M must be even and >= 2");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw ConfigError("y00: alpha must be finite and > 0");
    if (!(channel_eta > 0.0 && channel_eta <= 1.0))
      throw ConfigError("y00: channel_eta must lie in (0,1]");
    if (excess_noise < 0.0) throw ConfigError("y00: excess_noise must be >= 0");
  }
};

// ------------------------------------------------------------- LFSR

// Fibonacci LFSR keystream expander.  Known-primitive tap sets are
// accepted silently; anything else gets an exact period check when the
// degree allows it, or a warning.
class RunningKeyGen {
 public:
  RunningKeyGen(std::uint64_t seed_key, std::uint32_t m, int degree = 31,
                std::uint64_t taps = 0)
      : m_(m), degree_(degree) {
    if (m < 2) throw ConfigError("running key: M must be >= 2");
    if (degree < 2 || degree > 63) throw ConfigError("running key: degree out of range");
    bits_per_symbol_ = 0;
    while ((1ull << bits_per_symbol_) < m) ++bits_per_symbol_;
    taps_ = taps ? taps : default_taps(degree);
    check_taps();
    state_ = seed_key & ((1ull << degree) - 1);
    if (state_ == 0)
      throw ConfigError("running key: all-zero LFSR state is degenerate");
  }

  std::uint32_t bits_per_symbol() const { return bits_per_symbol_; }
  std::uint64_t period() const { return (1ull << degree_) - 1; }

  int next_bit() {
    const int out = static_cast<int>(state_ & 1u);
    const auto fb = static_cast<std::uint64_t>(std::popcount(state_ & taps_) & 1);
    state_ = (state_ >> 1) | (fb << (degree_ - 1));
    ++bits_drawn_;
    return out;
  }

  // next running-key value in [0, M); non-power-of-two M uses rejection
  std::uint32_t next_symbol() {
    for (;;) {
      std::uint32_t v = 0;
      for (std::uint32_t b = 0; b < bits_per_symbol_; ++b)
        v = (v << 1) | static_cast<std::uint32_t>(next_bit());
      if (v < m_) return v;
    }
  }

  std::uint64_t bits_drawn() const { return bits_drawn_; }

 private:
  static std::uint64_t default_taps(int degree) {
    // Feedback masks for s[d-1](t+1) = parity(state & taps), i.e. the
    // non-leading exponents of a primitive polynomial plus bit 0:
    // u(t+d) = u(t+a) ^ ... ^ u(t).
    switch (degree) {
      case 8:  // x^8 + x^6 + x^5 + x^4 + 1
        return (1ull << 6) | (1ull << 5) | (1ull << 4) | 1ull;
      case 16:  // x^16 + x^15 + x^13 + x^4 + 1
        return (1ull << 15) | (1ull << 13) | (1ull << 4) | 1ull;
      case 24:  // x^24 + x^23 + x^22 + x^17 + 1
        return (1ull << 23) | (1ull << 22) | (1ull << 17) | 1ull;
      case 31:  // x^31 + x^28 + 1
        return (1ull << 28) | 1ull;
      case 32:  // x^32 + x^22 + x^2 + x^1 + 1
        return (1ull << 22) | (1ull << 2) | (1ull << 1) | 1ull;
      case 63:  // x^63 + x^62 + 1
        return (1ull << 62) | 1ull;
      default: throw ConfigError("running key: no default taps for this degree");
    }
  }

  void check_taps() {
    if (degree_ <= 20) {
      // exact: walk the cycle from state 1 and require full period
      const std::uint64_t full = (1ull << degree_) - 1;
      std::uint64_t s = 1, steps = 0;
      do {
        const auto fb = static_cast<std::uint64_t>(std::popcount(s & taps_) & 1);
        s = (s >> 1) | (fb << (degree_ - 1));
        ++steps;
      } while (s != 1 && steps <= full);
      if (steps != full)
        std::cerr << "[qnrc] warning: LFSR taps are not maximal length (period "
                  << steps << " of " << full << ")\n";
    }
  }

  std::uint32_t m_;
  int degree_;
  std::uint32_t bits_per_symbol_ = 0;
  std::uint64_t taps_ = 0;
  std::uint64_t state_ = 0;
  std::uint64_t bits_drawn_ = 0;
};

inline std::vector<std::uint32_t> expand_running_key(RunningKeyGen& gen, std::size_t n) {
  if (n < 1) throw ConfigError("expand_running_key: n must be >= 1");
  std::vector<std::uint32_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(gen.next_symbol());
  if (gen.bits_drawn() > gen.period())
    std::cerr << "[qnrc] warning: keystream exceeded the LFSR period\n";
  return out;
}

// --------------------------------------------------------- encryption

inline int pol(std::uint32_t z) { return static_cast<int>(z & 1u); }

// theta(X, Z) = [Z/M + (X xor Pol(Z))] * pi
inline double y00_phase(int x, std::uint32_t z, const Y00Config& cfg) {
  if (z >= cfg.m) throw ConfigError("y00_encrypt: running key out of range");
  return (static_cast<double>(z) / cfg.m + ((x ^ pol(z)) & 1)) * M_PI;
}

struct Y00Symbol {
  std::complex<double> amplitude;
  std::int64_t slot = 0;
};

inline Y00Symbol y00_encrypt(int x, std::uint32_t z, const Y00Config& cfg,
                             std::int64_t slot = 0) {
  const double theta = y00_phase(x, z, cfg);
  return {std::polar(cfg.alpha, theta), slot};
}

// --------------------------------------------------------- reception

struct HomodyneOutcome {
  double angle = 0.0;
  double value = 0.0;
};

inline HomodyneOutcome homodyne_measure(const Y00Symbol& sym, double beta,
                                        const Y00Config& cfg, Rng& rng) {
  const std::complex<double> a = sym.amplitude * std::sqrt(cfg.channel_eta);
  const double mean = std::abs(a) * std::cos(std::arg(a) - beta);
  const double var = 0.25 + cfg.excess_noise;
  return {beta, rng.normal(mean, std::sqrt(var))};
}

struct HeterodyneOutcome {
  double x = 0.0;  // cos quadrature
  double p = 0.0;  // sin quadrature
};

inline HeterodyneOutcome heterodyne_measure(const Y00Symbol& sym, const Y00Config& cfg,
                                            Rng& rng) {
  const std::complex<double> a = sym.amplitude * std::sqrt(cfg.channel_eta);
  const double var = 0.5 + cfg.excess_noise;
  return {rng.normal(a.real(), std::sqrt(var)), rng.normal(a.imag(), std::sqrt(var))};
}

// Bob measures at beta = (Z/M) pi; the two candidate states sit at
// +-|A| along that axis and Pol(Z) fixes the sign convention.
inline int y00_decrypt(const HomodyneOutcome& outcome, std::uint32_t z,
                       const Y00Config& cfg) {
  if (z >= cfg.m) throw ConfigError("y00_decrypt: running key out of range");
  const int sign_bit = outcome.value >= 0.0 ? 0 : 1;
  return sign_bit ^ pol(z);
}

inline double bob_decode_angle(std::uint32_t z, const Y00Config& cfg) {
  return static_cast<double>(z) / cfg.m * M_PI;
}

// ----------------------------------------------------------- attacker

struct EveEstimate {
  int x = 0;
  std::uint32_t z = 0;
  std::uint32_t phase_index = 0;  // nearest of the 2M lattice phases
};

// Maximum-likelihood nearest-state decision from a heterodyne pair.
// The 2M phases {k pi / M} map bijectively onto (X xor Pol, Z).
inline EveEstimate eve_nearest_state(const HeterodyneOutcome& het, const Y00Config& cfg) {
  const double angle = std::atan2(het.p, het.x);
  const double step = M_PI / cfg.m;
  const auto two_m = static_cast<std::int64_t>(2 * cfg.m);
  std::int64_t k = static_cast<std::int64_t>(std::llround(angle / step)) % two_m;
  if (k < 0) k += two_m;
  EveEstimate est;
  est.phase_index = static_cast<std::uint32_t>(k);
  est.z = static_cast<std::uint32_t>(k % cfg.m);
  const int x_xor_pol = static_cast<int>(k / cfg.m);
  est.x = x_xor_pol ^ pol(est.z);
  return est;
}

// Known-plaintext variant.  Every lattice phase k pi/M remains
// consistent with a known X (it fixes Z = k mod M with the matching
// parity via Pol), so the candidate set does not shrink and the
// nearest-phase rule carries over; only the residual uncertainty is
// now over Z alone.
inline std::uint32_t eve_known_plaintext_z(const HeterodyneOutcome& het, int /*x_known*/,
                                           const Y00Config& cfg) {
  return eve_nearest_state(het, cfg).z;
}

// Masking count: number of signal states inside one heterodyne phase
// standard deviation, Gamma = 1 + 2 floor(sigma_phase / (pi/M)).
inline std::uint32_t masking_count(const Y00Config& cfg) {
  const double amp = cfg.received_amplitude();
  if (amp <= 0.0) throw ConfigError("masking_count: vanishing amplitude");
  const double sigma_phase = std::sqrt(0.5 + cfg.excess_noise) / amp;
  const double step = M_PI / cfg.m;
  return 1u + 2u * static_cast<std::uint32_t>(std::floor(sigma_phase / step));
}

// The sorted set of distinct signal phases: {k pi / M, k = 0..2M-1}.
inline std::vector<double> signal_phase_lattice(const Y00Config& cfg) {
  std::vector<double> phases;
  for (std::uint32_t z = 0; z < cfg.m; ++z)
    for (int x = 0; x < 2; ++x) {
      double t = std::fmod(y00_phase(x, z, cfg), 2.0 * M_PI);
      if (t < 0) t += 2.0 * M_PI;
      phases.push_back(t);
    }
  std::sort(phases.begin(), phases.end());
  return phases;
}

}  // namespace qkd::qnrc
