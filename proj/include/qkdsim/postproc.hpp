#pragma once

// Classical post-processing: test-bit sampling, exact QBER confidence
// bounds, cascade reconciliation with full leakage accounting, Toeplitz
// privacy amplification and the Wegman-Carter style one-time MAC with
// its key pool.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <optional>
#include <set>
#include <unordered_map>
#include <string>
#include <vector>

#include "qkdsim/bitvec.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/mathx.hpp"
#include "qkdsim/rng.hpp"
#include "qkdsim/security.hpp"

namespace qkd::postproc {

// ------------------------------------------------------- test sampling

struct TestSplit {
  std::vector<std::uint32_t> test_pos;  // sorted positions into the sifted key
  std::vector<std::uint32_t> code_pos;
  std::vector<std::uint8_t> test_a, test_b;
  std::vector<std::uint8_t> code_a, code_b;
};

// Uniform sample without replacement; test and code positions form a
// disjoint cover of the sifted key.
inline TestSplit split_test_bits(const std::vector<std::uint8_t>& sifted_a,
                                 const std::vector<std::uint8_t>& sifted_b,
                                 double test_fraction, Rng& rng) {
  if (sifted_a.empty() || sifted_a.size() != sifted_b.size())
    throw ConfigError("split_test_bits: empty or mismatched sifted keys");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("split_test_bits: fraction must lie in (0,1)");
  const std::size_t n = sifted_a.size();
  auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (k == 0) k = 1;
  if (k >= n) k = n - 1;

  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  TestSplit out;
  out.test_pos.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  out.code_pos.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  std::sort(out.test_pos.begin(), out.test_pos.end());
  std::sort(out.code_pos.begin(), out.code_pos.end());
  for (auto p : out.test_pos) {
    out.test_a.push_back(sifted_a[p]);
    out.test_b.push_back(sifted_b[p]);
  }
  for (auto p : out.code_pos) {
    out.code_a.push_back(sifted_a[p]);
    out.code_b.push_back(sifted_b[p]);
  }
  return out;
}

// ------------------------------------------------------ QBER estimate

struct QberEstimate {
  double point = 0.0;
  double ci_upper = 0.0;  // one-sided upper bound at level 1 - 2^-s
  std::uint64_t n_test = 0;
  bool abort = false;
};

inline QberEstimate estimate_qber(const std::vector<std::uint8_t>& test_a,
                                  const std::vector<std::uint8_t>& test_b,
                                  const SecurityParams& params,
                                  double abort_threshold = 0.11) {
  if (test_a.empty() || test_a.size() != test_b.size())
    throw ConfigError("estimate_qber: need a non-empty matched test set");
  QberEstimate est;
  est.n_test = test_a.size();
  std::uint64_t mism = 0;
  for (std::size_t i = 0; i < test_a.size(); ++i) mism += test_a[i] != test_b[i];
  est.point = static_cast<double>(mism) / static_cast<double>(est.n_test);
  est.ci_upper = clopper_pearson_upper(mism, est.n_test, std::pow(2.0, -params.s));
  est.abort = est.ci_upper >= abort_threshold;
  return est;
}

// ----------------------------------------------------------- GF(2^64)

// Carry-less multiplication modulo x^64 + x^4 + x^3 + x + 1.
inline std::uint64_t gf64_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  while (b) {
    if (b & 1) r ^= a;
    b >>= 1;
    const bool hi = a >> 63;
    a <<= 1;
    if (hi) a ^= 0x1bULL;  // x^4 + x^3 + x + 1
  }
  return r;
}

// ------------------------------------------------ authentication pool

// Reserved secret bits for message authentication.  Every MAC consumes
// 2k = 128 bits (evaluation point + one-time mask), independent of the
// message length.
class AuthKeyPool {
 public:
  static constexpr int kMacBits = 64;
  static constexpr std::uint64_t kConsumptionPerMessage = 2 * kMacBits;

  AuthKeyPool() = default;
  explicit AuthKeyPool(std::vector<std::uint8_t> secret) : bytes_(std::move(secret)) {}

  static AuthKeyPool from_seed(std::uint64_t seed, std::size_t bits) {
    Rng rng(seed);
    std::vector<std::uint8_t> b((bits + 7) / 8);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.next());
    return AuthKeyPool(std::move(b));
  }

  std::uint64_t remaining_bits() const { return bytes_.size() * 8 - consumed_bits_; }
  std::uint64_t consumed_bits() const { return consumed_bits_; }
  std::uint64_t messages() const { return messages_; }

  std::pair<std::uint64_t, std::uint64_t> take_message_key() {
    if (remaining_bits() < kConsumptionPerMessage)
      throw AbortError("POOL_EXHAUSTED: authentication pool cannot pay for the message");
    const std::uint64_t r = take64();
    const std::uint64_t mask = take64();
    ++messages_;
    return {r, mask};
  }

 private:
  std::uint64_t take64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      const std::size_t at = consumed_bits_ / 8 + static_cast<std::size_t>(i);
      v |= static_cast<std::uint64_t>(bytes_[at]) << (8 * i);
      bytes_[at] = 0;  // one-time use, zeroize on consumption
    }
    consumed_bits_ += 64;
    return v;
  }

  std::vector<std::uint8_t> bytes_;
  std::uint64_t consumed_bits_ = 0;
  std::uint64_t messages_ = 0;
};

// Polynomial one-time MAC over GF(2^64).  The bit length is absorbed as
// the leading block, so messages of different lengths never share a
// polynomial.  Forgery probability <= (blocks+1) * 2^-64 per key pair.
inline std::uint64_t wc_tag(const std::vector<std::uint8_t>& message, AuthKeyPool& pool) {
  const auto [r, mask] = pool.take_message_key();
  std::uint64_t acc = static_cast<std::uint64_t>(message.size()) * 8;
  acc = gf64_mul(acc, r);
  for (std::size_t off = 0; off < message.size(); off += 8) {
    std::uint64_t block = 0;
    for (std::size_t i = 0; i < 8 && off + i < message.size(); ++i)
      block |= static_cast<std::uint64_t>(message[off + i]) << (8 * i);
    acc = gf64_mul(acc ^ block, r);
  }
  return acc ^ mask;
}

inline bool wc_verify(const std::vector<std::uint8_t>& message, std::uint64_t tag,
                      AuthKeyPool& pool) {
  return wc_tag(message, pool) == tag;
}

// -------------------------------------------------------- cascade

struct ReconciledKey {
  BitVec bits;
  std::uint64_t leak_bits = 0;  // every disclosed parity plus the verification hash
  bool verified = false;
};

struct CascadeOptions {
  int passes = 4;
  int verify_hash_bits = 64;
  double min_qber_for_sizing = 1e-4;
};

struct CascadeResult {
  ReconciledKey alice;
  ReconciledKey bob;
  std::uint64_t corrections = 0;
  std::uint64_t messages = 0;  // batched authenticated messages used
};

namespace detail {

struct CascadePass {
  std::vector<std::uint32_t> order;       // position of each permuted index
  std::vector<std::uint32_t> block_of;    // key position -> block index
  std::vector<std::uint8_t> mismatch;     // parityA xor parityB per block
  std::uint32_t block_size = 0;
  std::uint32_t n_blocks = 0;
};

}  // namespace detail

// Bidirectional cascade reconciliation.  Bob's string is corrected
// toward Alice's.  Each pass shuffles, partitions into blocks that
// double in size, discloses Alice's block parities, and binary-searches
// odd blocks; every correction back-propagates through earlier passes.
// leak counts Alice's disclosed parity bits plus the verification hash.
inline CascadeResult cascade_reconcile(const std::vector<std::uint8_t>& code_a,
                                       const std::vector<std::uint8_t>& code_b,
                                       double qber_estimate, Rng& rng,
                                       const CascadeOptions& opt = {}) {
  if (code_a.empty() || code_a.size() != code_b.size())
    throw ConfigError("cascade: empty or mismatched code strings");
  if (opt.passes < 1) throw ConfigError("cascade: need at least one pass");
  const std::size_t n = code_a.size();

  std::vector<std::uint8_t> a(code_a), b(code_b);
  std::uint64_t leak = 0, corrections = 0, messages = 0;

  const double q = std::max(qber_estimate, opt.min_qber_for_sizing);
  std::uint32_t k1 = static_cast<std::uint32_t>(std::lround(0.73 / q));
  k1 = std::clamp<std::uint32_t>(k1, 2, static_cast<std::uint32_t>(n));

  std::vector<detail::CascadePass> passes;
  // queue of (pass, block) candidates with odd parity
  std::deque<std::pair<std::uint32_t, std::uint32_t>> queue;
  // Alice's sub-range parities never change once disclosed; memoize so
  // repeated searches of a block pay only for new ranges
  std::vector<std::unordered_map<std::uint64_t, int>> disclosed(
      static_cast<std::size_t>(opt.passes));

  auto parity_range = [](const std::vector<std::uint8_t>& bits,
                         const std::vector<std::uint32_t>& order, std::uint32_t lo,
                         std::uint32_t hi) {
    int p = 0;
    for (std::uint32_t i = lo; i < hi; ++i) p ^= bits[order[i]];
    return p;
  };

  auto alice_parity = [&](std::uint32_t pi, std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t key = (static_cast<std::uint64_t>(lo) << 32) | hi;
    auto& cache = disclosed[pi];
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
    const int p = parity_range(a, passes[pi].order, lo, hi);
    leak += 1;
    cache.emplace(key, p);
    return p;
  };

  auto binary_search_fix = [&](std::uint32_t pi, std::uint32_t blk) {
    auto& pass = passes[pi];
    std::uint32_t lo = blk * pass.block_size;
    std::uint32_t hi = std::min<std::uint32_t>(lo + pass.block_size,
                                               static_cast<std::uint32_t>(n));
    while (hi - lo > 1) {
      const std::uint32_t mid = lo + (hi - lo + 1) / 2;
      const int pa = alice_parity(pi, lo, mid);
      const int pb = parity_range(b, pass.order, lo, mid);
      if (pa != pb)
        hi = mid;
      else
        lo = mid;
    }
    const std::uint32_t pos = pass.order[lo];
    b[pos] ^= 1;
    ++corrections;
    // flipping one bit toggles the containing block of every built pass
    for (std::uint32_t qi = 0; qi < passes.size(); ++qi) {
      const std::uint32_t qblk = passes[qi].block_of[pos];
      passes[qi].mismatch[qblk] ^= 1;
      if (passes[qi].mismatch[qblk]) queue.emplace_back(qi, qblk);
    }
  };

  for (int p = 0; p < opt.passes; ++p) {
    detail::CascadePass pass;
    pass.block_size = std::min<std::uint64_t>(
        static_cast<std::uint64_t>(k1) << p, static_cast<std::uint64_t>(n));
    pass.order.resize(n);
    for (std::size_t i = 0; i < n; ++i) pass.order[i] = static_cast<std::uint32_t>(i);
    if (p > 0) rng.shuffle(pass.order);
    pass.n_blocks = static_cast<std::uint32_t>((n + pass.block_size - 1) / pass.block_size);
    pass.block_of.resize(n);
    for (std::uint32_t i = 0; i < n; ++i)
      pass.block_of[pass.order[i]] = i / pass.block_size;
    pass.mismatch.resize(pass.n_blocks);
    passes.push_back(std::move(pass));
    const std::uint32_t pi = static_cast<std::uint32_t>(passes.size()) - 1;
    auto& cur = passes[pi];
    for (std::uint32_t blk = 0; blk < cur.n_blocks; ++blk) {
      const std::uint32_t lo = blk * cur.block_size;
      const std::uint32_t hi =
          std::min<std::uint32_t>(lo + cur.block_size, static_cast<std::uint32_t>(n));
      const int pa = alice_parity(pi, lo, hi);  // block parity disclosure
      const int pb = parity_range(b, cur.order, lo, hi);
      cur.mismatch[blk] = static_cast<std::uint8_t>(pa != pb);
    }
    for (std::uint32_t blk = 0; blk < cur.n_blocks; ++blk)
      if (cur.mismatch[blk]) queue.emplace_back(pi, blk);
    messages += 2;  // batched parities out, odd-block responses back

    while (!queue.empty()) {
      const auto [qi, qblk] = queue.front();
      queue.pop_front();
      if (!passes[qi].mismatch[qblk]) continue;  // already fixed en route
      binary_search_fix(qi, qblk);
    }
  }

  // verification: disclosed polynomial hash over GF(2^64)
  const std::uint64_t point = rng.next() | 1;
  auto poly_hash = [&](const std::vector<std::uint8_t>& bits) {
    std::uint64_t acc = bits.size();
    acc = gf64_mul(acc, point);
    for (std::size_t off = 0; off < bits.size(); off += 64) {
      std::uint64_t block = 0;
      for (std::size_t i = 0; i < 64 && off + i < bits.size(); ++i)
        block |= static_cast<std::uint64_t>(bits[off + i] & 1) << i;
      acc = gf64_mul(acc ^ block, point);
    }
    return acc;
  };
  const bool equal = poly_hash(a) == poly_hash(b);
  leak += static_cast<std::uint64_t>(opt.verify_hash_bits);
  messages += 2;

  CascadeResult out;
  out.corrections = corrections;
  out.messages = messages;
  out.alice.bits = BitVec(n);
  out.bob.bits = BitVec(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.alice.bits.set(i, a[i]);
    out.bob.bits.set(i, b[i]);
  }
  out.alice.leak_bits = out.bob.leak_bits = leak;
  out.alice.verified = out.bob.verified = equal;
  return out;
}

// --------------------------------------------- privacy amplification

struct KeyMeta {
  SecurityParams params;
  std::uint64_t n_in = 0;
  std::uint64_t leak_bits = 0;
  double single_photon_fraction = 1.0;
  double e1_upper = 0.0;
  bool non_composable = false;  // heuristic rate path (B92/DPS)
};

struct SecretKey {
  BitVec bits;
  KeyMeta meta;
};

// Final length: n*A*(1 - h2(e1)) - leak - 2l - s, clamped at zero.
inline std::int64_t secret_length(std::uint64_t n, double single_photon_fraction,
                                  double e1_upper, std::uint64_t leak_bits,
                                  const SecurityParams& params) {
  const double raw = static_cast<double>(n) * single_photon_fraction *
                         (1.0 - binary_entropy(e1_upper)) -
                     static_cast<double>(leak_bits) - 2.0 * params.l - params.s;
  if (raw <= 0.0) return 0;
  return static_cast<std::int64_t>(std::floor(raw));
}

namespace detail {

// XOR bits d[shift .. shift+len) into out[0 .. len).
inline void xor_shifted(std::vector<std::uint64_t>& out, const std::vector<std::uint64_t>& d,
                        std::size_t shift, std::size_t len) {
  const std::size_t word = shift >> 6, bit = shift & 63;
  const std::size_t out_words = (len + 63) / 64;
  for (std::size_t w = 0; w < out_words; ++w) {
    std::uint64_t v = d[word + w] >> bit;
    if (bit && word + w + 1 < d.size()) v |= d[word + w + 1] << (64 - bit);
    out[w] ^= v;
  }
}

}  // namespace detail

// Toeplitz extractor: T[j][i] = diag[n-1 + j - i], diag drawn from the
// (publicly disclosed) seeded rng.
inline BitVec toeplitz_hash(const BitVec& input, std::size_t out_len, Rng& rng) {
  const std::size_t n = input.size();
  if (out_len == 0) return BitVec();
  const std::size_t diag_bits = n + out_len - 1;
  std::vector<std::uint64_t> diag((diag_bits + 63) / 64 + 1, 0);
  for (std::size_t w = 0; w + 1 < diag.size(); ++w) diag[w] = rng.next();

  std::vector<std::uint64_t> acc((out_len + 63) / 64, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (input.get(i)) detail::xor_shifted(acc, diag, n - 1 - i, out_len);

  BitVec out(out_len);
  for (std::size_t j = 0; j < out_len; ++j)
    if ((acc[j >> 6] >> (j & 63)) & 1) out.set(j, true);
  return out;
}

inline SecretKey privacy_amplify(const ReconciledKey& key, double e1_upper,
                                 double single_photon_fraction, const SecurityParams& params,
                                 Rng& rng) {
  SecretKey out;
  out.meta.params = params;
  out.meta.n_in = key.bits.size();
  out.meta.leak_bits = key.leak_bits;
  out.meta.single_photon_fraction = single_photon_fraction;
  out.meta.e1_upper = e1_upper;
  const std::int64_t len = secret_length(key.bits.size(), single_photon_fraction, e1_upper,
                                         key.leak_bits, params);
  out.bits = toeplitz_hash(key.bits, static_cast<std::size_t>(len), rng);
  return out;
}

// --------------------------------------------------- key-material file

// Format: magic "QKEY1", 64-bit little-endian bit length, raw key
// bytes, 16-byte digest over bytes and metadata.
inline std::array<std::uint8_t, 16> key_file_digest(const std::vector<std::uint8_t>& bytes,
                                                    std::uint64_t bit_len) {
  std::array<std::uint8_t, 16> d{};
  const std::uint64_t h1 = fnv1a64(bytes.data(), bytes.size(), 0xcbf29ce484222325ULL ^ bit_len);
  const std::uint64_t h2 =
      fnv1a64(bytes.data(), bytes.size(), 0x9ae16a3b2f90404fULL ^ (bit_len * 0x9e3779b97f4a7c15ULL));
  std::memcpy(d.data(), &h1, 8);
  std::memcpy(d.data() + 8, &h2, 8);
  return d;
}

inline void write_key_file(const std::string& path, const BitVec& key) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("write_key_file: cannot open " + path);
  f.write("QKEY1", 5);
  const std::uint64_t bits = key.size();
  std::uint8_t len_le[8];
  for (int i = 0; i < 8; ++i) len_le[i] = static_cast<std::uint8_t>(bits >> (8 * i));
  f.write(reinterpret_cast<const char*>(len_le), 8);
  const auto bytes = key.to_bytes();
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  const auto digest = key_file_digest(bytes, bits);
  f.write(reinterpret_cast<const char*>(digest.data()), 16);
}

inline BitVec read_key_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("read_key_file: cannot open " + path);
  char magic[5];
  f.read(magic, 5);
  if (!f || std::string(magic, 5) != "QKEY1")
    throw ConfigError("read_key_file: bad magic in " + path);
  std::uint8_t len_le[8];
  f.read(reinterpret_cast<char*>(len_le), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(len_le[i]) << (8 * i);
  std::vector<std::uint8_t> bytes((bits + 7) / 8);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::array<std::uint8_t, 16> digest{};
  f.read(reinterpret_cast<char*>(digest.data()), 16);
  if (!f) throw ConfigError("read_key_file: truncated file " + path);
  if (digest != key_file_digest(bytes, bits))
    throw ConfigError("read_key_file: digest mismatch in " + path);
  BitVec out = BitVec::from_bytes(bytes);
  return out.slice(0, bits);
}

}  // namespace qkd::postproc
