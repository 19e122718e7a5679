#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qkdsim/postproc.hpp"

using namespace qkd;
using namespace qkd::postproc;

namespace {

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> noisy_pair(
    std::size_t n, double qber, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.bernoulli(0.5);
    b[i] = a[i] ^ static_cast<std::uint8_t>(rng.bernoulli(qber));
  }
  return {a, b};
}

// realized error fraction of exactly qber: errors at k positions sampled
// without replacement
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> exact_qber_pair(
    std::size_t n, double qber, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = rng.bernoulli(0.5);
  b = a;
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  const auto k = static_cast<std::size_t>(std::llround(qber * static_cast<double>(n)));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
    b[idx[i]] ^= 1;
  }
  return {a, b};
}

}  // namespace

TEST_CASE("test split is an exact disjoint cover", "[postproc]") {
  auto [a, b] = noisy_pair(1000, 0.02, 1);
  Rng rng(2);
  const auto split = split_test_bits(a, b, 0.5, rng);
  REQUIRE(split.test_pos.size() == 500);
  REQUIRE(split.code_pos.size() == 500);
  std::vector<bool> seen(1000, false);
  for (auto p : split.test_pos) seen[p] = true;
  for (auto p : split.code_pos) {
    REQUIRE_FALSE(seen[p]);
    seen[p] = true;
  }
  for (bool s : seen) REQUIRE(s);
}

TEST_CASE("same seed gives the same split", "[postproc]") {
  auto [a, b] = noisy_pair(997, 0.02, 3);
  Rng r1(42), r2(42);
  REQUIRE(split_test_bits(a, b, 0.3, r1).test_pos ==
          split_test_bits(a, b, 0.3, r2).test_pos);
}

TEST_CASE("test and code QBER stay within the sampling bound", "[postproc]") {
  // Hoeffding-style bound for sampling without replacement at level 1-2^-10
  const std::size_t n = 4000;
  const double delta = std::pow(2.0, -10);
  for (int trial = 0; trial < 100; ++trial) {
    auto [a, b] = noisy_pair(n, 0.05, 100 + trial);
    Rng rng(200 + trial);
    const auto split = split_test_bits(a, b, 0.5, rng);
    auto qber_of = [](const std::vector<std::uint8_t>& x,
                      const std::vector<std::uint8_t>& y) {
      std::size_t m = 0;
      for (std::size_t i = 0; i < x.size(); ++i) m += x[i] != y[i];
      return static_cast<double>(m) / static_cast<double>(x.size());
    };
    const double qt = qber_of(split.test_a, split.test_b);
    const double qc = qber_of(split.code_a, split.code_b);
    const double nt = static_cast<double>(split.test_pos.size());
    const double nc = static_cast<double>(split.code_pos.size());
    const double eps = std::sqrt(std::log(2.0 / delta) * (nt + nc) / (2.0 * nt * nc));
    REQUIRE(std::fabs(qt - qc) <= eps);
  }
}

TEST_CASE("clopper-pearson estimate on a clean test set", "[postproc]") {
  std::vector<std::uint8_t> a(10000, 0), b(10000, 0);
  SecurityParams sec;  // s = 10
  const auto est = estimate_qber(a, b, sec);
  REQUIRE(est.point == 0.0);
  REQUIRE(est.ci_upper < 0.001);
  const double closed_form = 1.0 - std::pow(std::pow(2.0, -10), 1.0 / 10000.0);
  REQUIRE(est.ci_upper == Approx(closed_form).epsilon(1e-5));
  REQUIRE_FALSE(est.abort);
}

TEST_CASE("quarter mismatches abort", "[postproc]") {
  auto [a, b] = noisy_pair(10000, 0.25, 4);
  const auto est = estimate_qber(a, b, {});
  REQUIRE(est.abort);
}

TEST_CASE("injected 2% error is recovered by the estimate", "[postproc]") {
  auto [a, b] = noisy_pair(20000, 0.02, 5);
  const auto est = estimate_qber(a, b, {});
  REQUIRE(est.point == Approx(0.02).margin(0.005));
  REQUIRE(est.ci_upper > est.point);
  REQUIRE(est.ci_upper <= 0.5);
  REQUIRE_FALSE(est.abort);
}

TEST_CASE("cascade on identical inputs leaks only parity rounds", "[postproc]") {
  const std::size_t n = 10000;
  auto [a, b] = noisy_pair(n, 0.0, 6);
  b = a;
  Rng rng(7);
  CascadeOptions opt;
  const auto res = cascade_reconcile(a, b, 0.0, rng, opt);
  REQUIRE(res.corrections == 0);
  REQUIRE(res.alice.verified);
  // recompute the expected parity-disclosure count from the block rule
  std::uint64_t expect = 0;
  std::uint32_t k1 = static_cast<std::uint32_t>(std::lround(0.73 / opt.min_qber_for_sizing));
  k1 = std::min<std::uint32_t>(k1, n);
  for (int p = 0; p < opt.passes; ++p) {
    const std::uint64_t bs = std::min<std::uint64_t>(static_cast<std::uint64_t>(k1) << p, n);
    expect += (n + bs - 1) / bs;
  }
  expect += opt.verify_hash_bits;
  REQUIRE(res.alice.leak_bits == expect);
}

TEST_CASE("cascade corrects 2% errors within the leakage budget", "[postproc]") {
  const std::size_t n = 10000;
  const double budget = 1.25 * n * binary_entropy(0.02);
  int equal = 0, within_budget = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto [a, b] = exact_qber_pair(n, 0.02, 1000 + trial);
    Rng rng(2000 + trial);
    const auto res = cascade_reconcile(a, b, 0.02, rng);
    if (res.alice.verified && res.alice.bits == res.bob.bits) ++equal;
    if (res.alice.leak_bits <= budget) ++within_budget;
  }
  REQUIRE(equal == 100);
  REQUIRE(within_budget >= 95);
}

TEST_CASE("cascade under attack-level noise fails or destroys the key", "[postproc]") {
  const std::size_t n = 4000;
  auto [a, b] = noisy_pair(n, 0.25, 8);
  Rng rng(9);
  const auto res = cascade_reconcile(a, b, 0.25, rng);
  if (res.alice.verified) {
    // equal keys at enormous leak: privacy amplification must return nothing
    const auto len = secret_length(n, 1.0, 0.25, res.alice.leak_bits, {});
    REQUIRE(len == 0);
  } else {
    REQUIRE_FALSE(res.bob.verified);
  }
}

TEST_CASE("privacy amplification with no penalties keeps every bit", "[postproc]") {
  ReconciledKey key;
  key.bits = BitVec(512);
  Rng bits(10);
  for (std::size_t i = 0; i < key.bits.size(); ++i) key.bits.set(i, bits.bernoulli(0.5));
  key.leak_bits = 0;
  key.verified = true;
  SecurityParams sec;
  sec.s = 0;
  sec.l = 0;
  Rng rng(11);
  const auto out = privacy_amplify(key, 0.0, 1.0, sec, rng);
  REQUIRE(out.bits.size() == 512);
}

TEST_CASE("toeplitz hashing is linear over GF(2)", "[postproc]") {
  Rng rng(12);
  const std::size_t n = 300, l = 120;
  BitVec x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x.set(i, rng.bernoulli(0.5));
    y.set(i, rng.bernoulli(0.5));
  }
  Rng h1(77), h2(77), h3(77);
  const auto tx = toeplitz_hash(x, l, h1);
  const auto ty = toeplitz_hash(y, l, h2);
  const auto txy = toeplitz_hash(x ^ y, l, h3);
  REQUIRE((tx ^ ty) == txy);
}

TEST_CASE("secret length reproduces exactly from metadata", "[postproc]") {
  auto [a, b] = noisy_pair(10000, 0.02, 13);
  Rng rng(14);
  const auto res = cascade_reconcile(a, b, 0.02, rng);
  REQUIRE(res.alice.verified);
  SecurityParams sec;  // s = l = 10
  Rng pa_rng(15);
  const auto key = privacy_amplify(res.alice, 0.02, 1.0, sec, pa_rng);
  const auto expect = secret_length(key.meta.n_in, key.meta.single_photon_fraction,
                                    key.meta.e1_upper, key.meta.leak_bits, key.meta.params);
  REQUIRE(static_cast<std::int64_t>(key.bits.size()) == expect);
  REQUIRE(key.bits.size() > 0);
}

TEST_CASE("secret length is monotone in its penalties", "[postproc]") {
  const std::uint64_t n = 10000;
  double prev = 1e9;
  for (double e1 : {0.0, 0.01, 0.05, 0.1}) {
    const auto len = static_cast<double>(secret_length(n, 1.0, e1, 500, {}));
    REQUIRE(len <= prev);
    prev = len;
  }
  prev = 1e9;
  for (std::uint64_t leak : {0ull, 100ull, 1000ull, 5000ull}) {
    const auto len = static_cast<double>(secret_length(n, 1.0, 0.02, leak, {}));
    REQUIRE(len <= prev);
    prev = len;
  }
  SecurityParams weak{1, 1}, strong{40, 40};
  REQUIRE(secret_length(n, 1.0, 0.02, 500, strong) <=
          secret_length(n, 1.0, 0.02, 500, weak));
}

TEST_CASE("wegman-carter round trip", "[postproc]") {
  auto pool_a = AuthKeyPool::from_seed(99, 4096);
  auto pool_b = AuthKeyPool::from_seed(99, 4096);
  std::vector<std::uint8_t> msg = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto tag = wc_tag(msg, pool_a);
  REQUIRE(wc_verify(msg, tag, pool_b));
  REQUIRE(pool_a.consumed_bits() == 128);
  REQUIRE(pool_b.consumed_bits() == 128);
}

TEST_CASE("single-bit flips never verify", "[postproc]") {
  Rng rng(16);
  int rejected = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    auto pool_a = AuthKeyPool::from_seed(1000 + t, 256);
    auto pool_b = AuthKeyPool::from_seed(1000 + t, 256);
    std::vector<std::uint8_t> msg(16);
    for (auto& v : msg) v = static_cast<std::uint8_t>(rng.next());
    const auto tag = wc_tag(msg, pool_a);
    auto tampered = msg;
    tampered[rng.below(tampered.size())] ^=
        static_cast<std::uint8_t>(1u << rng.below(8));
    rejected += !wc_verify(tampered, tag, pool_b);
  }
  REQUIRE(rejected == trials);
}

TEST_CASE("mac consumption is constant in message length", "[postproc]") {
  for (std::size_t len : {std::size_t{1}, std::size_t{100}, std::size_t{100000}}) {
    auto pool = AuthKeyPool::from_seed(17, 1024);
    std::vector<std::uint8_t> msg(len, 0xab);
    (void)wc_tag(msg, pool);
    REQUIRE(pool.consumed_bits() == 128);
  }
}

TEST_CASE("exhausted pool refuses to tag", "[postproc]") {
  auto pool = AuthKeyPool::from_seed(18, 128);
  std::vector<std::uint8_t> msg = {1, 2, 3};
  (void)wc_tag(msg, pool);
  REQUIRE_THROWS_AS(wc_tag(msg, pool), AbortError);
}

TEST_CASE("key file round trip and digest check", "[postproc]") {
  Rng rng(19);
  BitVec key(1337);
  for (std::size_t i = 0; i < key.size(); ++i) key.set(i, rng.bernoulli(0.5));
  const std::string path = "qkey_test.bin";
  write_key_file(path, key);
  REQUIRE(read_key_file(path) == key);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(20);
    char c;
    f.get(c);
    f.seekp(20);
    f.put(static_cast<char>(c ^ 0x40));
  }
  REQUIRE_THROWS_AS(read_key_file(path), ConfigError);
  std::remove(path.c_str());
}
