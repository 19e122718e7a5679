#pragma once

// Trusted-repeater network: per-link key stores fed by simulated QKD
// sessions (or a calibrated rate model), minimum-hop path finding with
// bottleneck tie-breaks, hop-by-hop OTP+MAC secret transport with
// all-or-nothing reservations, passive optical switching and the
// node-compromise probe that demonstrates the trust assumption.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkdsim/errors.hpp"
#include "qkdsim/fastpath.hpp"
#include "qkdsim/pipeline.hpp"
#include "qkdsim/postproc.hpp"
#include "qkdsim/protocols.hpp"

namespace qkd::netsim {

using NodeId = std::uint32_t;

struct LinkConfig {
  double loss_db = 0.0;
  protocols::SessionConfig session;   // per-link QKD session template
  pipeline::PostprocConfig post;
};

struct Link {
  NodeId a = 0, b = 0;
  LinkConfig cfg;
};

struct NetworkGraph {
  std::vector<std::string> node_names;
  std::vector<Link> links;

  NodeId node_count() const { return static_cast<NodeId>(node_names.size()); }

  std::optional<std::size_t> link_between(NodeId x, NodeId y) const {
    for (std::size_t i = 0; i < links.size(); ++i)
      if ((links[i].a == x && links[i].b == y) || (links[i].a == y && links[i].b == x))
        return i;
    return std::nullopt;
  }

  void validate() const {
    for (const auto& l : links) {
      if (l.a == l.b) throw ConfigError("network: link endpoints must differ");
      if (l.a >= node_count() || l.b >= node_count())
        throw ConfigError("network: link references an unknown node");
    }
    for (std::size_t i = 0; i < links.size(); ++i)
      for (std::size_t j = i + 1; j < links.size(); ++j)
        if ((links[i].a == links[j].a && links[i].b == links[j].b) ||
            (links[i].a == links[j].b && links[i].b == links[j].a))
          throw ConfigError("network: duplicate link");
  }
};

// ------------------------------------------------------------ key store

// Per-link reservoir of distilled secret bits with reserve/commit
// semantics and an audit trail.  Consumption runs front-to-back, bits
// are zeroized as they leave, so no key bit can serve two ciphertexts.
class KeyStore {
 public:
  enum class Purpose : std::uint8_t { OTP, AUTH };

  struct AuditEntry {
    std::uint64_t offset_bits = 0;
    std::uint64_t len_bits = 0;
    Purpose purpose = Purpose::OTP;
  };

  void deposit(const std::vector<std::uint8_t>& bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    produced_bits_ += bytes.size() * 8;
  }

  std::uint64_t produced_bits() const { return produced_bits_; }
  std::uint64_t consumed_otp_bits() const { return consumed_otp_; }
  std::uint64_t consumed_auth_bits() const { return consumed_auth_; }
  std::uint64_t reserved_bits() const { return reserved_; }
  std::uint64_t available_bits() const {
    return produced_bits_ - consumed_otp_ - consumed_auth_ - reserved_;
  }
  const std::vector<AuditEntry>& audit() const { return audit_; }

  // test access: snapshot of the bytes that the next take() calls will
  // hand out (the wiretap oracle compares ciphertexts against these)
  std::vector<std::uint8_t> peek_front(std::size_t n_bytes) const {
    const std::size_t at = static_cast<std::size_t>(head_bits_ / 8);
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < n_bytes && at + i < buffer_.size(); ++i)
      out.push_back(buffer_[at + i]);
    return out;
  }

  bool reserve(std::uint64_t bits) {
    if (available_bits() < bits) return false;
    reserved_ += bits;
    return true;
  }

  void release(std::uint64_t bits) {
    if (bits > reserved_) throw ConfigError("keystore: releasing more than reserved");
    reserved_ -= bits;
  }

  // consume previously reserved bits (byte-aligned)
  std::vector<std::uint8_t> take(std::uint64_t bits, Purpose purpose) {
    if (bits % 8 != 0) throw ConfigError("keystore: consumption must be byte aligned");
    if (bits > reserved_) throw ConfigError("keystore: take without reservation");
    const std::size_t at = static_cast<std::size_t>(head_bits_ / 8);
    const std::size_t n = static_cast<std::size_t>(bits / 8);
    if (at + n > buffer_.size()) throw ConfigError("keystore: buffer underrun");
    std::vector<std::uint8_t> out(buffer_.begin() + static_cast<std::ptrdiff_t>(at),
                                  buffer_.begin() + static_cast<std::ptrdiff_t>(at + n));
    std::fill(buffer_.begin() + static_cast<std::ptrdiff_t>(at),
              buffer_.begin() + static_cast<std::ptrdiff_t>(at + n), std::uint8_t{0});
    audit_.push_back({head_bits_, bits, purpose});
    head_bits_ += bits;
    reserved_ -= bits;
    (purpose == Purpose::OTP ? consumed_otp_ : consumed_auth_) += bits;
    return out;
  }

 private:
  std::vector<std::uint8_t> buffer_;
  std::uint64_t head_bits_ = 0;
  std::uint64_t produced_bits_ = 0;
  std::uint64_t consumed_otp_ = 0;
  std::uint64_t consumed_auth_ = 0;
  std::uint64_t reserved_ = 0;
  std::vector<AuditEntry> audit_;
};

struct ProvisionReport {
  struct LinkOutcome {
    std::size_t link = 0;
    std::uint64_t deposited_bits = 0;
    bool zero_rate = false;
    bool keys_matched = true;  // FULL_SIM: Alice's and Bob's keys agreed
    std::vector<std::uint8_t> deposited;  // the key material pushed to the store
  };
  std::vector<LinkOutcome> links;
};

struct NetworkState {
  NetworkGraph graph;
  std::vector<KeyStore> stores;  // one shared store per link

  explicit NetworkState(NetworkGraph g) : graph(std::move(g)), stores(graph.links.size()) {}

  // bootstrap secrets are per link, so their count scales with the
  // number of links rather than node pairs
  void bootstrap(std::uint64_t bits_per_link, std::uint64_t seed) {
    for (std::size_t i = 0; i < stores.size(); ++i) {
      Rng rng(derive_seed(seed, 0xb0075ull + i));
      std::vector<std::uint8_t> b(static_cast<std::size_t>((bits_per_link + 7) / 8));
      for (auto& v : b) v = static_cast<std::uint8_t>(rng.next());
      stores[i].deposit(b);
    }
  }
};

enum class ProvisionMode : std::uint8_t { FULL_SIM, RATE_MODEL };

// Expected secret rate per pulse for a link configuration, evaluated on
// the analytic session statistics (used by RATE_MODEL provisioning and
// per-point mu optimization).
inline double analytic_rate(const protocols::SessionConfig& session, double loss_db,
                            const photonics::DetectorModel& det,
                            protocols::RateMode mode, double f_ec = 1.1,
                            const SecurityParams& sec = {}) {
  photonics::ChannelModel ch;
  ch.loss_db = loss_db;
  const auto stats = protocols::expected_session_stats(session, ch, det);
  std::optional<protocols::DecoyBounds> bounds;
  if (mode == protocols::RateMode::DECOY) {
    double mu_sig = 0.0, mu_weak = 0.0;
    for (double mu : session.source.mu_by_class) mu_sig = std::max(mu_sig, mu);
    mu_weak = mu_sig;
    for (double mu : session.source.mu_by_class)
      if (mu > 0.0 && mu < mu_weak) mu_weak = mu;
    bounds = protocols::decoy_bound(stats, mu_sig, mu_weak);
  }
  return protocols::key_rate(stats, bounds, mode, f_ec, sec);
}

inline ProvisionReport provision_links(NetworkState& net, ProvisionMode mode,
                                       std::uint64_t duration_pulses, std::uint64_t seed) {
  net.graph.validate();
  ProvisionReport report;
  for (std::size_t i = 0; i < net.graph.links.size(); ++i) {
    const auto& link = net.graph.links[i];
    ProvisionReport::LinkOutcome out;
    out.link = i;
    photonics::ChannelModel ch;
    ch.loss_db = link.cfg.loss_db;

    if (mode == ProvisionMode::FULL_SIM) {
      auto session = link.cfg.session;
      session.n_pulses = duration_pulses;
      session.seed = derive_seed(seed, 0xf111ull + i);
      const auto res = pipeline::run_full_session(session, ch, {}, {}, link.cfg.post);
      if (res.status == pipeline::SessionStatus::OK && res.key_alice.bits.size() >= 8) {
        out.keys_matched = res.key_alice.bits == res.key_bob.bits;
        if (out.keys_matched) {
          auto bytes = res.key_alice.bits.to_bytes();
          bytes.resize(res.key_alice.bits.size() / 8);  // whole bytes only
          net.stores[i].deposit(bytes);
          out.deposited_bits = bytes.size() * 8;
          out.deposited = std::move(bytes);
        }
      }
    } else {
      auto session = link.cfg.session;
      session.n_pulses = duration_pulses;
      const auto rate_mode =
          link.cfg.post.rate_mode.value_or(pipeline::default_rate_mode(session));
      const double rate = analytic_rate(session, link.cfg.loss_db, {}, rate_mode, 1.1,
                                        link.cfg.post.security);
      const auto bits = static_cast<std::uint64_t>(rate * static_cast<double>(duration_pulses));
      if (bits >= 8) {
        Rng rng(derive_seed(seed, 0x4a7eull + i));
        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(bits / 8));
        for (auto& v : bytes) v = static_cast<std::uint8_t>(rng.next());
        net.stores[i].deposit(bytes);
        out.deposited_bits = bytes.size() * 8;
        out.deposited = std::move(bytes);
      }
    }
    out.zero_rate = out.deposited_bits == 0;
    report.links.push_back(out);
  }
  return report;
}

// ---------------------------------------------------------- path find

enum class PathStatus : std::uint8_t { OK, NO_PATH, NO_KEY };

struct PathResult {
  PathStatus status = PathStatus::NO_PATH;
  std::vector<NodeId> nodes;
  std::uint64_t bottleneck_bits = 0;
};

// Minimum-hop path; ties broken by maximum bottleneck available key,
// then lexicographically smallest node sequence.  When required_bits is
// set and even the best path cannot pay, the result is NO_KEY.
inline PathResult find_path(const NetworkState& net, NodeId src, NodeId dst,
                            std::uint64_t required_bits = 0) {
  if (src == dst) throw ConfigError("find_path: src and dst must differ");
  const auto n = net.graph.node_count();
  if (src >= n || dst >= n) throw ConfigError("find_path: unknown node");

  // BFS layering from src
  constexpr std::uint32_t kUnreached = 0xffffffffu;
  std::vector<std::uint32_t> dist(n, kUnreached);
  dist[src] = 0;
  std::vector<NodeId> frontier{src};
  while (!frontier.empty()) {
    std::vector<NodeId> next;
    for (NodeId u : frontier)
      for (std::size_t li = 0; li < net.graph.links.size(); ++li) {
        const auto& l = net.graph.links[li];
        if (l.a != u && l.b != u) continue;
        const NodeId v = l.a == u ? l.b : l.a;
        if (dist[v] == kUnreached) {
          dist[v] = dist[u] + 1;
          next.push_back(v);
        }
      }
    frontier = std::move(next);
  }
  if (dist[dst] == kUnreached) return {};

  struct Best {
    std::uint64_t bottleneck = 0;
    std::vector<NodeId> path;
    bool set = false;
  };
  std::vector<Best> best(n);
  best[src] = {~std::uint64_t{0}, {src}, true};
  // dynamic program over BFS layers
  for (std::uint32_t layer = 1; layer <= dist[dst]; ++layer) {
    for (NodeId v = 0; v < n; ++v) {
      if (dist[v] != layer) continue;
      for (std::size_t li = 0; li < net.graph.links.size(); ++li) {
        const auto& l = net.graph.links[li];
        if (l.a != v && l.b != v) continue;
        const NodeId u = l.a == v ? l.b : l.a;
        if (dist[u] + 1 != layer || !best[u].set) continue;
        const std::uint64_t bn =
            std::min(best[u].bottleneck, net.stores[li].available_bits());
        auto cand = best[u].path;
        cand.push_back(v);
        const bool better =
            !best[v].set || bn > best[v].bottleneck ||
            (bn == best[v].bottleneck && cand < best[v].path);
        if (better) best[v] = {bn, std::move(cand), true};
      }
    }
  }
  PathResult res;
  res.nodes = best[dst].path;
  res.bottleneck_bits = best[dst].bottleneck;
  res.status = PathStatus::OK;
  if (required_bits > 0 && res.bottleneck_bits < required_bits) res.status = PathStatus::NO_KEY;
  return res;
}

// ------------------------------------------------------- hop transport

struct SecretPayload {
  std::vector<std::uint8_t> bytes;  // generated by the sender's RNG stand-in

  static SecretPayload random(std::size_t n_bytes, std::uint64_t seed) {
    if (n_bytes == 0) throw ConfigError("payload: length must be >= 1");
    Rng rng(seed);
    SecretPayload p;
    p.bytes.resize(n_bytes);
    for (auto& v : p.bytes) v = static_cast<std::uint8_t>(rng.next());
    return p;
  }
};

struct TransportMessage {
  std::vector<std::uint8_t> ciphertext;
  std::uint64_t tag = 0;
  std::vector<NodeId> remaining_path;
  std::uint32_t payload_len = 0;
};

enum class TransportStatus : std::uint8_t { DELIVERED, NO_PATH, NO_KEY, AUTH_FAIL };

struct HopTrace {
  std::size_t link = 0;
  std::vector<std::uint8_t> ciphertext;
  std::uint64_t consumed_bits = 0;
};

struct DeliveryReport {
  TransportStatus status = TransportStatus::NO_PATH;
  std::vector<NodeId> path;
  std::vector<HopTrace> hops;
  std::vector<std::uint8_t> delivered;  // plaintext at the recipient
  std::size_t fail_hop = 0;             // hop index for AUTH_FAIL
  // plaintext views per node along the path (the trust assumption)
  std::map<NodeId, std::vector<std::uint8_t>> node_plaintext;
};

// test hook: flip one ciphertext bit in flight on a chosen hop
struct TamperSpec {
  bool enabled = false;
  std::size_t hop = 0;
  std::size_t bit = 0;
};

inline std::vector<std::uint8_t> header_bytes(const TransportMessage& msg) {
  std::vector<std::uint8_t> h;
  h.push_back(static_cast<std::uint8_t>(msg.payload_len));
  h.push_back(static_cast<std::uint8_t>(msg.payload_len >> 8));
  h.push_back(static_cast<std::uint8_t>(msg.payload_len >> 16));
  h.push_back(static_cast<std::uint8_t>(msg.payload_len >> 24));
  for (auto nid : msg.remaining_path) {
    h.push_back(static_cast<std::uint8_t>(nid));
    h.push_back(static_cast<std::uint8_t>(nid >> 8));
  }
  return h;
}

// Hop-by-hop information-theoretically secure transport: at each node
// the outgoing secret is one-time-pad encrypted with the link key and
// sent with a one-time MAC; the next node verifies the tag before
// decrypting, then re-encrypts for its outgoing link.
inline DeliveryReport hop_transport(const SecretPayload& payload,
                                    const std::vector<NodeId>& path, NetworkState& net,
                                    const TamperSpec& tamper = {}) {
  if (payload.bytes.empty()) throw ConfigError("hop_transport: empty payload");
  if (path.size() < 2) throw ConfigError("hop_transport: need at least two nodes");

  DeliveryReport report;
  report.path = path;
  const std::uint64_t payload_bits = payload.bytes.size() * 8;
  const std::uint64_t per_link_bits =
      payload_bits + postproc::AuthKeyPool::kConsumptionPerMessage;

  // resolve links and make the all-or-nothing reservation
  std::vector<std::size_t> links;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto li = net.graph.link_between(path[i], path[i + 1]);
    if (!li) {
      report.status = TransportStatus::NO_PATH;
      return report;
    }
    links.push_back(*li);
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (!net.stores[links[i]].reserve(per_link_bits)) {
      for (std::size_t j = 0; j < i; ++j) net.stores[links[j]].release(per_link_bits);
      report.status = TransportStatus::NO_KEY;
      return report;  // nothing consumed, nothing sent
    }
  }

  std::vector<std::uint8_t> plain = payload.bytes;
  report.node_plaintext[path[0]] = plain;
  for (std::size_t hop = 0; hop < links.size(); ++hop) {
    auto& store = net.stores[links[hop]];
    const auto otp = store.take(payload_bits, KeyStore::Purpose::OTP);
    const auto auth_bytes =
        store.take(postproc::AuthKeyPool::kConsumptionPerMessage, KeyStore::Purpose::AUTH);

    TransportMessage msg;
    msg.payload_len = static_cast<std::uint32_t>(payload.bytes.size());
    msg.remaining_path.assign(path.begin() + static_cast<std::ptrdiff_t>(hop + 1), path.end());
    msg.ciphertext.resize(plain.size());
    for (std::size_t i = 0; i < plain.size(); ++i) msg.ciphertext[i] = plain[i] ^ otp[i];

    postproc::AuthKeyPool sender_pool(auth_bytes), receiver_pool(auth_bytes);
    auto signed_bytes = msg.ciphertext;
    const auto hdr = header_bytes(msg);
    signed_bytes.insert(signed_bytes.end(), hdr.begin(), hdr.end());
    msg.tag = postproc::wc_tag(signed_bytes, sender_pool);

    // in flight
    if (tamper.enabled && tamper.hop == hop)
      msg.ciphertext[tamper.bit / 8] ^= static_cast<std::uint8_t>(1u << (tamper.bit % 8));

    HopTrace trace;
    trace.link = links[hop];
    trace.ciphertext = msg.ciphertext;
    trace.consumed_bits = per_link_bits;
    report.hops.push_back(trace);

    // receiving node: verify before decrypting
    auto received = msg.ciphertext;
    const auto hdr2 = header_bytes(msg);
    received.insert(received.end(), hdr2.begin(), hdr2.end());
    if (!postproc::wc_verify(received, msg.tag, receiver_pool)) {
      report.status = TransportStatus::AUTH_FAIL;
      report.fail_hop = hop;
      // downstream reservations roll back untouched; consumed bits at
      // executed hops stay burned (one-time use)
      for (std::size_t j = hop + 1; j < links.size(); ++j)
        net.stores[links[j]].release(per_link_bits);
      return report;
    }
    std::vector<std::uint8_t> next_plain(msg.ciphertext.size());
    for (std::size_t i = 0; i < next_plain.size(); ++i) next_plain[i] = msg.ciphertext[i] ^ otp[i];
    plain = std::move(next_plain);
    report.node_plaintext[path[hop + 1]] = plain;
  }
  report.delivered = plain;
  report.status = TransportStatus::DELIVERED;
  return report;
}

// Every payload that transited the node in plaintext; nodes on a path
// hold the full secret, which is exactly the trust assumption.
inline std::vector<std::vector<std::uint8_t>> compromise_probe(
    NodeId node, const std::vector<DeliveryReport>& transcript) {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& rep : transcript) {
    const auto it = rep.node_plaintext.find(node);
    if (it != rep.node_plaintext.end()) out.push_back(it->second);
  }
  return out;
}

// ------------------------------------------------- passive switching

struct SwitchedSessionResult {
  protocols::SiftedKey alice1, bob1;
  protocols::SiftedKey alice2, bob2;
};

// One Alice behind a passive beam splitter feeding two Bobs; each pulse
// routes to Bob1 with probability `ratio` and the two sifted keys are
// established independently.
inline SwitchedSessionResult passive_switch_session(const protocols::SessionConfig& cfg,
                                                    double ratio,
                                                    const photonics::ChannelModel& channel,
                                                    const photonics::DetectorModel& det) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ConfigError("passive_switch: ratio must lie in (0,1]");
  if (cfg.protocol != protocols::Protocol::BB84 &&
      cfg.protocol != protocols::Protocol::BB84_DECOY &&
      cfg.protocol != protocols::Protocol::SARG04)
    throw ConfigError("passive_switch: qubit protocols only");
  cfg.validate();

  Rng master(cfg.seed);
  Rng proto_rng = master.fork(1);
  Rng src_rng = master.fork(2);
  Rng route_rng = master.fork(3);
  Rng ch_rng = master.fork(4);
  Rng det_rng1 = master.fork(5);
  Rng det_rng2 = master.fork(6);

  protocols::RawLog alice_log;
  alice_log.protocol = cfg.protocol;
  std::vector<photonics::DetectionRecord> bob1, bob2;
  std::vector<std::size_t> slots1, slots2;
  photonics::DetectorPairState st1, st2;

  for (std::uint64_t i = 0; i < cfg.n_pulses; ++i) {
    protocols::RawSlot raw;
    raw.class_id = 0;
    raw.bit = proto_rng.bernoulli(0.5) ? 1 : 0;
    const auto basis =
        proto_rng.bernoulli(cfg.basis_bias) ? photonics::Basis::X : photonics::Basis::Y;
    raw.basis_or_pair = static_cast<std::uint8_t>(basis);
    alice_log.slots.push_back(raw);

    auto pulse = photonics::emit_weak_pulse(cfg.source, 0, raw.bit, basis, src_rng);
    pulse.slot = static_cast<std::int64_t>(i);
    const auto arrived = photonics::channel_transmit(pulse, channel, ch_rng);

    const bool to_bob1 = route_rng.bernoulli(ratio);
    auto& det_rng = to_bob1 ? det_rng1 : det_rng2;
    auto& state = to_bob1 ? st1 : st2;
    const auto bb =
        det_rng.bernoulli(cfg.basis_bias) ? photonics::Basis::X : photonics::Basis::Y;
    auto rec = photonics::measure_qubit(arrived, photonics::measurement_axis(bb), det,
                                        state, det_rng);
    rec.basis_used = bb;
    // index within this Bob's stream; remapped to global slots below
    if (to_bob1) {
      rec.slot = static_cast<std::int64_t>(slots1.size());
      bob1.push_back(rec);
      slots1.push_back(i);
    } else {
      rec.slot = static_cast<std::int64_t>(slots2.size());
      bob2.push_back(rec);
      slots2.push_back(i);
    }
  }

  auto subset_log = [&](const std::vector<std::size_t>& slots) {
    protocols::RawLog log;
    log.protocol = cfg.protocol;
    for (auto s : slots) log.slots.push_back(alice_log.slots[s]);
    return log;
  };
  auto remap = [&](protocols::SiftedKey key, const std::vector<std::size_t>& slots) {
    for (auto& s : key.slots) s = static_cast<std::int64_t>(slots[static_cast<std::size_t>(s)]);
    return key;
  };

  SwitchedSessionResult out;
  {
    auto [a, b] = protocols::sift(cfg.protocol, subset_log(slots1), bob1);
    out.alice1 = remap(std::move(a), slots1);
    out.bob1 = remap(std::move(b), slots1);
  }
  {
    auto [a, b] = protocols::sift(cfg.protocol, subset_log(slots2), bob2);
    out.alice2 = remap(std::move(a), slots2);
    out.bob2 = remap(std::move(b), slots2);
  }
  return out;
}

}  // namespace qkd::netsim
