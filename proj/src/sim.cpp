#include "pairsonic/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <deque>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pairsonic/error.hpp"
#include "pairsonic/random.hpp"
#include "pairsonic/sim_network.hpp"

namespace pairsonic::sim {

namespace {

using namespace std::chrono_literals;
using transport::NodeId;
using transport::SimFrame;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::kInvalidConfig, why); }

std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

wire::ContactCard make_card(std::string name, RandomSource& rng) {
  wire::ContactCard card;
  card.name = std::move(name);
  rng.fill(card.public_key);
  card.set_extension("app", "pairsonic-sim");
  return card;
}

wire::Digest roster_digest(const std::vector<wire::ContactCard>& cards) {
  Bytes all;
  for (const auto& c : cards) {
    Bytes enc = wire::encode_contact_card(c);
    all.insert(all.end(), enc.begin(), enc.end());
  }
  return wire::digest(all);
}

std::optional<wire::Message> try_decode(ByteView bytes) {
  try {
    return wire::decode_message(bytes);
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct Device {
  std::unique_ptr<protocol::Session> session;
  NodeId node = 0;
  bool honest = true;
  bool locked = false;
  std::optional<bool> answer;
  std::size_t imports = 0;
  std::vector<wire::ContactCard> imported;
  std::map<protocol::TimerId, std::chrono::milliseconds> timers;
  std::deque<protocol::Event> pending;
};

class Simulation {
 public:
  Simulation(const SimConfig& config, std::optional<std::size_t> auto_ordinal)
      : config_(config), net_(mix(config.seed ^ 0x6E6574ull)), adversary_rng_(mix(config.seed ^ 0xADull)) {
    const std::size_t n = config.devices;
    if (n < wire::kMinGroupSize || n > wire::kMaxGroupSize) {
      throw Error(ErrorCode::kGroupSizeOutOfBounds, "group size " + std::to_string(n) + " outside [2, 16]");
    }
    check_adversary();
    net_.set_tracing(config.record_trace);
    adversary_card_ = make_card("Mallory", adversary_rng_);
    adversary_commitment_ = wire::make_commitment(adversary_card_, wire::draw_nonces(adversary_rng_));

    for (std::size_t i = 0; i < n; ++i) {
      Device d;
      d.node = net_.add_node();
      SeededRandom rng(mix(config.seed * 0x100 + i));
      auto card = make_card("Device " + std::to_string(i), rng);
      protocol::Actions initial;
      if (i == 0) {
        auto [s, a] = protocol::CoordinatorSession::create(config.protocol, n, card,
                                                           transport::SimNetwork::descriptor_of(d.node), rng);
        d.session = std::make_unique<protocol::CoordinatorSession>(std::move(s));
        initial = std::move(a);
      } else {
        auto [s, a] = protocol::ParticipantSession::create(config.protocol, card, rng);
        d.session = std::make_unique<protocol::ParticipantSession>(std::move(s));
        initial = std::move(a);
      }
      devices_.push_back(std::move(d));
      initial_.push_back(std::move(initial));
    }
    adversary_node_ = net_.add_node();
    if (std::holds_alternative<adversary::SplitRoster>(config.adversary)) devices_[0].honest = false;
    install_adversary(auto_ordinal);
  }

  SimReport run() {
    for (std::size_t i = 0; i < devices_.size(); ++i) apply(i, initial_[i]);
    std::size_t events = 0;
    while (true) {
      if (++events > config_.event_budget) {
        throw Error(ErrorCode::kNonQuiescent, "event budget of " + std::to_string(config_.event_budget) + " exhausted");
      }
      if (dispatch_pending()) continue;
      if (collect_inboxes()) continue;
      if (net_.step()) continue;
      if (consult_oracle()) continue;
      if (fire_timer()) continue;
      break;
    }
    return report(events);
  }

  std::optional<std::size_t> first_success_set_ordinal() const { return first_success_set_; }

 private:
  void log(std::string line) {
    if (config_.record_trace) trace_.push_back("t=" + std::to_string(now_.count()) + " " + std::move(line));
  }

  void check_adversary() {
    const std::size_t n = config_.devices;
    auto victim_ok = [&](std::size_t v) {
      if (v == 0 || v >= n) invalid("victim must be a participant index in [1, " + std::to_string(n - 1) + "]");
    };
    std::visit(Overloaded{
                   [&](const adversary::SubstituteCommit& a) { victim_ok(a.victim); },
                   [&](const adversary::SubstituteReveal& a) { victim_ok(a.victim); },
                   [&](const adversary::SplitRoster&) {
                     if (n < 3) invalid("split-roster needs at least two participants");
                   },
                   [](const auto&) {},
               },
               config_.adversary);
  }

  void install_adversary(std::optional<std::size_t> auto_ordinal) {
    // Always observe traffic: the pre-run needs the first SUCCESS_SET and
    // SplitRoster needs the public COMMITs.
    net_.set_interposer([this, auto_ordinal](SimFrame f) { return interpose(std::move(f), auto_ordinal); });
    if (const auto* t = std::get_if<adversary::TamperOobDigest>(&config_.adversary)) {
      std::size_t bit = t->bit % (8 * wire::kDigestSize);
      net_.set_oob_tamper([bit](Bytes& payload) {
        if (payload.size() == wire::kVerifyPayloadSize && payload[0] == 0x02) {
          payload[1 + wire::kSessionIdSize + bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
        }
      });
    }
  }

  std::vector<SimFrame> interpose(SimFrame f, std::optional<std::size_t> auto_ordinal) {
    std::vector<SimFrame> out;
    if (f.kind != SimFrame::Kind::kData) {
      out.push_back(std::move(f));
      return out;
    }
    auto message = try_decode(f.bytes);
    if (message) {
      if (std::holds_alternative<wire::msg::SuccessSet>(message->body) && !first_success_set_) {
        first_success_set_ = f.ordinal;
      }
      if (const auto* c = std::get_if<wire::msg::Commit>(&message->body)) observed_commits_[f.from] = c->outer;
    }
    const std::size_t n = config_.devices;
    auto rewrite = [&](wire::MessageBody body) {
      message->body = std::move(body);
      f.bytes = wire::encode_message(*message);
    };

    bool drop = false;
    std::visit(
        Overloaded{
            [&](const adversary::FlipInBandBit& a) {
              std::size_t target = a.ordinal.value_or(auto_ordinal.value_or(0));
              if (f.ordinal != target || f.bytes.empty()) return;
              std::size_t bit = a.bit.value_or(mix(config_.seed ^ 0xB17ull)) % (8 * f.bytes.size());
              f.bytes[bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
              log("adversary flips bit " + std::to_string(bit) + " of delivery #" + std::to_string(f.ordinal));
            },
            [&](const adversary::SubstituteCommit& a) {
              if (!message || f.from != a.victim || f.to != 0) return;
              if (!std::holds_alternative<wire::msg::Commit>(message->body)) return;
              rewrite(wire::msg::Commit{a.replacement.value_or(adversary_commitment_.outer)});
              log("adversary substitutes COMMIT of device " + std::to_string(a.victim));
            },
            [&](const adversary::SubstituteReveal& a) {
              if (!message || f.from != a.victim || f.to != 0) return;
              const auto* r = std::get_if<wire::msg::Reveal>(&message->body);
              if (!r) return;
              wire::InnerPreimage inner;
              try {
                inner = wire::decode_inner(r->inner);
              } catch (const Error&) {
                return;
              }
              inner.card = a.card.value_or(adversary_card_);
              rewrite(wire::msg::Reveal{wire::encode_inner(inner)});
              log("adversary substitutes REVEAL of device " + std::to_string(a.victim));
            },
            [&](const adversary::SplitRoster&) {
              if (!message || f.from != 0 || f.to < 1 + (n - 1) / 2 || f.to >= n) return;
              const auto* r = std::get_if<wire::msg::Roster>(&message->body);
              if (!r) return;
              auto outers = r->outers;
              auto own = observed_commits_.find(f.to);
              for (auto& o : outers) {
                if (own != observed_commits_.end() && o == own->second) continue;
                o = wire::digest("fabricated roster entry " + std::to_string(config_.seed));
                break;
              }
              std::sort(outers.begin(), outers.end());
              rewrite(wire::msg::Roster{std::move(outers)});
              log("adversary equivocates ROSTER to device " + std::to_string(f.to));
            },
            [&](const adversary::DropMessage& a) {
              auto link = std::make_pair(f.from, f.to);
              if (f.ordinal == a.ordinal.value_or(auto_ordinal.value_or(0))) {
                cut_links_.insert(link);
                log("adversary cuts link " + std::to_string(f.from) + "->" + std::to_string(f.to));
              }
              drop = cut_links_.count(link) != 0;
            },
            [&](const adversary::SuppressAborts&) {
              drop = message && std::holds_alternative<wire::msg::Abort>(message->body);
            },
            [](const auto&) {},
        },
        config_.adversary);
    if (!drop) out.push_back(std::move(f));
    return out;
  }

  void inject_extra(const wire::oob::Init& init) {
    NodeId adv = adversary_node_;
    net_.inject({SimFrame::Kind::kConnect, adv, 0, {}, 0});
    auto send = [&](wire::MessageBody body) {
      net_.inject({SimFrame::Kind::kData, adv, 0, wire::encode_message({init.session, std::move(body)}), 0});
    };
    send(wire::msg::Hello{});
    send(wire::msg::Commit{adversary_commitment_.outer});
    log("adversary joins as an extra participant");
  }

  void apply(std::size_t i, const protocol::Actions& actions) {
    Device& d = devices_[i];
    auto& in_band = net_.in_band(d.node);
    for (const auto& action : actions) {
      log("dev" + std::to_string(i) + " -> " + protocol::describe(action));
      std::visit(Overloaded{
                     [&](const protocol::action::Send& a) {
                       try {
                         in_band.send(a.peer, wire::encode_message(a.message));
                       } catch (const Error& e) {
                         log("dev" + std::to_string(i) + " send failed: " + e.what());
                       }
                     },
                     [&](const protocol::action::Broadcast& a) { in_band.broadcast(wire::encode_message(a.message)); },
                     [&](const protocol::action::EmitOob& a) {
                       net_.oob(d.node).emit(wire::encode_oob(a.payload));
                       const auto* init = std::get_if<wire::oob::Init>(&a.payload);
                       if (init && std::holds_alternative<adversary::InjectExtraParticipant>(config_.adversary)) {
                         inject_extra(*init);
                       }
                     },
                     [&](const protocol::action::SetTimer& a) { d.timers[a.timer] = now_ + a.duration; },
                     [&](const protocol::action::CancelTimer& a) { d.timers.erase(a.timer); },
                     [&](const protocol::action::Connect& a) {
                       try {
                         d.pending.push_back(protocol::event::PeerConnected{in_band.connect(a.descriptor)});
                       } catch (const Error& e) {
                         log("dev" + std::to_string(i) + " connect failed: " + e.what());
                       }
                     },
                     [&](const protocol::action::DisplayLock&) { d.locked = true; },
                     [&](const protocol::action::ImportContacts& a) {
                       ++d.imports;
                       d.imported = a.cards;
                     },
                     [](const auto&) {},
                 },
                 action);
    }
  }

  void deliver(std::size_t i, const protocol::Event& event) {
    Device& d = devices_[i];
    if (d.session->is_terminal()) {
      log("dev" + std::to_string(i) + " ignores " + protocol::describe(event));
      return;
    }
    log("dev" + std::to_string(i) + " <- " + protocol::describe(event));
    apply(i, d.session->handle_event(event));
  }

  bool dispatch_pending() {
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      auto& q = devices_[i].pending;
      if (q.empty()) continue;
      protocol::Event e = std::move(q.front());
      q.pop_front();
      deliver(i, e);
      return true;
    }
    return false;
  }

  bool collect_inboxes() {
    bool any = false;
    for (auto& d : devices_) {
      auto& in_band = net_.in_band(d.node);
      while (auto incoming = in_band.receive(0ms)) {
        using Kind = transport::Incoming::Kind;
        if (incoming->kind == Kind::kConnected) {
          d.pending.push_back(protocol::event::PeerConnected{incoming->peer});
        } else if (incoming->kind == Kind::kData) {
          d.pending.push_back(protocol::event_from_bytes(incoming->peer, incoming->bytes));
        }
        any = true;
      }
      for (auto& payload : net_.oob(d.node).poll()) {
        try {
          d.pending.push_back(protocol::event::OobReceived{wire::decode_oob(payload)});
          any = true;
        } catch (const Error&) {
          // Undecodable sound is indistinguishable from noise.
        }
      }
    }
    // Traffic addressed to the adversary's own node is simply discarded.
    while (net_.in_band(adversary_node_).receive(0ms)) {
    }
    net_.oob(adversary_node_).poll();
    return any;
  }

  bool consult_oracle() {
    const bool all_locked = std::all_of(devices_.begin(), devices_.end(), [](const Device& d) { return d.locked; });
    bool any = false;
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      Device& d = devices_[i];
      if (!d.locked || d.answer || d.session->is_terminal()) continue;
      bool yes = std::visit(Overloaded{
                                [&](const oracle::Honest&) { return all_locked; },
                                [](const oracle::AlwaysConfirm&) { return true; },
                                [](const oracle::AlwaysDecline&) { return false; },
                                [&](const oracle::ConfirmSubset& o) { return o.indices.count(i) != 0; },
                            },
                            config_.oracle);
      d.answer = yes;
      d.pending.push_back(protocol::event::UserConfirmed{yes});
      any = true;
    }
    return any;
  }

  bool fire_timer() {
    std::optional<std::pair<std::size_t, protocol::TimerId>> next;
    std::chrono::milliseconds best{0};
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      if (devices_[i].session->is_terminal()) continue;
      for (const auto& [id, deadline] : devices_[i].timers) {
        if (!next || deadline < best) {
          next = std::make_pair(i, id);
          best = deadline;
        }
      }
    }
    if (!next) return false;
    now_ = std::max(now_, best);
    devices_[next->first].timers.erase(next->second);
    devices_[next->first].pending.push_back(protocol::event::TimerFired{next->second});
    return true;
  }

  SimReport report(std::size_t events) {
    SimReport r;
    r.config = config_;
    r.duration = now_;
    r.events = events;
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      const Device& d = devices_[i];
      DeviceReport dr;
      dr.index = i;
      dr.role = d.session->role();
      dr.honest = d.honest;
      dr.state = d.session->state_name();
      if (d.session->is_terminal()) {
        protocol::Outcome outcome = d.session->outcome();
        if (const auto* a = std::get_if<protocol::Aborted>(&outcome)) {
          dr.reason = a->reason;
          dr.phase = a->phase;
        }
      }
      dr.locked = d.locked;
      dr.user_answer = d.answer;
      dr.imports = d.imports;
      if (d.imports > 0) {
        dr.roster_digest = roster_digest(d.imported);
        dr.imported_cards = d.imported.size();
      }
      r.devices.push_back(std::move(dr));
    }
    r.trace = std::move(trace_);
    return r;
  }

  SimConfig config_;
  transport::SimNetwork net_;
  SeededRandom adversary_rng_;
  wire::ContactCard adversary_card_;
  wire::Commitment adversary_commitment_;
  NodeId adversary_node_ = 0;
  std::vector<Device> devices_;
  std::vector<protocol::Actions> initial_;
  std::chrono::milliseconds now_{0};
  std::vector<std::string> trace_;
  std::optional<std::size_t> first_success_set_;
  std::map<NodeId, wire::OuterCommitment> observed_commits_;
  std::set<std::pair<NodeId, NodeId>> cut_links_;
};

bool needs_auto_ordinal(const Adversary& a) {
  if (const auto* f = std::get_if<adversary::FlipInBandBit>(&a)) return !f->ordinal;
  if (const auto* d = std::get_if<adversary::DropMessage>(&a)) return !d->ordinal;
  return false;
}

// Draws a delivery ordinal that an honest run with the same seed reaches
// before any SUCCESS_SET is delivered.
std::size_t auto_ordinal(const SimConfig& config) {
  SimConfig honest = config;
  honest.adversary = adversary::None{};
  honest.oracle = oracle::Honest{};
  honest.record_trace = false;
  Simulation pre(honest, std::nullopt);
  pre.run();
  std::size_t limit = pre.first_success_set_ordinal().value_or(1);
  return static_cast<std::size_t>(mix(config.seed ^ 0x0DDull) % std::max<std::size_t>(limit, 1));
}

}  // namespace

// -- names -------------------------------------------------------------------

Adversary parse_adversary(std::string_view text) {
  auto parts = split(text, ':');
  std::string_view name = parts[0];
  auto arg = [&](std::size_t i) -> std::optional<std::size_t> {
    if (parts.size() <= i) return std::nullopt;
    auto v = parse_index(parts[i]);
    if (!v) invalid("bad parameter '" + std::string(parts[i]) + "' in adversary '" + std::string(text) + "'");
    return v;
  };
  auto max_args = [&](std::size_t k) {
    if (parts.size() > k + 1) invalid("too many parameters in adversary '" + std::string(text) + "'");
  };
  if (name == "none") return max_args(0), adversary::None{};
  if (name == "flip-in-band-bit") return max_args(2), adversary::FlipInBandBit{arg(1), arg(2)};
  if (name == "substitute-commit") return max_args(1), adversary::SubstituteCommit{arg(1).value_or(1), {}};
  if (name == "substitute-reveal") return max_args(1), adversary::SubstituteReveal{arg(1).value_or(1), {}};
  if (name == "split-roster") return max_args(0), adversary::SplitRoster{};
  if (name == "inject-extra-participant") return max_args(0), adversary::InjectExtraParticipant{};
  if (name == "drop-message") return max_args(1), adversary::DropMessage{arg(1)};
  if (name == "suppress-aborts") return max_args(0), adversary::SuppressAborts{};
  if (name == "tamper-oob-digest") return max_args(1), adversary::TamperOobDigest{arg(1).value_or(0)};
  invalid("unknown adversary '" + std::string(name) + "'");
}

std::string to_string(const Adversary& adversary) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? ":" + std::to_string(*v) : std::string(); };
  return std::visit(
      Overloaded{
          [](const adversary::None&) { return std::string("none"); },
          [&](const adversary::FlipInBandBit& a) {
            if (!a.ordinal && a.bit) return "flip-in-band-bit:auto:" + std::to_string(*a.bit);
            return "flip-in-band-bit" + opt(a.ordinal) + opt(a.bit);
          },
          [](const adversary::SubstituteCommit& a) { return "substitute-commit:" + std::to_string(a.victim); },
          [](const adversary::SubstituteReveal& a) { return "substitute-reveal:" + std::to_string(a.victim); },
          [](const adversary::SplitRoster&) { return std::string("split-roster"); },
          [](const adversary::InjectExtraParticipant&) { return std::string("inject-extra-participant"); },
          [&](const adversary::DropMessage& a) { return "drop-message" + opt(a.ordinal); },
          [](const adversary::SuppressAborts&) { return std::string("suppress-aborts"); },
          [](const adversary::TamperOobDigest& a) { return "tamper-oob-digest:" + std::to_string(a.bit); },
      },
      adversary);
}

bool is_tampering(const Adversary& a) {
  return std::holds_alternative<adversary::FlipInBandBit>(a) || std::holds_alternative<adversary::SubstituteCommit>(a) ||
         std::holds_alternative<adversary::SubstituteReveal>(a) || std::holds_alternative<adversary::SplitRoster>(a) ||
         std::holds_alternative<adversary::InjectExtraParticipant>(a) ||
         std::holds_alternative<adversary::TamperOobDigest>(a);
}

UserOracle parse_oracle(std::string_view text) {
  if (text == "honest") return oracle::Honest{};
  if (text == "always-confirm") return oracle::AlwaysConfirm{};
  if (text == "always-decline") return oracle::AlwaysDecline{};
  if (text.starts_with("confirm-subset:")) {
    oracle::ConfirmSubset o;
    auto list = text.substr(15);
    if (!list.empty()) {
      for (auto item : split(list, ',')) {
        auto v = parse_index(item);
        if (!v) invalid("bad index '" + std::string(item) + "' in oracle '" + std::string(text) + "'");
        o.indices.insert(*v);
      }
    }
    return o;
  }
  invalid("unknown oracle '" + std::string(text) + "'");
}

std::string to_string(const UserOracle& oracle) {
  return std::visit(Overloaded{
                        [](const oracle::Honest&) { return std::string("honest"); },
                        [](const oracle::AlwaysConfirm&) { return std::string("always-confirm"); },
                        [](const oracle::AlwaysDecline&) { return std::string("always-decline"); },
                        [](const oracle::ConfirmSubset& o) {
                          std::string s = "confirm-subset:";
                          bool first = true;
                          for (auto i : o.indices) {
                            if (!first) s += ",";
                            s += std::to_string(i);
                            first = false;
                          }
                          return s;
                        },
                    },
                    oracle);
}

// -- running -----------------------------------------------------------------

SimReport run_simulation(const SimConfig& config) {
  protocol::validate_config(config.protocol);
  std::optional<std::size_t> ordinal;
  if (needs_auto_ordinal(config.adversary)) ordinal = auto_ordinal(config);
  Simulation sim(config, ordinal);
  return sim.run();
}

std::size_t SimReport::count_finalized(bool honest_only) const {
  return static_cast<std::size_t>(std::count_if(devices.begin(), devices.end(), [&](const DeviceReport& d) {
    return (!honest_only || d.honest) && d.state == "Finalized";
  }));
}

std::string SimReport::to_json(bool include_trace) const {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["seed"] = config.seed;
  doc["config"] = {
      {"devices", config.devices},
      {"adversary", to_string(config.adversary)},
      {"oracle", to_string(config.oracle)},
      {"round_timeout_ms", config.protocol.round_timeout.count()},
      {"protocol_version", config.protocol.protocol_version},
  };
  ordered_json outcomes = ordered_json::array();
  for (const auto& d : devices) {
    ordered_json o;
    o["index"] = d.index;
    o["role"] = std::string(protocol::to_string(d.role));
    o["honest"] = d.honest;
    o["state"] = d.state;
    o["reason"] = d.reason ? ordered_json(std::string(wire::to_string(*d.reason))) : ordered_json(nullptr);
    o["phase"] = d.phase ? ordered_json(std::string(protocol::to_string(*d.phase))) : ordered_json(nullptr);
    o["locked"] = d.locked;
    o["user_answer"] = d.user_answer ? ordered_json(*d.user_answer) : ordered_json(nullptr);
    o["imports"] = d.imports;
    o["imported_cards"] = d.imported_cards;
    o["roster_digest"] = d.roster_digest ? ordered_json(to_hex(d.roster_digest->bytes)) : ordered_json(nullptr);
    outcomes.push_back(std::move(o));
  }
  doc["devices"] = std::move(outcomes);
  doc["finalized"] = count_finalized(false);
  doc["duration_ms"] = duration.count();
  doc["events"] = events;
  if (include_trace) doc["trace"] = trace;
  return doc.dump(2) + "\n";
}

std::vector<std::string> safety_violations(const SimReport& report) {
  std::vector<std::string> out;
  std::set<wire::Digest> digests;
  std::size_t honest = 0, importing = 0;
  for (const auto& d : report.devices) {
    if (!d.honest) continue;
    ++honest;
    if (d.imports > 0) ++importing;
    if (d.imports > 1) out.push_back("device " + std::to_string(d.index) + " imported more than once");
    if (d.roster_digest) digests.insert(*d.roster_digest);
    if (d.state == "Finalized" && is_tampering(report.config.adversary)) {
      out.push_back("device " + std::to_string(d.index) + " finalized under " + to_string(report.config.adversary));
    }
  }
  if (digests.size() > 1) out.push_back("honest devices imported different rosters");
  if (importing != 0 && importing != honest) {
    out.push_back("partial import: " + std::to_string(importing) + " of " + std::to_string(honest) +
                  " honest devices imported");
  }
  return out;
}

// -- matrix ------------------------------------------------------------------

bool MatrixSummary::safe() const {
  return std::all_of(scenarios.begin(), scenarios.end(), [](const ScenarioSummary& s) { return s.violations == 0; });
}

std::string MatrixSummary::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(40) << "scenario" << std::right << std::setw(6) << "runs" << std::setw(8) << "honest"
      << std::setw(11) << "finalized" << std::setw(9) << "aborted" << std::setw(12) << "violations" << "  reasons\n";
  for (const auto& s : scenarios) {
    out << std::left << std::setw(40) << s.name << std::right << std::setw(6) << s.runs << std::setw(8)
        << s.honest_devices << std::setw(11) << s.honest_finalized << std::setw(9) << s.honest_aborted << std::setw(12)
        << s.violations << "  ";
    bool first = true;
    for (const auto& [reason, count] : s.abort_reasons) {
      out << (first ? "" : ",") << reason << "=" << count;
      first = false;
    }
    out << "\n";
    for (const auto& detail : s.violation_details) out << "  ! " << detail << "\n";
  }
  out << (safe() ? "no safety violations\n" : "SAFETY VIOLATIONS FOUND\n");
  return out.str();
}

MatrixSummary run_matrix(std::span<const Scenario> scenarios, std::span<const std::uint64_t> seeds, unsigned threads) {
  if (scenarios.empty() || seeds.empty()) invalid("run_matrix needs at least one scenario and one seed");

  struct Job {
    std::size_t scenario;
    std::uint64_t seed;
    SimReport report;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (auto seed : seeds) jobs.push_back({s, seed, {}, {}});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Scenario& sc = scenarios[jobs[j].scenario];
      SimConfig config{sc.devices, sc.adversary, sc.oracle, jobs[j].seed, sc.protocol};
      config.record_trace = false;
      try {
        jobs[j].report = run_simulation(config);
      } catch (const std::exception& e) {
        jobs[j].error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  MatrixSummary summary;
  for (const auto& sc : scenarios) summary.scenarios.push_back({.name = sc.name});
  for (const auto& job : jobs) {
    ScenarioSummary& s = summary.scenarios[job.scenario];
    ++s.runs;
    auto flag = [&](const std::string& what) {
      ++s.violations;
      if (s.violation_details.size() < 5) s.violation_details.push_back("seed " + std::to_string(job.seed) + ": " + what);
    };
    if (!job.error.empty()) {
      flag(job.error);
      continue;
    }
    std::set<wire::Digest> digests;
    bool all_finalized = true;
    for (const auto& d : job.report.devices) {
      all_finalized = all_finalized && d.state == "Finalized";
      if (d.roster_digest) digests.insert(*d.roster_digest);
      if (!d.honest) continue;
      ++s.honest_devices;
      if (d.state == "Finalized") ++s.honest_finalized;
      if (d.reason) {
        ++s.honest_aborted;
        ++s.abort_reasons[std::string(wire::to_string(*d.reason))];
      }
    }
    if (all_finalized && digests.size() == 1) ++s.runs_with_identical_rosters;
    for (const auto& v : safety_violations(job.report)) flag(v);
  }
  return summary;
}

}  // namespace pairsonic::sim
