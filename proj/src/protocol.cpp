#include "pairsonic/protocol.hpp"

#include <algorithm>
#include <sstream>

#include "pairsonic/error.hpp"

namespace pairsonic::protocol {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

wire::Message make(const wire::SessionId& session, wire::MessageBody body) {
  return {session, std::move(body)};
}

std::string short_hex(ByteView bytes) { return to_hex(bytes.first(std::min<std::size_t>(bytes.size(), 4))); }

std::string describe_message(const wire::Message& m) {
  std::ostringstream os;
  os << to_string(wire::type_of(m));
  std::visit(Overloaded{
                 [&](const wire::msg::Hello& h) { os << "(v" << int(h.protocol_version) << ")"; },
                 [&](const wire::msg::Commit& c) { os << "(" << short_hex(c.outer.bytes) << ")"; },
                 [&](const wire::msg::Roster& r) { os << "(n=" << r.outers.size() << ")"; },
                 [&](const wire::msg::Reveal& r) { os << "(" << r.inner.size() << "B)"; },
                 [&](const wire::msg::RevealSet& r) { os << "(n=" << r.inners.size() << ")"; },
                 [&](const wire::msg::Confirm&) {},
                 [&](const wire::msg::SuccessSet& s) { os << "(n=" << s.nonces.size() << ")"; },
                 [&](const wire::msg::Abort& a) { os << "(" << wire::to_string(a.reason) << ")"; },
             },
             m.body);
  return os.str();
}

std::string describe_oob(const wire::OobPayload& p) {
  if (const auto* init = std::get_if<wire::oob::Init>(&p)) {
    return "INIT(n=" + std::to_string(init->group_size) + ", " + init->descriptor + ")";
  }
  return "VERIFY(" + short_hex(std::get<wire::oob::Verify>(p).aggregate.bytes) + ")";
}

}  // namespace

std::string_view to_string(Role role) {
  return role == Role::kCoordinator ? "coordinator" : "participant";
}

std::string_view to_string(TimerId timer) {
  switch (timer) {
    case TimerId::kInitListen: return "init-listen";
    case TimerId::kJoin: return "join";
    case TimerId::kRound: return "round";
  }
  return "unknown";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kInitialization: return "initialization";
    case Phase::kVerification: return "verification";
    case Phase::kFinalization: return "finalization";
  }
  return "unknown";
}

void validate_config(const ProtocolConfig& config) {
  if (config.round_timeout.count() <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "round timeout must be positive");
  }
}

Event event_from_bytes(PeerHandle peer, ByteView bytes) {
  try {
    return event::MessageReceived{peer, wire::decode_message(bytes)};
  } catch (const Error& e) {
    return event::InvalidMessage{peer, e.what()};
  }
}

std::string describe(const Event& e) {
  return std::visit(
      Overloaded{
          [](const event::Start&) -> std::string { return "Start"; },
          [](const event::OobReceived& o) { return "OobReceived " + describe_oob(o.payload); },
          [](const event::MessageReceived& m) {
            return "MessageReceived peer=" + std::to_string(m.peer) + " " + describe_message(m.message);
          },
          [](const event::InvalidMessage& m) {
            return "InvalidMessage peer=" + std::to_string(m.peer) + " " + m.reason;
          },
          [](const event::PeerConnected& p) { return "PeerConnected peer=" + std::to_string(p.peer); },
          [](const event::UserConfirmed& u) {
            return std::string("UserConfirmed ") + (u.confirmed ? "yes" : "no");
          },
          [](const event::TimerFired& t) { return "TimerFired " + std::string(to_string(t.timer)); },
      },
      e);
}

std::string describe(const Action& a) {
  return std::visit(
      Overloaded{
          [](const action::Send& s) {
            return "Send peer=" + std::to_string(s.peer) + " " + describe_message(s.message);
          },
          [](const action::Broadcast& b) { return "Broadcast " + describe_message(b.message); },
          [](const action::EmitOob& o) { return "EmitOob " + describe_oob(o.payload); },
          [](const action::SetTimer& t) {
            return "SetTimer " + std::string(to_string(t.timer)) + " " +
                   std::to_string(t.duration.count()) + "ms";
          },
          [](const action::CancelTimer& t) { return "CancelTimer " + std::string(to_string(t.timer)); },
          [](const action::Connect& c) { return "Connect " + c.descriptor; },
          [](const action::DisplayLock&) -> std::string { return "DisplayLock"; },
          [](const action::DisplayContacts& d) {
            return "DisplayContacts n=" + std::to_string(d.cards.size());
          },
          [](const action::DisplayAbort& d) { return "DisplayAbort " + std::string(wire::to_string(d.reason)); },
          [](const action::ImportContacts& i) {
            return "ImportContacts n=" + std::to_string(i.cards.size());
          },
      },
      a);
}

// -- coordinator -------------------------------------------------------------

std::string_view to_string(CoordinatorSession::State state) {
  using S = CoordinatorSession::State;
  switch (state) {
    case S::kAnnouncing: return "Announcing";
    case S::kCollecting: return "Collecting";
    case S::kRosterSent: return "RosterSent";
    case S::kCollectReveals: return "CollectReveals";
    case S::kRevealSetSent: return "RevealSetSent";
    case S::kLocked: return "Locked";
    case S::kCollectConfirms: return "CollectConfirms";
    case S::kFinalized: return "Finalized";
    case S::kAborted: return "Aborted";
  }
  return "unknown";
}

std::pair<CoordinatorSession, Actions> CoordinatorSession::create(const ProtocolConfig& config,
                                                                  std::size_t group_size,
                                                                  const wire::ContactCard& card,
                                                                  std::string transport_descriptor,
                                                                  RandomSource& rng) {
  validate_config(config);
  if (group_size < wire::kMinGroupSize || group_size > wire::kMaxGroupSize) {
    throw Error(ErrorCode::kGroupSizeOutOfBounds,
                "group size " + std::to_string(group_size) + " outside [2, 16]");
  }
  if (transport_descriptor.empty() || transport_descriptor.size() > wire::kMaxDescriptorBytes ||
      !is_valid_utf8(as_bytes(transport_descriptor))) {
    throw Error(ErrorCode::kInvalidConfig, "transport descriptor must be 1-64 bytes of UTF-8");
  }
  wire::validate_card(card);

  CoordinatorSession s;
  s.config_ = config;
  s.group_size_ = group_size;
  s.descriptor_ = std::move(transport_descriptor);
  rng.fill(s.session_.bytes);
  s.nonces_ = wire::draw_nonces(rng);
  s.own_ = wire::make_commitment(card, s.nonces_);

  Actions out;
  out.push_back(action::EmitOob{wire::oob::Init{wire::kProtocolVersion, s.session_,
                                                static_cast<std::uint8_t>(group_size), s.descriptor_}});
  out.push_back(action::SetTimer{TimerId::kJoin, config.round_timeout});
  return {std::move(s), std::move(out)};
}

std::string CoordinatorSession::state_name() const { return std::string(to_string(state_)); }

bool CoordinatorSession::commitments_sent() const {
  switch (state_) {
    case State::kAnnouncing:
    case State::kCollecting:
    case State::kFinalized:
    case State::kAborted:
      return false;
    default:
      return true;
  }
}

Outcome CoordinatorSession::outcome() const {
  if (state_ == State::kFinalized) return Finalized{final_cards_};
  if (state_ == State::kAborted) return *aborted_;
  throw Error(ErrorCode::kNotTerminal, "coordinator session is in state " + state_name());
}

Actions CoordinatorSession::handle_event(const Event& event) {
  if (is_terminal()) throw Error(ErrorCode::kIgnoredEvent, "session is " + state_name());
  Actions out;
  std::visit(Overloaded{
                 [&](const event::Start&) {},
                 [&](const event::OobReceived& e) { on_oob(e.payload, out); },
                 [&](const event::MessageReceived& e) { on_message(e.peer, e.message, out); },
                 [&](const event::InvalidMessage&) { abort(AbortReason::kIntegrityFailure, out); },
                 [&](const event::PeerConnected& e) {
                   bool collecting = state_ == State::kAnnouncing || state_ == State::kCollecting;
                   if (!collecting || peers_.size() + 1 >= group_size_ || peers_.count(e.peer) != 0) {
                     // More devices than the announced group size.
                     abort(AbortReason::kIntegrityFailure, out);
                     return;
                   }
                   peers_.emplace(e.peer, Peer{});
                   state_ = State::kCollecting;
                 },
                 [&](const event::UserConfirmed& e) {
                   if (state_ != State::kLocked) return;
                   if (!e.confirmed) {
                     abort(AbortReason::kUserDeclined, out);
                     return;
                   }
                   user_confirmed_ = true;
                   state_ = State::kCollectConfirms;
                   maybe_finalize(out);
                 },
                 [&](const event::TimerFired&) { abort(AbortReason::kTimeout, out); },
             },
             event);
  return out;
}

void CoordinatorSession::on_message(PeerHandle handle, const wire::Message& m, Actions& out) {
  auto it = peers_.find(handle);
  if (it == peers_.end() || m.session != session_) {
    abort(AbortReason::kIntegrityFailure, out);
    return;
  }
  Peer& peer = it->second;
  auto integrity = [&] { abort(AbortReason::kIntegrityFailure, out); };

  std::visit(
      Overloaded{
          [&](const wire::msg::Hello& h) {
            if (state_ != State::kCollecting || peer.hello || h.protocol_version != config_.protocol_version) {
              return integrity();
            }
            peer.hello = true;
          },
          [&](const wire::msg::Commit& c) {
            if (state_ != State::kCollecting || !peer.hello || peer.outer) return integrity();
            if (c.outer == own_.outer) return integrity();
            for (const auto& [h, other] : peers_) {
              if (other.outer && *other.outer == c.outer) return integrity();
            }
            peer.outer = c.outer;
            maybe_send_roster(out);
          },
          [&](const wire::msg::Reveal& r) {
            if ((state_ != State::kRosterSent && state_ != State::kCollectReveals) || !peer.outer ||
                peer.opened) {
              return integrity();
            }
            try {
              peer.opened = wire::verify_inner(*peer.outer, r.inner);
            } catch (const Error&) {
              return integrity();
            }
            peer.inner_bytes = r.inner;
            maybe_send_reveal_set(out);
          },
          [&](const wire::msg::Confirm& c) {
            if ((state_ != State::kLocked && state_ != State::kCollectConfirms) || !peer.opened ||
                peer.success) {
              return integrity();
            }
            if (!wire::verify_nonce(peer.opened->success_hash, c.success_nonce)) return integrity();
            peer.success = c.success_nonce;
            maybe_finalize(out);
          },
          [&](const wire::msg::Abort& a) {
            // Unverifiable or forged releases are ignored.
            if (peer.opened && wire::verify_nonce(peer.opened->abort_hash, a.abort_nonce)) {
              abort(a.reason, out);
            }
          },
          [&](const auto&) { integrity(); },
      },
      m.body);
}

void CoordinatorSession::on_oob(const wire::OobPayload& payload, Actions& out) {
  const auto* verify = std::get_if<wire::oob::Verify>(&payload);
  if (verify == nullptr || verify->session != session_) return;
  if (state_ == State::kAnnouncing || state_ == State::kCollecting) {
    // A VERIFY for this session that this device never emitted.
    abort(AbortReason::kOobMismatch, out);
    return;
  }
  if (verify->aggregate != aggregate_) {
    abort(AbortReason::kOobMismatch, out);
    return;
  }
  if (verify_heard_) return;
  verify_heard_ = true;
  state_ = State::kCollectReveals;
  maybe_send_reveal_set(out);
}

void CoordinatorSession::maybe_send_roster(Actions& out) {
  if (peers_.size() + 1 != group_size_) return;
  roster_.clear();
  roster_.push_back(own_.outer);
  for (const auto& [h, peer] : peers_) {
    if (!peer.outer) return;
    roster_.push_back(*peer.outer);
  }
  std::sort(roster_.begin(), roster_.end());
  aggregate_ = wire::aggregate(session_, group_size_, roster_);
  state_ = State::kRosterSent;
  out.push_back(action::CancelTimer{TimerId::kJoin});
  out.push_back(action::Broadcast{make(session_, wire::msg::Roster{roster_})});
  out.push_back(action::EmitOob{wire::oob::Verify{session_, aggregate_}});
  out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
}

void CoordinatorSession::maybe_send_reveal_set(Actions& out) {
  if (state_ != State::kCollectReveals) return;
  std::map<wire::OuterCommitment, const Bytes*> by_outer;
  by_outer[own_.outer] = &own_.inner_bytes;
  for (const auto& [h, peer] : peers_) {
    if (!peer.opened) return;
    by_outer[*peer.outer] = &peer.inner_bytes;
  }
  wire::msg::RevealSet set;
  for (const auto& outer : roster_) set.inners.push_back(*by_outer.at(outer));
  state_ = State::kRevealSetSent;
  out.push_back(action::Broadcast{make(session_, std::move(set))});
  // Every reveal was opened against the sender's own outer, and the roster
  // holds distinct outers, so the set is a bijection onto the roster.
  state_ = State::kLocked;
  out.push_back(action::DisplayLock{});
  out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
}

void CoordinatorSession::maybe_finalize(Actions& out) {
  if (state_ != State::kCollectConfirms || !user_confirmed_) return;
  std::map<wire::OuterCommitment, std::pair<wire::Nonce, const wire::ContactCard*>> by_outer;
  by_outer[own_.outer] = {nonces_.success, &own_.inner.card};
  for (const auto& [h, peer] : peers_) {
    if (!peer.success) return;
    by_outer[*peer.outer] = {*peer.success, &peer.opened->card};
  }
  wire::msg::SuccessSet set;
  final_cards_.clear();
  for (const auto& outer : roster_) {
    const auto& [nonce, card] = by_outer.at(outer);
    set.nonces.push_back(nonce);
    final_cards_.push_back(*card);
  }
  out.push_back(action::Broadcast{make(session_, std::move(set))});
  out.push_back(action::CancelTimer{TimerId::kRound});
  out.push_back(action::DisplayContacts{final_cards_});
  out.push_back(action::ImportContacts{final_cards_});
  state_ = State::kFinalized;
}

void CoordinatorSession::abort(AbortReason reason, Actions& out) {
  if (commitments_sent()) {
    out.push_back(action::Broadcast{make(session_, wire::msg::Abort{nonces_.abort, reason})});
  }
  Phase phase = state_ == State::kAnnouncing || state_ == State::kCollecting ? Phase::kInitialization
                : state_ == State::kLocked || state_ == State::kCollectConfirms   ? Phase::kFinalization
                                                                                  : Phase::kVerification;
  out.push_back(action::CancelTimer{TimerId::kJoin});
  out.push_back(action::CancelTimer{TimerId::kRound});
  out.push_back(action::DisplayAbort{reason});
  aborted_ = Aborted{reason, phase};
  state_ = State::kAborted;
}

// -- participant -------------------------------------------------------------

std::string_view to_string(ParticipantSession::State state) {
  using S = ParticipantSession::State;
  switch (state) {
    case S::kAwaitInit: return "AwaitInit";
    case S::kJoining: return "Joining";
    case S::kCommitted: return "Committed";
    case S::kAwaitRoster: return "AwaitRoster";
    case S::kRevealing: return "Revealing";
    case S::kLocked: return "Locked";
    case S::kAwaitSuccessSet: return "AwaitSuccessSet";
    case S::kFinalized: return "Finalized";
    case S::kAborted: return "Aborted";
  }
  return "unknown";
}

std::pair<ParticipantSession, Actions> ParticipantSession::create(const ProtocolConfig& config,
                                                                  const wire::ContactCard& card,
                                                                  RandomSource& rng) {
  validate_config(config);
  wire::validate_card(card);
  ParticipantSession s;
  s.config_ = config;
  s.card_ = card;
  s.nonces_ = wire::draw_nonces(rng);
  Actions out{action::SetTimer{TimerId::kInitListen, config.round_timeout}};
  return {std::move(s), std::move(out)};
}

std::string ParticipantSession::state_name() const { return std::string(to_string(state_)); }

std::optional<wire::OuterCommitment> ParticipantSession::own_outer() const {
  if (!own_ || state_ == State::kAwaitInit || state_ == State::kJoining) return std::nullopt;
  return own_->outer;
}

bool ParticipantSession::commitments_sent() const {
  switch (state_) {
    case State::kCommitted:
    case State::kAwaitRoster:
    case State::kRevealing:
    case State::kLocked:
    case State::kAwaitSuccessSet:
      return true;
    default:
      return false;
  }
}

Outcome ParticipantSession::outcome() const {
  if (state_ == State::kFinalized) return Finalized{final_cards_};
  if (state_ == State::kAborted) return *aborted_;
  throw Error(ErrorCode::kNotTerminal, "participant session is in state " + state_name());
}

Actions ParticipantSession::handle_event(const Event& event) {
  if (is_terminal()) throw Error(ErrorCode::kIgnoredEvent, "session is " + state_name());
  Actions out;
  std::visit(Overloaded{
                 [&](const event::Start&) {},
                 [&](const event::OobReceived& e) { on_oob(e.payload, out); },
                 [&](const event::MessageReceived& e) { on_message(e.peer, e.message, out); },
                 [&](const event::InvalidMessage&) { abort(AbortReason::kIntegrityFailure, out); },
                 [&](const event::PeerConnected& e) {
                   if (state_ != State::kJoining) {
                     abort(AbortReason::kIntegrityFailure, out);
                     return;
                   }
                   coordinator_ = e.peer;
                   out.push_back(action::Send{e.peer, make(*session_, wire::msg::Hello{config_.protocol_version})});
                   out.push_back(action::Send{e.peer, make(*session_, wire::msg::Commit{own_->outer})});
                   out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
                   state_ = State::kCommitted;
                 },
                 [&](const event::UserConfirmed& e) {
                   if (state_ != State::kLocked) return;
                   if (!e.confirmed) {
                     abort(AbortReason::kUserDeclined, out);
                     return;
                   }
                   out.push_back(action::Send{*coordinator_, make(*session_, wire::msg::Confirm{nonces_.success})});
                   out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
                   state_ = State::kAwaitSuccessSet;
                 },
                 [&](const event::TimerFired&) { abort(AbortReason::kTimeout, out); },
             },
             event);
  return out;
}

void ParticipantSession::on_oob(const wire::OobPayload& payload, Actions& out) {
  if (const auto* init = std::get_if<wire::oob::Init>(&payload)) {
    if (state_ != State::kAwaitInit) return;
    session_ = init->session;
    group_size_ = init->group_size;
    descriptor_ = init->descriptor;
    own_ = wire::make_commitment(card_, nonces_);
    state_ = State::kJoining;
    out.push_back(action::CancelTimer{TimerId::kInitListen});
    out.push_back(action::Connect{descriptor_});
    out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
    return;
  }
  const auto& verify = std::get<wire::oob::Verify>(payload);
  if (!session_ || verify.session != *session_) return;
  if (verify_digest_) {
    if (*verify_digest_ != verify.aggregate) abort(AbortReason::kOobMismatch, out);
    return;
  }
  verify_digest_ = verify.aggregate;
  if (state_ == State::kCommitted) state_ = State::kAwaitRoster;
  maybe_check_roster(out);
}

void ParticipantSession::on_message(PeerHandle peer, const wire::Message& m, Actions& out) {
  auto integrity = [&] { abort(AbortReason::kIntegrityFailure, out); };
  if (!coordinator_ || peer != *coordinator_ || m.session != *session_) return integrity();

  std::visit(
      Overloaded{
          [&](const wire::msg::Roster& r) {
            if ((state_ != State::kCommitted && state_ != State::kAwaitRoster) || roster_) return integrity();
            if (r.outers.size() != group_size_) return integrity();
            if (std::find(r.outers.begin(), r.outers.end(), own_->outer) == r.outers.end()) {
              return integrity();
            }
            roster_ = r.outers;
            state_ = State::kAwaitRoster;
            maybe_check_roster(out);
          },
          [&](const wire::msg::RevealSet& set) {
            if (state_ != State::kRevealing || set.inners.size() != group_size_) return integrity();
            std::map<wire::OuterCommitment, wire::OpenedCommitment> opened;
            for (const auto& inner : set.inners) {
              wire::OuterCommitment outer = wire::digest(inner);
              if (std::find(roster_->begin(), roster_->end(), outer) == roster_->end() ||
                  opened.count(outer) != 0) {
                return integrity();
              }
              try {
                opened.emplace(outer, wire::verify_inner(outer, inner));
              } catch (const Error&) {
                return integrity();
              }
            }
            // n distinct roster members out of an n-entry roster: a bijection.
            opened_ = std::move(opened);
            state_ = State::kLocked;
            out.push_back(action::DisplayLock{});
            out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
          },
          [&](const wire::msg::SuccessSet& set) {
            if (state_ != State::kAwaitSuccessSet || set.nonces.size() != group_size_) return integrity();
            for (std::size_t i = 0; i < set.nonces.size(); ++i) {
              if (!wire::verify_nonce(opened_.at((*roster_)[i]).success_hash, set.nonces[i])) {
                return integrity();
              }
            }
            final_cards_.clear();
            for (const auto& outer : *roster_) final_cards_.push_back(opened_.at(outer).card);
            out.push_back(action::CancelTimer{TimerId::kRound});
            out.push_back(action::DisplayContacts{final_cards_});
            out.push_back(action::ImportContacts{final_cards_});
            state_ = State::kFinalized;
          },
          [&](const wire::msg::Abort& a) {
            for (const auto& [outer, opened] : opened_) {
              if (outer == own_->outer) continue;
              if (wire::verify_nonce(opened.abort_hash, a.abort_nonce)) {
                abort(a.reason, out);
                return;
              }
            }
          },
          [&](const auto&) { integrity(); },
      },
      m.body);
}

void ParticipantSession::maybe_check_roster(Actions& out) {
  if (state_ != State::kAwaitRoster || !roster_ || !verify_digest_) return;
  wire::Digest expected;
  try {
    expected = wire::aggregate(*session_, group_size_, *roster_);
  } catch (const Error&) {
    abort(AbortReason::kIntegrityFailure, out);
    return;
  }
  if (expected != *verify_digest_) {
    abort(AbortReason::kOobMismatch, out);
    return;
  }
  out.push_back(action::Send{*coordinator_, make(*session_, wire::msg::Reveal{own_->inner_bytes})});
  out.push_back(action::SetTimer{TimerId::kRound, config_.round_timeout});
  state_ = State::kRevealing;
}

void ParticipantSession::abort(AbortReason reason, Actions& out) {
  if (commitments_sent()) {
    out.push_back(action::Broadcast{make(*session_, wire::msg::Abort{nonces_.abort, reason})});
  }
  Phase phase = state_ == State::kAwaitInit || state_ == State::kJoining        ? Phase::kInitialization
                : state_ == State::kLocked || state_ == State::kAwaitSuccessSet ? Phase::kFinalization
                                                                                : Phase::kVerification;
  out.push_back(action::CancelTimer{TimerId::kInitListen});
  out.push_back(action::CancelTimer{TimerId::kRound});
  out.push_back(action::DisplayAbort{reason});
  aborted_ = Aborted{reason, phase};
  state_ = State::kAborted;
}

}  // namespace pairsonic::protocol
