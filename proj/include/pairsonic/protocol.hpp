#pragma once

// Coordinator and participant sessions as pure event -> action transducers.
// Nothing in here performs I/O; drivers (the simulator, the CLI) feed events
// in and carry out the returned actions.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pairsonic/random.hpp"
#include "pairsonic/wire.hpp"

namespace pairsonic::protocol {

using PeerHandle = std::uint32_t;
using wire::AbortReason;

enum class Role { kCoordinator, kParticipant };

enum class TimerId : std::uint8_t {
  kInitListen,  // participant waiting for OOB INIT
  kJoin,        // coordinator waiting for the group to connect and commit
  kRound,       // one verification round
};

std::string_view to_string(Role role);
std::string_view to_string(TimerId timer);

struct ProtocolConfig {
  std::chrono::milliseconds round_timeout{30'000};
  std::uint8_t protocol_version = wire::kProtocolVersion;
};

/// Throws Error(kInvalidConfig) when a timeout is not strictly positive.
void validate_config(const ProtocolConfig& config);

namespace event {
struct Start {};
struct OobReceived {
  wire::OobPayload payload;
};
struct MessageReceived {
  PeerHandle peer = 0;
  wire::Message message;
};
/// Bytes from `peer` that failed to decode.
struct InvalidMessage {
  PeerHandle peer = 0;
  std::string reason;
};
struct PeerConnected {
  PeerHandle peer = 0;
};
struct UserConfirmed {
  bool confirmed = false;
};
struct TimerFired {
  TimerId timer = TimerId::kRound;
};
}  // namespace event

using Event = std::variant<event::Start, event::OobReceived, event::MessageReceived,
                           event::InvalidMessage, event::PeerConnected, event::UserConfirmed,
                           event::TimerFired>;

/// Decodes `bytes` into MessageReceived, or InvalidMessage when malformed.
Event event_from_bytes(PeerHandle peer, ByteView bytes);

namespace action {
struct Send {
  PeerHandle peer = 0;
  wire::Message message;
};
struct Broadcast {
  wire::Message message;
};
struct EmitOob {
  wire::OobPayload payload;
};
struct SetTimer {
  TimerId timer = TimerId::kRound;
  std::chrono::milliseconds duration{0};
};
struct CancelTimer {
  TimerId timer = TimerId::kRound;
};
/// Participant asks its driver to open the in-band link named in INIT; the
/// driver answers with PeerConnected.
struct Connect {
  std::string descriptor;
};
struct DisplayLock {};
struct DisplayContacts {
  std::vector<wire::ContactCard> cards;
};
struct DisplayAbort {
  AbortReason reason = AbortReason::kIntegrityFailure;
};
/// The verified roster, in roster order, offered for import.
struct ImportContacts {
  std::vector<wire::ContactCard> cards;
};
}  // namespace action

using Action = std::variant<action::Send, action::Broadcast, action::EmitOob, action::SetTimer,
                            action::CancelTimer, action::Connect, action::DisplayLock,
                            action::DisplayContacts, action::DisplayAbort,
                            action::ImportContacts>;

using Actions = std::vector<Action>;

std::string describe(const Event& event);
std::string describe(const Action& action);

enum class Phase { kInitialization, kVerification, kFinalization };
std::string_view to_string(Phase phase);

struct Finalized {
  std::vector<wire::ContactCard> cards;  // n entries, roster order, own included
};
struct Aborted {
  AbortReason reason = AbortReason::kIntegrityFailure;
  Phase phase = Phase::kInitialization;
};
using Outcome = std::variant<Finalized, Aborted>;

/// Common surface of both roles, used by drivers that hold a group of
/// devices.
class Session {
 public:
  virtual ~Session() = default;

  virtual Role role() const = 0;
  /// Throws Error(kIgnoredEvent) once the session is terminal.
  virtual Actions handle_event(const Event& event) = 0;
  virtual bool is_terminal() const = 0;
  /// Throws Error(kNotTerminal) before Finalized/Aborted.
  virtual Outcome outcome() const = 0;
  virtual std::string state_name() const = 0;
  virtual std::optional<wire::SessionId> session_id() const = 0;
  virtual std::size_t group_size() const = 0;
};

class CoordinatorSession final : public Session {
 public:
  enum class State {
    kAnnouncing,
    kCollecting,
    kRosterSent,
    kCollectReveals,
    kRevealSetSent,
    kLocked,
    kCollectConfirms,
    kFinalized,
    kAborted,
  };

  /// Creates the session and the INIT announcement. The coordinator counts
  /// itself as one of the `group_size` members. Throws kGroupSizeOutOfBounds,
  /// kInvalidCard, kInvalidConfig.
  static std::pair<CoordinatorSession, Actions> create(const ProtocolConfig& config,
                                                       std::size_t group_size,
                                                       const wire::ContactCard& card,
                                                       std::string transport_descriptor,
                                                       RandomSource& rng);

  Role role() const override { return Role::kCoordinator; }
  Actions handle_event(const Event& event) override;
  bool is_terminal() const override { return state_ == State::kFinalized || state_ == State::kAborted; }
  Outcome outcome() const override;
  std::string state_name() const override;
  std::optional<wire::SessionId> session_id() const override { return session_; }
  std::size_t group_size() const override { return group_size_; }

  State state() const { return state_; }
  const wire::OuterCommitment& own_outer() const { return own_.outer; }
  const std::vector<wire::OuterCommitment>& roster() const { return roster_; }

 private:
  struct Peer {
    bool hello = false;
    std::optional<wire::OuterCommitment> outer;
    std::optional<wire::OpenedCommitment> opened;
    Bytes inner_bytes;
    std::optional<wire::Nonce> success;
  };

  CoordinatorSession() = default;

  void on_message(PeerHandle peer, const wire::Message& message, Actions& out);
  void on_oob(const wire::OobPayload& payload, Actions& out);
  void maybe_send_roster(Actions& out);
  void maybe_send_reveal_set(Actions& out);
  void maybe_finalize(Actions& out);
  void abort(AbortReason reason, Actions& out);
  bool commitments_sent() const;

  ProtocolConfig config_;
  State state_ = State::kAnnouncing;
  wire::SessionId session_;
  std::size_t group_size_ = 0;
  std::string descriptor_;
  wire::NoncePair nonces_;
  wire::Commitment own_;
  std::map<PeerHandle, Peer> peers_;
  std::vector<wire::OuterCommitment> roster_;
  wire::Digest aggregate_;
  bool verify_heard_ = false;
  bool user_confirmed_ = false;
  std::vector<wire::ContactCard> final_cards_;
  std::optional<Aborted> aborted_;
};

class ParticipantSession final : public Session {
 public:
  /// Committed: HELLO + COMMIT sent, nothing received yet.
  /// AwaitRoster: exactly one of ROSTER / OOB VERIFY received.
  enum class State {
    kAwaitInit,
    kJoining,
    kCommitted,
    kAwaitRoster,
    kRevealing,
    kLocked,
    kAwaitSuccessSet,
    kFinalized,
    kAborted,
  };

  /// Nonces are drawn here; the commitment is formed once INIT arrives.
  static std::pair<ParticipantSession, Actions> create(const ProtocolConfig& config,
                                                       const wire::ContactCard& card,
                                                       RandomSource& rng);

  Role role() const override { return Role::kParticipant; }
  Actions handle_event(const Event& event) override;
  bool is_terminal() const override { return state_ == State::kFinalized || state_ == State::kAborted; }
  Outcome outcome() const override;
  std::string state_name() const override;
  std::optional<wire::SessionId> session_id() const override { return session_; }
  std::size_t group_size() const override { return group_size_; }

  State state() const { return state_; }
  /// Empty until the commitment has been sent.
  std::optional<wire::OuterCommitment> own_outer() const;
  const std::string& descriptor() const { return descriptor_; }

 private:
  ParticipantSession() = default;

  void on_message(PeerHandle peer, const wire::Message& message, Actions& out);
  void on_oob(const wire::OobPayload& payload, Actions& out);
  void maybe_check_roster(Actions& out);
  void abort(AbortReason reason, Actions& out);
  bool commitments_sent() const;

  ProtocolConfig config_;
  State state_ = State::kAwaitInit;
  wire::ContactCard card_;
  wire::NoncePair nonces_;
  std::optional<wire::Commitment> own_;
  std::optional<wire::SessionId> session_;
  std::size_t group_size_ = 0;
  std::string descriptor_;
  std::optional<PeerHandle> coordinator_;
  std::optional<std::vector<wire::OuterCommitment>> roster_;
  std::optional<wire::Digest> verify_digest_;
  std::map<wire::OuterCommitment, wire::OpenedCommitment> opened_;
  std::vector<wire::ContactCard> final_cards_;
  std::optional<Aborted> aborted_;
};

std::string_view to_string(CoordinatorSession::State state);
std::string_view to_string(ParticipantSession::State state);

}  // namespace pairsonic::protocol
