#pragma once

// Deterministic group-pairing simulator: one coordinator and n-1
// participants on a simulated network, an optional in-band/OOB adversary,
// and a scripted stand-in for the humans who compare lock badges.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pairsonic/protocol.hpp"
#include "pairsonic/wire.hpp"

namespace pairsonic::sim {

namespace adversary {
struct None {};
/// Flips one bit of one delivered in-band frame. Unset fields are drawn
/// from the seed; the ordinal then falls before the first SUCCESS_SET.
struct FlipInBandBit {
  std::optional<std::size_t> ordinal;
  std::optional<std::size_t> bit;
};
/// Replaces the victim participant's COMMIT with `replacement`, by default
/// the adversary's own commitment.
struct SubstituteCommit {
  std::size_t victim = 1;
  std::optional<wire::OuterCommitment> replacement;
};
/// Replaces the victim's REVEAL with an inner preimage carrying `card`
/// (default: the adversary's card) and the victim's revealed nonce hashes.
struct SubstituteReveal {
  std::size_t victim = 1;
  std::optional<wire::ContactCard> card;
};
/// The coordinator equivocates: the second half of the participants get a
/// ROSTER in which one foreign entry is swapped for a fabricated one.
struct SplitRoster {};
/// An extra node joins as soon as INIT is on the air.
struct InjectExtraParticipant {};
/// Cuts one in-band link at the given delivery: that frame and everything
/// after it on the same (sender, receiver) pair is lost.
struct DropMessage {
  std::optional<std::size_t> ordinal;
};
struct SuppressAborts {};
/// Flips one bit of the VERIFY aggregate on the OOB medium.
struct TamperOobDigest {
  std::size_t bit = 0;
};
}  // namespace adversary

using Adversary = std::variant<adversary::None, adversary::FlipInBandBit, adversary::SubstituteCommit,
                               adversary::SubstituteReveal, adversary::SplitRoster,
                               adversary::InjectExtraParticipant, adversary::DropMessage,
                               adversary::SuppressAborts, adversary::TamperOobDigest>;

/// "none", "flip-in-band-bit[:ordinal[:bit]]", "substitute-commit[:victim]",
/// "substitute-reveal[:victim]", "split-roster", "inject-extra-participant",
/// "drop-message[:ordinal]", "suppress-aborts", "tamper-oob-digest[:bit]".
/// Throws Error(kInvalidConfig).
Adversary parse_adversary(std::string_view text);
std::string to_string(const Adversary& adversary);

/// True for adversaries that alter a committed value or the group itself,
/// under which no honest device may finalize.
bool is_tampering(const Adversary& adversary);

namespace oracle {
/// Confirms iff every device in the group shows the lock.
struct Honest {};
struct AlwaysConfirm {};
struct AlwaysDecline {};
struct ConfirmSubset {
  std::set<std::size_t> indices;
};
}  // namespace oracle

using UserOracle = std::variant<oracle::Honest, oracle::AlwaysConfirm, oracle::AlwaysDecline, oracle::ConfirmSubset>;

/// "honest", "always-confirm", "always-decline", "confirm-subset:i,j,...".
UserOracle parse_oracle(std::string_view text);
std::string to_string(const UserOracle& oracle);

struct SimConfig {
  std::size_t devices = 3;
  Adversary adversary = adversary::None{};
  UserOracle oracle = oracle::Honest{};
  std::uint64_t seed = 0;
  protocol::ProtocolConfig protocol;
  std::size_t event_budget = 200'000;
  bool record_trace = true;
};

struct DeviceReport {
  std::size_t index = 0;
  protocol::Role role = protocol::Role::kParticipant;
  bool honest = true;
  std::string state;
  std::optional<wire::AbortReason> reason;
  std::optional<protocol::Phase> phase;
  bool locked = false;
  std::optional<bool> user_answer;
  std::size_t imports = 0;
  /// Digest of the imported cards' encodings, concatenated in roster order.
  std::optional<wire::Digest> roster_digest;
  std::size_t imported_cards = 0;
};

struct SimReport {
  SimConfig config;
  std::vector<DeviceReport> devices;
  std::vector<std::string> trace;
  std::chrono::milliseconds duration{0};
  std::size_t events = 0;

  std::size_t count_finalized(bool honest_only = true) const;
  /// Stable-field-order JSON document.
  std::string to_json(bool include_trace = true) const;
};

/// Throws kGroupSizeOutOfBounds, kInvalidConfig (adversary does not fit the
/// group), kNonQuiescent when the event budget runs out.
SimReport run_simulation(const SimConfig& config);

/// Violations of agreement, no-partial-import and (under a tampering
/// adversary) safety. Empty means the run is safe.
std::vector<std::string> safety_violations(const SimReport& report);

struct Scenario {
  std::string name;
  std::size_t devices = 3;
  Adversary adversary = adversary::None{};
  UserOracle oracle = oracle::Honest{};
  protocol::ProtocolConfig protocol;
};

struct ScenarioSummary {
  std::string name;
  std::size_t runs = 0;
  std::size_t honest_devices = 0;
  std::size_t honest_finalized = 0;
  std::size_t honest_aborted = 0;
  std::size_t runs_with_identical_rosters = 0;  // every device finalized, one digest
  std::map<std::string, std::size_t> abort_reasons;  // honest devices
  std::size_t violations = 0;
  std::vector<std::string> violation_details;  // first few, with seeds
};

struct MatrixSummary {
  std::vector<ScenarioSummary> scenarios;
  bool safe() const;
  std::string to_text() const;
};

/// Runs every scenario for every seed; scenarios are spread over worker
/// threads. Throws Error(kInvalidConfig) when either list is empty.
MatrixSummary run_matrix(std::span<const Scenario> scenarios, std::span<const std::uint64_t> seeds,
                         unsigned threads = 0);

}  // namespace pairsonic::sim
