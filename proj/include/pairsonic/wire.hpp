#pragma once

// Canonical byte encodings, hashing and the nested commitment scheme. Every
// format here is frozen: the golden vectors in tests/wire_test.cpp pin them.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pairsonic/bytes.hpp"
#include "pairsonic/random.hpp"

namespace pairsonic::wire {

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kNonceSize = 32;
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSessionIdSize = 8;

inline constexpr std::size_t kMaxNameBytes = 64;
inline constexpr std::size_t kMaxExtensions = 16;
inline constexpr std::size_t kMaxExtensionKeyBytes = 32;
inline constexpr std::size_t kMaxExtensionValueBytes = 1024;

inline constexpr std::size_t kMinGroupSize = 2;
inline constexpr std::size_t kMaxGroupSize = 16;
inline constexpr std::size_t kMaxDescriptorBytes = 64;

inline constexpr std::uint8_t kProtocolVersion = 0x01;

struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};
  auto operator<=>(const Digest&) const = default;
};

struct SessionId {
  std::array<std::uint8_t, kSessionIdSize> bytes{};
  auto operator<=>(const SessionId&) const = default;
};

using Nonce = std::array<std::uint8_t, kNonceSize>;
using PublicKey = std::array<std::uint8_t, kPublicKeySize>;

/// The outer layer of a nested commitment is the digest of the inner
/// preimage bytes.
using OuterCommitment = Digest;

struct ContactCard {
  std::string name;
  PublicKey public_key{};
  /// Keyed by raw bytes so iteration order is the canonical (bytewise
  /// ascending) order regardless of insertion order.
  std::map<Bytes, Bytes> extensions;

  void set_extension(std::string_view key, std::string_view value) {
    extensions[to_bytes(key)] = to_bytes(value);
  }

  bool operator==(const ContactCard&) const = default;
};

struct NoncePair {
  Nonce success{};
  Nonce abort{};
};

struct InnerPreimage {
  Digest success_hash;
  Digest abort_hash;
  ContactCard card;
};

/// Result of committing to a card: both layers plus the exact inner bytes
/// that are later revealed.
struct Commitment {
  InnerPreimage inner;
  Bytes inner_bytes;
  OuterCommitment outer;
};

/// What a verified reveal yields.
struct OpenedCommitment {
  ContactCard card;
  Digest success_hash;
  Digest abort_hash;
};

// -- hashing ---------------------------------------------------------------

Digest digest(ByteView bytes);
inline Digest digest(std::string_view s) { return digest(as_bytes(s)); }

bool verify_nonce(const Digest& expected, const Nonce& nonce);

// -- contact cards ---------------------------------------------------------

/// Throws Error(kInvalidCard) when an invariant fails.
void validate_card(const ContactCard& card);
Bytes encode_contact_card(const ContactCard& card);
/// Throws Error(kMalformedCard); rejects trailing bytes.
ContactCard decode_contact_card(ByteView bytes);

// -- nested commitments ------------------------------------------------------

/// Draws both nonces, redrawing the abort nonce until the two differ.
NoncePair draw_nonces(RandomSource& rng);

Bytes encode_inner(const InnerPreimage& inner);
/// Throws Error(kMalformedInner).
InnerPreimage decode_inner(ByteView bytes);

Commitment make_commitment(const ContactCard& card, const NoncePair& nonces);

/// Opens `inner_bytes` against `outer`. Throws kCommitmentMismatch when the
/// digest differs, kMalformedInner when the bytes hash correctly but do not
/// parse.
OpenedCommitment verify_inner(const OuterCommitment& outer, ByteView inner_bytes);

/// Order-independent digest over the group's outer commitments. Throws
/// kSizeMismatch or kDuplicateCommitment.
Digest aggregate(const SessionId& session, std::size_t group_size,
                 std::span<const OuterCommitment> outers);

// -- in-band messages ------------------------------------------------------

enum class AbortReason : std::uint8_t {
  kUserDeclined = 0x01,
  kOobMismatch = 0x02,
  kTimeout = 0x03,
  kIntegrityFailure = 0x04,
};

std::string_view to_string(AbortReason reason);

enum class MessageType : std::uint8_t {
  kHello = 0x00,
  kCommit = 0x01,
  kRoster = 0x02,
  kReveal = 0x03,
  kRevealSet = 0x04,
  kConfirm = 0x05,
  kSuccessSet = 0x06,
  kAbort = 0x07,
};

std::string_view to_string(MessageType type);

namespace msg {
struct Hello {
  std::uint8_t protocol_version = kProtocolVersion;
  bool operator==(const Hello&) const = default;
};
struct Commit {
  OuterCommitment outer;
  bool operator==(const Commit&) const = default;
};
struct Roster {
  std::vector<OuterCommitment> outers;  // strictly ascending
  bool operator==(const Roster&) const = default;
};
struct Reveal {
  Bytes inner;
  bool operator==(const Reveal&) const = default;
};
struct RevealSet {
  std::vector<Bytes> inners;
  bool operator==(const RevealSet&) const = default;
};
struct Confirm {
  Nonce success_nonce{};
  bool operator==(const Confirm&) const = default;
};
struct SuccessSet {
  std::vector<Nonce> nonces;  // roster order
  bool operator==(const SuccessSet&) const = default;
};
struct Abort {
  Nonce abort_nonce{};
  AbortReason reason = AbortReason::kIntegrityFailure;
  bool operator==(const Abort&) const = default;
};
}  // namespace msg

using MessageBody = std::variant<msg::Hello, msg::Commit, msg::Roster, msg::Reveal,
                                 msg::RevealSet, msg::Confirm, msg::SuccessSet, msg::Abort>;

struct Message {
  SessionId session;
  MessageBody body;
  bool operator==(const Message&) const = default;
};

MessageType type_of(const Message& message);

/// u32-BE length || type || session id || body.
Bytes encode_message(const Message& message);
/// Exact inverse of encode_message; throws Error(kMalformedMessage).
Message decode_message(ByteView bytes);

// -- out-of-band payloads ------------------------------------------------------

namespace oob {
struct Init {
  std::uint8_t version = kProtocolVersion;
  SessionId session;
  std::uint8_t group_size = 0;
  std::string descriptor;
  bool operator==(const Init&) const = default;
};
struct Verify {
  SessionId session;
  Digest aggregate;
  bool operator==(const Verify&) const = default;
};
}  // namespace oob

using OobPayload = std::variant<oob::Init, oob::Verify>;

inline constexpr std::size_t kVerifyPayloadSize = 1 + kSessionIdSize + kDigestSize;

Bytes encode_oob(const OobPayload& payload);
/// Throws Error(kMalformedOob).
OobPayload decode_oob(ByteView bytes);

}  // namespace pairsonic::wire
