#include "pairsonic/wire.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

#include "pairsonic/error.hpp"

namespace pairsonic::wire {

namespace {

constexpr std::uint8_t kCardMagic[] = {'P', 'C'};
constexpr std::uint8_t kCardVersion = 0x01;
constexpr std::uint8_t kInnerMagic[] = {'P', 'S', 'I', 'N'};
constexpr std::uint8_t kInnerVersion = 0x01;
constexpr std::uint8_t kAggregateMagic[] = {'P', 'S', 'A', 'G'};
constexpr std::uint8_t kAggregateVersion = 0x01;

constexpr std::uint8_t kOobInit = 0x01;
constexpr std::uint8_t kOobVerify = 0x02;

// Upper bound on an encoded frame; a 16-entry REVEAL_SET of maximal cards
// stays well below it.
constexpr std::uint32_t kMaxMessageBytes = 1u << 20;

[[noreturn]] void fail(ErrorCode code, const std::string& why) { throw Error(code, why); }

void write_card(ByteWriter& w, const ContactCard& card) {
  w.raw(kCardMagic);
  w.u8(kCardVersion);
  w.u8(static_cast<std::uint8_t>(card.name.size()));
  w.raw(as_bytes(card.name));
  w.u8(static_cast<std::uint8_t>(kPublicKeySize));
  w.raw(card.public_key);
  w.u8(static_cast<std::uint8_t>(card.extensions.size()));
  for (const auto& [key, value] : card.extensions) {
    w.u8(static_cast<std::uint8_t>(key.size()));
    w.raw(key);
    w.u16(static_cast<std::uint16_t>(value.size()));
    w.raw(value);
  }
}

// Parses a card from the reader, leaving any following bytes unread. Returns
// a reason string on failure.
std::optional<std::string> read_card(ByteReader& r, ContactCard& card) {
  auto magic = r.take(2);
  if (!magic || !std::equal(magic->begin(), magic->end(), std::begin(kCardMagic))) {
    return "bad magic";
  }
  auto version = r.u8();
  if (!version || *version != kCardVersion) return "bad version";
  auto name_len = r.u8();
  if (!name_len) return "truncated name length";
  if (*name_len == 0 || *name_len > kMaxNameBytes) return "name length out of range";
  auto name = r.take(*name_len);
  if (!name) return "truncated name";
  if (!is_valid_utf8(*name)) return "name is not UTF-8";
  auto key_len = r.u8();
  if (!key_len || *key_len != kPublicKeySize) return "bad key length";
  auto key = r.array<kPublicKeySize>();
  if (!key) return "truncated key";
  auto ext_count = r.u8();
  if (!ext_count) return "truncated extension count";
  if (*ext_count > kMaxExtensions) return "too many extensions";

  card.name.assign(name->begin(), name->end());
  card.public_key = *key;
  card.extensions.clear();
  const Bytes* previous = nullptr;
  for (std::size_t i = 0; i < *ext_count; ++i) {
    auto klen = r.u8();
    if (!klen || *klen == 0 || *klen > kMaxExtensionKeyBytes) return "bad extension key length";
    auto key_bytes = r.take(*klen);
    if (!key_bytes) return "truncated extension key";
    auto vlen = r.u16();
    if (!vlen || *vlen > kMaxExtensionValueBytes) return "bad extension value length";
    auto value = r.take(*vlen);
    if (!value) return "truncated extension value";
    Bytes k(key_bytes->begin(), key_bytes->end());
    if (previous != nullptr && !(*previous < k)) return "extension keys not strictly ascending";
    auto [it, inserted] = card.extensions.emplace(std::move(k), Bytes(value->begin(), value->end()));
    previous = &it->first;
  }
  return std::nullopt;
}

void write_session(ByteWriter& w, const SessionId& id) { w.raw(id.bytes); }

}  // namespace

// -- hashing ---------------------------------------------------------------

Digest digest(ByteView bytes) {
  Digest out;
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != kDigestSize) {
    fail(ErrorCode::kIo, "SHA-256 failed");
  }
  return out;
}

bool verify_nonce(const Digest& expected, const Nonce& nonce) {
  return digest(ByteView(nonce)) == expected;
}

// -- contact cards ---------------------------------------------------------

void validate_card(const ContactCard& card) {
  if (card.name.empty() || card.name.size() > kMaxNameBytes) {
    fail(ErrorCode::kInvalidCard, "name must be 1-64 bytes");
  }
  if (!is_valid_utf8(as_bytes(card.name))) fail(ErrorCode::kInvalidCard, "name is not UTF-8");
  if (card.extensions.size() > kMaxExtensions) fail(ErrorCode::kInvalidCard, "more than 16 extensions");
  for (const auto& [key, value] : card.extensions) {
    if (key.empty() || key.size() > kMaxExtensionKeyBytes) {
      fail(ErrorCode::kInvalidCard, "extension key must be 1-32 bytes");
    }
    if (value.size() > kMaxExtensionValueBytes) {
      fail(ErrorCode::kInvalidCard, "extension value exceeds 1024 bytes");
    }
  }
}

Bytes encode_contact_card(const ContactCard& card) {
  validate_card(card);
  ByteWriter w;
  write_card(w, card);
  return std::move(w).take();
}

ContactCard decode_contact_card(ByteView bytes) {
  ByteReader r(bytes);
  ContactCard card;
  if (auto why = read_card(r, card)) fail(ErrorCode::kMalformedCard, *why);
  if (!r.done()) fail(ErrorCode::kMalformedCard, "trailing bytes");
  return card;
}

// -- nested commitments ------------------------------------------------------

NoncePair draw_nonces(RandomSource& rng) {
  NoncePair pair;
  rng.fill(pair.success);
  do {
    rng.fill(pair.abort);
  } while (pair.abort == pair.success);
  return pair;
}

Bytes encode_inner(const InnerPreimage& inner) {
  Bytes card = encode_contact_card(inner.card);
  ByteWriter w;
  w.raw(kInnerMagic);
  w.u8(kInnerVersion);
  w.raw(inner.success_hash.bytes);
  w.raw(inner.abort_hash.bytes);
  w.u16(static_cast<std::uint16_t>(card.size()));
  w.raw(card);
  return std::move(w).take();
}

InnerPreimage decode_inner(ByteView bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (!magic || !std::equal(magic->begin(), magic->end(), std::begin(kInnerMagic))) {
    fail(ErrorCode::kMalformedInner, "bad magic");
  }
  auto version = r.u8();
  if (!version || *version != kInnerVersion) fail(ErrorCode::kMalformedInner, "bad version");
  auto hs = r.array<kDigestSize>();
  auto ha = r.array<kDigestSize>();
  auto card_len = r.u16();
  if (!hs || !ha || !card_len) fail(ErrorCode::kMalformedInner, "truncated header");
  if (r.remaining() != *card_len) fail(ErrorCode::kMalformedInner, "card length does not match body");
  auto card_bytes = r.take(*card_len);
  InnerPreimage inner;
  inner.success_hash.bytes = *hs;
  inner.abort_hash.bytes = *ha;
  try {
    inner.card = decode_contact_card(*card_bytes);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedInner, e.what());
  }
  return inner;
}

Commitment make_commitment(const ContactCard& card, const NoncePair& nonces) {
  Commitment c;
  c.inner.success_hash = digest(ByteView(nonces.success));
  c.inner.abort_hash = digest(ByteView(nonces.abort));
  c.inner.card = card;
  c.inner_bytes = encode_inner(c.inner);
  c.outer = digest(c.inner_bytes);
  return c;
}

OpenedCommitment verify_inner(const OuterCommitment& outer, ByteView inner_bytes) {
  if (digest(inner_bytes) != outer) fail(ErrorCode::kCommitmentMismatch, "inner does not hash to outer");
  InnerPreimage inner = decode_inner(inner_bytes);
  return {std::move(inner.card), inner.success_hash, inner.abort_hash};
}

Digest aggregate(const SessionId& session, std::size_t group_size,
                 std::span<const OuterCommitment> outers) {
  if (outers.empty() || outers.size() != group_size) {
    fail(ErrorCode::kSizeMismatch, "expected " + std::to_string(group_size) + " commitments, got " +
                                       std::to_string(outers.size()));
  }
  if (group_size > 0xff) fail(ErrorCode::kSizeMismatch, "group size exceeds one byte");
  std::vector<OuterCommitment> sorted(outers.begin(), outers.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(ErrorCode::kDuplicateCommitment, "commitment appears twice");
  }
  ByteWriter w;
  w.raw(kAggregateMagic);
  w.u8(kAggregateVersion);
  write_session(w, session);
  w.u8(static_cast<std::uint8_t>(group_size));
  for (const auto& o : sorted) w.raw(o.bytes);
  return digest(w.bytes());
}

// -- in-band messages ------------------------------------------------------

std::string_view to_string(AbortReason reason) {
  switch (reason) {
    case AbortReason::kUserDeclined: return "user-declined";
    case AbortReason::kOobMismatch: return "oob-mismatch";
    case AbortReason::kTimeout: return "timeout";
    case AbortReason::kIntegrityFailure: return "integrity-failure";
  }
  return "unknown";
}

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::kHello: return "HELLO";
    case MessageType::kCommit: return "COMMIT";
    case MessageType::kRoster: return "ROSTER";
    case MessageType::kReveal: return "REVEAL";
    case MessageType::kRevealSet: return "REVEAL_SET";
    case MessageType::kConfirm: return "CONFIRM";
    case MessageType::kSuccessSet: return "SUCCESS_SET";
    case MessageType::kAbort: return "ABORT";
  }
  return "UNKNOWN";
}

MessageType type_of(const Message& message) {
  return static_cast<MessageType>(message.body.index());
}

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void write_count(ByteWriter& w, std::size_t n, std::string_view what) {
  if (n < kMinGroupSize || n > kMaxGroupSize) {
    fail(ErrorCode::kMalformedMessage, std::string(what) + " count out of range");
  }
  w.u8(static_cast<std::uint8_t>(n));
}

void write_blob(ByteWriter& w, const Bytes& blob) {
  if (blob.size() > 0xffff) fail(ErrorCode::kMalformedMessage, "reveal exceeds 65535 bytes");
  w.u16(static_cast<std::uint16_t>(blob.size()));
  w.raw(blob);
}

}  // namespace

Bytes encode_message(const Message& message) {
  ByteWriter body;
  body.u8(static_cast<std::uint8_t>(type_of(message)));
  write_session(body, message.session);
  std::visit(Overloaded{
                 [&](const msg::Hello& m) { body.u8(m.protocol_version); },
                 [&](const msg::Commit& m) { body.raw(m.outer.bytes); },
                 [&](const msg::Roster& m) {
                   write_count(body, m.outers.size(), "roster");
                   for (std::size_t i = 1; i < m.outers.size(); ++i) {
                     if (!(m.outers[i - 1] < m.outers[i])) {
                       fail(ErrorCode::kMalformedMessage, "roster not strictly ascending");
                     }
                   }
                   for (const auto& o : m.outers) body.raw(o.bytes);
                 },
                 [&](const msg::Reveal& m) { write_blob(body, m.inner); },
                 [&](const msg::RevealSet& m) {
                   write_count(body, m.inners.size(), "reveal set");
                   for (const auto& inner : m.inners) write_blob(body, inner);
                 },
                 [&](const msg::Confirm& m) { body.raw(m.success_nonce); },
                 [&](const msg::SuccessSet& m) {
                   write_count(body, m.nonces.size(), "success set");
                   for (const auto& n : m.nonces) body.raw(n);
                 },
                 [&](const msg::Abort& m) {
                   body.raw(m.abort_nonce);
                   body.u8(static_cast<std::uint8_t>(m.reason));
                 },
             },
             message.body);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(body.bytes().size()));
  w.raw(body.bytes());
  return std::move(w).take();
}

Message decode_message(ByteView bytes) {
  auto bad = [](const std::string& why) -> Error { return Error(ErrorCode::kMalformedMessage, why); };
  ByteReader outer(bytes);
  auto length = outer.u32();
  if (!length) throw bad("truncated length prefix");
  if (*length > kMaxMessageBytes) throw bad("length prefix exceeds limit");
  if (*length > outer.remaining()) throw bad("length prefix larger than remaining bytes");
  if (*length < outer.remaining()) throw bad("trailing bytes after frame");
  ByteReader r(*outer.take(*length));

  auto type = r.u8();
  if (!type) throw bad("missing type byte");
  auto session = r.array<kSessionIdSize>();
  if (!session) throw bad("truncated session id");
  Message m;
  m.session.bytes = *session;

  auto read_count = [&](std::string_view what) {
    auto n = r.u8();
    if (!n) throw bad("truncated " + std::string(what) + " count");
    if (*n < kMinGroupSize || *n > kMaxGroupSize) throw bad(std::string(what) + " count out of range");
    return static_cast<std::size_t>(*n);
  };
  auto read_blob = [&]() {
    auto len = r.u16();
    if (!len) throw bad("truncated reveal length");
    auto blob = r.take(*len);
    if (!blob) throw bad("truncated reveal body");
    return Bytes(blob->begin(), blob->end());
  };
  auto read_digest = [&]() {
    auto d = r.array<kDigestSize>();
    if (!d) throw bad("truncated digest");
    return Digest{*d};
  };
  auto read_nonce = [&]() {
    auto n = r.array<kNonceSize>();
    if (!n) throw bad("truncated nonce");
    return *n;
  };

  switch (*type) {
    case static_cast<std::uint8_t>(MessageType::kHello): {
      auto v = r.u8();
      if (!v) throw bad("truncated version");
      m.body = msg::Hello{*v};
      break;
    }
    case static_cast<std::uint8_t>(MessageType::kCommit):
      m.body = msg::Commit{read_digest()};
      break;
    case static_cast<std::uint8_t>(MessageType::kRoster): {
      msg::Roster roster;
      std::size_t n = read_count("roster");
      for (std::size_t i = 0; i < n; ++i) roster.outers.push_back(read_digest());
      for (std::size_t i = 1; i < n; ++i) {
        if (!(roster.outers[i - 1] < roster.outers[i])) throw bad("roster not strictly ascending");
      }
      m.body = std::move(roster);
      break;
    }
    case static_cast<std::uint8_t>(MessageType::kReveal):
      m.body = msg::Reveal{read_blob()};
      break;
    case static_cast<std::uint8_t>(MessageType::kRevealSet): {
      msg::RevealSet set;
      std::size_t n = read_count("reveal set");
      for (std::size_t i = 0; i < n; ++i) set.inners.push_back(read_blob());
      m.body = std::move(set);
      break;
    }
    case static_cast<std::uint8_t>(MessageType::kConfirm):
      m.body = msg::Confirm{read_nonce()};
      break;
    case static_cast<std::uint8_t>(MessageType::kSuccessSet): {
      msg::SuccessSet set;
      std::size_t n = read_count("success set");
      for (std::size_t i = 0; i < n; ++i) set.nonces.push_back(read_nonce());
      m.body = std::move(set);
      break;
    }
    case static_cast<std::uint8_t>(MessageType::kAbort): {
      msg::Abort abort;
      abort.abort_nonce = read_nonce();
      auto reason = r.u8();
      if (!reason) throw bad("truncated abort reason");
      if (*reason < 0x01 || *reason > 0x04) throw bad("unknown abort reason");
      abort.reason = static_cast<AbortReason>(*reason);
      m.body = abort;
      break;
    }
    default:
      throw bad("unknown message type");
  }
  if (!r.done()) throw bad("body longer than its type allows");
  return m;
}

// -- out-of-band payloads ------------------------------------------------------

Bytes encode_oob(const OobPayload& payload) {
  ByteWriter w;
  if (const auto* init = std::get_if<oob::Init>(&payload)) {
    if (init->group_size < kMinGroupSize || init->group_size > kMaxGroupSize) {
      fail(ErrorCode::kMalformedOob, "group size out of range");
    }
    if (init->descriptor.empty() || init->descriptor.size() > kMaxDescriptorBytes) {
      fail(ErrorCode::kMalformedOob, "descriptor must be 1-64 bytes");
    }
    w.u8(kOobInit);
    w.u8(init->version);
    write_session(w, init->session);
    w.u8(init->group_size);
    w.u8(static_cast<std::uint8_t>(init->descriptor.size()));
    w.raw(as_bytes(init->descriptor));
  } else {
    const auto& verify = std::get<oob::Verify>(payload);
    w.u8(kOobVerify);
    write_session(w, verify.session);
    w.raw(verify.aggregate.bytes);
  }
  return std::move(w).take();
}

OobPayload decode_oob(ByteView bytes) {
  auto bad = [](const std::string& why) -> Error { return Error(ErrorCode::kMalformedOob, why); };
  ByteReader r(bytes);
  auto tag = r.u8();
  if (!tag) throw bad("empty payload");
  if (*tag == kOobInit) {
    oob::Init init;
    auto version = r.u8();
    if (!version || *version != kProtocolVersion) throw bad("unsupported INIT version");
    init.version = *version;
    auto session = r.array<kSessionIdSize>();
    if (!session) throw bad("truncated session id");
    init.session.bytes = *session;
    auto n = r.u8();
    if (!n) throw bad("truncated group size");
    if (*n < kMinGroupSize || *n > kMaxGroupSize) throw bad("group size out of range");
    init.group_size = *n;
    auto len = r.u8();
    if (!len || *len == 0 || *len > kMaxDescriptorBytes) throw bad("bad descriptor length");
    auto desc = r.take(*len);
    if (!desc) throw bad("truncated descriptor");
    if (!is_valid_utf8(*desc)) throw bad("descriptor is not UTF-8");
    init.descriptor.assign(desc->begin(), desc->end());
    if (!r.done()) throw bad("trailing bytes");
    return init;
  }
  if (*tag == kOobVerify) {
    oob::Verify verify;
    auto session = r.array<kSessionIdSize>();
    auto agg = r.array<kDigestSize>();
    if (!session || !agg) throw bad("truncated VERIFY");
    if (!r.done()) throw bad("trailing bytes");
    verify.session.bytes = *session;
    verify.aggregate.bytes = *agg;
    return verify;
  }
  throw bad("unknown payload tag");
}

}  // namespace pairsonic::wire
