#pragma once

// Channel interfaces the drivers use to carry protocol traffic. Both are
// polled from the single thread that drives a session.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairsonic/bytes.hpp"
#include "pairsonic/protocol.hpp"

namespace pairsonic::transport {

using protocol::PeerHandle;

struct Incoming {
  enum class Kind { kConnected, kData, kDisconnected };
  PeerHandle peer = 0;
  Kind kind = Kind::kData;
  Bytes bytes;
};

/// Reliable, ordered, message-oriented link between one device and its
/// peers. Incoming connections are accepted inside receive() and reported
/// as kConnected.
class InBandChannel {
 public:
  virtual ~InBandChannel() = default;
  /// Throws Error(kConnectFailed).
  virtual PeerHandle connect(std::string_view descriptor) = 0;
  /// Throws Error(kPeerDisconnected) for an unknown or closed peer.
  virtual void send(PeerHandle peer, ByteView bytes) = 0;
  /// Iterated unicast to every connected peer; never loops back.
  virtual void broadcast(ByteView bytes) = 0;
  virtual std::optional<Incoming> receive(std::chrono::milliseconds timeout) = 0;
};

/// Location-limited broadcast medium.
class OobChannel {
 public:
  virtual ~OobChannel() = default;
  virtual void emit(ByteView payload) = 0;
  /// Payloads received since the last poll, in arrival order.
  virtual std::vector<Bytes> poll() = 0;
};

struct Descriptor {
  enum class Scheme { kTcp, kSim };
  Scheme scheme = Scheme::kTcp;
  std::string host;        // tcp
  std::uint16_t port = 0;  // tcp
  std::string token;       // sim

  std::string str() const;
};

/// "tcp:<host>:<port>" or "sim:<token>", at most 64 bytes of UTF-8.
/// Throws Error(kInvalidConfig).
Descriptor parse_descriptor(std::string_view text);

}  // namespace pairsonic::transport
