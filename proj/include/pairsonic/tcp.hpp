#pragma once

// In-band channel over TCP. Every message travels as a u32 big-endian
// length followed by that many bytes.

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "pairsonic/transport.hpp"

namespace pairsonic::transport {

/// Owns a socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int fd() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

class TcpChannel final : public InBandChannel {
 public:
  /// Client-only channel; use connect().
  TcpChannel() = default;

  /// Binds and listens on "tcp:host:port". Port 0 picks a free port; the
  /// chosen one is reported by descriptor(). Throws kConnectFailed.
  static TcpChannel listen(std::string_view descriptor);

  const std::string& descriptor() const { return descriptor_; }

  PeerHandle connect(std::string_view descriptor) override;
  void send(PeerHandle peer, ByteView bytes) override;
  void broadcast(ByteView bytes) override;
  std::optional<Incoming> receive(std::chrono::milliseconds timeout) override;

  std::size_t peer_count() const { return peers_.size(); }

  /// Half-closes every connection and drains input until the peers close
  /// too or `linger` elapses, so queued outgoing data is not reset away.
  void close_gracefully(std::chrono::milliseconds linger);

 private:
  struct Peer {
    Socket socket;
    Bytes buffer;
  };

  PeerHandle add_peer(Socket socket);
  void drop_peer(PeerHandle peer);
  void read_from(PeerHandle peer);

  Socket listener_;
  std::string descriptor_;
  std::map<PeerHandle, Peer> peers_;
  PeerHandle next_handle_ = 1;
  std::deque<Incoming> ready_;
};

}  // namespace pairsonic::transport
