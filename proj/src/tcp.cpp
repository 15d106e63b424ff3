#include "pairsonic/tcp.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <vector>

#include "pairsonic/error.hpp"

namespace pairsonic::transport {

namespace {

constexpr std::uint32_t kMaxFrame = (1u << 20) + 64;

struct AddrInfo {
  addrinfo* list = nullptr;
  ~AddrInfo() {
    if (list) freeaddrinfo(list);
  }
};

void resolve(const Descriptor& d, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  std::string port = std::to_string(d.port);
  int rc = getaddrinfo(d.host.c_str(), port.c_str(), &hints, &out.list);
  if (rc != 0) throw Error(ErrorCode::kConnectFailed, d.str() + ": " + gai_strerror(rc));
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

TcpChannel TcpChannel::listen(std::string_view text) {
  Descriptor d = parse_descriptor(text);
  if (d.scheme != Descriptor::Scheme::kTcp) throw Error(ErrorCode::kInvalidConfig, "not a tcp descriptor");
  AddrInfo info;
  resolve(d, true, info);
  std::string last_error = "no address";
  for (addrinfo* ai = info.list; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(s.fd(), 32) != 0) {
      last_error = errno_text();
      continue;
    }
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    d.port = bound.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                         : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    TcpChannel channel;
    channel.listener_ = std::move(s);
    channel.descriptor_ = d.str();
    return channel;
  }
  throw Error(ErrorCode::kConnectFailed, "cannot listen on " + d.str() + ": " + last_error);
}

PeerHandle TcpChannel::connect(std::string_view text) {
  Descriptor d = parse_descriptor(text);
  if (d.scheme != Descriptor::Scheme::kTcp) throw Error(ErrorCode::kConnectFailed, "not a tcp descriptor");
  AddrInfo info;
  resolve(d, false, info);
  std::string last_error = "no address";
  for (addrinfo* ai = info.list; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) return add_peer(std::move(s));
    last_error = errno_text();
  }
  throw Error(ErrorCode::kConnectFailed, d.str() + ": " + last_error);
}

PeerHandle TcpChannel::add_peer(Socket socket) {
  int one = 1;
  ::setsockopt(socket.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  PeerHandle handle = next_handle_++;
  peers_.emplace(handle, Peer{std::move(socket), {}});
  return handle;
}

void TcpChannel::drop_peer(PeerHandle peer) {
  peers_.erase(peer);
  ready_.push_back({peer, Incoming::Kind::kDisconnected, {}});
}

void TcpChannel::send(PeerHandle peer, ByteView bytes) {
  auto it = peers_.find(peer);
  if (it == peers_.end()) throw Error(ErrorCode::kPeerDisconnected, "peer " + std::to_string(peer));
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(bytes.size()));
  w.raw(bytes);
  const Bytes& out = w.bytes();
  std::size_t sent = 0;
  while (sent < out.size()) {
    ssize_t n = ::send(it->second.socket.fd(), out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      std::string why = errno_text();
      drop_peer(peer);
      throw Error(ErrorCode::kPeerDisconnected, "peer " + std::to_string(peer) + ": " + why);
    }
    sent += static_cast<std::size_t>(n);
  }
}

void TcpChannel::broadcast(ByteView bytes) {
  std::vector<PeerHandle> handles;
  for (const auto& [handle, peer] : peers_) handles.push_back(handle);
  for (PeerHandle h : handles) {
    try {
      send(h, bytes);
    } catch (const Error&) {
      // Reported to the driver as kDisconnected.
    }
  }
}

void TcpChannel::read_from(PeerHandle handle) {
  Peer& peer = peers_.at(handle);
  std::uint8_t chunk[4096];
  ssize_t n = ::recv(peer.socket.fd(), chunk, sizeof chunk, 0);
  if (n < 0 && (errno == EINTR || errno == EAGAIN)) return;
  if (n <= 0) {
    drop_peer(handle);
    return;
  }
  peer.buffer.insert(peer.buffer.end(), chunk, chunk + n);
  while (peer.buffer.size() >= 4) {
    ByteReader r(peer.buffer);
    std::uint32_t len = *r.u32();
    if (len > kMaxFrame) {
      drop_peer(handle);
      return;
    }
    if (r.remaining() < len) break;
    Bytes frame(peer.buffer.begin() + 4, peer.buffer.begin() + 4 + len);
    peer.buffer.erase(peer.buffer.begin(), peer.buffer.begin() + 4 + len);
    ready_.push_back({handle, Incoming::Kind::kData, std::move(frame)});
  }
}

std::optional<Incoming> TcpChannel::receive(std::chrono::milliseconds timeout) {
  if (ready_.empty()) {
    std::vector<pollfd> fds;
    std::vector<PeerHandle> owners;
    if (listener_) {
      fds.push_back({listener_.fd(), POLLIN, 0});
      owners.push_back(0);
    }
    for (const auto& [handle, peer] : peers_) {
      fds.push_back({peer.socket.fd(), POLLIN, 0});
      owners.push_back(handle);
    }
    int rc = ::poll(fds.data(), fds.size(), static_cast<int>(timeout.count()));
    if (rc < 0 && errno != EINTR) throw Error(ErrorCode::kIo, "poll: " + errno_text());
    for (std::size_t i = 0; rc > 0 && i < fds.size(); ++i) {
      if (fds[i].revents == 0) continue;
      if (owners[i] == 0) {
        Socket s(::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC));
        if (s) ready_.push_back({add_peer(std::move(s)), Incoming::Kind::kConnected, {}});
      } else if (peers_.count(owners[i])) {
        read_from(owners[i]);
      }
    }
  }
  if (ready_.empty()) return std::nullopt;
  Incoming next = std::move(ready_.front());
  ready_.pop_front();
  return next;
}

void TcpChannel::close_gracefully(std::chrono::milliseconds linger) {
  listener_ = Socket();
  for (auto& [handle, peer] : peers_) ::shutdown(peer.socket.fd(), SHUT_WR);
  auto deadline = std::chrono::steady_clock::now() + linger;
  while (!peers_.empty()) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) break;
    receive(left);
  }
  peers_.clear();
  ready_.clear();
}

}  // namespace pairsonic::transport
