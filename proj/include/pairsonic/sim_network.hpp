#pragma once

// In-memory network and OOB medium for deterministic simulation. Sends are
// queued per (sender, receiver) pair and per OOB listener; step() delivers
// the head of one non-empty queue, chosen by a seeded generator, into the
// receiver's inbox. Nothing moves until step() is called.

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pairsonic/transport.hpp"

namespace pairsonic::transport {

using NodeId = std::size_t;

/// Peer handles seen by a node are the remote node id plus one.
inline PeerHandle handle_of(NodeId node) { return static_cast<PeerHandle>(node + 1); }
inline NodeId node_of(PeerHandle handle) { return static_cast<NodeId>(handle - 1); }

struct SimFrame {
  enum class Kind { kConnect, kData };
  Kind kind = Kind::kData;
  NodeId from = 0;
  NodeId to = 0;
  Bytes bytes;
  /// Position among delivered data frames, counted from 0 before the
  /// interposer runs. Connect frames carry no ordinal.
  std::size_t ordinal = 0;
};

/// Sees every frame as it is delivered and returns what actually arrives:
/// the frame itself, a modified copy, nothing, or extra frames.
using Interposer = std::function<std::vector<SimFrame>(SimFrame)>;
/// May rewrite an OOB emission; every listener receives the result.
using OobTamper = std::function<void(Bytes&)>;

class SimNetwork {
 public:
  explicit SimNetwork(std::uint64_t seed);
  ~SimNetwork();
  SimNetwork(const SimNetwork&) = delete;
  SimNetwork& operator=(const SimNetwork&) = delete;

  /// Adds a node reachable as "sim:node<id>" with its own in-band endpoint
  /// and OOB receiver.
  NodeId add_node();
  std::size_t node_count() const { return nodes_.size(); }
  static std::string descriptor_of(NodeId node);

  InBandChannel& in_band(NodeId node);
  OobChannel& oob(NodeId node);

  void set_interposer(Interposer hook) { interposer_ = std::move(hook); }
  void set_oob_tamper(OobTamper hook) { tamper_ = std::move(hook); }

  /// Queues a frame as if `frame.from` had sent it.
  void inject(SimFrame frame);

  bool idle() const;
  /// Delivers one queued frame or OOB emission. Returns false when idle.
  bool step();

  /// One line per delivery, for reproducibility checks. On by default.
  const std::vector<std::string>& trace() const { return trace_; }
  void set_tracing(bool on) { tracing_ = on; }
  std::size_t data_deliveries() const { return ordinal_; }

 private:
  class Endpoint;
  class OobEndpoint;
  struct Node;

  void enqueue(SimFrame frame);
  void emit_oob(NodeId from, Bytes payload);

  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::map<std::pair<NodeId, NodeId>, std::deque<SimFrame>> links_;
  std::map<NodeId, std::deque<Bytes>> oob_queues_;
  Interposer interposer_;
  OobTamper tamper_;
  std::size_t ordinal_ = 0;
  std::vector<std::string> trace_;
  bool tracing_ = true;
};

}  // namespace pairsonic::transport
