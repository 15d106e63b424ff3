#include "pairsonic/sim_network.hpp"

#include <charconv>
#include <set>

#include "pairsonic/error.hpp"

namespace pairsonic::transport {

struct SimNetwork::Node {
  std::unique_ptr<Endpoint> in_band;
  std::unique_ptr<OobEndpoint> oob;
  std::deque<Incoming> inbox;
  std::vector<Bytes> oob_inbox;
  std::set<NodeId> connected;
};

class SimNetwork::Endpoint final : public InBandChannel {
 public:
  Endpoint(SimNetwork& net, NodeId self) : net_(net), self_(self) {}

  PeerHandle connect(std::string_view descriptor) override {
    Descriptor d = parse_descriptor(descriptor);
    NodeId target = 0;
    std::string_view token = d.token;
    bool ok = d.scheme == Descriptor::Scheme::kSim && token.starts_with("node");
    if (ok) {
      auto digits = token.substr(4);
      auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), target);
      ok = ec == std::errc{} && end == digits.data() + digits.size() && target < net_.nodes_.size() &&
           target != self_;
    }
    if (!ok) throw Error(ErrorCode::kConnectFailed, "no simulated node at " + std::string(descriptor));
    net_.nodes_[self_]->connected.insert(target);
    net_.enqueue({SimFrame::Kind::kConnect, self_, target, {}, 0});
    return handle_of(target);
  }

  void send(PeerHandle peer, ByteView bytes) override {
    NodeId to = node_of(peer);
    if (!net_.nodes_[self_]->connected.count(to)) {
      throw Error(ErrorCode::kPeerDisconnected, "not connected to " + descriptor_of(to));
    }
    net_.enqueue({SimFrame::Kind::kData, self_, to, Bytes(bytes.begin(), bytes.end()), 0});
  }

  void broadcast(ByteView bytes) override {
    for (NodeId to : net_.nodes_[self_]->connected) send(handle_of(to), bytes);
  }

  std::optional<Incoming> receive(std::chrono::milliseconds) override {
    auto& inbox = net_.nodes_[self_]->inbox;
    if (inbox.empty()) return std::nullopt;
    Incoming next = std::move(inbox.front());
    inbox.pop_front();
    return next;
  }

 private:
  SimNetwork& net_;
  NodeId self_;
};

class SimNetwork::OobEndpoint final : public OobChannel {
 public:
  OobEndpoint(SimNetwork& net, NodeId self) : net_(net), self_(self) {}

  void emit(ByteView payload) override { net_.emit_oob(self_, Bytes(payload.begin(), payload.end())); }

  std::vector<Bytes> poll() override { return std::exchange(net_.nodes_[self_]->oob_inbox, {}); }

 private:
  SimNetwork& net_;
  NodeId self_;
};

SimNetwork::SimNetwork(std::uint64_t seed) : rng_(seed) {}
SimNetwork::~SimNetwork() = default;

NodeId SimNetwork::add_node() {
  NodeId id = nodes_.size();
  auto node = std::make_unique<Node>();
  node->in_band = std::make_unique<Endpoint>(*this, id);
  node->oob = std::make_unique<OobEndpoint>(*this, id);
  nodes_.push_back(std::move(node));
  return id;
}

std::string SimNetwork::descriptor_of(NodeId node) { return "sim:node" + std::to_string(node); }

InBandChannel& SimNetwork::in_band(NodeId node) { return *nodes_.at(node)->in_band; }
OobChannel& SimNetwork::oob(NodeId node) { return *nodes_.at(node)->oob; }

void SimNetwork::inject(SimFrame frame) {
  if (frame.from >= nodes_.size() || frame.to >= nodes_.size()) {
    throw Error(ErrorCode::kInvalidConfig, "injected frame names an unknown node");
  }
  if (frame.kind == SimFrame::Kind::kConnect) nodes_[frame.from]->connected.insert(frame.to);
  enqueue(std::move(frame));
}

void SimNetwork::enqueue(SimFrame frame) {
  auto key = std::make_pair(frame.from, frame.to);
  links_[key].push_back(std::move(frame));
}

void SimNetwork::emit_oob(NodeId from, Bytes payload) {
  if (tamper_) tamper_(payload);
  if (tracing_) trace_.push_back("oob-emit " + std::to_string(from) + " len=" + std::to_string(payload.size()));
  for (NodeId n = 0; n < nodes_.size(); ++n) oob_queues_[n].push_back(payload);
}

bool SimNetwork::idle() const {
  for (const auto& [key, q] : links_) {
    if (!q.empty()) return false;
  }
  for (const auto& [key, q] : oob_queues_) {
    if (!q.empty()) return false;
  }
  return true;
}

bool SimNetwork::step() {
  std::vector<std::deque<SimFrame>*> links;
  std::vector<NodeId> oob;
  for (auto& [key, q] : links_) {
    if (!q.empty()) links.push_back(&q);
  }
  for (auto& [node, q] : oob_queues_) {
    if (!q.empty()) oob.push_back(node);
  }
  std::size_t total = links.size() + oob.size();
  if (total == 0) return false;
  std::size_t pick = static_cast<std::size_t>(rng_() % total);

  if (pick >= links.size()) {
    NodeId node = oob[pick - links.size()];
    Bytes payload = std::move(oob_queues_[node].front());
    oob_queues_[node].pop_front();
    if (tracing_) trace_.push_back("oob-deliver " + std::to_string(node) + " " + to_hex(payload));
    nodes_[node]->oob_inbox.push_back(std::move(payload));
    return true;
  }

  SimFrame frame = std::move(links[pick]->front());
  links[pick]->pop_front();
  if (frame.kind == SimFrame::Kind::kData) frame.ordinal = ordinal_++;
  std::vector<SimFrame> arriving;
  if (interposer_) {
    arriving = interposer_(std::move(frame));
  } else {
    arriving.push_back(std::move(frame));
  }
  for (auto& f : arriving) {
    if (f.to >= nodes_.size() || f.from >= nodes_.size()) continue;
    Node& to = *nodes_[f.to];
    if (f.kind == SimFrame::Kind::kConnect) {
      to.connected.insert(f.from);
      if (tracing_) trace_.push_back("connect " + std::to_string(f.from) + "->" + std::to_string(f.to));
      to.inbox.push_back({handle_of(f.from), Incoming::Kind::kConnected, {}});
    } else {
      if (tracing_) {
        trace_.push_back("data " + std::to_string(f.from) + "->" + std::to_string(f.to) + " #" +
                         std::to_string(f.ordinal) + " " + to_hex(f.bytes));
      }
      to.inbox.push_back({handle_of(f.from), Incoming::Kind::kData, std::move(f.bytes)});
    }
  }
  return true;
}

}  // namespace pairsonic::transport
