#include "pairsonic/transport.hpp"

#include <charconv>

#include "pairsonic/error.hpp"
#include "pairsonic/wire.hpp"

namespace pairsonic::transport {

std::string Descriptor::str() const {
  if (scheme == Scheme::kSim) return "sim:" + token;
  return "tcp:" + host + ":" + std::to_string(port);
}

Descriptor parse_descriptor(std::string_view text) {
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::kInvalidConfig, "transport descriptor '" + std::string(text) + "': " + why);
  };
  if (text.size() > wire::kMaxDescriptorBytes) throw bad("longer than 64 bytes");
  if (!is_valid_utf8(as_bytes(text))) throw bad("not UTF-8");

  Descriptor d;
  if (text.starts_with("sim:")) {
    d.scheme = Descriptor::Scheme::kSim;
    d.token = std::string(text.substr(4));
    if (d.token.empty()) throw bad("empty sim token");
    return d;
  }
  if (!text.starts_with("tcp:")) throw bad("unknown scheme");
  auto rest = text.substr(4);
  auto colon = rest.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw bad("expected tcp:<host>:<port>");
  d.host = std::string(rest.substr(0, colon));
  auto port = rest.substr(colon + 1);
  unsigned value = 0;
  auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || end != port.data() + port.size() || value > 65535) throw bad("bad port");
  d.port = static_cast<std::uint16_t>(value);
  return d;
}

}  // namespace pairsonic::transport
