#pragma once

#include <cstdint>

#include "pairsonic/bytes.hpp"

namespace pairsonic::modem {

/// CRC-32/IEEE 802.3: reflected polynomial 0xEDB88320, init and final xor
/// 0xFFFFFFFF.
std::uint32_t crc32(ByteView bytes);

}  // namespace pairsonic::modem
