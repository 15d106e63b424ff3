#pragma once

// Systematic Reed-Solomon over GF(2^8), reduction polynomial 0x11D,
// generator element 2, first consecutive root alpha^0. A codeword is the
// data followed by its parity; the first byte is the highest-degree
// coefficient.

#include <cstddef>
#include <cstdint>

#include "pairsonic/bytes.hpp"

namespace pairsonic::modem {

namespace gf256 {
std::uint8_t mul(std::uint8_t a, std::uint8_t b);
std::uint8_t div(std::uint8_t a, std::uint8_t b);
std::uint8_t pow2(int exponent);  // alpha^exponent, any integer exponent
}  // namespace gf256

/// Parity bytes for `data`. Requires even parity_count in [2, 32] and
/// data.size() + parity_count <= 255.
Bytes rs_encode(ByteView data, std::size_t parity_count);

struct RsDecoded {
  Bytes data;                  // corrected data, parity stripped
  std::size_t corrected = 0;   // number of byte errors repaired
};

/// Corrects up to parity_count / 2 byte errors. Throws
/// Error(kUncorrectableError) when the syndromes cannot be explained by
/// that many errors.
RsDecoded rs_decode(ByteView codeword, std::size_t parity_count);

}  // namespace pairsonic::modem
