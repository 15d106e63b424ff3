#pragma once

// 16-bit PCM mono WAV files.

#include <filesystem>

#include "pairsonic/bytes.hpp"
#include "pairsonic/modem.hpp"

namespace pairsonic::wav {

/// Samples are scaled by 32768 and clamped to the 16-bit range.
Bytes encode(const modem::PcmBuffer& pcm);
/// Throws Error(kUnsupportedWav) for anything but uncompressed 16-bit mono,
/// including truncated or malformed headers.
modem::PcmBuffer decode(ByteView bytes);

/// Throws Error(kIo) when the file cannot be written.
void write(const std::filesystem::path& path, const modem::PcmBuffer& pcm);
/// Throws Error(kIo) when unreadable, kUnsupportedWav as decode().
modem::PcmBuffer read(const std::filesystem::path& path);

}  // namespace pairsonic::wav
