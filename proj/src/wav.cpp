#include "pairsonic/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>

#include "pairsonic/error.hpp"

namespace pairsonic::wav {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

void put_le(Bytes& out, std::uint32_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le(ByteView in, std::size_t pos, int width) {
  std::uint32_t v = 0;
  for (int i = width - 1; i >= 0; --i) v = (v << 8) | in[pos + static_cast<std::size_t>(i)];
  return v;
}

bool tag_is(ByteView in, std::size_t pos, const char (&tag)[5]) {
  return std::equal(tag, tag + 4, in.begin() + static_cast<std::ptrdiff_t>(pos));
}

[[noreturn]] void unsupported(const std::string& why) { throw Error(ErrorCode::kUnsupportedWav, why); }

}  // namespace

Bytes encode(const modem::PcmBuffer& pcm) {
  const auto data_bytes = static_cast<std::uint32_t>(pcm.samples.size() * 2);
  Bytes out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_le(out, 36 + data_bytes, 4);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_le(out, 16, 4);
  put_le(out, kFormatPcm, 2);
  put_le(out, 1, 2);
  put_le(out, static_cast<std::uint32_t>(pcm.sample_rate), 4);
  put_le(out, static_cast<std::uint32_t>(pcm.sample_rate) * 2, 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_le(out, data_bytes, 4);
  for (float s : pcm.samples) {
    long q = std::lround(static_cast<double>(s) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)), 2);
  }
  return out;
}

modem::PcmBuffer decode(ByteView in) {
  if (in.size() < 12 || !tag_is(in, 0, "RIFF") || !tag_is(in, 8, "WAVE")) unsupported("not a RIFF/WAVE file");

  std::optional<modem::PcmBuffer> fmt;
  std::size_t pos = 12;
  while (pos + 8 <= in.size()) {
    std::uint32_t size = get_le(in, pos + 4, 4);
    std::size_t body = pos + 8;
    if (size > in.size() - body) unsupported("chunk extends past end of file");
    if (tag_is(in, pos, "fmt ")) {
      if (size < 16) unsupported("short fmt chunk");
      auto format = static_cast<std::uint16_t>(get_le(in, body, 2));
      auto channels = get_le(in, body + 2, 2);
      auto rate = get_le(in, body + 4, 4);
      auto bits = get_le(in, body + 14, 2);
      if (format == kFormatExtensible && size >= 40) {
        // Subformat GUID starts with the real format tag.
        format = static_cast<std::uint16_t>(get_le(in, body + 24, 2));
      }
      if (format != kFormatPcm) unsupported("compressed or float format " + std::to_string(format));
      if (channels != 1) unsupported(std::to_string(channels) + " channels, expected mono");
      if (bits != 16) unsupported(std::to_string(bits) + "-bit samples, expected 16");
      if (rate == 0 || rate > 1'000'000) unsupported("sample rate " + std::to_string(rate));
      fmt = modem::PcmBuffer{{}, static_cast<int>(rate)};
    } else if (tag_is(in, pos, "data")) {
      if (!fmt) unsupported("data chunk before fmt chunk");
      if (size % 2 != 0) unsupported("odd data chunk size");
      fmt->samples.resize(size / 2);
      for (std::size_t i = 0; i < fmt->samples.size(); ++i) {
        auto q = static_cast<std::int16_t>(get_le(in, body + 2 * i, 2));
        fmt->samples[i] = static_cast<float>(q) / 32768.0f;
      }
      return std::move(*fmt);
    }
    pos = body + size + (size % 2);
  }
  unsupported("no data chunk");
}

void write(const std::filesystem::path& path, const modem::PcmBuffer& pcm) {
  Bytes bytes = encode(pcm);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

modem::PcmBuffer read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace pairsonic::wav
