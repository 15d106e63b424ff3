#pragma once

// Data-over-sound physical layer: two banks of 16 MFSK tones carry one byte
// per symbol. A transmission is a 4-symbol preamble followed by one frame:
//
//   len (1) || payload (len) || crc32 (4, big-endian) || rs parity
//
// where the CRC covers len || payload and the Reed-Solomon parity covers
// everything before it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pairsonic/bytes.hpp"

namespace pairsonic::modem {

enum class Band { kAudible, kUltrasonic };

std::string_view to_string(Band band);
std::optional<Band> parse_band(std::string_view name);

struct BandEdges {
  double low_hz;
  double high_hz;
};

/// 1875-6375 Hz or 15000-19500 Hz; both 4500 Hz wide.
BandEdges band_edges(Band band);

inline constexpr std::size_t kTonesPerBank = 16;
inline constexpr std::size_t kBanks = 2;
inline constexpr std::size_t kPreambleSymbols = 4;
inline constexpr std::size_t kMaxPayload = 192;

struct ModemConfig {
  int sample_rate = 48'000;
  Band band = Band::kAudible;
  int symbol_ms = 64;
  std::size_t rs_parity_bytes = 8;
  double amplitude = 0.5;
  double ramp_ms = 2.0;
};

/// Throws Error(kInvalidConfig) unless: symbol length is a whole number of
/// samples, the DFT bin width does not exceed the tone spacing, the top tone
/// is below Nyquist, parity is even in [2, 32], amplitude in (0, 1].
void validate(const ModemConfig& config);

/// Band width / 32 = 140.625 Hz for both bands.
double tone_spacing(const ModemConfig& config);
std::size_t samples_per_symbol(const ModemConfig& config);

/// Centre frequency of a tone: the band is split into 32 sub-channels of
/// one spacing each and every tone sits mid-channel, so keyed symbols keep
/// their spectral main lobe inside the band edges. Throws
/// Error(kIndexOutOfRange).
double tone_frequency(const ModemConfig& config, std::size_t bank, std::size_t index);

struct PcmBuffer {
  std::vector<float> samples;
  int sample_rate = 48'000;
};

/// Frame bytes (one per data symbol) for a payload. Throws
/// Error(kPayloadTooLarge) for empty or > 192-byte payloads.
Bytes build_frame(const ModemConfig& config, ByteView payload);

/// Number of symbols, preamble included, that carry `payload_size` bytes.
std::size_t frame_symbols(const ModemConfig& config, std::size_t payload_size);
double airtime_seconds(const ModemConfig& config, std::size_t payload_size);

enum class FrameStatus { kOk, kBadLength, kUncorrectable, kCrcMismatch, kLengthChanged };
std::string_view to_string(FrameStatus status);

struct FrameDecode {
  FrameStatus status = FrameStatus::kBadLength;
  Bytes payload;
  std::size_t corrected = 0;
};

/// Byte-level inverse of build_frame: trusts `frame[0]` for the extent,
/// applies RS correction then the CRC check.
FrameDecode decode_frame(const ModemConfig& config, ByteView frame);

struct DecodedFrame {
  Bytes payload;
  std::size_t start_sample = 0;
  bool operator==(const DecodedFrame&) const = default;
};

struct DecodeReport {
  std::vector<DecodedFrame> frames;
  std::size_t sync_hits = 0;
  std::size_t rs_failures = 0;
  std::size_t crc_failures = 0;
  std::size_t length_failures = 0;
};

/// Holds the per-config tone tables so repeated modulate/demodulate calls do
/// not rebuild them. Stateless between calls; a const instance may be shared.
class Modem {
 public:
  explicit Modem(ModemConfig config);

  const ModemConfig& config() const { return config_; }

  PcmBuffer modulate(ByteView payload) const;

  /// Scans the whole buffer and returns every frame whose CRC validates, in
  /// order. Throws Error(kRateMismatch) if the buffer's rate differs.
  std::vector<DecodedFrame> demodulate(const PcmBuffer& pcm) const;
  DecodeReport demodulate_with_report(const PcmBuffer& pcm) const;

 private:
  struct ToneTable {
    double frequency = 0;
    std::vector<float> waveform;  // one keyed symbol, ramps and amplitude applied
  };

  // Per-bank tone energies for the symbol window starting at `start`.
  void symbol_energies(const std::vector<float>& x, std::size_t start, double* energies) const;
  std::uint8_t symbol_byte(const double* energies) const;
  bool preamble_confirmed(const std::vector<float>& x, std::size_t start) const;

  ModemConfig config_;
  std::size_t symbol_len_ = 0;
  std::vector<ToneTable> tones_;      // 32 entries, bank-major
  std::vector<float> corr_;           // [sample][tone][cos, sin]
};

inline PcmBuffer modulate(const ModemConfig& config, ByteView payload) {
  return Modem(config).modulate(payload);
}
inline std::vector<DecodedFrame> demodulate(const ModemConfig& config, const PcmBuffer& pcm) {
  return Modem(config).demodulate(pcm);
}

// -- channel impairments -----------------------------------------------------

namespace impairment {
/// White Gaussian noise at `snr_db` relative to the buffer's mean power.
struct Awgn {
  double snr_db = 15.0;
  std::uint64_t seed = 0;
};
struct Gain {
  double factor = 1.0;
};
struct DcOffset {
  double value = 0.0;
};
/// Random leading and trailing silence, each uniform in [0, max_samples].
struct Pad {
  std::size_t max_samples = 24'000;
  std::uint64_t seed = 0;
};
}  // namespace impairment

using Impairment = std::variant<impairment::Awgn, impairment::Gain, impairment::DcOffset, impairment::Pad>;

/// Applies the impairments in order; output is clamped to [-1, 1].
PcmBuffer impair(const PcmBuffer& pcm, std::span<const Impairment> steps);

}  // namespace pairsonic::modem
