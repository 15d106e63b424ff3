#include "pairsonic/modem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "pairsonic/crc32.hpp"
#include "pairsonic/error.hpp"
#include "pairsonic/reed_solomon.hpp"

namespace pairsonic::modem {

namespace {

constexpr std::size_t kTones = kBanks * kTonesPerBank;

// Preamble symbols as (bank 0 index, bank 1 index).
constexpr std::array<std::pair<std::size_t, std::size_t>, kPreambleSymbols> kPreamble{
    {{0, 15}, {15, 0}, {0, 15}, {15, 0}}};

// Fraction of window energy a marker tone must hold before the full
// preamble check runs. A clean two-tone symbol puts ~0.49 in each tone.
constexpr double kMarkerPrefilter = 0.2;

// Marker energy must exceed the median bank energy by 6 dB (power x4).
constexpr double kMarkerOverMedian = 4.0;

std::size_t ramp_samples(const ModemConfig& c) {
  return static_cast<std::size_t>(std::lround(c.ramp_ms * c.sample_rate / 1000.0));
}

double median16(std::array<double, kTonesPerBank> v) {
  std::sort(v.begin(), v.end());
  return 0.5 * (v[7] + v[8]);
}

}  // namespace

std::string_view to_string(Band band) { return band == Band::kAudible ? "audible" : "ultrasonic"; }

std::optional<Band> parse_band(std::string_view name) {
  if (name == "audible") return Band::kAudible;
  if (name == "ultrasonic") return Band::kUltrasonic;
  return std::nullopt;
}

BandEdges band_edges(Band band) {
  return band == Band::kAudible ? BandEdges{1875.0, 6375.0} : BandEdges{15000.0, 19500.0};
}

double tone_spacing(const ModemConfig& config) {
  auto e = band_edges(config.band);
  return (e.high_hz - e.low_hz) / static_cast<double>(kTones);
}

std::size_t samples_per_symbol(const ModemConfig& config) {
  return static_cast<std::size_t>(static_cast<long long>(config.sample_rate) * config.symbol_ms / 1000);
}

void validate(const ModemConfig& c) {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::kInvalidConfig, why); };
  if (c.sample_rate <= 0) bad("sample rate must be positive");
  if (c.symbol_ms <= 0) bad("symbol duration must be positive");
  if ((static_cast<long long>(c.sample_rate) * c.symbol_ms) % 1000 != 0) {
    bad("symbol duration must be a whole number of samples");
  }
  std::size_t n = samples_per_symbol(c);
  if (static_cast<double>(c.sample_rate) / static_cast<double>(n) > tone_spacing(c)) {
    bad("symbol too short: DFT bin wider than the tone spacing");
  }
  if (band_edges(c.band).high_hz >= c.sample_rate / 2.0) bad("band exceeds Nyquist frequency");
  if (c.rs_parity_bytes < 2 || c.rs_parity_bytes > 32 || c.rs_parity_bytes % 2 != 0) {
    bad("parity bytes must be even and in [2, 32]");
  }
  if (!(c.amplitude > 0.0 && c.amplitude <= 1.0)) bad("amplitude must be in (0, 1]");
  if (c.ramp_ms < 0.0 || 2 * ramp_samples(c) >= n) bad("ramps longer than a symbol");
}

double tone_frequency(const ModemConfig& config, std::size_t bank, std::size_t index) {
  if (bank >= kBanks || index >= kTonesPerBank) {
    throw Error(ErrorCode::kIndexOutOfRange, "bank " + std::to_string(bank) + " index " + std::to_string(index));
  }
  double slot = static_cast<double>(bank * kTonesPerBank + index) + 0.5;
  return band_edges(config.band).low_hz + slot * tone_spacing(config);
}

std::size_t frame_symbols(const ModemConfig& config, std::size_t payload_size) {
  return kPreambleSymbols + 1 + payload_size + 4 + config.rs_parity_bytes;
}

double airtime_seconds(const ModemConfig& config, std::size_t payload_size) {
  return static_cast<double>(frame_symbols(config, payload_size)) * config.symbol_ms / 1000.0;
}

Bytes build_frame(const ModemConfig& config, ByteView payload) {
  if (payload.empty() || payload.size() > kMaxPayload) {
    throw Error(ErrorCode::kPayloadTooLarge, "payload must be 1-192 bytes, got " + std::to_string(payload.size()));
  }
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(payload.size()));
  w.raw(payload);
  w.u32(crc32(w.bytes()));
  Bytes frame = std::move(w).take();
  Bytes parity = rs_encode(frame, config.rs_parity_bytes);
  frame.insert(frame.end(), parity.begin(), parity.end());
  return frame;
}

std::string_view to_string(FrameStatus status) {
  switch (status) {
    case FrameStatus::kOk: return "ok";
    case FrameStatus::kBadLength: return "bad-length";
    case FrameStatus::kUncorrectable: return "uncorrectable";
    case FrameStatus::kCrcMismatch: return "crc-mismatch";
    case FrameStatus::kLengthChanged: return "length-changed";
  }
  return "unknown";
}

FrameDecode decode_frame(const ModemConfig& config, ByteView frame) {
  FrameDecode out;
  if (frame.empty()) return out;
  std::size_t len = frame[0];
  std::size_t total = 1 + len + 4 + config.rs_parity_bytes;
  if (len == 0 || len > kMaxPayload || frame.size() < total) return out;

  RsDecoded rs;
  try {
    rs = rs_decode(frame.first(total), config.rs_parity_bytes);
  } catch (const Error&) {
    out.status = FrameStatus::kUncorrectable;
    return out;
  }
  if (rs.data[0] != len) {
    out.status = FrameStatus::kLengthChanged;
    return out;
  }
  ByteReader r(ByteView(rs.data).subspan(1 + len));
  std::uint32_t crc = *r.u32();
  if (crc != crc32(ByteView(rs.data).first(1 + len))) {
    out.status = FrameStatus::kCrcMismatch;
    return out;
  }
  out.status = FrameStatus::kOk;
  out.payload.assign(rs.data.begin() + 1, rs.data.begin() + 1 + static_cast<std::ptrdiff_t>(len));
  out.corrected = rs.corrected;
  return out;
}

// -- Modem -----------------------------------------------------------------

Modem::Modem(ModemConfig config) : config_(config) {
  validate(config_);
  symbol_len_ = samples_per_symbol(config_);
  const std::size_t ramp = ramp_samples(config_);
  const double fs = config_.sample_rate;

  std::vector<double> envelope(symbol_len_, 1.0);
  for (std::size_t m = 0; m < ramp; ++m) {
    double v = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(ramp));
    envelope[m] = v;
    envelope[symbol_len_ - 1 - m] = v;
  }

  tones_.resize(kTones);
  corr_.assign(symbol_len_ * kTones * 2, 0.0f);
  for (std::size_t k = 0; k < kTones; ++k) {
    double f = tone_frequency(config_, k / kTonesPerBank, k % kTonesPerBank);
    tones_[k].frequency = f;
    tones_[k].waveform.resize(symbol_len_);
    for (std::size_t m = 0; m < symbol_len_; ++m) {
      double phase = 2.0 * std::numbers::pi * f * static_cast<double>(m) / fs;
      tones_[k].waveform[m] = static_cast<float>(config_.amplitude / 2.0 * envelope[m] * std::sin(phase));
      corr_[(m * kTones + k) * 2] = static_cast<float>(std::cos(phase));
      corr_[(m * kTones + k) * 2 + 1] = static_cast<float>(std::sin(phase));
    }
  }
}

PcmBuffer Modem::modulate(ByteView payload) const {
  Bytes frame = build_frame(config_, payload);
  std::vector<std::pair<std::size_t, std::size_t>> symbols(kPreamble.begin(), kPreamble.end());
  for (std::uint8_t b : frame) symbols.emplace_back(b >> 4, b & 0x0f);

  PcmBuffer pcm;
  pcm.sample_rate = config_.sample_rate;
  pcm.samples.assign(symbols.size() * symbol_len_, 0.0f);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const auto& lo = tones_[symbols[s].first].waveform;
    const auto& hi = tones_[kTonesPerBank + symbols[s].second].waveform;
    float* out = pcm.samples.data() + s * symbol_len_;
    for (std::size_t m = 0; m < symbol_len_; ++m) out[m] = lo[m] + hi[m];
  }
  return pcm;
}

void Modem::symbol_energies(const std::vector<float>& x, std::size_t start, double* energies) const {
  std::array<float, kTones * 2> acc{};
  const float* xs = x.data() + start;
  for (std::size_t m = 0; m < symbol_len_; ++m) {
    const float v = xs[m];
    const float* c = corr_.data() + m * kTones * 2;
    for (std::size_t j = 0; j < kTones * 2; ++j) acc[j] += v * c[j];
  }
  for (std::size_t k = 0; k < kTones; ++k) {
    energies[k] = static_cast<double>(acc[2 * k]) * acc[2 * k] + static_cast<double>(acc[2 * k + 1]) * acc[2 * k + 1];
  }
}

std::uint8_t Modem::symbol_byte(const double* energies) const {
  auto hi = std::max_element(energies, energies + kTonesPerBank) - energies;
  auto lo = std::max_element(energies + kTonesPerBank, energies + kTones) - (energies + kTonesPerBank);
  return static_cast<std::uint8_t>((hi << 4) | lo);
}

bool Modem::preamble_confirmed(const std::vector<float>& x, std::size_t start) const {
  std::array<double, kTones> e{};
  for (std::size_t j = 0; j < kPreambleSymbols; ++j) {
    symbol_energies(x, start + j * symbol_len_, e.data());
    const std::size_t expected[2] = {kPreamble[j].first, kPreamble[j].second};
    for (std::size_t bank = 0; bank < kBanks; ++bank) {
      std::array<double, kTonesPerBank> bank_e{};
      std::copy_n(e.begin() + static_cast<std::ptrdiff_t>(bank * kTonesPerBank), kTonesPerBank, bank_e.begin());
      double marker = bank_e[expected[bank]];
      if (marker <= 0.0) return false;
      if (std::max_element(bank_e.begin(), bank_e.end()) - bank_e.begin() !=
          static_cast<std::ptrdiff_t>(expected[bank])) {
        return false;
      }
      if (marker < kMarkerOverMedian * median16(bank_e)) return false;
    }
  }
  return true;
}

std::vector<DecodedFrame> Modem::demodulate(const PcmBuffer& pcm) const {
  return demodulate_with_report(pcm).frames;
}

DecodeReport Modem::demodulate_with_report(const PcmBuffer& pcm) const {
  if (pcm.sample_rate != config_.sample_rate) {
    throw Error(ErrorCode::kRateMismatch, "buffer is " + std::to_string(pcm.sample_rate) + " Hz, modem expects " +
                                              std::to_string(config_.sample_rate) + " Hz");
  }
  DecodeReport report;
  const auto& x = pcm.samples;
  const std::size_t n = symbol_len_;
  const std::size_t min_frame = (kPreambleSymbols + 1) * n;
  if (x.size() < min_frame) return report;

  std::size_t hop = std::max<std::size_t>(1, n / 64);
  while (n % hop != 0) --hop;
  const std::size_t per_symbol = n / hop;

  // Sliding DFT of the four marker tones plus sliding window energy. After
  // consuming sample t, the window covers [t - n + 1, t].
  constexpr std::array<std::size_t, 4> kMarkers{0, kTonesPerBank - 1, kTonesPerBank, kTones - 1};
  std::array<std::complex<double>, 4> rot{}, tail{}, acc{};
  for (std::size_t i = 0; i < 4; ++i) {
    double w = 2.0 * std::numbers::pi * tones_[kMarkers[i]].frequency / config_.sample_rate;
    rot[i] = std::polar(1.0, w);
    tail[i] = std::polar(1.0, -w * static_cast<double>(n - 1));
  }
  const std::size_t windows = (x.size() - n) / hop + 1;
  // fraction[i][marker] for the window starting at i * hop.
  std::vector<std::array<float, 4>> fraction(windows);
  double energy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double in = x[t];
    const double out = t >= n ? static_cast<double>(x[t - n]) : 0.0;
    energy += in * in - out * out;
    for (std::size_t i = 0; i < 4; ++i) acc[i] = (acc[i] - out) * rot[i] + in * tail[i];
    if (t + 1 < n) continue;
    std::size_t start = t + 1 - n;
    if (start % hop != 0) continue;
    std::size_t w = start / hop;
    double denom = static_cast<double>(n) * std::max(energy, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      fraction[w][i] = denom > 1e-9 ? static_cast<float>(2.0 * std::norm(acc[i]) / denom) : 0.0f;
    }
  }

  // Marker slots per preamble symbol: (0,15) -> tones 0 and 31 -> slots 0, 3;
  // (15,0) -> tones 15 and 16 -> slots 1, 2.
  constexpr std::array<std::pair<int, int>, kPreambleSymbols> kSlots{{{0, 3}, {1, 2}, {0, 3}, {1, 2}}};
  auto score = [&](std::size_t w) -> double {
    if (w + 4 * per_symbol >= windows + per_symbol) return -1.0;
    double total = 0.0;
    for (std::size_t j = 0; j < kPreambleSymbols; ++j) {
      std::size_t idx = w + j * per_symbol;
      if (idx >= windows) return -1.0;
      float a = fraction[idx][kSlots[j].first];
      float b = fraction[idx][kSlots[j].second];
      if (a < kMarkerPrefilter || b < kMarkerPrefilter) return -1.0;
      total += a + b;
    }
    return total;
  };

  std::vector<double> energies(kTones);
  std::size_t w = 0;
  while (w < windows) {
    if (score(w) < 0.0) {
      ++w;
      continue;
    }
    // Best alignment within half a symbol of the first hit.
    std::size_t best = w;
    double best_score = score(w);
    for (std::size_t k = w + 1; k < std::min(windows, w + per_symbol / 2 + 1); ++k) {
      double s = score(k);
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    const std::size_t start = best * hop;
    const std::size_t resume = best + per_symbol / 2 + 1;
    if (!preamble_confirmed(x, start)) {
      w = resume;
      continue;
    }
    ++report.sync_hits;

    const std::size_t data_start = start + kPreambleSymbols * n;
    auto byte_at = [&](std::size_t i) {
      symbol_energies(x, data_start + i * n, energies.data());
      return symbol_byte(energies.data());
    };
    if (data_start + n > x.size()) {
      ++report.length_failures;
      w = resume;
      continue;
    }
    std::uint8_t len = byte_at(0);
    std::size_t total = 1 + static_cast<std::size_t>(len) + 4 + config_.rs_parity_bytes;
    if (len == 0 || len > kMaxPayload || data_start + total * n > x.size()) {
      ++report.length_failures;
      w = resume;
      continue;
    }
    Bytes frame{len};
    for (std::size_t i = 1; i < total; ++i) frame.push_back(byte_at(i));
    FrameDecode decoded = decode_frame(config_, frame);
    switch (decoded.status) {
      case FrameStatus::kOk:
        report.frames.push_back({std::move(decoded.payload), start});
        w = (data_start + total * n) / hop;
        continue;
      case FrameStatus::kCrcMismatch:
        ++report.crc_failures;
        break;
      case FrameStatus::kUncorrectable:
      case FrameStatus::kLengthChanged:
        ++report.rs_failures;
        break;
      case FrameStatus::kBadLength:
        ++report.length_failures;
        break;
    }
    w = resume;
  }
  return report;
}

// -- impairments -------------------------------------------------------------

PcmBuffer impair(const PcmBuffer& pcm, std::span<const Impairment> steps) {
  PcmBuffer out = pcm;
  auto clamp_all = [&] {
    for (auto& v : out.samples) v = std::clamp(v, -1.0f, 1.0f);
  };
  for (const auto& step : steps) {
    if (const auto* awgn = std::get_if<impairment::Awgn>(&step)) {
      if (out.samples.empty()) continue;
      double power = 0.0;
      for (float v : out.samples) power += static_cast<double>(v) * v;
      power /= static_cast<double>(out.samples.size());
      if (power <= 0.0) continue;
      double sigma = std::sqrt(power / std::pow(10.0, awgn->snr_db / 10.0));
      std::mt19937_64 rng(awgn->seed);
      std::normal_distribution<double> noise(0.0, sigma);
      for (auto& v : out.samples) v = static_cast<float>(v + noise(rng));
    } else if (const auto* gain = std::get_if<impairment::Gain>(&step)) {
      if (gain->factor == 1.0) continue;
      for (auto& v : out.samples) v = static_cast<float>(v * gain->factor);
    } else if (const auto* dc = std::get_if<impairment::DcOffset>(&step)) {
      for (auto& v : out.samples) v = static_cast<float>(v + dc->value);
    } else {
      const auto& pad = std::get<impairment::Pad>(step);
      std::mt19937_64 rng(pad.seed);
      std::uniform_int_distribution<std::size_t> len(0, pad.max_samples);
      std::size_t lead = len(rng);
      std::size_t trail = len(rng);
      std::vector<float> padded(lead, 0.0f);
      padded.insert(padded.end(), out.samples.begin(), out.samples.end());
      padded.resize(padded.size() + trail, 0.0f);
      out.samples = std::move(padded);
    }
    clamp_all();
  }
  return out;
}

}  // namespace pairsonic::modem
