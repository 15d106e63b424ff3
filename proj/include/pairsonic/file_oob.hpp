#pragma once

// OOB channel over a shared directory: each emission is modulated and
// written as "oob-%04d.wav"; polling demodulates files not seen before.

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>

#include "pairsonic/modem.hpp"
#include "pairsonic/transport.hpp"

namespace pairsonic::transport {

class FileOobChannel final : public OobChannel {
 public:
  using Diagnostic = std::function<void(const std::string&)>;

  /// Listens on `dir`; emissions go to `tx_dir` when given, else `dir`.
  /// Diagnostics for unreadable files default to stderr.
  FileOobChannel(std::filesystem::path dir, modem::ModemConfig config,
                 std::optional<std::filesystem::path> tx_dir = std::nullopt, Diagnostic diagnostic = {});

  /// Returns the path written.
  std::filesystem::path emit_file(ByteView payload);
  void emit(ByteView payload) override { emit_file(payload); }
  /// Demodulates new files in name order. Files that fail to parse are
  /// reported through the diagnostic and skipped for good.
  std::vector<Bytes> poll() override;

 private:
  std::filesystem::path dir_;
  std::filesystem::path tx_dir_;
  modem::Modem modem_;
  Diagnostic diagnostic_;
  std::set<std::string> seen_;
  int emitted_ = 0;
};

/// True for names of the form oob-NNNN.wav (four or more digits).
bool is_oob_file_name(const std::string& name);

}  // namespace pairsonic::transport
