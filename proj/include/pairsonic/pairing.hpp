#pragma once

// Real-process pairing: one session driven over TCP in-band and WAV-file
// OOB, with the lock confirmation asked on a console.

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pairsonic/modem.hpp"
#include "pairsonic/protocol.hpp"
#include "pairsonic/wire.hpp"

namespace pairsonic::pairing {

/// Process exit codes shared by every subcommand.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,  // generic error; also "nothing decoded"
  kUsage = 2,
  kTimeout = 3,
  kIntegrity = 4,  // integrity failure or OOB mismatch
  kUserDeclined = 5,
};

ExitCode exit_code_for(const protocol::Outcome& outcome);

/// Which roster entries to import: all, none, listed indices, or ask.
struct ImportSelection {
  enum class Mode { kAll, kNone, kIndices, kAsk };
  Mode mode = Mode::kAsk;
  std::set<std::size_t> indices;
};

/// "all", "none", or comma-separated roster indices. Throws
/// Error(kInvalidConfig).
ImportSelection parse_import_selection(std::string_view text);

struct PairOptions {
  protocol::Role role = protocol::Role::kParticipant;
  std::size_t group_size = 0;  // coordinator only
  wire::ContactCard card;
  std::filesystem::path oob_dir;
  std::optional<std::filesystem::path> oob_tx_dir;
  std::string listen = "tcp:127.0.0.1:0";  // coordinator only
  bool auto_confirm = false;
  ImportSelection import;
  std::optional<std::filesystem::path> contacts_out;
  std::optional<std::uint64_t> seed;
  protocol::ProtocolConfig protocol;
  modem::ModemConfig modem;
  std::chrono::milliseconds poll_interval{20};
};

struct PairResult {
  protocol::Outcome outcome;
  std::vector<wire::ContactCard> imported;
  std::string descriptor;  // coordinator's actual listen address
};

/// Runs one session to completion. Progress, the lock badge and prompts go
/// to `out`; answers are read from `in`.
PairResult run_pairing(const PairOptions& options, std::ostream& out, std::istream& in);

}  // namespace pairsonic::pairing
