// pairsonic: simulation, modem tooling and the multi-process pairing demo.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pairsonic/card_file.hpp"
#include "pairsonic/error.hpp"
#include "pairsonic/modem.hpp"
#include "pairsonic/pairing.hpp"
#include "pairsonic/sim.hpp"
#include "pairsonic/wav.hpp"

namespace {

using namespace pairsonic;
using pairing::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settings shared by the subcommands; a --config file supplies defaults and
// explicit flags win.
struct Settings {
  std::string config_path;
  std::string band;
  int symbol_ms = 0;
  int parity = 0;
  int timeout_ms = 0;

  modem::ModemConfig modem;
  protocol::ProtocolConfig protocol;

  void resolve() {
    if (!config_path.empty()) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(cards::read_text(config_path));
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file " + config_path + ": " + e.what());
      }
      if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
      for (const auto& [key, value] : doc.items()) {
        try {
          if (key == "band") {
            auto b = modem::parse_band(value.get<std::string>());
            if (!b) throw UsageError("config: unknown band " + value.dump());
            modem.band = *b;
          } else if (key == "sample_rate") {
            modem.sample_rate = value.get<int>();
          } else if (key == "symbol_ms") {
            modem.symbol_ms = value.get<int>();
          } else if (key == "rs_parity_bytes") {
            modem.rs_parity_bytes = value.get<std::size_t>();
          } else if (key == "amplitude") {
            modem.amplitude = value.get<double>();
          } else if (key == "round_timeout_ms") {
            protocol.round_timeout = std::chrono::milliseconds(value.get<long>());
          } else {
            throw UsageError("config: unknown key '" + key + "'");
          }
        } catch (const nlohmann::json::exception& e) {
          throw UsageError("config: bad value for '" + key + "': " + e.what());
        }
      }
    }
    if (!band.empty()) {
      auto b = modem::parse_band(band);
      if (!b) throw UsageError("unknown band '" + band + "' (audible|ultrasonic)");
      modem.band = *b;
    }
    if (symbol_ms) modem.symbol_ms = symbol_ms;
    if (parity) modem.rs_parity_bytes = static_cast<std::size_t>(parity);
    if (timeout_ms) protocol.round_timeout = std::chrono::milliseconds(timeout_ms);
    try {
      modem::validate(modem);
      protocol::validate_config(protocol);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
};

void add_modem_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("--band", s.band, "audible or ultrasonic");
  cmd->add_option("--symbol-ms", s.symbol_ms, "symbol duration in ms")->check(CLI::PositiveNumber);
  cmd->add_option("--parity", s.parity, "Reed-Solomon parity bytes")->check(CLI::PositiveNumber);
  cmd->add_option("--config", s.config_path, "JSON settings file")->check(CLI::ExistingFile);
}

Bytes read_file(const std::string& path) {
  std::string text = cards::read_text(path);
  return Bytes(text.begin(), text.end());
}

// -- simulate / matrix -------------------------------------------------------

int cmd_simulate(std::size_t devices, const std::string& adversary, const std::string& oracle, std::uint64_t seed,
                 const std::string& report_path, Settings& s) {
  s.resolve();
  sim::SimConfig config;
  config.devices = devices;
  config.seed = seed;
  config.protocol = s.protocol;
  sim::SimReport report;
  try {
    config.adversary = sim::parse_adversary(adversary);
    config.oracle = sim::parse_oracle(oracle);
    report = sim::run_simulation(config);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidConfig || e.code() == ErrorCode::kGroupSizeOutOfBounds) {
      throw UsageError(e.what());
    }
    throw;
  }
  if (!report_path.empty()) cards::write_text(report_path, report.to_json());
  for (const auto& d : report.devices) {
    std::cout << "device " << d.index << " (" << protocol::to_string(d.role) << (d.honest ? "" : ", dishonest")
              << "): " << d.state;
    if (d.reason) std::cout << " " << wire::to_string(*d.reason) << " during " << protocol::to_string(*d.phase);
    if (d.imports) std::cout << ", imported " << d.imported_cards << " contacts";
    std::cout << "\n";
  }
  auto violations = sim::safety_violations(report);
  for (const auto& v : violations) std::cout << "SAFETY VIOLATION: " << v << "\n";
  std::cout << report.count_finalized(false) << " of " << devices << " devices finalized\n";
  return violations.empty() ? code(ExitCode::kOk) : code(ExitCode::kFailure);
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoul(item));
      } else {
        for (auto i = std::stoul(item.substr(0, dash)); i <= std::stoul(item.substr(dash + 1)); ++i) out.push_back(i);
      }
    } catch (const std::exception&) {
      throw UsageError("bad device list '" + text + "'");
    }
  }
  return out;
}

int cmd_matrix(const std::string& sizes, const std::vector<std::string>& adversaries,
               const std::vector<std::string>& oracles, std::size_t seed_count, std::uint64_t first_seed,
               Settings& s) {
  s.resolve();
  std::vector<sim::Scenario> scenarios;
  try {
    for (auto n : parse_sizes(sizes)) {
      if (n < wire::kMinGroupSize || n > wire::kMaxGroupSize) throw UsageError("group size outside [2, 16]");
      for (const auto& a : adversaries) {
        for (const auto& o : oracles) {
          scenarios.push_back({"n=" + std::to_string(n) + " " + a + " " + o, n, sim::parse_adversary(a),
                               sim::parse_oracle(o), s.protocol});
        }
      }
    }
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < seed_count; ++i) seeds.push_back(first_seed + i);
  auto summary = sim::run_matrix(scenarios, seeds);
  std::cout << summary.to_text();
  return summary.safe() ? code(ExitCode::kOk) : code(ExitCode::kFailure);
}

// -- modem -----------------------------------------------------------------

int cmd_encode(const std::string& in, const std::string& out, Settings& s) {
  s.resolve();
  Bytes payload = read_file(in);
  modem::Modem m(s.modem);
  auto pcm = m.modulate(payload);
  wav::write(out, pcm);
  std::cout << "wrote " << out << ": " << payload.size() << " bytes, "
            << modem::airtime_seconds(s.modem, payload.size()) << " s, band " << modem::to_string(s.modem.band)
            << "\n";
  return code(ExitCode::kOk);
}

int cmd_decode(const std::string& in, bool report, Settings& s) {
  s.resolve();
  modem::Modem m(s.modem);
  auto result = m.demodulate_with_report(wav::read(in));
  for (const auto& f : result.frames) std::cout << to_hex(f.payload) << "\n";
  if (report) {
    std::cerr << "sync hits " << result.sync_hits << ", rs failures " << result.rs_failures << ", crc failures "
              << result.crc_failures << ", length failures " << result.length_failures << "\n";
  }
  return result.frames.empty() ? code(ExitCode::kFailure) : code(ExitCode::kOk);
}

int cmd_impair(const std::string& in, const std::string& out, std::optional<double> snr, std::uint64_t seed,
               double gain, double dc, std::size_t pad) {
  auto pcm = wav::read(in);
  std::vector<modem::Impairment> steps;
  if (gain != 1.0) steps.push_back(modem::impairment::Gain{gain});
  if (dc != 0.0) steps.push_back(modem::impairment::DcOffset{dc});
  if (pad) steps.push_back(modem::impairment::Pad{pad, seed ^ 0x9ADull});
  if (snr) steps.push_back(modem::impairment::Awgn{*snr, seed});
  wav::write(out, modem::impair(pcm, steps));
  return code(ExitCode::kOk);
}

// -- pair ------------------------------------------------------------------

struct PairFlags {
  std::size_t group_size = 0;
  std::string contact;
  std::string oob_dir;
  std::string oob_tx_dir;
  std::string listen = "tcp:127.0.0.1:0";
  bool auto_confirm = false;
  std::string import;
  std::string contacts_out;
  std::optional<std::uint64_t> seed;
};

int cmd_pair(protocol::Role role, const PairFlags& f, Settings& s) {
  s.resolve();
  pairing::PairOptions o;
  o.role = role;
  o.group_size = f.group_size;
  if (role == protocol::Role::kCoordinator &&
      (f.group_size < wire::kMinGroupSize || f.group_size > wire::kMaxGroupSize)) {
    throw UsageError("--group-size must be in [2, 16]");
  }
  try {
    o.card = cards::read_card(f.contact);
    if (!f.import.empty()) o.import = pairing::parse_import_selection(f.import);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  o.oob_dir = f.oob_dir;
  if (!f.oob_tx_dir.empty()) o.oob_tx_dir = f.oob_tx_dir;
  o.listen = f.listen;
  o.auto_confirm = f.auto_confirm;
  if (!f.contacts_out.empty()) o.contacts_out = f.contacts_out;
  o.seed = f.seed;
  o.protocol = s.protocol;
  o.modem = s.modem;

  auto result = pairing::run_pairing(o, std::cout, std::cin);
  return code(pairing::exit_code_for(result.outcome));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group pairing over sound: simulator, modem tools and pairing demo"};
  app.require_subcommand(1);
  Settings settings;
  std::function<int()> run;

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run one simulated pairing session");
  std::size_t devices = 3;
  std::string adversary = "none", oracle = "honest", report_path;
  std::uint64_t seed = 0;
  simulate->add_option("--devices", devices, "group size (2-16)")->required();
  simulate->add_option("--adversary", adversary, "adversary name[:params]");
  simulate->add_option("--oracle", oracle, "honest | always-confirm | always-decline | confirm-subset:i,j");
  simulate->add_option("--seed", seed, "simulation seed");
  simulate->add_option("--report", report_path, "write the JSON report here");
  simulate->add_option("--timeout-ms", settings.timeout_ms, "round timeout")->check(CLI::PositiveNumber);
  simulate->add_option("--config", settings.config_path, "JSON settings file")->check(CLI::ExistingFile);
  simulate->callback([&] { run = [&] { return cmd_simulate(devices, adversary, oracle, seed, report_path, settings); }; });

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run scenario x seed grids and check safety");
  std::string sizes = "2-8";
  std::vector<std::string> adversaries{"none"}, oracles{"honest"};
  std::size_t seed_count = 100;
  std::uint64_t first_seed = 0;
  matrix->add_option("--devices", sizes, "group sizes, e.g. 2-8 or 3,4");
  matrix->add_option("--adversary", adversaries, "adversaries (repeatable)")->delimiter(' ');
  matrix->add_option("--oracle", oracles, "oracles (repeatable)");
  matrix->add_option("--seeds", seed_count, "number of seeds")->check(CLI::PositiveNumber);
  matrix->add_option("--first-seed", first_seed, "first seed");
  matrix->callback([&] { run = [&] { return cmd_matrix(sizes, adversaries, oracles, seed_count, first_seed, settings); }; });

  // modem
  auto* modem_cmd = app.add_subcommand("modem", "data-over-sound tools");
  modem_cmd->require_subcommand(1);
  std::string in_path, out_path;
  auto* encode = modem_cmd->add_subcommand("encode", "modulate a payload file into a WAV");
  encode->add_option("--in", in_path, "payload file (1-192 bytes)")->required()->check(CLI::ExistingFile);
  encode->add_option("--out", out_path, "output WAV")->required();
  add_modem_flags(encode, settings);
  encode->callback([&] { run = [&] { return cmd_encode(in_path, out_path, settings); }; });

  auto* decode = modem_cmd->add_subcommand("decode", "print every payload found in a WAV as hex");
  bool show_report = false;
  decode->add_option("--in", in_path, "input WAV")->required()->check(CLI::ExistingFile);
  decode->add_flag("--report", show_report, "print decoder statistics to stderr");
  add_modem_flags(decode, settings);
  decode->callback([&] { run = [&] { return cmd_decode(in_path, show_report, settings); }; });

  auto* impair = modem_cmd->add_subcommand("impair", "apply channel impairments to a WAV");
  std::optional<double> snr;
  std::uint64_t impair_seed = 0;
  double gain = 1.0, dc = 0.0;
  std::size_t pad = 0;
  impair->add_option("--in", in_path, "input WAV")->required()->check(CLI::ExistingFile);
  impair->add_option("--out", out_path, "output WAV")->required();
  impair->add_option("--snr", snr, "white noise at this SNR in dB");
  impair->add_option("--seed", impair_seed, "noise seed");
  impair->add_option("--gain", gain, "gain factor");
  impair->add_option("--dc", dc, "DC offset");
  impair->add_option("--pad", pad, "random leading/trailing silence, max samples");
  impair->callback([&] { run = [&] { return cmd_impair(in_path, out_path, snr, impair_seed, gain, dc, pad); }; });

  // pair
  auto* pair = app.add_subcommand("pair", "pair real processes over TCP and WAV files");
  pair->require_subcommand(1);
  PairFlags pf;
  auto pair_flags = [&](CLI::App* cmd) {
    cmd->add_option("--contact", pf.contact, "own contact card (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--oob-dir", pf.oob_dir, "directory the OOB WAVs are read from")->required();
    cmd->add_option("--oob-tx-dir", pf.oob_tx_dir, "write emitted WAVs here instead of --oob-dir");
    cmd->add_flag("--auto-confirm", pf.auto_confirm, "answer yes at the lock prompt");
    cmd->add_option("--import", pf.import, "all | none | roster indices like 0,2");
    cmd->add_option("--contacts-out", pf.contacts_out, "write imported contacts here (JSON)");
    cmd->add_option("--seed", pf.seed, "deterministic randomness (testing only)");
    cmd->add_option("--timeout-ms", settings.timeout_ms, "round timeout")->check(CLI::PositiveNumber);
    add_modem_flags(cmd, settings);
  };
  auto* coordinate = pair->add_subcommand("coordinate", "announce a session and coordinate the group");
  coordinate->add_option("--group-size", pf.group_size, "number of devices, this one included")->required();
  coordinate->add_option("--listen", pf.listen, "in-band listen address tcp:<host>:<port>");
  pair_flags(coordinate);
  coordinate->callback([&] { run = [&] { return cmd_pair(protocol::Role::kCoordinator, pf, settings); }; });
  auto* join = pair->add_subcommand("join", "join the session announced in --oob-dir");
  pair_flags(join);
  join->callback([&] { run = [&] { return cmd_pair(protocol::Role::kParticipant, pf, settings); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::kUsage);
  }

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return code(ExitCode::kUsage);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::kFailure);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::kFailure);
  }
}
