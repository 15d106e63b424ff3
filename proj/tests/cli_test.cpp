#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "pairsonic/card_file.hpp"
#include "pairsonic/error.hpp"
#include "pairsonic/pairing.hpp"
#include "pairsonic/wav.hpp"
#include "support/process.hpp"

using namespace pairsonic;
using pairsonic::testing::Process;
using pairsonic::testing::run_command;
namespace fs = std::filesystem;

namespace {

const std::string kCli = PAIRSONIC_CLI;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() / ("pairsonic-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  int cli(std::vector<std::string> args, std::string* out = nullptr, const std::string& input = "") {
    args.insert(args.begin(), kCli);
    return run_command(args, path("log-" + std::to_string(log_counter_++) + ".txt"), out, input);
  }

  fs::path write_card(std::size_t i) {
    wire::ContactCard c{"Person " + std::to_string(i), {}, {}};
    c.public_key.fill(static_cast<std::uint8_t>(0x10 + i));
    c.set_extension("phone", "+1 555 010" + std::to_string(i));
    auto p = path("card" + std::to_string(i) + ".json");
    cards::write_card(p, c);
    return p;
  }

  void write_bytes(const fs::path& p, const Bytes& b) {
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
  }

  fs::path dir_;
  int log_counter_ = 0;
};

double tone_power(const std::vector<float>& x, std::size_t start, std::size_t n, double freq) {
  double re = 0, im = 0;
  for (std::size_t m = 0; m < n; ++m) {
    double ph = 2 * M_PI * freq * static_cast<double>(m) / 48000.0;
    re += x[start + m] * std::cos(ph);
    im += x[start + m] * std::sin(ph);
  }
  return re * re + im * im;
}

}  // namespace

TEST(CardFile, RoundTripWithBinaryExtension) {
  wire::ContactCard c{"Zoë", {}, {}};
  c.public_key.fill(0xab);
  c.set_extension("email", "zoe@example.org");
  c.extensions[to_bytes("blob")] = Bytes{0xff, 0x00, 0x80};
  std::string text = cards::format_card(c);
  EXPECT_NE(text.find("\"hex\": \"ff0080\""), std::string::npos);
  EXPECT_EQ(cards::parse_card(text), c);
  EXPECT_EQ(cards::parse_contacts(cards::format_contacts({c, c})), (std::vector<wire::ContactCard>{c, c}));
}

TEST(CardFile, RejectsBadCards) {
  for (const char* bad : {"not json", "[]", R"({"name": "x"})", R"({"name": "x", "public_key": "abcd"})",
                          R"({"name": "", "public_key": "0000000000000000000000000000000000000000000000000000000000000000"})",
                          R"({"name": "x", "public_key": "000000000000000000000000000000000000000000000000000000000000000g"})",
                          R"({"name": "x", "public_key": "0000000000000000000000000000000000000000000000000000000000000000", "extensions": {"k": 5}})"}) {
    try {
      cards::parse_card(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidCard) << bad;
    }
  }
}

TEST(Pairing, ExitCodes) {
  using pairing::ExitCode;
  using protocol::Aborted;
  using wire::AbortReason;
  EXPECT_EQ(pairing::exit_code_for(protocol::Finalized{}), ExitCode::kOk);
  EXPECT_EQ(pairing::exit_code_for(Aborted{AbortReason::kTimeout, {}}), ExitCode::kTimeout);
  EXPECT_EQ(pairing::exit_code_for(Aborted{AbortReason::kOobMismatch, {}}), ExitCode::kIntegrity);
  EXPECT_EQ(pairing::exit_code_for(Aborted{AbortReason::kIntegrityFailure, {}}), ExitCode::kIntegrity);
  EXPECT_EQ(pairing::exit_code_for(Aborted{AbortReason::kUserDeclined, {}}), ExitCode::kUserDeclined);
}

TEST(Pairing, ImportSelection) {
  using Mode = pairing::ImportSelection::Mode;
  EXPECT_EQ(pairing::parse_import_selection("all").mode, Mode::kAll);
  EXPECT_EQ(pairing::parse_import_selection("none").mode, Mode::kNone);
  auto sel = pairing::parse_import_selection("0,2");
  EXPECT_EQ(sel.mode, Mode::kIndices);
  EXPECT_EQ(sel.indices, (std::set<std::size_t>{0, 2}));
  for (const char* bad : {"", "1,", ",1", "x", "1;2", "-1"}) EXPECT_THROW(pairing::parse_import_selection(bad), Error) << bad;
}

TEST_F(CliTest, SimulateHonestWritesReport) {
  std::string out;
  EXPECT_EQ(cli({"simulate", "--devices", "3", "--adversary", "none", "--oracle", "honest", "--seed", "7", "--report",
                 path("r.json").string()},
                &out),
            0);
  auto doc = nlohmann::json::parse(cards::read_text(path("r.json")));
  EXPECT_EQ(doc["finalized"], 3);
  EXPECT_EQ(doc["seed"], 7);
  for (const auto& d : doc["devices"]) EXPECT_EQ(d["state"], "Finalized");
}

TEST_F(CliTest, SimulateAttackDetectedIsStillExitZero) {
  EXPECT_EQ(cli({"simulate", "--devices", "3", "--adversary", "substitute-commit:1", "--report", path("r.json").string()}),
            0);
  auto doc = nlohmann::json::parse(cards::read_text(path("r.json")));
  EXPECT_EQ(doc["finalized"], 0);
}

TEST_F(CliTest, SimulateUsageErrors) {
  EXPECT_EQ(cli({"simulate", "--devices", "1"}), 2);
  EXPECT_EQ(cli({"simulate", "--devices", "3", "--adversary", "teleport"}), 2);
  EXPECT_EQ(cli({"simulate", "--devices", "3", "--oracle", "maybe"}), 2);
  EXPECT_EQ(cli({"simulate"}), 2);
  EXPECT_EQ(cli({"frobnicate"}), 2);
  EXPECT_EQ(cli({}), 2);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  cli({"simulate", "--devices", "4", "--adversary", "drop-message", "--seed", "3", "--report", path("a.json").string()});
  cli({"simulate", "--devices", "4", "--adversary", "drop-message", "--seed", "3", "--report", path("b.json").string()});
  EXPECT_EQ(cards::read_text(path("a.json")), cards::read_text(path("b.json")));
}

TEST_F(CliTest, MatrixReportsSafety) {
  std::string out;
  EXPECT_EQ(cli({"matrix", "--devices", "2-3", "--seeds", "5", "--adversary", "none", "tamper-oob-digest"}, &out), 0);
  EXPECT_NE(out.find("no safety violations"), std::string::npos);
  EXPECT_EQ(cli({"matrix", "--devices", "1"}), 2);
}

TEST_F(CliTest, ModemEncodeDecodeRoundTrip) {
  Bytes payload(41);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i * 37 + 5);
  write_bytes(path("p.bin"), payload);
  for (const char* band : {"audible", "ultrasonic"}) {
    ASSERT_EQ(cli({"modem", "encode", "--band", band, "--in", path("p.bin").string(), "--out", path("p.wav").string()}), 0);
    std::string out;
    EXPECT_EQ(cli({"modem", "decode", "--band", band, "--in", path("p.wav").string()}, &out), 0);
    EXPECT_EQ(out, to_hex(payload) + "\n");
  }
}

TEST_F(CliTest, ModemDecodeSilenceExitsOne) {
  wav::write(path("silence.wav"), modem::PcmBuffer{std::vector<float>(48'000, 0.0f), 48'000});
  std::string out;
  EXPECT_EQ(cli({"modem", "decode", "--in", path("silence.wav").string()}, &out), 1);
  EXPECT_EQ(out, "");
}

TEST_F(CliTest, ModemUltrasonicPeakAboveBandEdge) {
  write_bytes(path("p.bin"), to_bytes("ultrasonic check"));
  ASSERT_EQ(cli({"modem", "encode", "--band", "ultrasonic", "--in", path("p.bin").string(), "--out",
                 path("u.wav").string()}),
            0);
  auto pcm = wav::read(path("u.wav"));
  std::size_t start = 6 * 3072;
  double best_f = 0, best_p = -1;
  for (double f = 100; f < 24'000; f += 70.3125) {
    double p = tone_power(pcm.samples, start, 3072, f);
    if (p > best_p) best_p = p, best_f = f;
  }
  EXPECT_GT(best_f, 15'000);
  EXPECT_LT(best_f, 19'500);
}

TEST_F(CliTest, ModemImpairIsDeterministicAndStillDecodes) {
  write_bytes(path("p.bin"), to_bytes("noisy payload"));
  ASSERT_EQ(cli({"modem", "encode", "--in", path("p.bin").string(), "--out", path("c.wav").string()}), 0);
  for (const char* name : {"n1.wav", "n2.wav"}) {
    ASSERT_EQ(cli({"modem", "impair", "--snr", "15", "--seed", "4", "--pad", "9000", "--in", path("c.wav").string(),
                   "--out", path(name).string()}),
              0);
  }
  EXPECT_EQ(cards::read_text(path("n1.wav")), cards::read_text(path("n2.wav")));
  ASSERT_EQ(cli({"modem", "impair", "--snr", "15", "--seed", "5", "--in", path("c.wav").string(), "--out",
                 path("n3.wav").string()}),
            0);
  EXPECT_NE(cards::read_text(path("n1.wav")), cards::read_text(path("n3.wav")));
  std::string out;
  EXPECT_EQ(cli({"modem", "decode", "--in", path("n1.wav").string()}, &out), 0);
  EXPECT_EQ(out, to_hex(to_bytes("noisy payload")) + "\n");
}

TEST_F(CliTest, ModemErrors) {
  write_bytes(path("big.bin"), Bytes(193, 1));
  EXPECT_NE(cli({"modem", "encode", "--in", path("big.bin").string(), "--out", path("x.wav").string()}), 0);
  std::ofstream(path("bad.wav")) << "RIFFjunk";
  EXPECT_NE(cli({"modem", "decode", "--in", path("bad.wav").string()}), 0);
  EXPECT_EQ(cli({"modem", "encode", "--band", "infrared", "--in", path("big.bin").string(), "--out", "x"}), 2);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  write_bytes(path("p.bin"), to_bytes("config"));
  cards::write_text(path("cfg.json"), R"({"band": "ultrasonic", "rs_parity_bytes": 12})");
  ASSERT_EQ(cli({"modem", "encode", "--config", path("cfg.json").string(), "--in", path("p.bin").string(), "--out",
                 path("a.wav").string()}),
            0);
  // 4 preamble + 1 + 6 + 4 + 12 symbols.
  EXPECT_EQ(wav::read(path("a.wav")).samples.size(), 27u * 3072);
  std::string out;
  EXPECT_EQ(cli({"modem", "decode", "--band", "ultrasonic", "--parity", "12", "--in", path("a.wav").string()}, &out), 0);
  EXPECT_EQ(cli({"modem", "decode", "--config", path("cfg.json").string(), "--band", "audible", "--in",
                 path("a.wav").string()}),
            1);
  cards::write_text(path("bad.json"), R"({"colour": "blue"})");
  EXPECT_EQ(cli({"modem", "decode", "--config", path("bad.json").string(), "--in", path("a.wav").string()}), 2);
}

TEST_F(CliTest, PairThreeProcesses) {
  fs::create_directories(path("oob"));
  std::vector<std::unique_ptr<Process>> procs;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<std::string> args{kCli, "pair", i == 0 ? "coordinate" : "join", "--contact", write_card(i).string(),
                                  "--oob-dir", path("oob").string(), "--auto-confirm", "--import", "all",
                                  "--contacts-out", path("out" + std::to_string(i) + ".json").string()};
    if (i == 0) args.insert(args.end(), {"--group-size", "3"});
    procs.push_back(std::make_unique<Process>(args, path("p" + std::to_string(i) + ".log")));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(procs[i]->wait(), 0) << procs[i]->output();
    auto contacts = cards::read_contacts(path("out" + std::to_string(i) + ".json"));
    EXPECT_EQ(contacts.size(), 3u);
    EXPECT_NE(procs[i]->output().find("[ LOCK ]"), std::string::npos);
  }
  EXPECT_EQ(cards::read_contacts(path("out0.json")), cards::read_contacts(path("out2.json")));
}

TEST_F(CliTest, PairDeclineAtPromptAbortsEveryone) {
  fs::create_directories(path("oob"));
  std::vector<std::unique_ptr<Process>> procs;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<std::string> args{kCli, "pair", i == 0 ? "coordinate" : "join", "--contact", write_card(i).string(),
                                  "--oob-dir", path("oob").string(), "--contacts-out",
                                  path("out" + std::to_string(i) + ".json").string()};
    if (i == 0) args.insert(args.end(), {"--group-size", "3"});
    if (i != 2) args.push_back("--auto-confirm");
    procs.push_back(std::make_unique<Process>(args, path("p" + std::to_string(i) + ".log"), i == 2 ? "n\n" : ""));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(procs[i]->wait(), 5) << procs[i]->output();
    EXPECT_FALSE(fs::exists(path("out" + std::to_string(i) + ".json")));
  }
  EXPECT_NE(procs[2]->output().find("All 3 devices show the lock? [y/n]"), std::string::npos);
}

TEST_F(CliTest, PairJoinWithoutAnnouncementTimesOut) {
  fs::create_directories(path("oob"));
  EXPECT_EQ(cli({"pair", "join", "--contact", write_card(1).string(), "--oob-dir", path("oob").string(),
                 "--timeout-ms", "300"}),
            3);
}

TEST_F(CliTest, PairUsageErrors) {
  EXPECT_EQ(cli({"pair", "coordinate", "--group-size", "1", "--contact", write_card(0).string(), "--oob-dir",
                 path("oob").string()}),
            2);
  cards::write_text(path("broken.json"), "{}");
  EXPECT_EQ(cli({"pair", "join", "--contact", path("broken.json").string(), "--oob-dir", path("oob").string()}), 2);
  EXPECT_EQ(cli({"pair", "join", "--contact", write_card(1).string(), "--oob-dir", path("oob").string(), "--import",
                 "some"}),
            2);
}
