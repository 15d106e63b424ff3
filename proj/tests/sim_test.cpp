#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pairsonic/error.hpp"
#include "pairsonic/sim.hpp"

using namespace pairsonic;
using namespace pairsonic::sim;

namespace {

SimReport run(std::size_t n, Adversary adv, UserOracle oracle, std::uint64_t seed) {
  SimConfig c;
  c.devices = n;
  c.adversary = std::move(adv);
  c.oracle = std::move(oracle);
  c.seed = seed;
  return run_simulation(c);
}

std::size_t total_imports(const SimReport& r) {
  std::size_t k = 0;
  for (const auto& d : r.devices) k += d.imports;
  return k;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Simulation, HonestThreeDevices) {
  for (std::uint64_t seed : {0u, 7u, 12345u}) {
    SimReport r = run(3, adversary::None{}, oracle::Honest{}, seed);
    ASSERT_EQ(r.devices.size(), 3u);
    EXPECT_EQ(r.count_finalized(), 3u);
    for (const auto& d : r.devices) {
      EXPECT_EQ(d.state, "Finalized");
      EXPECT_EQ(d.imports, 1u);
      EXPECT_EQ(d.imported_cards, 3u);
      ASSERT_TRUE(d.roster_digest);
      EXPECT_EQ(d.roster_digest, r.devices[0].roster_digest);
    }
    EXPECT_TRUE(safety_violations(r).empty());
  }
}

TEST(Simulation, HonestAcrossAllGroupSizes) {
  for (std::size_t n = 2; n <= 16; ++n) {
    SimReport r = run(n, adversary::None{}, oracle::Honest{}, n * 3);
    EXPECT_EQ(r.count_finalized(), n) << "n=" << n;
  }
}

TEST(Simulation, ReportsAreByteIdenticalForSameSeed) {
  for (const char* adv : {"none", "flip-in-band-bit", "drop-message", "split-roster"}) {
    auto a = run(4, parse_adversary(adv), oracle::Honest{}, 99).to_json();
    auto b = run(4, parse_adversary(adv), oracle::Honest{}, 99).to_json();
    EXPECT_EQ(a, b) << adv;
  }
  EXPECT_NE(run(4, adversary::None{}, oracle::Honest{}, 1).to_json(),
            run(4, adversary::None{}, oracle::Honest{}, 2).to_json());
}

TEST(Simulation, ReportGoldenFile) {
  std::string golden = read_file(PAIRSONIC_TEST_DATA "/sim_n3_seed7.json");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(run(3, adversary::None{}, oracle::Honest{}, 7).to_json() + "\n", golden);
}

TEST(Simulation, ReportFieldOrder) {
  auto doc = nlohmann::ordered_json::parse(run(2, adversary::None{}, oracle::Honest{}, 1).to_json());
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"seed", "config", "devices", "finalized", "duration_ms", "events", "trace"}));
}

TEST(Simulation, TamperOobDigestAbortsEveryDevice) {
  for (std::size_t bit = 0; bit < 256; bit += 17) {
    SimReport r = run(4, adversary::TamperOobDigest{bit}, oracle::Honest{}, bit);
    EXPECT_EQ(r.count_finalized(false), 0u);
    for (const auto& d : r.devices) {
      ASSERT_TRUE(d.reason) << bit;
      EXPECT_EQ(*d.reason, wire::AbortReason::kOobMismatch);
      EXPECT_FALSE(d.locked);
    }
  }
}

TEST(Simulation, AlwaysDeclineImportsNothing) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimReport r = run(3, adversary::None{}, oracle::AlwaysDecline{}, seed);
    EXPECT_EQ(total_imports(r), 0u);
    for (const auto& d : r.devices) EXPECT_EQ(d.reason, wire::AbortReason::kUserDeclined);
  }
}

TEST(Simulation, ConfirmSubsetBlocksFinalization) {
  SimReport r = run(4, adversary::None{}, oracle::ConfirmSubset{{0, 1, 2}}, 5);
  EXPECT_EQ(r.count_finalized(false), 0u);
  EXPECT_EQ(total_imports(r), 0u);
  for (const auto& d : r.devices) EXPECT_EQ(d.reason, wire::AbortReason::kUserDeclined);
  EXPECT_EQ(run(4, adversary::None{}, oracle::ConfirmSubset{{0, 1, 2, 3}}, 5).count_finalized(), 4u);
}

TEST(Simulation, OracleConsultedOnlyWhenLocked) {
  SimReport r = run(4, adversary::SubstituteCommit{}, oracle::AlwaysConfirm{}, 3);
  for (const auto& d : r.devices) {
    if (!d.locked) EXPECT_FALSE(d.user_answer.has_value()) << d.index;
  }
  EXPECT_EQ(r.count_finalized(), 0u);
}

TEST(Simulation, TamperingAdversariesNeverLetHonestDevicesFinalize) {
  for (const char* adv : {"flip-in-band-bit", "substitute-commit", "substitute-reveal", "split-roster",
                          "inject-extra-participant", "tamper-oob-digest:77"}) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      for (const UserOracle& o : {UserOracle{oracle::Honest{}}, UserOracle{oracle::AlwaysConfirm{}}}) {
        SimReport r = run(4, parse_adversary(adv), o, seed);
        EXPECT_EQ(r.count_finalized(), 0u) << adv << " seed " << seed;
        EXPECT_TRUE(safety_violations(r).empty()) << adv << " seed " << seed;
      }
    }
  }
}

TEST(Simulation, SubstituteCommitOnEveryVictim) {
  for (std::size_t victim = 1; victim < 5; ++victim) {
    SimReport r = run(5, adversary::SubstituteCommit{victim, std::nullopt}, oracle::Honest{}, victim);
    EXPECT_EQ(r.count_finalized(), 0u);
  }
}

TEST(Simulation, DropMessageAbortsAffectedDevicesWithTimeout) {
  std::size_t timeouts = 0, honest = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SimReport r = run(3, adversary::DropMessage{}, oracle::Honest{}, seed);
    EXPECT_EQ(r.count_finalized(), 0u) << seed;
    EXPECT_TRUE(safety_violations(r).empty());
    for (const auto& d : r.devices) {
      ++honest;
      if (d.reason == wire::AbortReason::kTimeout) ++timeouts;
    }
  }
  EXPECT_GT(timeouts, honest / 2);
}

TEST(Simulation, SuppressedAbortsStillBlockPartialImport) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimReport r = run(4, adversary::SuppressAborts{}, oracle::ConfirmSubset{{0, 2, 3}}, seed);
    EXPECT_EQ(total_imports(r), 0u);
    EXPECT_TRUE(safety_violations(r).empty());
  }
}

TEST(Simulation, RejectsBadConfigs) {
  EXPECT_THROW(run(1, adversary::None{}, oracle::Honest{}, 0), Error);
  EXPECT_THROW(run(17, adversary::None{}, oracle::Honest{}, 0), Error);
  EXPECT_THROW(run(3, adversary::SubstituteCommit{3, std::nullopt}, oracle::Honest{}, 0), Error);
  EXPECT_THROW(run(2, adversary::SplitRoster{}, oracle::Honest{}, 0), Error);
  SimConfig tiny;
  tiny.event_budget = 10;
  try {
    run_simulation(tiny);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonQuiescent);
  }
}

TEST(Simulation, VirtualTimeAdvancesOnlyThroughTimers) {
  SimReport honest = run(3, adversary::None{}, oracle::Honest{}, 1);
  EXPECT_EQ(honest.duration.count(), 0);
  SimReport dropped = run(3, adversary::DropMessage{0}, oracle::Honest{}, 1);
  EXPECT_GE(dropped.duration, std::chrono::milliseconds(30'000));
}

TEST(Names, AdversaryRoundTrip) {
  for (const char* s : {"none", "flip-in-band-bit", "flip-in-band-bit:5", "flip-in-band-bit:5:17", "substitute-commit",
                        "substitute-commit:2", "substitute-reveal:3", "split-roster", "inject-extra-participant",
                        "drop-message", "drop-message:4", "suppress-aborts", "tamper-oob-digest:9"}) {
    Adversary a = parse_adversary(s);
    EXPECT_EQ(to_string(parse_adversary(to_string(a))), to_string(a)) << s;
  }
  EXPECT_EQ(std::get<adversary::SubstituteCommit>(parse_adversary("substitute-commit:2")).victim, 2u);
  for (const char* bad : {"", "bogus", "substitute-commit:x", "none:1", "flip-in-band-bit:1:2:3"}) {
    EXPECT_THROW(parse_adversary(bad), Error) << bad;
  }
  EXPECT_TRUE(is_tampering(parse_adversary("split-roster")));
  EXPECT_FALSE(is_tampering(parse_adversary("drop-message")));
  EXPECT_FALSE(is_tampering(parse_adversary("suppress-aborts")));
}

TEST(Names, OracleRoundTrip) {
  EXPECT_TRUE(std::holds_alternative<oracle::Honest>(parse_oracle("honest")));
  EXPECT_TRUE(std::holds_alternative<oracle::AlwaysDecline>(parse_oracle("always-decline")));
  auto subset = std::get<oracle::ConfirmSubset>(parse_oracle("confirm-subset:0,2"));
  EXPECT_EQ(subset.indices, (std::set<std::size_t>{0, 2}));
  EXPECT_EQ(to_string(parse_oracle("confirm-subset:2,0")), "confirm-subset:0,2");
  EXPECT_THROW(parse_oracle("maybe"), Error);
  EXPECT_THROW(parse_oracle("confirm-subset:a"), Error);
}

TEST(Matrix, SummarisesScenarios) {
  std::vector<Scenario> scenarios{
      {"honest", 3, adversary::None{}, oracle::Honest{}, {}},
      {"commit", 4, adversary::SubstituteCommit{}, oracle::Honest{}, {}},
      {"decline", 3, adversary::None{}, oracle::AlwaysDecline{}, {}},
  };
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  MatrixSummary m = run_matrix(scenarios, seeds, 3);
  ASSERT_EQ(m.scenarios.size(), 3u);
  EXPECT_TRUE(m.safe());
  EXPECT_EQ(m.scenarios[0].runs, 10u);
  EXPECT_EQ(m.scenarios[0].honest_finalized, 30u);
  EXPECT_EQ(m.scenarios[0].runs_with_identical_rosters, 10u);
  EXPECT_EQ(m.scenarios[1].honest_finalized, 0u);
  EXPECT_EQ(m.scenarios[1].honest_aborted, 40u);
  EXPECT_EQ(m.scenarios[2].abort_reasons.at("user-declined"), 30u);
  EXPECT_NE(m.to_text().find("no safety violations"), std::string::npos);

  MatrixSummary single = run_matrix(scenarios, seeds, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(single.scenarios[i].honest_finalized, m.scenarios[i].honest_finalized);
    EXPECT_EQ(single.scenarios[i].abort_reasons, m.scenarios[i].abort_reasons);
  }
  EXPECT_THROW(run_matrix({}, seeds), Error);
  EXPECT_THROW(run_matrix(scenarios, {}), Error);
}
