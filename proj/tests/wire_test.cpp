#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pairsonic/error.hpp"
#include "pairsonic/random.hpp"
#include "pairsonic/wire.hpp"

using namespace pairsonic;
using namespace pairsonic::wire;

namespace {

// Expected bytes below were produced by an independent script (Python
// hashlib + struct) from the documented layouts.

Bytes hex(std::string_view h) { return *from_hex(h); }

std::string rep(std::string_view s, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += s;
  return out;
}

SessionId test_session() {
  SessionId s;
  for (int i = 0; i < 8; ++i) s.bytes[i] = static_cast<std::uint8_t>(i + 1);
  return s;
}

template <class Code>
void expect_code(ErrorCode expected, Code&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(expected);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
  }
}

ContactCard random_card(std::mt19937_64& g) {
  ContactCard c;
  std::uniform_int_distribution<int> len(0, 20), ch('a', 'z'), byte(0, 255);
  int n = 1 + len(g);
  for (int i = 0; i < n; ++i) c.name.push_back(static_cast<char>(ch(g)));
  for (auto& b : c.public_key) b = static_cast<std::uint8_t>(byte(g));
  int exts = len(g) % 5;
  for (int e = 0; e < exts; ++e) {
    Bytes k(1 + len(g) % 8), v(len(g) * 3);
    for (auto& b : k) b = static_cast<std::uint8_t>(ch(g));
    for (auto& b : v) b = static_cast<std::uint8_t>(byte(g));
    c.extensions[k] = v;
  }
  return c;
}

Nonce fill(std::uint8_t v) {
  Nonce n;
  n.fill(v);
  return n;
}

}  // namespace

TEST(Digest, Sha256StandardVectors) {
  EXPECT_EQ(to_hex(digest("").bytes), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(to_hex(digest("abc").bytes), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(digest("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").bytes),
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST(ContactCard, GoldenMinimalCard) {
  ContactCard c{"A", {}, {}};
  Bytes enc = encode_contact_card(c);
  EXPECT_EQ(enc.size(), 39u);
  EXPECT_EQ(to_hex(enc), "504301014120" + rep("0", 64) + "00");
  EXPECT_EQ(decode_contact_card(enc), c);
}

TEST(ContactCard, GoldenWithExtensions) {
  ContactCard c;
  c.name = "Alice";
  for (int i = 0; i < 32; ++i) c.public_key[i] = static_cast<std::uint8_t>(i);
  c.set_extension("phone", "+1");
  c.set_extension("email", "a@x");
  EXPECT_EQ(to_hex(encode_contact_card(c)),
            "50430105416c69636520000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f"
            "0205656d61696c00036140780570686f6e6500022b31");
}

TEST(ContactCard, InsertionOrderIrrelevant) {
  ContactCard a{"x", {}, {}}, b{"x", {}, {}};
  a.set_extension("k1", "v1");
  a.set_extension("k2", "v2");
  b.set_extension("k2", "v2");
  b.set_extension("k1", "v1");
  EXPECT_EQ(encode_contact_card(a), encode_contact_card(b));
}

TEST(ContactCard, Bounds) {
  ContactCard c{std::string(65, 'n'), {}, {}};
  expect_code(ErrorCode::kInvalidCard, [&] { encode_contact_card(c); });
  c.name = std::string(64, 'n');
  EXPECT_NO_THROW(encode_contact_card(c));
  c.name = "\xff\xfe";
  expect_code(ErrorCode::kInvalidCard, [&] { encode_contact_card(c); });
  c.name = "ok";
  for (int i = 0; i < 17; ++i) c.set_extension("k" + std::to_string(i), "v");
  expect_code(ErrorCode::kInvalidCard, [&] { encode_contact_card(c); });
  ContactCard big{"ok", {}, {}};
  big.set_extension("k", std::string(1025, 'v'));
  expect_code(ErrorCode::kInvalidCard, [&] { encode_contact_card(big); });
}

TEST(ContactCard, DecodeRejectsMalformed) {
  Bytes enc = encode_contact_card(ContactCard{"A", {}, {}});
  Bytes trailing = enc;
  trailing.push_back(0);
  expect_code(ErrorCode::kMalformedCard, [&] { decode_contact_card(trailing); });
  for (std::size_t cut = 0; cut < enc.size(); ++cut) {
    expect_code(ErrorCode::kMalformedCard, [&] { decode_contact_card(ByteView(enc).first(cut)); });
  }
  Bytes magic = enc;
  magic[0] = 'X';
  expect_code(ErrorCode::kMalformedCard, [&] { decode_contact_card(magic); });
  // Two extensions in descending key order.
  Bytes unsorted = hex("504301014120" + rep("0", 64) + "02" + "01620000" + "01610000");
  expect_code(ErrorCode::kMalformedCard, [&] { decode_contact_card(unsorted); });
  Bytes dup = hex("504301014120" + rep("0", 64) + "02" + "01610000" + "01610000");
  expect_code(ErrorCode::kMalformedCard, [&] { decode_contact_card(dup); });
}

TEST(ContactCard, RandomRoundTrip) {
  std::mt19937_64 g(11);
  for (int i = 0; i < 500; ++i) {
    ContactCard c = random_card(g);
    EXPECT_EQ(decode_contact_card(encode_contact_card(c)), c);
  }
}

TEST(Commitment, GoldenInnerAndOuter) {
  ContactCard c{"A", {}, {}};
  Commitment cm = make_commitment(c, NoncePair{fill(0x11), fill(0x22)});
  EXPECT_EQ(to_hex(cm.inner_bytes),
            "5053494e0102d449a31fbb267c8f352e9968a79e3e5fc95c1bbeaa502fd6454ebde5a4bedc9f72ea0cf49536e3c6"
            "6c787f705186df9a4378083753ae9536d65b3ad7fcddc40027504301014120" +
                rep("0", 64) + "00");
  EXPECT_EQ(to_hex(cm.outer.bytes), "5b936cddaceb1fb412cd711328292f40f00b853bf261b09033c238aa3334e8e5");
  EXPECT_EQ(encode_inner(cm.inner), cm.inner_bytes);
  EXPECT_EQ(decode_inner(cm.inner_bytes).card, c);
}

TEST(Commitment, VerifyInnerRoundTripAndMismatch) {
  SeededRandom rng(3);
  std::mt19937_64 g(5);
  ContactCard c = random_card(g);
  NoncePair nonces = draw_nonces(rng);
  Commitment cm = make_commitment(c, nonces);
  OpenedCommitment opened = verify_inner(cm.outer, cm.inner_bytes);
  EXPECT_EQ(opened.card, c);
  EXPECT_TRUE(verify_nonce(opened.success_hash, nonces.success));
  EXPECT_TRUE(verify_nonce(opened.abort_hash, nonces.abort));
  EXPECT_FALSE(verify_nonce(opened.abort_hash, nonces.success));
  Bytes flipped = cm.inner_bytes;
  flipped.back() ^= 1;
  expect_code(ErrorCode::kCommitmentMismatch, [&] { verify_inner(cm.outer, flipped); });
}

TEST(Commitment, MalformedPreimageWithMatchingOuter) {
  Bytes junk = to_bytes("PSIN-not-really");
  expect_code(ErrorCode::kMalformedInner, [&] { verify_inner(digest(junk), junk); });
  Bytes inner = make_commitment(ContactCard{"A", {}, {}}, NoncePair{fill(1), fill(2)}).inner_bytes;
  inner.pop_back();
  expect_code(ErrorCode::kMalformedInner, [&] { verify_inner(digest(inner), inner); });
}

// Every single-byte change of the preimage moves the outer commitment.
TEST(Commitment, BindingSweep) {
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 5; ++trial) {
    ContactCard c = random_card(g);
    SeededRandom rng(trial);
    Commitment cm = make_commitment(c, draw_nonces(rng));
    for (std::size_t i = 0; i < cm.inner_bytes.size(); ++i) {
      Bytes mutated = cm.inner_bytes;
      mutated[i] ^= static_cast<std::uint8_t>(1 + g() % 255);
      ASSERT_NE(digest(mutated), cm.outer) << "byte " << i;
    }
  }
}

TEST(Commitment, CardByteFlipChangesOuter) {
  ContactCard c{"Bob", {}, {}};
  c.set_extension("k", "v");
  NoncePair n{fill(7), fill(8)};
  Digest base = make_commitment(c, n).outer;
  Bytes card = encode_contact_card(c);
  for (std::size_t i = 0; i < card.size(); ++i) {
    for (int bit = 0; bit < 8; ++bit) {
      Bytes mutated = card;
      mutated[i] ^= static_cast<std::uint8_t>(1 << bit);
      ContactCard other;
      try {
        other = decode_contact_card(mutated);
      } catch (const Error&) {
        continue;
      }
      EXPECT_NE(make_commitment(other, n).outer, base);
    }
  }
  EXPECT_NE(make_commitment(c, NoncePair{fill(7), fill(9)}).outer, base);
}

TEST(Nonces, NeverEqual) {
  // An RNG that repeats itself forces the redraw path.
  struct Repeating : RandomSource {
    int calls = 0;
    void fill(std::span<std::uint8_t> out) override {
      std::fill(out.begin(), out.end(), static_cast<std::uint8_t>(calls++ < 2 ? 0x42 : 0x43));
    }
  } rng;
  NoncePair n = draw_nonces(rng);
  EXPECT_NE(n.success, n.abort);
}

TEST(Aggregate, Golden) {
  std::vector<Digest> outs{digest("3"), digest("1"), digest("2")};
  EXPECT_EQ(to_hex(aggregate(test_session(), 3, outs).bytes),
            "63c961ed715721efc434a6ff8478d971dba970e0b80fd358ffd11b09db0b516a");
}

TEST(Aggregate, PermutationInvariantSubstitutionSensitive) {
  std::mt19937_64 g(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 2 + g() % 15;
    std::vector<Digest> outs(n);
    for (std::size_t i = 0; i < n; ++i) outs[i] = digest(std::to_string(g()));
    SessionId s;
    for (auto& b : s.bytes) b = static_cast<std::uint8_t>(g());
    Digest base = aggregate(s, n, outs);
    std::shuffle(outs.begin(), outs.end(), g);
    EXPECT_EQ(aggregate(s, n, outs), base);
    auto replaced = outs;
    replaced[g() % n] = digest("substitute " + std::to_string(trial));
    EXPECT_NE(aggregate(s, n, replaced), base);
    SessionId other = s;
    other.bytes[0] ^= 1;
    EXPECT_NE(aggregate(other, n, outs), base);
  }
}

TEST(Aggregate, Errors) {
  expect_code(ErrorCode::kSizeMismatch, [] { aggregate(test_session(), 2, std::vector<Digest>{}); });
  expect_code(ErrorCode::kSizeMismatch, [] { aggregate(test_session(), 3, std::vector<Digest>{digest("a"), digest("b")}); });
  expect_code(ErrorCode::kDuplicateCommitment,
              [] { aggregate(test_session(), 2, std::vector<Digest>{digest("a"), digest("a")}); });
}

TEST(Message, GoldenFraming) {
  EXPECT_EQ(to_hex(encode_message({test_session(), msg::Hello{}})), "0000000a00010203040506070801");
  msg::Commit commit;
  commit.outer.bytes.fill(0xab);
  EXPECT_EQ(to_hex(encode_message({test_session(), commit})), "00000029010102030405060708" + rep("ab", 32));
  msg::Abort abort{fill(0x5a), AbortReason::kOobMismatch};
  EXPECT_EQ(to_hex(encode_message({test_session(), abort})), "0000002a070102030405060708" + rep("5a", 32) + "02");

  std::vector<Digest> outs{digest("1"), digest("2"), digest("3")};
  std::sort(outs.begin(), outs.end());
  std::string roster_hex = "0000006a" "02" "0102030405060708" "03";
  for (const auto& o : outs) roster_hex += to_hex(o.bytes);
  EXPECT_EQ(to_hex(encode_message({test_session(), msg::Roster{outs}})), roster_hex);
}

TEST(Message, RoundTripEveryType) {
  std::mt19937_64 g(29);
  SeededRandom rng(31);
  auto nonce = [&] { return draw_nonces(rng).success; };
  std::vector<Digest> outs{digest("x"), digest("y"), digest("z")};
  std::sort(outs.begin(), outs.end());
  Bytes inner = make_commitment(random_card(g), draw_nonces(rng)).inner_bytes;
  std::vector<MessageBody> bodies{
      msg::Hello{},
      msg::Commit{digest("c")},
      msg::Roster{outs},
      msg::Reveal{inner},
      msg::RevealSet{{inner, inner}},
      msg::Confirm{nonce()},
      msg::SuccessSet{{nonce(), nonce(), nonce()}},
      msg::Abort{nonce(), AbortReason::kTimeout},
  };
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    Message m{test_session(), bodies[i]};
    Bytes enc = encode_message(m);
    EXPECT_EQ(enc[4], i);
    EXPECT_EQ(decode_message(enc), m);
  }
}

TEST(Message, DecodeRejects) {
  Bytes hello = encode_message({test_session(), msg::Hello{}});
  Bytes longer = hello;
  longer[3] += 1;
  expect_code(ErrorCode::kMalformedMessage, [&] { decode_message(longer); });
  Bytes trailing = hello;
  trailing.push_back(0);
  expect_code(ErrorCode::kMalformedMessage, [&] { decode_message(trailing); });
  Bytes unknown = hello;
  unknown[4] = 0x08;
  expect_code(ErrorCode::kMalformedMessage, [&] { decode_message(unknown); });

  std::vector<Digest> outs{digest("1"), digest("2")};
  std::sort(outs.begin(), outs.end());
  Bytes roster = encode_message({test_session(), msg::Roster{outs}});
  std::swap_ranges(roster.begin() + 14, roster.begin() + 46, roster.begin() + 46);
  expect_code(ErrorCode::kMalformedMessage, [&] { decode_message(roster); });
  std::reverse(outs.begin(), outs.end());
  expect_code(ErrorCode::kMalformedMessage, [&] { encode_message({test_session(), msg::Roster{outs}}); });

  Bytes abort = encode_message({test_session(), msg::Abort{fill(1), AbortReason::kTimeout}});
  abort.back() = 0x09;
  expect_code(ErrorCode::kMalformedMessage, [&] { decode_message(abort); });
}

TEST(Message, TruncationNeverCrashes) {
  std::vector<Digest> outs{digest("1"), digest("2")};
  std::sort(outs.begin(), outs.end());
  Bytes enc = encode_message({test_session(), msg::Roster{outs}});
  for (std::size_t cut = 0; cut < enc.size(); ++cut) {
    Bytes part(enc.begin(), enc.begin() + static_cast<long>(cut));
    if (part.size() >= 4) {
      std::uint32_t len = static_cast<std::uint32_t>(part.size() - 4);
      part[0] = static_cast<std::uint8_t>(len >> 24);
      part[1] = static_cast<std::uint8_t>(len >> 16);
      part[2] = static_cast<std::uint8_t>(len >> 8);
      part[3] = static_cast<std::uint8_t>(len);
    }
    expect_code(ErrorCode::kMalformedMessage, [&] { decode_message(part); });
  }
}

TEST(Oob, GoldenInit) {
  oob::Init init{kProtocolVersion, test_session(), 3, "tcp:192.168.49.1:7465"};
  Bytes enc = encode_oob(init);
  EXPECT_EQ(enc.size(), 33u);
  EXPECT_EQ(to_hex(enc), "0101010203040506070803157463703a3139322e3136382e34392e313a37343635");
  EXPECT_EQ(std::get<oob::Init>(decode_oob(enc)), init);
}

TEST(Oob, GoldenVerify) {
  oob::Verify v{test_session(), digest("abc")};
  Bytes enc = encode_oob(v);
  EXPECT_EQ(enc.size(), kVerifyPayloadSize);
  EXPECT_EQ(to_hex(enc),
            "020102030405060708ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(std::get<oob::Verify>(decode_oob(enc)), v);
}

TEST(Oob, Rejects) {
  oob::Init init{kProtocolVersion, test_session(), 1, "tcp:a:1"};
  expect_code(ErrorCode::kMalformedOob, [&] { encode_oob(init); });
  Bytes enc = encode_oob(oob::Init{kProtocolVersion, test_session(), 2, "tcp:a:1"});
  Bytes one = enc;
  one[10] = 1;
  expect_code(ErrorCode::kMalformedOob, [&] { decode_oob(one); });
  Bytes seventeen = enc;
  seventeen[10] = 17;
  expect_code(ErrorCode::kMalformedOob, [&] { decode_oob(seventeen); });
  init.group_size = 2;
  init.descriptor = "";
  expect_code(ErrorCode::kMalformedOob, [&] { encode_oob(init); });
  init.descriptor = std::string(65, 'x');
  expect_code(ErrorCode::kMalformedOob, [&] { encode_oob(init); });
  expect_code(ErrorCode::kMalformedOob, [] { decode_oob(Bytes{}); });
  expect_code(ErrorCode::kMalformedOob, [] { decode_oob(Bytes{0x03}); });
  Bytes verify = encode_oob(oob::Verify{test_session(), digest("")});
  verify.pop_back();
  expect_code(ErrorCode::kMalformedOob, [&] { decode_oob(verify); });
}

TEST(Oob, RandomRoundTrip) {
  std::mt19937_64 g(37);
  for (int i = 0; i < 300; ++i) {
    oob::Init init;
    for (auto& b : init.session.bytes) b = static_cast<std::uint8_t>(g());
    init.group_size = static_cast<std::uint8_t>(2 + g() % 15);
    init.descriptor = "tcp:10.0.0." + std::to_string(g() % 255) + ":" + std::to_string(1 + g() % 65535);
    EXPECT_EQ(std::get<oob::Init>(decode_oob(encode_oob(init))), init);
  }
}
