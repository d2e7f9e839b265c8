#include <gtest/gtest.h>

#include <random>

#include "eskin/duplex/message.hpp"

using namespace eskin::duplex;

namespace {

// Bitwise reflected CRC-32 (poly 0xEDB88320), independent of the library.
std::uint32_t crc_reference(std::span<const std::uint8_t> data) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (auto b : data) {
    c ^= b;
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

Message random_message(std::mt19937_64& rng) {
  auto u = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  switch (u(0, 10)) {
    case 0: return Hello{static_cast<std::uint8_t>(u(0, 255))};
    case 1: {
      SensorFrame f;
      f.seq = static_cast<std::uint32_t>(u(0, 0xFFFFFFFFu));
      for (auto& v : f.centi_uT) v = static_cast<std::int16_t>(static_cast<std::int64_t>(u(0, 65535)) - 32768);
      return f;
    }
    case 2: {
      VibrationCmd c;
      for (auto& d : c.duty) d = static_cast<std::uint8_t>(u(0, 255));
      c.duration_ms = static_cast<std::uint16_t>(u(0, 65535));
      return c;
    }
    case 3: return ControlCmd{static_cast<ControlCode>(u(1, kControlCodeMax))};
    case 4: return TargetWeight{static_cast<std::uint16_t>(u(0, 65535))};
    case 5: return StageTransition{static_cast<std::uint8_t>(u(1, 6))};
    case 6: return CollisionEvent{static_cast<std::uint8_t>(u(0, 255))};
    case 7: return Ack{static_cast<std::uint32_t>(u(0, 0xFFFFFFFFu))};
    case 8: return Heartbeat{};
    case 9: return Nack{static_cast<NackReason>(u(1, 5))};
    default: return ScaleReading{static_cast<std::uint32_t>(u(0, 0xFFFFFFFFu))};
  }
}

SensorFrame fixed_frame() {
  SensorFrame f;
  f.seq = 0x01020304;
  for (std::size_t i = 0; i < f.centi_uT.size(); ++i) f.centi_uT[i] = static_cast<std::int16_t>(i * 1000 - 12000);
  return f;
}

}  // namespace

TEST(Crc, CheckValue) {
  const std::string s = "123456789";
  std::span<const std::uint8_t> b(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  EXPECT_EQ(crc32(b), 0xCBF43926u);
  EXPECT_EQ(crc_reference(b), 0xCBF43926u);
}

TEST(Crc, MatchesBitwiseReference) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(rng() % 300));
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(crc32(buf), crc_reference(buf));
  }
}

TEST(Frame, HeartbeatBytes) {
  auto f = encode(Heartbeat{});
  std::vector<std::uint8_t> head{0x45, 0x53, 0x01, 0x09, 0x00, 0x00};
  ASSERT_EQ(f.size(), 10u);
  EXPECT_TRUE(std::equal(head.begin(), head.end(), f.begin()));
  std::uint32_t crc = crc_reference(head);
  EXPECT_EQ(f[6], crc & 0xFF);
  EXPECT_EQ(f[7], (crc >> 8) & 0xFF);
  EXPECT_EQ(f[8], (crc >> 16) & 0xFF);
  EXPECT_EQ(f[9], crc >> 24);
  EXPECT_EQ((std::vector<std::uint8_t>(f.begin() + 6, f.end())),
            (std::vector<std::uint8_t>{0x8d, 0xd3, 0x89, 0x26}));
}

TEST(Frame, SensorFrameLayoutIsLittleEndian) {
  auto f = encode(fixed_frame());
  ASSERT_EQ(f.size(), 6u + 52u + 4u);
  EXPECT_EQ(f[3], 0x02);
  EXPECT_EQ(f[4], 52);
  EXPECT_EQ(f[5], 0);
  EXPECT_EQ(f[6], 0x04);
  EXPECT_EQ(f[9], 0x01);
  // first value -12000 = 0xD120
  EXPECT_EQ(f[10], 0x20);
  EXPECT_EQ(f[11], 0xD1);
}

TEST(Frame, RoundTripRandomMessages) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100000; ++i) {
    auto m = random_message(rng);
    auto d = decode(encode(m));
    ASSERT_TRUE(std::holds_alternative<Message>(d)) << describe(m);
    ASSERT_EQ(std::get<Message>(d), m);
  }
}

TEST(Frame, EverySingleByteCorruptionIsRejected) {
  const auto frame = encode(fixed_frame());
  std::size_t rejected = 0;
  for (std::size_t pos = 0; pos < frame.size(); ++pos) {
    for (int v = 0; v < 256; ++v) {
      if (v == frame[pos]) continue;
      auto bad = frame;
      bad[pos] = static_cast<std::uint8_t>(v);
      auto d = decode(bad);
      ASSERT_TRUE(std::holds_alternative<DecodeError>(d)) << "pos " << pos << " value " << v;
      ++rejected;
    }
  }
  EXPECT_EQ(rejected, frame.size() * 255);
}

TEST(Frame, EverySingleBitFlipIsRejectedForAllTypes) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    auto frame = encode(random_message(rng));
    for (std::size_t bit = 0; bit < frame.size() * 8; ++bit) {
      auto bad = frame;
      bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      ASSERT_TRUE(std::holds_alternative<DecodeError>(decode(bad)));
    }
  }
}

TEST(Frame, DistinctErrors) {
  auto f = encode(CollisionEvent{9});
  auto err = [](std::vector<std::uint8_t> b) { return std::get<DecodeError>(decode(b)); };
  auto b = f;
  b[0] = 'X';
  EXPECT_EQ(err(b), DecodeError::bad_magic);
  EXPECT_EQ(err({f.begin(), f.begin() + 5}), DecodeError::truncated);
  EXPECT_EQ(err({f.begin(), f.end() - 1}), DecodeError::truncated);
  b = f;
  b.push_back(0);
  EXPECT_EQ(err(b), DecodeError::length_mismatch);
  b = f;
  b[2] = 2;
  EXPECT_EQ(err(b), DecodeError::bad_version);
  b = f;
  b[6] ^= 1;
  EXPECT_EQ(err(b), DecodeError::crc_mismatch);

  // Well-formed frames with a bad type or payload, CRC recomputed.
  auto reframe = [](std::vector<std::uint8_t> b) {
    b.resize(b.size() - 4);
    auto c = crc32(b);
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(c >> (8 * k)));
    return b;
  };
  b = f;
  b[3] = 0x7F;
  EXPECT_EQ(err(reframe(b)), DecodeError::unknown_type);
  b = encode(StageTransition{3});
  b[6] = 7;
  EXPECT_EQ(err(reframe(b)), DecodeError::invalid_payload);
  b = encode(ControlCmd{ControlCode::grasp});
  b[6] = 0;
  EXPECT_EQ(err(reframe(b)), DecodeError::invalid_payload);
}

TEST(Frame, EncodeRejectsInvalidValues) {
  EXPECT_THROW(encode(StageTransition{0}), std::invalid_argument);
  EXPECT_THROW(encode(StageTransition{7}), std::invalid_argument);
  EXPECT_THROW(encode(ControlCmd{static_cast<ControlCode>(14)}), std::invalid_argument);
}

TEST(Assembler, OneByteFragmentationEquivalence) {
  std::mt19937_64 rng(31);
  std::vector<Message> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 2000; ++i) {
    sent.push_back(random_message(rng));
    encode_into(sent.back(), stream);
  }
  FrameAssembler whole, bytewise;
  whole.feed(stream);
  std::vector<Message> a, b;
  while (auto m = whole.next()) a.push_back(*m);
  for (auto byte : stream) {
    bytewise.feed(std::span<const std::uint8_t>(&byte, 1));
    while (auto m = bytewise.next()) b.push_back(*m);
  }
  EXPECT_EQ(a, sent);
  EXPECT_EQ(b, sent);
  EXPECT_EQ(bytewise.errors(), 0u);
  EXPECT_EQ(bytewise.buffered(), 0u);
}

TEST(Assembler, ResyncsAfterGarbage) {
  std::vector<std::uint8_t> stream{0x00, 0x45, 0x11, 0x53, 0x53};
  encode_into(Ack{7}, stream);
  auto bad = encode(Heartbeat{});
  bad[7] ^= 0xFF;
  stream.insert(stream.end(), bad.begin(), bad.end());
  encode_into(Ack{8}, stream);
  FrameAssembler fa;
  fa.feed(stream);
  std::vector<Message> got;
  while (auto m = fa.next()) got.push_back(*m);
  EXPECT_EQ(got, (std::vector<Message>{Ack{7}, Ack{8}}));
  EXPECT_GE(fa.errors(), 1u);
}

TEST(Assembler, CorruptedStreamNeverYieldsForeignMessages) {
  std::mt19937_64 rng(99);
  std::vector<Message> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 300; ++i) {
    sent.push_back(random_message(rng));
    encode_into(sent.back(), stream);
  }
  for (int k = 0; k < 40; ++k) stream[rng() % stream.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
  FrameAssembler fa;
  fa.feed(stream);
  while (auto m = fa.next()) EXPECT_NE(std::find(sent.begin(), sent.end(), *m), sent.end());
}

TEST(CentiMicroTesla, ClampsAndRounds) {
  EXPECT_EQ(to_centi_uT(1.234), 123);
  EXPECT_EQ(to_centi_uT(-0.005), -1);
  EXPECT_EQ(to_centi_uT(1e6), 32767);
  EXPECT_EQ(to_centi_uT(-1e6), -32768);
  EXPECT_DOUBLE_EQ(from_centi_uT(-250), -2.5);
}
