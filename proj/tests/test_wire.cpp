// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <fstream>
#include <iterator>

#include "slicekit/random.hpp"
#include "slicekit/wire.hpp"
#include "wire_samples.hpp"

namespace slicekit {
namespace {

using wire::Frame;
using wire::FrameType;
using wire::WireErrc;
using wire::WireError;

std::vector<std::uint8_t> read_fixture(const std::string& name) {
  std::ifstream f(std::string(SLICEKIT_FIXTURE_DIR) + "/" + name, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

WireErrc decode_error(std::span<const std::uint8_t> bytes) {
  try {
    wire::decode(bytes);
  } catch (const WireError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return WireErrc::kBadMagic;
}

using testing::golden_request;
using testing::random_frame;

TEST(Encode, PingIsHeaderOnly) {
  const auto bytes = wire::encode(wire::make_ping(7));
  EXPECT_EQ(bytes.size(), wire::header_size(0));
  EXPECT_EQ(bytes.size(), wire::kFixedHeaderBytes);
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.end() - 8, bytes.end()), std::vector<std::uint8_t>(8, 0));
}

TEST(Encode, OnePointZeroIsIeeeSingle) {
  const auto bytes = wire::encode(wire::make_request(1, "", 0, Tensor(Shape{1, 1, 1}, {1.0f})));
  ASSERT_EQ(bytes.size(), wire::header_size(0) + 4);
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.end() - 4, bytes.end()),
            (std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3F}));
}

TEST(Encode, GoldenBytes) {
  const auto golden = read_fixture("request_2x2x2.bin");
  ASSERT_EQ(golden.size(), 74u);
  EXPECT_EQ(wire::encode(golden_request()), golden);
  EXPECT_EQ(wire::decode(golden).frame, golden_request());
}

TEST(Encode, OversizedModelId) {
  EXPECT_THROW(wire::encode(wire::make_request(1, std::string(256, 'm'), 0, Tensor(Shape{1, 1, 1}))),
               WireError);
  EXPECT_NO_THROW(wire::encode(wire::make_request(1, std::string(255, 'm'), 0, Tensor(Shape{1, 1, 1}))));
}

TEST(Encode, SizeFormula) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Frame f = random_frame(rng);
    EXPECT_EQ(wire::encode(f).size(), wire::encoded_size(f));
  }
  EXPECT_EQ(wire::tensor_frame_size(4, Shape{2, 2, 2}), 74u);
}

TEST(Decode, RoundTripThousandRandomFrames) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const Frame f = random_frame(rng);
    const auto bytes = wire::encode(f);
    const auto d = wire::decode(bytes);
    EXPECT_EQ(d.frame, f);
    EXPECT_EQ(d.consumed, bytes.size());
  }
}

TEST(Decode, BackToBackFrames) {
  auto bytes = wire::encode(golden_request());
  const auto ping = wire::encode(wire::make_ping(9));
  bytes.insert(bytes.end(), ping.begin(), ping.end());
  const auto first = wire::decode(bytes);
  EXPECT_EQ(first.frame, golden_request());
  const auto second = wire::decode(std::span(bytes).subspan(first.consumed));
  EXPECT_EQ(second.frame, wire::make_ping(9));
}

TEST(Decode, TruncatedFrame) {
  const auto bytes = wire::encode(golden_request());
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    EXPECT_EQ(decode_error(std::span(bytes).first(cut)), WireErrc::kTruncatedFrame) << cut;
  }
}

TEST(Decode, BadMagicBeforePayload) {
  auto bytes = wire::encode(golden_request());
  bytes[0] = 'X';
  EXPECT_EQ(decode_error(bytes), WireErrc::kBadMagic);
  // Reported even when only the magic is present.
  EXPECT_EQ(decode_error(std::span(bytes).first(4)), WireErrc::kBadMagic);
}

TEST(Decode, VersionTypeAndLength) {
  auto bytes = wire::encode(golden_request());
  auto v = bytes;
  v[4] = 2;
  EXPECT_EQ(decode_error(v), WireErrc::kUnsupportedVersion);
  auto t = bytes;
  t[6] = 9;
  EXPECT_EQ(decode_error(t), WireErrc::kBadFrameType);
  auto len = bytes;
  len[34] = 0x1c;  // payload_len 28 for a 2x2x2 tensor
  EXPECT_EQ(decode_error(len), WireErrc::kPayloadLengthMismatch);
  auto huge = bytes;
  huge[41] = 0x7f;
  EXPECT_EQ(decode_error(huge), WireErrc::kFrameTooLarge);
  auto ping = wire::encode(wire::make_ping(1));
  ping[30] = 4;
  EXPECT_EQ(decode_error(ping), WireErrc::kPayloadLengthMismatch);
}

TEST(Decode, StreamHelpers) {
  const auto bytes = wire::encode(golden_request());
  EXPECT_EQ(wire::header_length(std::span(bytes).first(wire::kPrefixBytes)), wire::header_size(4));
  EXPECT_EQ(wire::body_length(std::span(bytes).first(wire::header_size(4))), 32u);
  const auto resp = wire::encode(wire::make_response(1, "m", 0, Tensor(Shape{1, 1, 1}), {1, 2, 3}));
  EXPECT_EQ(wire::body_length(std::span(resp).first(wire::header_size(1))), 4u + wire::kResponseTrailerBytes);
}

TEST(Decode, FuzzYieldsOnlyStructuredErrors) {
  Rng rng(77);
  const auto valid = wire::encode(golden_request());
  int errors = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> bytes;
    if (i % 2 == 0) {
      bytes.resize(rng.below(120));
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
      // Give half the random strings a valid prefix so deeper fields get exercised.
      if (i % 4 == 0) {
        for (std::size_t k = 0; k < std::min<std::size_t>(bytes.size(), 7); ++k) bytes[k] = valid[k];
      }
    } else {
      bytes = valid;
      const auto flips = 1 + rng.below(4);
      for (std::uint64_t k = 0; k < flips; ++k) bytes[rng.below(bytes.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      bytes.resize(rng.below(bytes.size() + 1));
    }
    try {
      const auto d = wire::decode(bytes);
      EXPECT_LE(d.consumed, bytes.size());
    } catch (const WireError&) {
      ++errors;
    }
  }
  EXPECT_GT(errors, 0);
}

}  // namespace
}  // namespace slicekit
