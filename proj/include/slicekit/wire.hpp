// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slicekit/error.hpp"
#include "slicekit/tensor.hpp"

// Binary framing between device and edge. All integers little-endian:
//
//   offset  size  field
//   0       4     magic "SLKF"
//   4       2     version (1)
//   6       1     frame type
//   7       8     request id
//   15      1     model id length L
//   16      L     model id (UTF-8)
//   16+L    2     split index
//   18+L    12    dims C, H, W (u32 each)
//   30+L    8     payload length in bytes
//   38+L    P     payload: 32-bit IEEE-754 reals
//
// InferResponse frames carry a 24-byte trailer after the payload with the
// edge-side timings (deserialize, transfer layer, compute) as u64 microseconds.
// Error frames carry the reason code in the model id field and no payload.
namespace slicekit::wire {

inline constexpr char kMagic[4] = {'S', 'L', 'K', 'F'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kFixedHeaderBytes = 38;
inline constexpr std::size_t kPrefixBytes = 16;  // through the model id length
inline constexpr std::size_t kResponseTrailerBytes = 24;
// Split index used on the wire for a full offload (device runs nothing).
inline constexpr std::uint16_t kFullOffloadSplit = 0xFFFF;
// Largest payload a stream reader will accept.
inline constexpr std::uint64_t kMaxPayloadBytes = std::uint64_t{1} << 30;

enum class FrameType : std::uint8_t {
  kInferRequest = 0,
  kInferResponse = 1,
  kError = 2,
  kPing = 3,
  kPong = 4,
};

enum class WireErrc {
  kBadMagic,
  kUnsupportedVersion,
  kBadFrameType,
  kTruncatedFrame,
  kPayloadLengthMismatch,
  kOversizedModelId,
  kFrameTooLarge,
};

const char* errc_name(WireErrc e);

class WireError : public Error {
 public:
  WireError(WireErrc code, const std::string& detail)
      : Error(ErrorClass::kParse, errc_name(code), detail), code_(code) {}
  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

struct EdgeTimings {
  std::uint64_t deserialize_us = 0;
  std::uint64_t tl_us = 0;
  std::uint64_t compute_us = 0;
  friend bool operator==(const EdgeTimings&, const EdgeTimings&) = default;
};

struct Frame {
  FrameType type = FrameType::kPing;
  std::uint64_t request_id = 0;
  std::string model_id;
  std::uint16_t split_index = 0;
  Shape dims;
  std::vector<float> payload;
  EdgeTimings timings;  // InferResponse only

  bool carries_tensor() const noexcept {
    return type == FrameType::kInferRequest || type == FrameType::kInferResponse;
  }
  Tensor tensor() const { return Tensor(dims, payload); }

  // Bitwise payload comparison.
  friend bool operator==(const Frame& a, const Frame& b);
};

Frame make_request(std::uint64_t request_id, std::string model_id, std::uint16_t split_index,
                   const Tensor& t);
Frame make_response(std::uint64_t request_id, std::string model_id, std::uint16_t split_index,
                    const Tensor& t, EdgeTimings timings);
Frame make_error(std::uint64_t request_id, std::string reason);
Frame make_ping(std::uint64_t request_id);
Frame make_pong(std::uint64_t request_id);

std::size_t header_size(std::size_t model_id_len) noexcept;
// Encoded size of a tensor-bearing request: header + 4 bytes per element.
std::size_t tensor_frame_size(std::size_t model_id_len, Shape dims) noexcept;
std::size_t encoded_size(const Frame& f) noexcept;

// Throws WireError(kOversizedModelId) or WireError(kPayloadLengthMismatch)
// when the frame fields are inconsistent.
std::vector<std::uint8_t> encode(const Frame& f);
void encode_into(const Frame& f, std::vector<std::uint8_t>& out);

struct Decoded {
  Frame frame;
  std::size_t consumed;
};

// Decodes the first frame of `in`; trailing bytes are left alone. Throws
// WireError; never returns a partial frame.
Decoded decode(std::span<const std::uint8_t> in);

// Stream framing: the first kPrefixBytes determine the header length; the
// complete header determines how many bytes (payload plus trailer) follow.
// Both validate what they read and throw WireError.
std::size_t header_length(std::span<const std::uint8_t> prefix);
std::size_t body_length(std::span<const std::uint8_t> header);

}  // namespace slicekit::wire
