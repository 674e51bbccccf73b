// SPDX-License-Identifier: Apache-2.0
#include "slicekit/wire.hpp"

#include <cstring>

#include "slicekit/bytes.hpp"

namespace slicekit::wire {
namespace {

struct Header {
  FrameType type;
  std::uint64_t request_id;
  std::string model_id;
  std::uint16_t split_index;
  Shape dims;
  std::uint64_t payload_len;
};

std::size_t trailer_bytes(FrameType t) {
  return t == FrameType::kInferResponse ? kResponseTrailerBytes : 0;
}

FrameType check_prefix(bytes::Reader& r) {
  const std::string_view magic = r.get_bytes(4);
  if (r.fail()) throw WireError(WireErrc::kTruncatedFrame, "stream ended inside magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw WireError(WireErrc::kBadMagic, "expected SLKF");
  }
  const auto version = r.get<std::uint16_t>();
  if (r.fail()) throw WireError(WireErrc::kTruncatedFrame, "stream ended inside version");
  if (version != kVersion) {
    throw WireError(WireErrc::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const auto type = r.get<std::uint8_t>();
  if (r.fail()) throw WireError(WireErrc::kTruncatedFrame, "stream ended inside frame type");
  if (type > static_cast<std::uint8_t>(FrameType::kPong)) {
    throw WireError(WireErrc::kBadFrameType, "frame type " + std::to_string(type));
  }
  return static_cast<FrameType>(type);
}

// Validates that payload_len agrees with the frame type and dims.
void check_payload(const Header& h) {
  if (h.payload_len > kMaxPayloadBytes) {
    throw WireError(WireErrc::kFrameTooLarge, std::to_string(h.payload_len) + " bytes");
  }
  const bool tensor = h.type == FrameType::kInferRequest || h.type == FrameType::kInferResponse;
  if (!tensor) {
    if (h.payload_len != 0 || h.dims.elements() != 0) {
      throw WireError(WireErrc::kPayloadLengthMismatch, "control frame must not carry a payload");
    }
    return;
  }
  if (h.dims.channels == 0 || h.dims.height == 0 || h.dims.width == 0) {
    throw WireError(WireErrc::kPayloadLengthMismatch, "tensor dims must be positive");
  }
  const unsigned __int128 expected =
      static_cast<unsigned __int128>(h.dims.channels) * h.dims.height * h.dims.width * 4;
  if (expected != h.payload_len) {
    throw WireError(WireErrc::kPayloadLengthMismatch,
                    "payload_len " + std::to_string(h.payload_len) + " does not match dims " +
                        h.dims.str());
  }
}

Header read_header(bytes::Reader& r) {
  Header h{};
  h.type = check_prefix(r);
  h.request_id = r.get<std::uint64_t>();
  const auto len = r.get<std::uint8_t>();
  h.model_id = std::string(r.get_bytes(len));
  h.split_index = r.get<std::uint16_t>();
  h.dims.channels = r.get<std::uint32_t>();
  h.dims.height = r.get<std::uint32_t>();
  h.dims.width = r.get<std::uint32_t>();
  h.payload_len = r.get<std::uint64_t>();
  if (r.fail()) throw WireError(WireErrc::kTruncatedFrame, "stream ended inside header");
  return h;
}

}  // namespace

const char* errc_name(WireErrc e) {
  switch (e) {
    case WireErrc::kBadMagic: return "BadMagic";
    case WireErrc::kUnsupportedVersion: return "UnsupportedVersion";
    case WireErrc::kBadFrameType: return "BadFrameType";
    case WireErrc::kTruncatedFrame: return "TruncatedFrame";
    case WireErrc::kPayloadLengthMismatch: return "PayloadLengthMismatch";
    case WireErrc::kOversizedModelId: return "OversizedModelId";
    case WireErrc::kFrameTooLarge: return "FrameTooLarge";
  }
  return "WireError";
}

bool operator==(const Frame& a, const Frame& b) {
  return a.type == b.type && a.request_id == b.request_id && a.model_id == b.model_id &&
         a.split_index == b.split_index && a.dims == b.dims && a.timings == b.timings &&
         a.payload.size() == b.payload.size() &&
         (a.payload.empty() ||
          std::memcmp(a.payload.data(), b.payload.data(), a.payload.size() * 4) == 0);
}

Frame make_request(std::uint64_t request_id, std::string model_id, std::uint16_t split_index,
                   const Tensor& t) {
  return Frame{FrameType::kInferRequest, request_id, std::move(model_id), split_index,
               t.shape(), t.values(), {}};
}

Frame make_response(std::uint64_t request_id, std::string model_id, std::uint16_t split_index,
                    const Tensor& t, EdgeTimings timings) {
  return Frame{FrameType::kInferResponse, request_id, std::move(model_id), split_index,
               t.shape(), t.values(), timings};
}

Frame make_error(std::uint64_t request_id, std::string reason) {
  if (reason.size() > 255) reason.resize(255);
  return Frame{FrameType::kError, request_id, std::move(reason), 0, {}, {}, {}};
}

Frame make_ping(std::uint64_t request_id) {
  return Frame{FrameType::kPing, request_id, {}, 0, {}, {}, {}};
}

Frame make_pong(std::uint64_t request_id) {
  return Frame{FrameType::kPong, request_id, {}, 0, {}, {}, {}};
}

std::size_t header_size(std::size_t model_id_len) noexcept {
  return kFixedHeaderBytes + model_id_len;
}

std::size_t tensor_frame_size(std::size_t model_id_len, Shape dims) noexcept {
  return header_size(model_id_len) + dims.elements() * sizeof(float);
}

std::size_t encoded_size(const Frame& f) noexcept {
  return header_size(f.model_id.size()) + f.payload.size() * sizeof(float) +
         trailer_bytes(f.type);
}

void encode_into(const Frame& f, std::vector<std::uint8_t>& out) {
  if (f.model_id.size() > 255) {
    throw WireError(WireErrc::kOversizedModelId,
                    "model id is " + std::to_string(f.model_id.size()) + " bytes, limit 255");
  }
  Header h{f.type, f.request_id, f.model_id, f.split_index, f.dims, f.payload.size() * 4};
  if (f.carries_tensor() && f.dims.elements() != f.payload.size()) {
    throw WireError(WireErrc::kPayloadLengthMismatch,
                    "dims " + f.dims.str() + " do not match " + std::to_string(f.payload.size()) +
                        " values");
  }
  check_payload(h);

  out.reserve(out.size() + encoded_size(f));
  bytes::Writer w(out);
  w.put_bytes(std::string_view(kMagic, 4));
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(f.type));
  w.put(f.request_id);
  w.put(static_cast<std::uint8_t>(f.model_id.size()));
  w.put_bytes(f.model_id);
  w.put(f.split_index);
  w.put(f.dims.channels);
  w.put(f.dims.height);
  w.put(f.dims.width);
  w.put(h.payload_len);
  w.put_floats(f.payload);
  if (f.type == FrameType::kInferResponse) {
    w.put(f.timings.deserialize_us);
    w.put(f.timings.tl_us);
    w.put(f.timings.compute_us);
  }
}

std::vector<std::uint8_t> encode(const Frame& f) {
  std::vector<std::uint8_t> out;
  encode_into(f, out);
  return out;
}

std::size_t header_length(std::span<const std::uint8_t> prefix) {
  bytes::Reader r(prefix);
  check_prefix(r);
  r.get<std::uint64_t>();
  const auto len = r.get<std::uint8_t>();
  if (r.fail()) throw WireError(WireErrc::kTruncatedFrame, "stream ended inside header prefix");
  return header_size(len);
}

std::size_t body_length(std::span<const std::uint8_t> header) {
  bytes::Reader r(header);
  Header h = read_header(r);
  check_payload(h);
  return h.payload_len + trailer_bytes(h.type);
}

Decoded decode(std::span<const std::uint8_t> in) {
  bytes::Reader r(in);
  Header h = read_header(r);
  check_payload(h);
  if (r.remaining() < h.payload_len + trailer_bytes(h.type)) {
    throw WireError(WireErrc::kTruncatedFrame,
                    "need " + std::to_string(h.payload_len + trailer_bytes(h.type)) +
                        " payload bytes, have " + std::to_string(r.remaining()));
  }
  Frame f{h.type, h.request_id, std::move(h.model_id), h.split_index, h.dims, {}, {}};
  f.payload.resize(h.payload_len / 4);
  r.get_floats(f.payload);
  if (h.type == FrameType::kInferResponse) {
    f.timings.deserialize_us = r.get<std::uint64_t>();
    f.timings.tl_us = r.get<std::uint64_t>();
    f.timings.compute_us = r.get<std::uint64_t>();
  }
  return {std::move(f), r.position()};
}

}  // namespace slicekit::wire
