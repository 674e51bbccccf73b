// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "slicekit/net.hpp"
#include "slicekit/network_profile.hpp"

namespace slicekit::netem {

inline constexpr std::size_t kDefaultChunkBytes = 16 * 1024;
inline constexpr const char* kProfileEnvVar = "SLICEKIT_NET_PROFILE";

// Paces one sender's uplink. Not safe to share between concurrent senders.
struct LinkShaper {
  NetworkProfile profile;
  std::size_t chunk_bytes = kDefaultChunkBytes;
};

// "<bandwidth>mbps/<latency>ms" or "unlimited". Throws ParseError.
NetworkProfile parse_profile(const std::string& spec);
// The profile named by SLICEKIT_NET_PROFILE when set, else `fallback`.
NetworkProfile profile_from_env(const NetworkProfile& fallback);

// Sleeps the one-way latency once, then writes `bytes` in chunks released on
// an absolute schedule: chunk k leaves once the link would have finished
// carrying every byte up to and including it. Returns elapsed microseconds.
// An unlimited profile writes straight through.
double shaped_send(net::Connection& conn, std::span<const std::uint8_t> bytes,
                   const LinkShaper& shaper);

// Predicted shaped_send time: latency + bits / bandwidth.
double predicted_send_us(std::size_t bytes, const NetworkProfile& profile);

}  // namespace slicekit::netem
