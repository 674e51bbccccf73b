// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>

namespace slicekit {

// One-way added latency and uplink bandwidth of the device -> edge link.
// Bandwidth is in decimal megabits per second (10^6 bit/s).
struct NetworkProfile {
  double latency_ms = 0.0;
  double upload_bandwidth_mbps = std::numeric_limits<double>::infinity();

  bool unlimited() const noexcept {
    return latency_ms == 0.0 && upload_bandwidth_mbps == std::numeric_limits<double>::infinity();
  }
  std::string str() const;

  friend bool operator==(const NetworkProfile&, const NetworkProfile&) = default;
};

inline NetworkProfile unlimited_profile() { return {}; }

// Throws InvalidArgument unless latency >= 0 and bandwidth > 0.
void validate(const NetworkProfile& net);

// Transfer time of `bytes` at the profile bandwidth, microseconds.
double transfer_time_us(double bytes, const NetworkProfile& net);

}  // namespace slicekit
