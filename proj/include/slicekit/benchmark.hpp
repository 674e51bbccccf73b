// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slicekit/model_graph.hpp"
#include "slicekit/tensor.hpp"

namespace slicekit {

using Clock = std::chrono::steady_clock;

inline double elapsed_us(Clock::time_point since, Clock::time_point until = Clock::now()) {
  return std::chrono::duration<double, std::micro>(until - since).count();
}

// Emulated compute resource. Every layer executed under a profile is
// followed by a busy wait of (compute_scale - 1) times its measured time.
struct ResourceProfile {
  std::string name = "native";
  double compute_scale = 1.0;
};

void validate(const ResourceProfile& p);
void spin_for_us(double us);

Tensor execute_layer(const Layer& layer, const Tensor& input, const ResourceProfile& profile);
Tensor execute(const LayerGraph& graph, int begin, int end, const Tensor& input,
               const ResourceProfile& profile);

inline constexpr int kMinRepetitions = 20;
inline constexpr int kWarmupRuns = 3;

// Per split point measurements, medians over `repetitions` timed runs.
struct BenchmarkRecord {
  int split_index = 0;
  SplitKind kind = SplitKind::kInterior;
  bool tl_eligible = false;
  double device_head_time_us = 0;
  double edge_tail_time_us = 0;
  double device_tl_time_us = 0;
  double edge_tl_time_us = 0;
  // Encode/decode of the full-size boundary tensor.
  double serialize_time_us = 0;
  double deserialize_time_us = 0;
  // Encode/decode of the downsampled boundary tensor.
  double serialize_tl_time_us = 0;
  double deserialize_tl_time_us = 0;
  std::uint64_t payload_bytes_no_tl = 0;
  std::uint64_t payload_bytes_tl = 0;
  int repetitions = kMinRepetitions;
  // Monotonic clock reading in microseconds when the record was taken.
  std::int64_t timestamp = 0;

  friend bool operator==(const BenchmarkRecord&, const BenchmarkRecord&) = default;
};

struct BenchmarkSet {
  std::string model;
  int units = 0;
  std::string device_profile;
  std::string edge_profile;
  std::vector<BenchmarkRecord> records;

  const BenchmarkRecord& at_split(int split_index) const;
  friend bool operator==(const BenchmarkSet&, const BenchmarkSet&) = default;
};

BenchmarkSet benchmark_model(const LayerGraph& graph, const ResourceProfile& device,
                             const ResourceProfile& edge, const Tensor& input, int reps);

struct SerializationTiming {
  double serialize_time_us;
  double deserialize_time_us;
  std::uint64_t bytes;
};

// Median wire encode/decode time of `t` framed as an inference request.
SerializationTiming measure_serialization(const Tensor& t, int reps,
                                          const std::string& model_id = "");

double median(std::vector<double> values);
double percentile(std::vector<double> values, double p);

// Text record file: '#' metadata lines, then one whitespace-separated record
// per line in BenchmarkRecord field order.
void save_records(const BenchmarkSet& set, const std::filesystem::path& path);
BenchmarkSet load_records(const std::filesystem::path& path);
std::string format_records(const BenchmarkSet& set);
BenchmarkSet parse_records(const std::string& text);

}  // namespace slicekit
