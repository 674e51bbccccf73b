// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slicekit/benchmark.hpp"
#include "slicekit/network_profile.hpp"

namespace slicekit {

enum class Variant { kTL, kNoTL };
enum class VariantSelection { kTL, kNoTL, kBoth };

const char* variant_name(Variant v);
VariantSelection parse_variant(const std::string& s);

// Cost of one split under one variant, integer microseconds. Each term is
// rounded on its own so total_us is exactly the sum of the printed terms.
struct CostBreakdown {
  int split_index = 0;
  SplitKind kind = SplitKind::kInterior;
  Variant variant = Variant::kNoTL;
  std::int64_t device_compute_us = 0;
  std::int64_t e_tl_us = 0;   // device + edge transfer layer; 0 for NoTL
  std::int64_t serial_us = 0; // serialize + deserialize of what crosses the link
  std::int64_t comm_us = 0;   // latency + bytes / bandwidth
  std::int64_t edge_compute_us = 0;
  std::int64_t total_us = 0;
  // TL plans only: NoTL minus TL transfer-related cost at the same split.
  std::optional<std::int64_t> delta_t_us;

  friend bool operator==(const CostBreakdown&, const CostBreakdown&) = default;
};

struct Constraints {
  std::optional<int> min_split_index;
  std::optional<std::int64_t> max_total_latency_us;
  VariantSelection variant = VariantSelection::kBoth;
};

struct RankedPlan {
  // Ascending total_us; ties go to the larger split index.
  std::vector<CostBreakdown> entries;
  std::string bench_id;
  NetworkProfile net;

  const CostBreakdown& chosen() const { return entries.front(); }
  // Best entry of one variant, if any survived the constraints.
  std::optional<CostBreakdown> best(Variant v) const;
};

// Communication time: latency (once) plus payload transfer; zero payload
// costs the latency alone.
std::int64_t comm_time_us(std::uint64_t payload_bytes, const NetworkProfile& net);

// Throws NotTlEligible for splits where the transfer layer cannot be applied.
CostBreakdown cost_tl(const BenchmarkRecord& record, const NetworkProfile& net);
CostBreakdown cost_no_tl(const BenchmarkRecord& record, const NetworkProfile& net);
// (s_orig + c_orig) - (e_tl + s_tl + c_tl); positive favours the TL.
// Throws SplitMismatch when the two breakdowns are for different splits.
std::int64_t delta_t(const CostBreakdown& tl, const CostBreakdown& no_tl);

// Every costed candidate for the selected variant(s), unfiltered and unsorted.
std::vector<CostBreakdown> candidates(const BenchmarkSet& set, const NetworkProfile& net,
                                      VariantSelection variant);

// Throws NoFeasiblePlan if the constraints exclude every candidate.
RankedPlan rank(const BenchmarkSet& set, const NetworkProfile& net, const Constraints& constraints,
                const std::string& bench_id = "");

struct SweepRow {
  NetworkProfile net;
  CostBreakdown chosen;
};

std::vector<SweepRow> sweep(const BenchmarkSet& set, const std::vector<NetworkProfile>& grid,
                            const Constraints& constraints);

// Human-readable table and comma-separated export of a plan.
std::string format_plan_table(const RankedPlan& plan);
std::string format_plan_csv(const RankedPlan& plan);
std::string format_sweep_table(const std::vector<SweepRow>& rows);

}  // namespace slicekit
