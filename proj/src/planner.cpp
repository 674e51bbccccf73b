// SPDX-License-Identifier: Apache-2.0
#include "slicekit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "slicekit/error.hpp"

namespace slicekit {
namespace {

std::int64_t round_us(double us) { return std::llround(us); }

void finish(CostBreakdown& c) {
  c.total_us = c.device_compute_us + c.e_tl_us + c.serial_us + c.comm_us + c.edge_compute_us;
}

bool ranks_before(const CostBreakdown& a, const CostBreakdown& b) {
  if (a.total_us != b.total_us) return a.total_us < b.total_us;
  if (a.split_index != b.split_index) return a.split_index > b.split_index;
  return a.variant == Variant::kNoTL && b.variant == Variant::kTL;
}

std::string split_label(const CostBreakdown& c) {
  switch (c.kind) {
    case SplitKind::kFullOffload: return "full";
    case SplitKind::kLocalOnly: return "local";
    case SplitKind::kInterior: break;
  }
  return std::to_string(c.split_index);
}

}  // namespace

std::string NetworkProfile::str() const {
  if (unlimited()) return "unlimited";
  std::ostringstream os;
  os << upload_bandwidth_mbps << "mbps/" << latency_ms << "ms";
  return os.str();
}

void validate(const NetworkProfile& net) {
  if (!(net.latency_ms >= 0) || !std::isfinite(net.latency_ms)) {
    throw InvalidArgument("latency must be >= 0 ms");
  }
  if (!(net.upload_bandwidth_mbps > 0)) throw InvalidArgument("bandwidth must be > 0 Mbps");
}

double transfer_time_us(double bytes, const NetworkProfile& net) {
  if (std::isinf(net.upload_bandwidth_mbps)) return 0.0;
  // bits / (Mbit/s) = microseconds
  return bytes * 8.0 / net.upload_bandwidth_mbps;
}

const char* variant_name(Variant v) { return v == Variant::kTL ? "tl" : "no-tl"; }

VariantSelection parse_variant(const std::string& s) {
  if (s == "tl") return VariantSelection::kTL;
  if (s == "no-tl") return VariantSelection::kNoTL;
  if (s == "both") return VariantSelection::kBoth;
  throw InvalidArgument("variant must be tl, no-tl or both, got '" + s + "'");
}

std::int64_t comm_time_us(std::uint64_t payload_bytes, const NetworkProfile& net) {
  return round_us(net.latency_ms * 1000.0) +
         round_us(transfer_time_us(static_cast<double>(payload_bytes), net));
}

CostBreakdown cost_tl(const BenchmarkRecord& r, const NetworkProfile& net) {
  validate(net);
  if (!r.tl_eligible || r.kind == SplitKind::kLocalOnly) {
    throw NotTlEligible("split " + std::to_string(r.split_index) +
                        " has no even-dimension boundary for the transfer layer");
  }
  CostBreakdown c;
  c.split_index = r.split_index;
  c.kind = r.kind;
  c.variant = Variant::kTL;
  c.device_compute_us = round_us(r.device_head_time_us);
  c.edge_compute_us = round_us(r.edge_tail_time_us);
  c.e_tl_us = round_us(r.device_tl_time_us + r.edge_tl_time_us);
  c.serial_us = round_us(r.serialize_tl_time_us + r.deserialize_tl_time_us);
  c.comm_us = comm_time_us(r.payload_bytes_tl, net);
  finish(c);
  return c;
}

CostBreakdown cost_no_tl(const BenchmarkRecord& r, const NetworkProfile& net) {
  validate(net);
  CostBreakdown c;
  c.split_index = r.split_index;
  c.kind = r.kind;
  c.variant = Variant::kNoTL;
  c.device_compute_us = round_us(r.device_head_time_us);
  if (r.kind != SplitKind::kLocalOnly) {
    c.edge_compute_us = round_us(r.edge_tail_time_us);
    c.serial_us = round_us(r.serialize_time_us + r.deserialize_time_us);
    c.comm_us = comm_time_us(r.payload_bytes_no_tl, net);
  }
  finish(c);
  return c;
}

std::int64_t delta_t(const CostBreakdown& tl, const CostBreakdown& no_tl) {
  if (tl.split_index != no_tl.split_index) {
    throw SplitMismatch("TL cost is for split " + std::to_string(tl.split_index) +
                        ", NoTL cost for split " + std::to_string(no_tl.split_index));
  }
  return (no_tl.serial_us + no_tl.comm_us) - (tl.e_tl_us + tl.serial_us + tl.comm_us);
}

std::optional<CostBreakdown> RankedPlan::best(Variant v) const {
  for (const auto& e : entries) {
    if (e.variant == v) return e;
  }
  return std::nullopt;
}

std::vector<CostBreakdown> candidates(const BenchmarkSet& set, const NetworkProfile& net,
                                      VariantSelection variant) {
  std::vector<CostBreakdown> out;
  for (const auto& r : set.records) {
    const CostBreakdown plain = cost_no_tl(r, net);
    // LocalOnly moves nothing over the link, so it is the same plan under
    // either variant and stays in both candidate sets.
    if (variant != VariantSelection::kTL || r.kind == SplitKind::kLocalOnly) out.push_back(plain);
    if (variant != VariantSelection::kNoTL && r.tl_eligible && r.kind != SplitKind::kLocalOnly) {
      CostBreakdown tl = cost_tl(r, net);
      tl.delta_t_us = delta_t(tl, plain);
      out.push_back(tl);
    }
  }
  return out;
}

RankedPlan rank(const BenchmarkSet& set, const NetworkProfile& net, const Constraints& constraints,
                const std::string& bench_id) {
  validate(net);
  if (set.records.empty()) throw NoFeasiblePlan("no benchmark records");
  if (constraints.min_split_index &&
      (*constraints.min_split_index < -1 || *constraints.min_split_index > set.units - 1)) {
    throw InvalidArgument("min split " + std::to_string(*constraints.min_split_index) +
                          " outside [-1, " + std::to_string(set.units - 1) + "]");
  }
  RankedPlan plan;
  plan.bench_id = bench_id.empty() ? set.model : bench_id;
  plan.net = net;
  for (auto& c : candidates(set, net, constraints.variant)) {
    if (constraints.min_split_index && c.split_index < *constraints.min_split_index) continue;
    if (constraints.max_total_latency_us && c.total_us > *constraints.max_total_latency_us) continue;
    plan.entries.push_back(c);
  }
  if (plan.entries.empty()) {
    throw NoFeasiblePlan("every candidate of " + set.model + " violates the constraints");
  }
  std::stable_sort(plan.entries.begin(), plan.entries.end(), ranks_before);
  return plan;
}

std::vector<SweepRow> sweep(const BenchmarkSet& set, const std::vector<NetworkProfile>& grid,
                            const Constraints& constraints) {
  if (grid.empty()) throw InvalidArgument("network grid is empty");
  std::vector<SweepRow> rows;
  for (const auto& net : grid) rows.push_back({net, rank(set, net, constraints).chosen()});
  return rows;
}

std::string format_plan_table(const RankedPlan& plan) {
  std::ostringstream os;
  os << "# plan for " << plan.bench_id << " over " << plan.net.str() << '\n';
  os << "# end-to-end totals include result return; the return path adds no emulated delay\n";
  os << std::left << std::setw(7) << "split" << std::setw(7) << "variant" << std::right
     << std::setw(11) << "device_us" << std::setw(10) << "tl_us" << std::setw(10) << "serial_us"
     << std::setw(11) << "comm_us" << std::setw(11) << "edge_us" << std::setw(11) << "total_us"
     << std::setw(11) << "dt_us" << '\n';
  for (const auto& e : plan.entries) {
    os << std::left << std::setw(7) << split_label(e) << std::setw(7) << variant_name(e.variant)
       << std::right << std::setw(11) << e.device_compute_us << std::setw(10) << e.e_tl_us
       << std::setw(10) << e.serial_us << std::setw(11) << e.comm_us << std::setw(11)
       << e.edge_compute_us << std::setw(11) << e.total_us << std::setw(11)
       << (e.delta_t_us ? std::to_string(*e.delta_t_us) : "-") << '\n';
  }
  const CostBreakdown& c = plan.chosen();
  os << "chosen: split " << split_label(c) << " (" << variant_name(c.variant) << "), "
     << c.total_us << " us\n";
  const auto tl = plan.best(Variant::kTL);
  const auto no = plan.best(Variant::kNoTL);
  if (tl && no) {
    os << "best tl vs best no-tl: " << tl->total_us << " us (split " << split_label(*tl)
       << ") vs " << no->total_us << " us (split " << split_label(*no)
       << "), difference " << (no->total_us - tl->total_us) << " us\n";
  }
  return os.str();
}

std::string format_plan_csv(const RankedPlan& plan) {
  std::ostringstream os;
  os << "split,kind,variant,device_us,tl_us,serial_us,comm_us,edge_us,total_us,delta_t_us\n";
  for (const auto& e : plan.entries) {
    os << e.split_index << ',' << split_kind_name(e.kind) << ',' << variant_name(e.variant) << ','
       << e.device_compute_us << ',' << e.e_tl_us << ',' << e.serial_us << ',' << e.comm_us << ','
       << e.edge_compute_us << ',' << e.total_us << ','
       << (e.delta_t_us ? std::to_string(*e.delta_t_us) : "") << '\n';
  }
  return os.str();
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "network" << std::setw(8) << "split" << std::setw(8)
     << "variant" << std::right << std::setw(12) << "total_us" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(20) << r.net.str() << std::setw(8) << split_label(r.chosen)
       << std::setw(8) << variant_name(r.chosen.variant) << std::right << std::setw(12)
       << r.chosen.total_us << '\n';
  }
  return os.str();
}

}  // namespace slicekit
