// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "layer_cases.hpp"
#include "loopback.hpp"
#include "slicekit/offloader.hpp"
#include "wire_samples.hpp"

namespace slicekit {
namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * x << '%';
  return os.str();
}

std::string plan_label(int split, Variant v) {
  return (split < 0 ? std::string("full") : std::to_string(split)) + "/" + variant_name(v);
}

const NetworkProfile k30_30{30, 30};
const NetworkProfile k57_28{28, 57};
const NetworkProfile k60_30{30, 60};

BenchmarkSet bench(const LayerGraph& g, double device_scale, int reps, std::uint64_t seed = 1) {
  return benchmark_model(g, ResourceProfile{"device", device_scale}, ResourceProfile{"edge", 1.0},
                         random_input(g.input_shape, seed), reps);
}

// Runs `rounds` requests through every client, visiting the clients in turn
// so slow drift on the host affects all of them alike. Request r uses the
// same input everywhere. Returns the median end-to-end latency per client.
std::vector<double> interleaved_medians(std::vector<std::unique_ptr<DeviceClient>>& clients, Shape input,
                                        int rounds, std::uint64_t seed) {
  std::vector<std::vector<double>> totals(clients.size());
  Rng seeds(seed);
  for (int r = 0; r < rounds; ++r) {
    const Tensor x = random_input(input, seeds.next());
    for (std::size_t i = 0; i < clients.size(); ++i) totals[i].push_back(clients[i]->infer(x).report.total_us);
  }
  std::vector<double> out;
  for (auto& t : totals) out.push_back(median(t));
  return out;
}

// --- 1 ---------------------------------------------------------------------

Outcome cost_arithmetic() {
  Outcome o;
  BenchmarkRecord r;
  r.split_index = 3;
  r.tl_eligible = true;
  r.payload_bytes_no_tl = 1'000'000;
  r.payload_bytes_tl = 250'000;
  // 30,000 + 8,000,000 / 30 and 28,000 + 2,000,000 / 57.
  const CostBreakdown no_tl = cost_no_tl(r, k30_30);
  const CostBreakdown tl = cost_tl(r, k57_28);
  o.detail << "no-tl 1 MB @30mbps/30ms = " << no_tl.total_us << " us; tl comm 250 KB @57mbps/28ms = "
           << tl.comm_us << " us";
  o.require(std::llabs(no_tl.total_us - 296'667) <= 1, "no-tl total");
  o.require(std::llabs(tl.comm_us - 63'088) <= 1, "tl comm term");
  return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome shaping_fidelity() {
  Outcome o;
  const std::vector<std::uint8_t> payload(1'000'000, 0x5a);
  const double predicted = netem::predicted_send_us(payload.size(), k30_30);
  double worst = 0;
  o.detail << "predicted " << predicted << " us, measured";
  for (int i = 0; i < 5; ++i) {
    testing::DrainedLink link;
    const double t = netem::shaped_send(link.sender(), payload, {k30_30});
    o.detail << ' ' << std::llround(t);
    worst = std::max(worst, std::abs(t - predicted) / predicted);
  }
  o.detail << "; worst error " << pct(worst) << " (limit 10%)";
  o.require(worst <= 0.10, "shaped send outside 10%");
  return o;
}

// --- 3 ---------------------------------------------------------------------

// Exhaustive argmin written independently of rank(): every costed candidate
// of the variant, plus LocalOnly; ties go to the larger split index.
std::optional<CostBreakdown> brute_force(const BenchmarkSet& set, const NetworkProfile& net, Variant v,
                                         int min_split) {
  std::optional<CostBreakdown> best;
  for (const auto& r : set.records) {
    if (r.split_index < min_split) continue;
    std::optional<CostBreakdown> c;
    if (r.kind == SplitKind::kLocalOnly || v == Variant::kNoTL) {
      c = cost_no_tl(r, net);
    } else if (r.tl_eligible) {
      c = cost_tl(r, net);
    }
    if (!c) continue;
    if (!best || c->total_us < best->total_us ||
        (c->total_us == best->total_us && c->split_index > best->split_index)) {
      best = c;
    }
  }
  return best;
}

Outcome planner_oracle(const std::map<std::string, BenchmarkSet>& sets) {
  Outcome o;
  int checked = 0;
  for (const auto& [name, set] : sets) {
    for (const NetworkProfile& net : {k30_30, k57_28, k60_30}) {
      for (Variant v : {Variant::kTL, Variant::kNoTL}) {
        for (int min_split : {-1, 5}) {
          Constraints c;
          c.variant = v == Variant::kTL ? VariantSelection::kTL : VariantSelection::kNoTL;
          if (min_split >= 0) c.min_split_index = min_split;
          const CostBreakdown got = rank(set, net, c).chosen();
          const auto want = brute_force(set, net, v, min_split);
          ++checked;
          const std::string where = name + " " + net.str() + " " + variant_name(v) +
                                    (min_split >= 0 ? " min-split 5" : "");
          o.require(want.has_value(), where + ": no candidate");
          if (!want) continue;
          o.require(got.split_index == want->split_index && got.total_us == want->total_us,
                    where + ": rank chose " + std::to_string(got.split_index) + ", argmin " +
                        std::to_string(want->split_index));
          if (min_split >= 0) o.require(got.split_index >= min_split, where + ": below min split");
        }
      }
    }
  }
  o.detail << checked << " (model, network, variant, constraint) cases agree with exhaustive argmin";
  return o;
}

// --- 4 and 5 -----------------------------------------------------------------

struct Measured {
  CostBreakdown plan;
  double median_us = 0;
};

std::vector<Measured> measure_plans(const LayerGraph& g, const RankedPlan& plan, double device_scale,
                                    int rounds) {
  EdgeServer server;
  std::vector<Deployment> deployments;
  for (const auto& e : plan.entries) {
    deployments.push_back(make_deployment(g, e.split_index, e.variant));
    server.add(deployments.back());
  }
  const net::Endpoint edge{"127.0.0.1", server.start({"127.0.0.1", 0})};
  std::vector<std::unique_ptr<DeviceClient>> clients;
  for (const auto& d : deployments) {
    std::optional<net::Endpoint> ep;
    if (d.offloads()) ep = edge;
    clients.push_back(std::make_unique<DeviceClient>(
        d, DeviceConfig{ResourceProfile{"device", device_scale}, netem::LinkShaper{plan.net}}, ep));
  }
  const auto medians = interleaved_medians(clients, g.input_shape, rounds, 11);
  clients.clear();
  server.stop();
  std::vector<Measured> out;
  for (std::size_t i = 0; i < medians.size(); ++i) out.push_back({plan.entries[i], medians[i]});
  return out;
}

Outcome convergence(const std::vector<Measured>& runs) {
  Outcome o;
  double worst = 0;
  std::string worst_at;
  for (const auto& m : runs) {
    const double err = std::abs(m.median_us - static_cast<double>(m.plan.total_us)) /
                       static_cast<double>(m.plan.total_us);
    if (err > worst) {
      worst = err;
      worst_at = plan_label(m.plan.split_index, m.plan.variant);
    }
    o.require(err <= 0.15, plan_label(m.plan.split_index, m.plan.variant) + " planned " +
                               std::to_string(m.plan.total_us) + " measured " +
                               std::to_string(std::llround(m.median_us)));
  }
  o.detail << runs.size() << " plans of tiny-cnn-8 @30mbps/30ms; worst |measured-planned|/planned "
           << pct(worst) << " at " << worst_at << " (limit 15%)";
  return o;
}

Outcome tl_benefit(const std::vector<Measured>& runs) {
  Outcome o;
  std::map<int, double> no_tl;
  for (const auto& m : runs) {
    if (m.plan.variant == Variant::kNoTL) no_tl[m.plan.split_index] = m.median_us;
  }
  int positive = 0;
  for (const auto& m : runs) {
    if (m.plan.variant != Variant::kTL || !m.plan.delta_t_us || *m.plan.delta_t_us <= 0) continue;
    ++positive;
    const double other = no_tl.at(m.plan.split_index);
    o.require(m.median_us < other, "split " + std::to_string(m.plan.split_index) + ": tl " +
                                       std::to_string(std::llround(m.median_us)) + " >= no-tl " +
                                       std::to_string(std::llround(other)));
  }
  o.detail << "tl faster than no-tl at all " << positive << " splits with planned dt > 0";
  o.require(positive > 0, "no split with planned dt > 0");

  // Transfer-dominated configuration: a slow device on a 30 Mbps link.
  const LayerGraph g = make_synthetic_model("deep-20", 1);
  const double scale = 10;
  const RankedPlan plan = rank(bench(g, scale, kMinRepetitions), k30_30, {});
  const auto best_tl = plan.best(Variant::kTL);
  o.require(best_tl.has_value(), "no tl plan for deep-20");
  if (!best_tl) return o;
  RankedPlan pair = plan;
  pair.entries.clear();
  for (const auto& e : plan.entries) {
    if (e.kind == SplitKind::kLocalOnly || e == *best_tl) pair.entries.push_back(e);
  }
  const auto m = measure_plans(g, pair, scale, kMinExperimentRequests);
  const double local = m[0].plan.kind == SplitKind::kLocalOnly ? m[0].median_us : m[1].median_us;
  const double tl = m[0].plan.kind == SplitKind::kLocalOnly ? m[1].median_us : m[0].median_us;
  const double speedup = local / tl;
  o.detail << "; deep-20 device x10 @30mbps/30ms: local-only " << std::llround(local) << " us, best tl plan ("
           << plan_label(best_tl->split_index, Variant::kTL) << ") " << std::llround(tl) << " us, speedup "
           << std::fixed << std::setprecision(2) << speedup << "x (floor 2x)";
  o.require(speedup >= 2.0, "speedup below 2x");
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome distribution_transparency() {
  Outcome o;
  int deployments_checked = 0;
  for (const auto& name : synthetic_model_names()) {
    const LayerGraph g = make_synthetic_model(name, 3);
    std::vector<Deployment> ds;
    for (const auto& sp : enumerate_split_points(g)) {
      if (sp.kind == SplitKind::kLocalOnly) continue;
      ds.push_back(make_deployment(g, sp.index, Variant::kNoTL));
      if (sp.tl_eligible) ds.push_back(make_deployment(g, sp.index, Variant::kTL));
    }
    EdgeServer server;
    for (const auto& d : ds) server.add(d);
    const net::Endpoint edge{"127.0.0.1", server.start({"127.0.0.1", 0})};
    std::vector<std::unique_ptr<DeviceClient>> clients;
    for (const auto& d : ds) {
      clients.push_back(std::make_unique<DeviceClient>(d, DeviceConfig{{}, netem::LinkShaper{}}, edge));
    }
    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) % ds.size();
      const Tensor x = random_input(g.input_shape, 1000 + static_cast<std::uint64_t>(i));
      const Tensor got = clients[k]->infer(x).output;
      const Tensor want = run(ds[k].whole, x);
      const bool same = got.shape() == want.shape() &&
                        std::memcmp(got.values().data(), want.values().data(), want.size() * sizeof(float)) == 0;
      if (!same) ++mismatches;
    }
    clients.clear();
    server.stop();
    deployments_checked += static_cast<int>(ds.size());
    o.require(mismatches == 0, name + ": " + std::to_string(mismatches) + " of 100 outputs differ");
  }
  o.detail << "100 inputs per builtin model over " << deployments_checked
           << " offloaded deployments, outputs bit-identical to single-process runs";
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome tl_correctness() {
  Outcome o;
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const Shape s{static_cast<std::uint32_t>(1 + rng.below(8)), static_cast<std::uint32_t>(2 * (1 + rng.below(16))),
                  static_cast<std::uint32_t>(2 * (1 + rng.below(16)))};
    Tensor x(s);
    for (float& v : x.values()) v = static_cast<float>(rng.normal());
    const Tensor down = max_pool_2x2(x);
    const Tensor up = nn_upsample_2x(down);
    o.require(down.size() * 4 == x.size(), "quarter-size law at " + s.str());
    o.require(wire::encode(wire::make_request(0, "", 0, down)).size() - wire::header_size(0) ==
                  (wire::encode(wire::make_request(0, "", 0, x)).size() - wire::header_size(0)) / 4,
              "quarter payload at " + s.str());
    o.require(up.shape() == s, "upsample does not invert pool shape at " + s.str());
    o.require(output_shape(Layer{EdgeTL{}, {}}, output_shape(Layer{DeviceTL{}, {}}, s)) == s,
              "layer shapes at " + s.str());
  }
  double worst = 0;
  const auto cases = testing::layer_cases();
  for (const auto& c : cases) {
    for (int seed = 1; seed <= 10; ++seed) {
      Rng r(static_cast<std::uint64_t>(seed) * 7919);
      Layer layer = c.make(r);
      const auto g = testing::check_gradients(layer, testing::spaced_input(c.input, r),
                                              static_cast<std::uint64_t>(seed));
      worst = std::max({worst, g.input_error, g.weight_error});
      o.require(g.input_error <= 1e-3 && g.weight_error <= 1e-3,
                std::string(c.name) + " seed " + std::to_string(seed));
    }
  }
  o.detail << "quarter-size and shape inverse on 200 shapes; gradients of " << cases.size()
           << " layer kinds x 10 seeds, worst relative error " << std::scientific << std::setprecision(2)
           << worst << " (limit 1e-3)";
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome accuracy_recovery() {
  Outcome o;
  const ToyDataset data = make_toy_dataset(1, 4, 250);
  LayerGraph base = make_synthetic_model("tiny-cnn-8", 7);
  train(base, data, TrainConfig{});
  const double base_acc = accuracy(base, data.validation);
  const TLModel tl = insert_tl(base, 2);
  const double untrained = accuracy(tl.graph, data.validation);
  const RetrainResult r = retrain(tl, data, TrainConfig{});
  const double retrained = accuracy(r.model.graph, data.validation);
  o.detail << "validation accuracy: base " << pct(base_acc) << ", tl at split 2 before retraining "
           << pct(untrained) << ", after " << pct(retrained) << " (drop " << pct(base_acc - retrained)
           << ", limit 3 points)";
  o.require(base_acc >= 0.90, "base below 90%");
  o.require(retrained >= base_acc - 0.03, "retrained drop above 3 points");
  return o;
}

// --- 9 ---------------------------------------------------------------------

Outcome wire_robustness() {
  Outcome o;
  Rng rng(5);
  int round_trip_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const wire::Frame f = testing::random_frame(rng);
    const auto bytes = wire::encode(f);
    const auto d = wire::decode(bytes);
    if (!(d.frame == f) || d.consumed != bytes.size()) ++round_trip_failures;
  }
  o.require(round_trip_failures == 0, std::to_string(round_trip_failures) + " round trips differ");

  const auto valid = wire::encode(testing::golden_request());
  int structured = 0, accepted = 0, other = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> bytes;
    if (i % 2 == 0) {
      bytes.resize(rng.below(128));
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
      if (i % 4 == 0) std::copy_n(valid.begin(), std::min<std::size_t>(bytes.size(), 7), bytes.begin());
    } else {
      bytes = valid;
      for (auto n = 1 + rng.below(4); n > 0; --n) bytes[rng.below(bytes.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      bytes.resize(rng.below(bytes.size() + 1));
    }
    try {
      wire::decode(bytes);
      ++accepted;
    } catch (const wire::WireError&) {
      ++structured;
    } catch (...) {
      ++other;
    }
  }
  o.require(other == 0, std::to_string(other) + " fuzz inputs raised unstructured errors");

  std::ifstream f(std::string(SLICEKIT_FIXTURE_DIR) + "/request_2x2x2.bin", std::ios::binary);
  const std::vector<std::uint8_t> golden{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  o.require(golden == valid, "golden bytes changed");
  o.detail << "1000 round trips exact; fuzz: " << structured << " wire errors, " << accepted
           << " valid, " << other << " other; golden frame " << golden.size() << " bytes stable";
  return o;
}

}  // namespace
}  // namespace slicekit

int main() {
  using namespace slicekit;
  int failed = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << n << " " << name << ": " << o.detail.str() << " ("
              << std::fixed << std::setprecision(1) << secs << " s)" << std::endl;
  };

  report(1, "cost-model arithmetic", cost_arithmetic);
  report(2, "shaping fidelity", shaping_fidelity);
  report(3, "planner equals exhaustive argmin", [] {
    std::map<std::string, BenchmarkSet> sets;
    for (const auto& name : synthetic_model_names()) {
      sets.emplace(name, bench(make_synthetic_model(name, 1), 1.0, kMinRepetitions));
    }
    return planner_oracle(sets);
  });

  std::vector<Measured> tiny;
  report(4, "plan/measurement convergence", [&] {
    const LayerGraph g = make_synthetic_model("tiny-cnn-8", 1);
    const int reps = 60;
    tiny = measure_plans(g, rank(bench(g, 1.0, reps), k30_30, {}), 1.0, reps);
    return convergence(tiny);
  });
  report(5, "transfer layer benefit", [&] { return tl_benefit(tiny); });
  report(6, "distribution transparency", distribution_transparency);
  report(7, "transfer layer correctness", tl_correctness);
  report(8, "accuracy recovery", accuracy_recovery);
  report(9, "wire robustness", wire_robustness);

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
