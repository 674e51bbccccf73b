// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "slicekit/benchmark.hpp"
#include "slicekit/model_graph.hpp"
#include "slicekit/net.hpp"
#include "slicekit/netem.hpp"
#include "slicekit/planner.hpp"
#include "slicekit/preprocessor.hpp"

namespace slicekit {

// Split index as carried in frames; FullOffload maps to wire::kFullOffloadSplit.
std::uint16_t wire_split_index(int split_index);

// Head and tail of one (split, variant) plan plus the single-process model
// they must reproduce.
struct Deployment {
  std::string model_id;
  int split_index = 0;
  SplitKind kind = SplitKind::kInterior;
  Variant variant = Variant::kNoTL;
  LayerGraph head;  // ends with DeviceTL for TL plans
  LayerGraph tail;  // starts with EdgeTL for TL plans; empty for LocalOnly
  LayerGraph whole;

  bool offloads() const noexcept { return kind != SplitKind::kLocalOnly; }
};

// Builds the deployment of `base` at `split_index`. TL plans insert the
// transfer layer pair; pass an already-retrained TLModel via the overload.
Deployment make_deployment(const LayerGraph& base, int split_index, Variant variant);
Deployment make_deployment(const TLModel& model);

std::string deployment_id(const std::string& model, int split_index, Variant variant);

struct EdgeModel {
  LayerGraph tail;
  int split_index = 0;
};

// Edge side: answers InferRequest frames with the tail model's output. Each
// connection gets its own session thread; inference on one model is
// serialized so measured edge times match single-request benchmarks.
class EdgeServer {
 public:
  explicit EdgeServer(ResourceProfile edge = {});
  ~EdgeServer();
  EdgeServer(const EdgeServer&) = delete;
  EdgeServer& operator=(const EdgeServer&) = delete;

  // Validates the tail's shapes. Must be called before start().
  void add_model(const std::string& model_id, EdgeModel model);
  void add(const Deployment& d);

  // Binds and serves on a background thread. Returns the bound port.
  std::uint16_t start(const net::Endpoint& address);
  // Blocks until stop() is called from another thread.
  void wait();
  void stop();

  std::uint64_t requests_served() const noexcept { return served_.load(); }

 private:
  struct Entry {
    EdgeModel model;
    std::unique_ptr<std::mutex> permit;
  };

  void accept_loop();
  void session(net::Connection conn);
  wire::Frame handle(const wire::Frame& request, double deserialize_us);

  ResourceProfile edge_;
  std::map<std::string, Entry> registry_;
  std::optional<net::Listener> listener_;
  std::thread acceptor_;
  std::mutex sessions_mu_;
  std::vector<std::thread> sessions_;
  std::vector<int> session_fds_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> served_{0};
  std::mutex wait_mu_;
  std::condition_variable wait_cv_;
};

// Per-request end-to-end latency split into components, microseconds.
struct LatencyReport {
  double device_compute_us = 0;
  double tl_us = 0;           // DeviceTL + EdgeTL
  double serialize_us = 0;    // request encode
  double network_us = 0;      // uplink send + response wait, minus edge work
  double edge_us = 0;         // edge compute reported by the server
  double deserialize_us = 0;  // request decode at the edge + response decode
  double total_us = 0;        // wall clock, first layer to decoded result

  double component_sum() const noexcept {
    return device_compute_us + tl_us + serialize_us + network_us + edge_us + deserialize_us;
  }
};

struct InferResult {
  Tensor output;
  LatencyReport report;
};

struct DeviceConfig {
  ResourceProfile device;
  netem::LinkShaper shaper;
  std::chrono::milliseconds timeout{10000};
};

// Device side of one deployment.
class DeviceClient {
 public:
  // Connects to `edge` unless the deployment is LocalOnly.
  DeviceClient(Deployment deployment, DeviceConfig config,
               std::optional<net::Endpoint> edge = std::nullopt);

  // Throws Timeout, ServerError or ConnectionClosed.
  InferResult infer(const Tensor& input);
  bool ping();

  const Deployment& deployment() const noexcept { return deployment_; }

 private:
  Deployment deployment_;
  DeviceConfig config_;
  net::Connection conn_;
  std::uint64_t next_request_ = 1;
  bool head_ends_with_tl_ = false;
};

struct ExperimentSummary {
  std::string model_id;
  int split_index = 0;
  Variant variant = Variant::kNoTL;
  NetworkProfile net;
  int n_requests = 0;
  double median_us = 0;
  double p95_us = 0;
  LatencyReport component_medians;
  std::vector<LatencyReport> requests;
};

inline constexpr int kMinExperimentRequests = 30;

// Sequential inferences on seeded random inputs.
ExperimentSummary run_experiment(DeviceClient& client, const NetworkProfile& net, int n_requests,
                                 std::uint64_t seed);

Tensor random_input(Shape shape, std::uint64_t seed);

std::string format_experiment_table(const std::vector<ExperimentSummary>& runs);
std::string format_request_log(const ExperimentSummary& run);

}  // namespace slicekit
