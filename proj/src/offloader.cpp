// SPDX-License-Identifier: Apache-2.0
#include "slicekit/offloader.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "slicekit/bytes.hpp"
#include "slicekit/error.hpp"
#include "slicekit/random.hpp"

namespace slicekit {
namespace {

std::uint64_t to_us(double us) { return static_cast<std::uint64_t>(std::max(0.0, us) + 0.5); }

Deployment plain_deployment(const LayerGraph& base, int split_index) {
  const SplitPoint sp = split_point_at(base, split_index);
  Deployment d;
  d.model_id = deployment_id(base.name, split_index, Variant::kNoTL);
  d.split_index = split_index;
  d.kind = sp.kind;
  d.variant = Variant::kNoTL;
  d.whole = base;
  d.head = head_of(base, split_index);
  if (sp.kind != SplitKind::kLocalOnly) d.tail = tail_of(base, split_index);
  return d;
}

}  // namespace

std::uint16_t wire_split_index(int split_index) {
  if (split_index < 0) return wire::kFullOffloadSplit;
  return static_cast<std::uint16_t>(split_index);
}

std::string deployment_id(const std::string& model, int split_index, Variant variant) {
  std::string id = model + "@" + (split_index < 0 ? std::string("full") : std::to_string(split_index));
  if (variant == Variant::kTL) id += "+tl";
  return id;
}

Deployment make_deployment(const LayerGraph& base, int split_index, Variant variant) {
  if (variant == Variant::kNoTL) return plain_deployment(base, split_index);
  return make_deployment(insert_tl(base, split_index));
}

Deployment make_deployment(const TLModel& model) {
  const SplitModels parts = split_model(model);
  Deployment d;
  d.model_id = deployment_id(model.base.name, model.split_index, Variant::kTL);
  d.split_index = model.split_index;
  d.kind = model.split_index < 0 ? SplitKind::kFullOffload : SplitKind::kInterior;
  d.variant = Variant::kTL;
  d.head = parts.head;
  d.tail = parts.tail;
  d.whole = model.graph;
  return d;
}

// ---------------------------------------------------------------------------
// Edge server

EdgeServer::EdgeServer(ResourceProfile edge) : edge_(std::move(edge)) { validate(edge_); }

EdgeServer::~EdgeServer() { stop(); }

void EdgeServer::add_model(const std::string& model_id, EdgeModel model) {
  if (listener_) throw InvalidArgument("models must be registered before start()");
  if (model_id.size() > 255) throw InvalidArgument("model id longer than 255 bytes");
  validate(model.tail);
  registry_[model_id] = Entry{std::move(model), std::make_unique<std::mutex>()};
}

void EdgeServer::add(const Deployment& d) {
  if (!d.offloads()) return;
  add_model(d.model_id, EdgeModel{d.tail, d.split_index});
}

std::uint16_t EdgeServer::start(const net::Endpoint& address) {
  listener_.emplace(address);
  acceptor_ = std::thread([this] { accept_loop(); });
  return listener_->port();
}

void EdgeServer::wait() {
  std::unique_lock lock(wait_mu_);
  wait_cv_.wait(lock, [this] { return stopping_.load(); });
}

void EdgeServer::stop() {
  if (stopping_.exchange(true)) return;
  {
    std::lock_guard lock(wait_mu_);
  }
  wait_cv_.notify_all();
  if (listener_) listener_->shutdown();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    for (int fd : session_fds_) ::shutdown(fd, SHUT_RDWR);
    sessions.swap(sessions_);
  }
  for (auto& t : sessions) t.join();
}

void EdgeServer::accept_loop() {
  while (!stopping_.load()) {
    auto conn = listener_->accept();
    if (!conn) break;
    std::lock_guard lock(sessions_mu_);
    if (stopping_.load()) break;
    session_fds_.push_back(conn->fd());
    sessions_.emplace_back([this, c = std::move(*conn)]() mutable { session(std::move(c)); });
  }
}

void EdgeServer::session(net::Connection conn) {
  const int fd = conn.fd();
  try {
    while (!stopping_.load()) {
      std::optional<std::vector<std::uint8_t>> bytes;
      try {
        bytes = net::read_frame_bytes(conn);
      } catch (const wire::WireError& e) {
        // The stream is no longer aligned on a frame boundary.
        net::write_frame(conn, wire::make_error(0, e.what()));
        break;
      }
      if (!bytes) break;
      const auto t0 = Clock::now();
      wire::Frame request;
      try {
        request = wire::decode(*bytes).frame;
      } catch (const wire::WireError& e) {
        std::uint64_t id = 0;
        if (bytes->size() >= 15) std::memcpy(&id, bytes->data() + 7, sizeof id);
        net::write_frame(conn, wire::make_error(bytes::to_little(id), e.what()));
        continue;
      }
      net::write_frame(conn, handle(request, elapsed_us(t0)));
    }
  } catch (const Error&) {
    // Peer went away mid-frame or the server is stopping.
  }
  std::lock_guard lock(sessions_mu_);
  std::erase(session_fds_, fd);
}

wire::Frame EdgeServer::handle(const wire::Frame& req, double deserialize_us) {
  switch (req.type) {
    case wire::FrameType::kPing:
      return wire::make_pong(req.request_id);
    case wire::FrameType::kInferRequest:
      break;
    default:
      return wire::make_error(req.request_id, "UnexpectedFrame: edge accepts InferRequest and Ping");
  }
  const auto it = registry_.find(req.model_id);
  if (it == registry_.end()) {
    return wire::make_error(req.request_id, "UnknownModel: " + req.model_id);
  }
  const EdgeModel& m = it->second.model;
  if (req.split_index != wire_split_index(m.split_index)) {
    return wire::make_error(req.request_id, "SplitMismatch: expected " +
                                                std::to_string(wire_split_index(m.split_index)) +
                                                ", got " + std::to_string(req.split_index));
  }
  if (!(req.dims == m.tail.input_shape)) {
    return wire::make_error(req.request_id, "ShapeMismatch: expected " +
                                                m.tail.input_shape.str() + ", got " +
                                                req.dims.str());
  }
  wire::EdgeTimings timings;
  timings.deserialize_us = to_us(deserialize_us);
  Tensor x = req.tensor();
  try {
    std::lock_guard permit(*it->second.permit);
    int begin = 0;
    if (!m.tail.layers.empty() && std::holds_alternative<EdgeTL>(m.tail.layers[0].kind)) {
      const auto t_tl = Clock::now();
      x = execute_layer(m.tail.layers[0], x, edge_);
      timings.tl_us = to_us(elapsed_us(t_tl));
      begin = 1;
    }
    const auto t_compute = Clock::now();
    x = execute(m.tail, begin, static_cast<int>(m.tail.size()), x, edge_);
    timings.compute_us = to_us(elapsed_us(t_compute));
  } catch (const Error& e) {
    return wire::make_error(req.request_id, e.what());
  }
  served_.fetch_add(1);
  return wire::make_response(req.request_id, req.model_id, req.split_index, x, timings);
}

// ---------------------------------------------------------------------------
// Device client

DeviceClient::DeviceClient(Deployment deployment, DeviceConfig config,
                           std::optional<net::Endpoint> edge)
    : deployment_(std::move(deployment)), config_(std::move(config)) {
  validate(config_.device);
  head_ends_with_tl_ = !deployment_.head.layers.empty() &&
                       std::holds_alternative<DeviceTL>(deployment_.head.layers.back().kind);
  if (deployment_.offloads()) {
    if (!edge) throw InvalidArgument(deployment_.model_id + " offloads but no edge address given");
    conn_ = net::Connection::connect(*edge);
    conn_.set_receive_timeout(config_.timeout);
  }
}

bool DeviceClient::ping() {
  if (!conn_.is_open()) return false;
  const std::uint64_t id = next_request_++;
  net::write_frame(conn_, wire::make_ping(id));
  const auto reply = net::read_frame(conn_);
  return reply && reply->type == wire::FrameType::kPong && reply->request_id == id;
}

InferResult DeviceClient::infer(const Tensor& input) {
  const LayerGraph& head = deployment_.head;
  if (!(input.shape() == head.input_shape)) {
    throw ShapeMismatch(deployment_.model_id + " expects input " + head.input_shape.str() +
                        ", got " + input.shape().str());
  }
  LatencyReport rep;
  const auto start = Clock::now();
  const int n_head = static_cast<int>(head.size());
  const int compute_end = head_ends_with_tl_ ? n_head - 1 : n_head;
  Tensor x = execute(head, 0, compute_end, input, config_.device);
  rep.device_compute_us = elapsed_us(start);
  if (head_ends_with_tl_) {
    const auto t_tl = Clock::now();
    x = execute_layer(head.layers.back(), x, config_.device);
    rep.tl_us = elapsed_us(t_tl);
  }
  if (!deployment_.offloads()) {
    rep.total_us = elapsed_us(start);
    return {std::move(x), rep};
  }

  const std::uint64_t id = next_request_++;
  const auto t_ser = Clock::now();
  const auto bytes = wire::encode(
      wire::make_request(id, deployment_.model_id, wire_split_index(deployment_.split_index), x));
  rep.serialize_us = elapsed_us(t_ser);

  const double send_us = netem::shaped_send(conn_, bytes, config_.shaper);
  const auto t_wait = Clock::now();
  auto reply = net::read_frame_bytes(conn_);
  const double wait_us = elapsed_us(t_wait);
  if (!reply) throw ConnectionClosed("edge closed the connection");
  const auto t_de = Clock::now();
  wire::Frame frame = wire::decode(*reply).frame;
  const double decode_us = elapsed_us(t_de);
  rep.total_us = elapsed_us(start);

  if (frame.type == wire::FrameType::kError) throw ServerError(frame.model_id);
  if (frame.type != wire::FrameType::kInferResponse || frame.request_id != id) {
    throw ServerError("unexpected reply to request " + std::to_string(id));
  }
  const wire::EdgeTimings& et = frame.timings;
  const double edge_side = static_cast<double>(et.deserialize_us + et.tl_us + et.compute_us);
  rep.tl_us += static_cast<double>(et.tl_us);
  rep.edge_us = static_cast<double>(et.compute_us);
  rep.deserialize_us = static_cast<double>(et.deserialize_us) + decode_us;
  rep.network_us = send_us + wait_us - edge_side;
  return {frame.tensor(), rep};
}

// ---------------------------------------------------------------------------
// Experiments

Tensor random_input(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(shape.elements());
  for (float& x : v) x = static_cast<float>(rng.normal());
  return Tensor(shape, std::move(v));
}

ExperimentSummary run_experiment(DeviceClient& client, const NetworkProfile& net, int n_requests,
                                 std::uint64_t seed) {
  if (n_requests < kMinExperimentRequests) {
    throw InvalidArgument("experiments need at least " + std::to_string(kMinExperimentRequests) +
                          " requests");
  }
  const Deployment& d = client.deployment();
  ExperimentSummary s;
  s.model_id = d.model_id;
  s.split_index = d.split_index;
  s.variant = d.variant;
  s.net = net;
  s.n_requests = n_requests;
  Rng seeds(seed);
  for (int i = 0; i < n_requests; ++i) {
    s.requests.push_back(client.infer(random_input(d.head.input_shape, seeds.next())).report);
  }
  auto column = [&](double LatencyReport::*field) {
    std::vector<double> v;
    for (const auto& r : s.requests) v.push_back(r.*field);
    return v;
  };
  s.median_us = median(column(&LatencyReport::total_us));
  s.p95_us = percentile(column(&LatencyReport::total_us), 0.95);
  LatencyReport& m = s.component_medians;
  m.device_compute_us = median(column(&LatencyReport::device_compute_us));
  m.tl_us = median(column(&LatencyReport::tl_us));
  m.serialize_us = median(column(&LatencyReport::serialize_us));
  m.network_us = median(column(&LatencyReport::network_us));
  m.edge_us = median(column(&LatencyReport::edge_us));
  m.deserialize_us = median(column(&LatencyReport::deserialize_us));
  m.total_us = s.median_us;
  return s;
}

std::string format_experiment_table(const std::vector<ExperimentSummary>& runs) {
  std::ostringstream os;
  os << "# measured end-to-end latency, medians over sequential requests (includes result return)\n";
  os << std::left << std::setw(24) << "deployment" << std::setw(7) << "variant" << std::right
     << std::setw(11) << "device_us" << std::setw(10) << "tl_us" << std::setw(10) << "serial_us"
     << std::setw(11) << "comm_us" << std::setw(11) << "edge_us" << std::setw(11) << "total_us"
     << std::setw(11) << "p95_us" << '\n';
  os << std::fixed << std::setprecision(0);
  for (const auto& r : runs) {
    const LatencyReport& m = r.component_medians;
    os << std::left << std::setw(24) << r.model_id << std::setw(7) << variant_name(r.variant)
       << std::right << std::setw(11) << m.device_compute_us << std::setw(10) << m.tl_us
       << std::setw(10) << (m.serialize_us + m.deserialize_us) << std::setw(11) << m.network_us
       << std::setw(11) << m.edge_us << std::setw(11) << r.median_us << std::setw(11) << r.p95_us
       << '\n';
  }
  return os.str();
}

std::string format_request_log(const ExperimentSummary& run) {
  std::ostringstream os;
  os << "request,device_us,tl_us,serialize_us,network_us,edge_us,deserialize_us,total_us\n";
  os << std::fixed << std::setprecision(1);
  for (std::size_t i = 0; i < run.requests.size(); ++i) {
    const auto& r = run.requests[i];
    os << i << ',' << r.device_compute_us << ',' << r.tl_us << ',' << r.serialize_us << ','
       << r.network_us << ',' << r.edge_us << ',' << r.deserialize_us << ',' << r.total_us << '\n';
  }
  return os.str();
}

}  // namespace slicekit
