// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slicekit/wire.hpp"

namespace slicekit::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

// Parses "host:port"; throws InvalidArgument.
Endpoint parse_endpoint(const std::string& s);

// Owning TCP stream socket.
class Connection {
 public:
  Connection() = default;
  explicit Connection(int fd);
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  // Connects with one retry. Throws TransportError.
  static Connection connect(const Endpoint& ep);

  bool is_open() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }
  void close() noexcept;
  // Stops reads and writes on both ends without releasing the descriptor.
  void shutdown() noexcept;

  // Throws ConnectionClosed or TransportError.
  void send_all(std::span<const std::uint8_t> bytes);
  // Returns false on clean EOF before any byte was read; throws Timeout,
  // ConnectionClosed (EOF mid-read) or TransportError.
  bool recv_exact(std::span<std::uint8_t> out);

  void set_receive_timeout(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
};

class Listener {
 public:
  // Port 0 binds an ephemeral port. Throws BindError.
  explicit Listener(const Endpoint& ep);
  Listener(Listener&&) noexcept;
  Listener& operator=(Listener&&) noexcept;
  ~Listener();

  std::uint16_t port() const noexcept { return port_; }
  // Returns nullopt once the listener has been shut down.
  std::optional<Connection> accept();
  void shutdown() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Reads one complete frame's bytes. Returns nullopt on clean EOF at a frame
// boundary. Throws wire::WireError for malformed headers.
std::optional<std::vector<std::uint8_t>> read_frame_bytes(Connection& c);

std::optional<wire::Frame> read_frame(Connection& c);
void write_frame(Connection& c, const wire::Frame& f);

}  // namespace slicekit::net
