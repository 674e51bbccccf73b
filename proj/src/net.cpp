// SPDX-License-Identifier: Apache-2.0
#include "slicekit/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

#include "slicekit/bytes.hpp"
#include "slicekit/error.hpp"

namespace slicekit::net {
namespace {

std::string errno_text() { return std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (ep.host.empty() || ep.host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host '" + ep.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("address must be host:port, got '" + s + "'");
  Endpoint ep;
  ep.host = s.substr(0, colon);
  const std::string port = s.substr(colon + 1);
  unsigned v = 0;
  const auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), v);
  if (ec != std::errc() || p != port.data() + port.size() || v > 65535) {
    throw InvalidArgument("bad port in '" + s + "'");
  }
  ep.port = static_cast<std::uint16_t>(v);
  return ep;
}

Connection::Connection(int fd) : fd_(fd) {}

Connection::Connection(Connection&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Connection::~Connection() { close(); }

void Connection::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Connection::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Connection Connection::connect(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  for (int attempt = 0;; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw TransportError("socket: " + errno_text());
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      set_nodelay(fd);
      return Connection(fd);
    }
    const std::string err = errno_text();
    ::close(fd);
    if (attempt >= 1) throw TransportError("connect " + ep.str() + ": " + err);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

void Connection::send_all(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0) throw ConnectionClosed("send on closed connection");
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw ConnectionClosed("peer closed the connection");
      throw TransportError("send: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

bool Connection::recv_exact(std::span<std::uint8_t> out) {
  if (fd_ < 0) throw ConnectionClosed("receive on closed connection");
  std::size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw ConnectionClosed("peer closed the connection mid-message");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw Timeout("receive timed out");
      if (errno == ECONNRESET) throw ConnectionClosed("connection reset by peer");
      throw TransportError("recv: " + errno_text());
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void Connection::set_receive_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

Listener::Listener(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw BindError("socket: " + errno_text());
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 16) != 0) {
    const std::string err = errno_text();
    ::close(fd_);
    fd_ = -1;
    throw BindError(ep.str() + ": " + err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Listener::Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) { o.fd_ = -1; }

Listener& Listener::operator=(Listener&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    port_ = o.port_;
    o.fd_ = -1;
  }
  return *this;
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<Connection> Listener::accept() {
  while (true) {
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      set_nodelay(fd);
      return Connection(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return std::nullopt;
  }
}

void Listener::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::optional<std::vector<std::uint8_t>> read_frame_bytes(Connection& c) {
  std::vector<std::uint8_t> buf(wire::kPrefixBytes);
  if (!c.recv_exact(buf)) return std::nullopt;
  const std::size_t header = wire::header_length(buf);
  buf.resize(header);
  if (!c.recv_exact(std::span(buf).subspan(wire::kPrefixBytes))) {
    throw ConnectionClosed("peer closed the connection mid-header");
  }
  // Read the declared body even when it disagrees with the dims, so the
  // stream stays aligned and decode() can report the mismatch.
  bytes::Reader r{std::span<const std::uint8_t>(buf).subspan(header - 8)};
  const auto payload_len = r.get<std::uint64_t>();
  if (payload_len > wire::kMaxPayloadBytes) {
    throw wire::WireError(wire::WireErrc::kFrameTooLarge, std::to_string(payload_len) + " bytes");
  }
  const auto type = static_cast<wire::FrameType>(buf[6]);
  const std::size_t body =
      payload_len + (type == wire::FrameType::kInferResponse ? wire::kResponseTrailerBytes : 0);
  buf.resize(header + body);
  if (body > 0 && !c.recv_exact(std::span(buf).subspan(header))) {
    throw ConnectionClosed("peer closed the connection mid-payload");
  }
  return buf;
}

std::optional<wire::Frame> read_frame(Connection& c) {
  auto bytes = read_frame_bytes(c);
  if (!bytes) return std::nullopt;
  return wire::decode(*bytes).frame;
}

void write_frame(Connection& c, const wire::Frame& f) { c.send_all(wire::encode(f)); }

}  // namespace slicekit::net
