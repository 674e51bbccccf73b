// SPDX-License-Identifier: Apache-2.0
#include "slicekit/netem.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "slicekit/benchmark.hpp"
#include "slicekit/error.hpp"

namespace slicekit::netem {
namespace {

double parse_quantity(std::string_view tok, std::string_view unit, const std::string& spec) {
  if (tok.size() <= unit.size() || tok.substr(tok.size() - unit.size()) != unit) {
    throw ParseError("network profile '" + spec + "': expected <number>" + std::string(unit) +
                     ", got '" + std::string(tok) + "'");
  }
  const std::string_view num = tok.substr(0, tok.size() - unit.size());
  double v = 0;
  const auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
  if (ec != std::errc() || p != num.data() + num.size() || !std::isfinite(v)) {
    throw ParseError("network profile '" + spec + "': bad number '" + std::string(num) + "'");
  }
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

NetworkProfile parse_profile(const std::string& spec) {
  const std::string s = lower(spec);
  if (s == "unlimited") return unlimited_profile();
  const auto slash = s.find('/');
  if (slash == std::string::npos) {
    throw ParseError("network profile '" + spec + "': expected <number>mbps/<number>ms");
  }
  NetworkProfile p;
  p.upload_bandwidth_mbps = parse_quantity(std::string_view(s).substr(0, slash), "mbps", spec);
  p.latency_ms = parse_quantity(std::string_view(s).substr(slash + 1), "ms", spec);
  if (!(p.upload_bandwidth_mbps > 0)) {
    throw ParseError("network profile '" + spec + "': bandwidth must be > 0");
  }
  if (p.latency_ms < 0) throw ParseError("network profile '" + spec + "': latency must be >= 0");
  return p;
}

NetworkProfile profile_from_env(const NetworkProfile& fallback) {
  const char* env = std::getenv(kProfileEnvVar);
  if (env == nullptr || *env == '\0') return fallback;
  return parse_profile(env);
}

double predicted_send_us(std::size_t bytes, const NetworkProfile& profile) {
  return profile.latency_ms * 1000.0 + transfer_time_us(static_cast<double>(bytes), profile);
}

double shaped_send(net::Connection& conn, std::span<const std::uint8_t> bytes,
                   const LinkShaper& shaper) {
  const auto start = Clock::now();
  const NetworkProfile& p = shaper.profile;
  if (p.unlimited()) {
    conn.send_all(bytes);
    return elapsed_us(start);
  }
  validate(p);
  const std::size_t chunk = std::max<std::size_t>(1, shaper.chunk_bytes);
  const auto origin = start + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double, std::micro>(p.latency_ms * 1000.0));
  std::size_t sent = 0;
  do {
    const std::size_t n = std::min(chunk, bytes.size() - sent);
    const double done_us = transfer_time_us(static_cast<double>(sent + n), p);
    std::this_thread::sleep_until(
        origin + std::chrono::duration_cast<Clock::duration>(
                     std::chrono::duration<double, std::micro>(done_us)));
    conn.send_all(bytes.subspan(sent, n));
    sent += n;
  } while (sent < bytes.size());
  return elapsed_us(start);
}

}  // namespace slicekit::netem
