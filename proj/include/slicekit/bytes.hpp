// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

namespace slicekit::bytes {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }
  return v;
}

// Appends little-endian encodings to a byte vector.
class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <class T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void put_floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
      out_.insert(out_.end(), p, p + values.size_bytes());
    } else {
      for (float v : values) put(v);
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
};

// Bounds-checked little-endian reader. Reads past the end set fail() and
// return zero values; callers check fail() or remaining() before trusting them.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <class T>
  T get() {
    T v{};
    if (!take(sizeof(T))) return v;
    std::memcpy(&v, in_.data() + pos_ - sizeof(T), sizeof(T));
    return to_little(v);
  }
  std::string_view get_bytes(std::size_t n) {
    if (!take(n)) return {};
    return {reinterpret_cast<const char*>(in_.data() + pos_ - n), n};
  }
  bool get_floats(std::span<float> out) {
    if (!take(out.size_bytes())) return false;
    const std::uint8_t* src = in_.data() + pos_ - out.size_bytes();
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), src, out.size_bytes());
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, src + 4 * i, 4);
        out[i] = std::bit_cast<float>(to_little(bits));
      }
    }
    return true;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  bool fail() const noexcept { return fail_; }

 private:
  bool take(std::size_t n) {
    if (fail_ || n > in_.size() - pos_) {
      fail_ = true;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  bool fail_ = false;
};

}  // namespace slicekit::bytes
