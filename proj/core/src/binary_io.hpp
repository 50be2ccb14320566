#pragma once

// Little-endian binary encoding shared by the split and parameter snapshots.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lrml/error.hpp"

namespace lrml::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void f64s(std::span<const double> xs) {
    for (double x : xs) f64(x);
  }
  void u32s(std::span<const std::uint32_t> xs) {
    u64(xs.size());
    for (auto x : xs) u32(x);
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw InputError(what_ + ": truncated file");
    }
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t count(std::uint64_t limit) {
    auto n = u64();
    if (n > limit) throw InputError(what_ + ": corrupt length field");
    return n;
  }
  std::string str() {
    std::string s(count(1u << 20), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  void f64s(std::span<double> xs) {
    for (double& x : xs) x = f64();
  }
  std::vector<std::uint32_t> u32s(std::uint64_t limit) {
    std::vector<std::uint32_t> xs(count(limit));
    for (auto& x : xs) x = u32();
    return xs;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw InputError(what_ + ": trailing bytes");
    }
  }

  const std::string& what() const { return what_; }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace lrml::detail
