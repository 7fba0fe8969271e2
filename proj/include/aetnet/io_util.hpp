#pragma once

// Little-endian binary stream helpers shared by the EVT1, AETF and EFNW
// file formats. All multi-byte fields are serialized least significant
// byte first regardless of host order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace aetnet::io {

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) fail("cannot open file for reading");
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    size_ = ec ? UINT64_MAX : size;
  }

  const std::string& path() const { return path_; }
  uint64_t offset() const { return off_; }

  // Bytes left in the file; lets loaders reject implausible element counts
  // before allocating for them.
  uint64_t remaining() const { return size_ <= off_ ? 0 : size_ - off_; }

  void bytes(void* dst, size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n) fail("unexpected end of file");
    off_ += n;
  }

  uint8_t u8() {
    uint8_t b;
    bytes(&b, 1);
    return b;
  }
  int8_t i8() { return static_cast<int8_t>(u8()); }
  uint16_t u16() {
    uint8_t b[2];
    bytes(b, 2);
    return static_cast<uint16_t>(b[0] | (uint16_t(b[1]) << 8));
  }
  uint32_t u32() {
    uint8_t b[4];
    bytes(b, 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
  }
  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void expect_magic(const char magic[4], const char* format_name) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) {
      fail(std::string("bad magic, not a ") + format_name + " file");
    }
  }

  // True when every byte of the file has been consumed.
  bool at_end() {
    in_.peek();
    return in_.eof();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error(path_ + ": " + msg + " (byte offset " + std::to_string(off_) + ")");
  }

 private:
  std::string path_;
  std::ifstream in_;
  uint64_t off_ = 0;
  uint64_t size_ = UINT64_MAX;
};

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error(path + ": cannot open file for writing");
  }

  void bytes(const void* src, size_t n) {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
    if (!out_) throw std::runtime_error(path_ + ": write failed");
  }

  void u8(uint8_t v) { bytes(&v, 1); }
  void i8(int8_t v) { u8(static_cast<uint8_t>(v)); }
  void u16(uint16_t v) {
    uint8_t b[2] = {uint8_t(v & 0xff), uint8_t(v >> 8)};
    bytes(b, 2);
  }
  void u32(uint32_t v) {
    uint8_t b[4] = {uint8_t(v & 0xff), uint8_t((v >> 8) & 0xff), uint8_t((v >> 16) & 0xff), uint8_t(v >> 24)};
    bytes(b, 4);
  }
  void u64(uint64_t v) {
    u32(uint32_t(v & 0xffffffffull));
    u32(uint32_t(v >> 32));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }

  void close() {
    out_.flush();
    if (!out_) throw std::runtime_error(path_ + ": flush failed");
    out_.close();
    if (out_.fail()) throw std::runtime_error(path_ + ": close failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace aetnet::io
