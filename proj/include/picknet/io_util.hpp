#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "picknet/errors.hpp"

namespace picknet {

// Little-endian binary readers/writers. Values are serialized byte by byte
// so files are identical across hosts.
namespace io {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  write_bytes(out, b, 2);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 4);
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  write_bytes(out, b, 8);
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  void read_bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(path_ + ": truncated at byte offset " + std::to_string(offset_));
    offset_ += n;
  }

  std::uint16_t read_u16() {
    unsigned char b[2];
    read_bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t read_u32() {
    unsigned char b[4];
    read_bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  float read_f32() {
    std::uint32_t bits = read_u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double read_f64() {
    unsigned char b[8];
    read_bytes(b, 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  void expect_magic(const char* magic) {
    char got[4];
    read_bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0)
      throw FormatError(path_ + ": bad magic at byte offset 0 (expected \"" +
                        std::string(magic, 4) + "\")");
  }

  // remaining bytes until EOF
  std::string read_rest() {
    std::string rest((std::istreambuf_iterator<char>(in_)), std::istreambuf_iterator<char>());
    offset_ += rest.size();
    return rest;
  }

  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t offset_ = 0;
};

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");
  return in;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << content;
}

}  // namespace io
}  // namespace picknet
