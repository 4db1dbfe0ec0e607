#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtfuse/errors.hpp"

namespace mtfuse {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::vector<std::string> read_lines(const std::string& path);
void append_line(const std::string& path, const std::string& line);
bool file_exists(const std::string& path);
void make_directories(const std::string& path);

// Little-endian binary encoding, independent of host byte order. Used by the
// model checkpoint format.
class BinaryWriter {
public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void f32(float v);
  void str(const std::string& s);
  void raw(const void* data, size_t n);
  const std::string& bytes() const { return buf_; }
  void to_file(const std::string& path) const { write_text_file(path, buf_); }

private:
  std::string buf_;
};

class BinaryReader {
public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}
  static BinaryReader from_file(const std::string& path) {
    return BinaryReader(read_text_file(path));
  }

  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  int32_t i32() { return static_cast<int32_t>(u32()); }
  float f32();
  std::string str();
  bool at_end() const { return pos_ == buf_.size(); }

private:
  void need(size_t n);
  std::string buf_;
  size_t pos_ = 0;
};

}  // namespace mtfuse
