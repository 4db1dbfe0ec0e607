#include "mtfuse/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mtfuse {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::io, "read failure: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) fail(ErrorKind::io, "write failure: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorKind::io, "cannot open file for appending: " + path);
  out << line << '\n';
  out.flush();
  if (!out) fail(ErrorKind::io, "append failure: " + path);
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void make_directories(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + path + ": " + ec.message());
}

void BinaryWriter::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::f32(float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::raw(const void* data, size_t n) {
  buf_.append(static_cast<const char*>(data), n);
}

void BinaryReader::need(size_t n) {
  if (pos_ + n > buf_.size()) fail(ErrorKind::format, "truncated or corrupt file");
}

uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<uint8_t>(buf_[pos_++]);
}

uint32_t BinaryReader::u32() {
  need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
  return v;
}

uint64_t BinaryReader::u64() {
  need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
  return v;
}

float BinaryReader::f32() {
  uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string BinaryReader::str() {
  uint32_t n = u32();
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

}  // namespace mtfuse
