#include "movin/io.hpp"

#include <array>
#include <bit>

namespace movin {

namespace {

template <class T>
std::array<std::uint8_t, sizeof(T)> toLe(T v) {
  std::array<std::uint8_t, sizeof(T)> b;
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return b;
}

template <class T>
T fromLe(const std::uint8_t* b) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

BinaryWriter::BinaryWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot open for writing: " + path);
}

void BinaryWriter::u8(std::uint8_t v) { bytes(&v, 1); }

void BinaryWriter::u32(std::uint32_t v) {
  const auto b = toLe(v);
  bytes(b.data(), b.size());
}

void BinaryWriter::u64(std::uint64_t v) {
  const auto b = toLe(v);
  bytes(b.data(), b.size());
}

void BinaryWriter::f32(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u32(u);
}

void BinaryWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed: " + path_);
}

void BinaryWriter::magic(const char text[9]) { bytes(text, 8); }

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinaryWriter::matrixF32(const Mat& m) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(m.size()) * 4);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto f = static_cast<float>(m(r, c));
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      const auto b = toLe(u);
      std::memcpy(&buf[k], b.data(), 4);
      k += 4;
    }
  if (!buf.empty()) bytes(buf.data(), buf.size());
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw IoError("close failed: " + path_);
}

BinaryReader::BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open for reading: " + path);
}

void BinaryReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw TruncatedError("unexpected end of file: " + path_);
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint8_t b[4];
  bytes(b, 4);
  return fromLe<std::uint32_t>(b);
}

std::uint64_t BinaryReader::u64() {
  std::uint8_t b[8];
  bytes(b, 8);
  return fromLe<std::uint64_t>(b);
}

float BinaryReader::f32() {
  const std::uint32_t u = u32();
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  if (n > (1u << 20)) throw IoError("unreasonable string length in " + path_);
  std::string s(n, '\0');
  if (n) bytes(s.data(), n);
  return s;
}

void BinaryReader::expectMagic(const char text[9]) {
  char got[8];
  bytes(got, 8);
  if (std::memcmp(got, text, 8) != 0)
    throw BadMagicError("bad magic in " + path_ + " (expected " + std::string(text, 8) + ")");
}

void BinaryReader::expectVersion(std::uint8_t expected) {
  const std::uint8_t got = u8();
  if (got != expected)
    throw VersionError("unsupported version " + std::to_string(got) + " in " + path_ +
                       " (expected " + std::to_string(expected) + ")");
}

Mat BinaryReader::matrixF32(Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(rows) * cols * 4);
  if (!buf.empty()) bytes(buf.data(), buf.size());
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::uint32_t u = fromLe<std::uint32_t>(&buf[k]);
      float f;
      std::memcpy(&f, &u, 4);
      m(r, c) = f;
      k += 4;
    }
  return m;
}

bool BinaryReader::atEnd() {
  return in_.peek() == std::ifstream::traits_type::eof();
}

}  // namespace movin
