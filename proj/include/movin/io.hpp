#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "movin/common.hpp"

namespace movin {

/// Little-endian binary file writer. All multi-byte values are stored LE
/// regardless of host order.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);

  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void bytes(const void* data, std::size_t n);
  void magic(const char text[9]);  // exactly 8 chars + NUL
  void str(const std::string& s); // u32 length + raw bytes

  /// Row-major float32 dump of a double matrix.
  void matrixF32(const Mat& m);

  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

/// Little-endian binary file reader; throws TruncatedError when the file
/// ends early and BadMagicError/VersionError from the check helpers.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  void bytes(void* data, std::size_t n);
  std::string str();

  void expectMagic(const char text[9]);
  /// Reads a u8 version and throws VersionError unless it equals expected.
  void expectVersion(std::uint8_t expected);

  /// Reads rows*cols row-major float32 values into a double matrix.
  Mat matrixF32(Eigen::Index rows, Eigen::Index cols);

  bool atEnd();

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace movin
