#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace movin {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Bad caller input: shape mismatches, broken invariants, unknown names.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// 6-D rotation input whose two column vectors are (near-)parallel or zero.
class DegenerateRotationError : public ValidationError {
 public:
  explicit DegenerateRotationError(const std::string& what) : ValidationError(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// File does not start with the expected magic bytes.
class BadMagicError : public IoError {
 public:
  explicit BadMagicError(const std::string& what) : IoError(what) {}
};

/// Magic matched but the format version is unsupported.
class VersionError : public IoError {
 public:
  explicit VersionError(const std::string& what) : IoError(what) {}
};

/// File ends before the payload announced by its header.
class TruncatedError : public IoError {
 public:
  explicit TruncatedError(const std::string& what) : IoError(what) {}
};

/// Training run cannot continue (non-finite loss, empty split, ...).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

constexpr double kFrameRate = 20.0;           // Hz, sensor and motion rate
constexpr double kFrameTime = 1.0 / kFrameRate;
constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace movin
