#include "movin/rotations.hpp"

#include <cmath>

namespace movin {

namespace {
constexpr double kDegenerateNorm = 1e-8;
}  // namespace

Mat3 matrixFromRot6d(const Rot6d& r) {
  const Vec3 a = r.head<3>();
  const Vec3 b = r.tail<3>();
  const double an = a.norm();
  if (an < kDegenerateNorm)
    throw DegenerateRotationError("rot6d first vector has near-zero norm");
  const Vec3 c0 = a / an;
  const Vec3 rem = b - c0.dot(b) * c0;
  const double rn = rem.norm();
  if (rn < kDegenerateNorm)
    throw DegenerateRotationError("rot6d vectors are near parallel");
  const Vec3 c1 = rem / rn;
  Mat3 m;
  m.col(0) = c0;
  m.col(1) = c1;
  m.col(2) = c0.cross(c1);
  return m;
}

Rot6d rot6dFromMatrix(const Mat3& m) {
  if (!isRotationMatrix(m))
    throw ValidationError("rot6dFromMatrix: input is not a rotation matrix");
  Rot6d r;
  r.head<3>() = m.col(0);
  r.tail<3>() = m.col(1);
  return r;
}

bool isRotationMatrix(const Mat3& m, double tol) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(m.determinant() - 1.0) <= tol;
}

Vec3 axisAngleFromMatrix(const Mat3& m) {
  // Stable via quaternion: angle = 2*atan2(|v|, w), axis = v/|v|.
  Eigen::Quaterniond q(m);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v = q.vec();
  const double vn = v.norm();
  if (vn < 1e-12) return Vec3::Zero();
  const double angle = 2.0 * std::atan2(vn, q.w());
  return (angle / vn) * v;
}

Mat3 matrixFromAxisAngle(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-14) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

double geodesicAngle(const Mat3& a, const Mat3& b) {
  const double c = ((a * b.transpose()).trace() - 1.0) / 2.0;
  return std::acos(std::min(1.0, std::max(-1.0, c)));
}

Mat3 randomRotation(Rng& rng) {
  // Shoemake's uniform quaternion sampling.
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();
  const double s1 = std::sqrt(1.0 - u1);
  const double s2 = std::sqrt(u1);
  const Eigen::Quaterniond q(s2 * std::cos(2 * kPi * u3), s1 * std::sin(2 * kPi * u2),
                             s1 * std::cos(2 * kPi * u2), s2 * std::sin(2 * kPi * u3));
  return q.toRotationMatrix();
}

Vec3 eulerZyxDegFromMatrix(const Mat3& m) {
  // m = Rz(z) * Ry(y) * Rx(x)
  const double y = std::asin(std::min(1.0, std::max(-1.0, -m(2, 0))));
  double z, x;
  if (std::abs(m(2, 0)) < 1.0 - 1e-9) {
    z = std::atan2(m(1, 0), m(0, 0));
    x = std::atan2(m(2, 1), m(2, 2));
  } else {
    // Gimbal lock: fold everything into z.
    z = std::atan2(-m(0, 1), m(1, 1));
    x = 0.0;
  }
  const double toDeg = 180.0 / kPi;
  return Vec3(z * toDeg, y * toDeg, x * toDeg);
}

Mat3 matrixFromEulerZyxDeg(const Vec3& zyxDeg) {
  const double toRad = kPi / 180.0;
  return (Eigen::AngleAxisd(zyxDeg[0] * toRad, Vec3::UnitZ()) *
          Eigen::AngleAxisd(zyxDeg[1] * toRad, Vec3::UnitY()) *
          Eigen::AngleAxisd(zyxDeg[2] * toRad, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace movin
