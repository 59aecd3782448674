#pragma once

#include "movin/common.hpp"
#include "movin/rng.hpp"

namespace movin {

/// Continuous 6-D rotation encoding: the first two columns of a rotation
/// matrix, stored [c0x, c0y, c0z, c1x, c1y, c1z].
using Rot6d = Eigen::Matrix<double, 6, 1>;

/// Gram-Schmidt decode. The first column is the normalized first 3-vector,
/// the second is orthonormalized against it, the third is their cross
/// product. Throws DegenerateRotationError when either vector is near zero
/// or the two are near parallel (norm of the orthogonalized remainder or of
/// an input below 1e-8).
Mat3 matrixFromRot6d(const Rot6d& r);

/// First two columns of m, flattened. Throws ValidationError unless m is
/// orthonormal with determinant +1 within 1e-5.
Rot6d rot6dFromMatrix(const Mat3& m);

inline Rot6d identityRot6d() {
  Rot6d r;
  r << 1, 0, 0, 0, 1, 0;
  return r;
}

bool isRotationMatrix(const Mat3& m, double tol = 1e-5);

/// Rotation matrix -> axis-angle vector (angle * unit axis), angle in [0, pi].
Vec3 axisAngleFromMatrix(const Mat3& m);

/// Axis-angle vector -> rotation matrix (Rodrigues).
Mat3 matrixFromAxisAngle(const Vec3& aa);

/// Geodesic angle between two rotations, radians in [0, pi].
double geodesicAngle(const Mat3& a, const Mat3& b);

/// Uniform random rotation (quaternion method).
Mat3 randomRotation(Rng& rng);

/// Intrinsic Z-Y-X Euler angles in degrees (BVH channel order
/// Zrotation Yrotation Xrotation): m = Rz * Ry * Rx.
Vec3 eulerZyxDegFromMatrix(const Mat3& m);
Mat3 matrixFromEulerZyxDeg(const Vec3& zyxDeg);

}  // namespace movin
