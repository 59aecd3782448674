#include "movin/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace movin {

int Skeleton::partCount() const {
  int parts = 0;
  for (const int p : bodyPart) parts = std::max(parts, p + 1);
  return parts;
}

int Skeleton::indexOf(const std::string& name) const {
  for (int i = 0; i < jointCount(); ++i)
    if (joints[i].name == name) return i;
  return -1;
}

void Skeleton::validate() const {
  if (joints.empty()) throw ValidationError("skeleton has no joints");
  if (joints[0].parent != -1) throw ValidationError("joint 0 must be the root");
  for (int i = 1; i < jointCount(); ++i) {
    if (joints[i].parent == -1) throw ValidationError("multiple roots: joint " + joints[i].name);
    if (joints[i].parent < 0 || joints[i].parent >= i)
      throw ValidationError("parent of joint " + joints[i].name + " breaks topological order");
  }
  for (const Joint& j : joints)
    if (!j.offset.allFinite()) throw ValidationError("non-finite offset on joint " + j.name);
  const int n = jointCount();
  if (leftFoot < 0 || leftFoot >= n || rightFoot < 0 || rightFoot >= n)
    throw ValidationError("foot indices out of range");
  if (leftFoot == rightFoot) throw ValidationError("foot indices must be distinct");
  if (!bodyPart.empty()) {
    if (static_cast<int>(bodyPart.size()) != n)
      throw ValidationError("bodyPart size does not match joint count");
    const int parts = partCount();
    std::vector<bool> seen(parts, false);
    for (const int p : bodyPart) {
      if (p < 0) throw ValidationError("negative body part id");
      seen[p] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw ValidationError("body part ids are not contiguous");
  }
}

Mat Skeleton::normalizedAdjacency() const {
  const int n = jointCount();
  Mat a = Mat::Identity(n, n);
  for (int i = 1; i < n; ++i) {
    a(i, joints[i].parent) = 1.0;
    a(joints[i].parent, i) = 1.0;
  }
  const Vec d = a.rowwise().sum();
  const Vec dInv = d.cwiseSqrt().cwiseInverse();
  return dInv.asDiagonal() * a * dInv.asDiagonal();
}

Skeleton defaultSkeleton() {
  Skeleton s;
  auto add = [&s](const std::string& name, int parent, double x, double y, double z, int part) {
    s.joints.push_back({name, parent, Vec3(x, y, z)});
    s.bodyPart.push_back(part);
  };
  // part ids: 0 torso+head, 1 left arm, 2 right arm, 3 left leg, 4 right leg
  add("Hips", -1, 0.00, 0.00, 0.00, 0);         // 0
  add("Spine", 0, 0.00, 0.12, 0.00, 0);         // 1
  add("Chest", 1, 0.00, 0.15, 0.00, 0);         // 2
  add("Neck", 2, 0.00, 0.20, 0.00, 0);          // 3
  add("Head", 3, 0.00, 0.10, 0.00, 0);          // 4
  add("LeftShoulder", 2, 0.09, 0.16, 0.00, 1);  // 5
  add("LeftArm", 5, 0.12, 0.00, 0.00, 1);       // 6
  add("LeftForeArm", 6, 0.26, 0.00, 0.00, 1);   // 7
  add("LeftHand", 7, 0.25, 0.00, 0.00, 1);      // 8
  add("RightShoulder", 2, -0.09, 0.16, 0.00, 2);// 9
  add("RightArm", 9, -0.12, 0.00, 0.00, 2);     // 10
  add("RightForeArm", 10, -0.26, 0.00, 0.00, 2);// 11
  add("RightHand", 11, -0.25, 0.00, 0.00, 2);   // 12
  add("LeftUpLeg", 0, 0.09, -0.06, 0.00, 3);    // 13
  add("LeftLeg", 13, 0.00, -0.45, 0.00, 3);     // 14
  add("LeftFoot", 14, 0.00, -0.40, 0.00, 3);    // 15
  add("LeftToe", 15, 0.00, -0.04, 0.12, 3);     // 16
  add("RightUpLeg", 0, -0.09, -0.06, 0.00, 4);  // 17
  add("RightLeg", 17, 0.00, -0.45, 0.00, 4);    // 18
  add("RightFoot", 18, 0.00, -0.40, 0.00, 4);   // 19
  add("RightToe", 19, 0.00, -0.04, 0.12, 4);    // 20
  s.leftFoot = 15;
  s.rightFoot = 19;
  s.validate();
  return s;
}

Skeleton scaledSkeleton(const Skeleton& base, double scale) {
  Skeleton s = base;
  for (Joint& j : s.joints) j.offset *= scale;
  return s;
}

static JointStates fkImpl(const Skeleton& skel, const Mat& localPos,
                          const std::vector<Mat3>& localRot, const Vec3& rootPos,
                          const Mat3& rootRot) {
  const int n = skel.jointCount();
  if (localPos.rows() != n || localPos.cols() != 3)
    throw ValidationError("forwardKinematics: localPos must be n_j x 3");
  if (static_cast<int>(localRot.size()) != n)
    throw ValidationError("forwardKinematics: localRot size mismatch");
  JointStates out;
  out.positions.resize(n, 3);
  out.rotations.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec3 parentPos;
    Mat3 parentRot;
    if (i == 0) {
      parentPos = rootPos;
      parentRot = rootRot;
    } else {
      parentPos = out.positions.row(skel.joints[i].parent).transpose();
      parentRot = out.rotations[skel.joints[i].parent];
    }
    out.positions.row(i) = (parentPos + parentRot * localPos.row(i).transpose()).transpose();
    out.rotations[i] = parentRot * localRot[i];
  }
  return out;
}

JointStates forwardKinematics(const Skeleton& skel, const Mat& localPos,
                              const std::vector<Mat3>& localRot, const Vec3& rootPos,
                              const Mat3& rootRot) {
  return fkImpl(skel, localPos, localRot, rootPos, rootRot);
}

JointStates forwardKinematics(const Skeleton& skel, const Mat& localPos,
                              const std::vector<Mat3>& localRot) {
  return fkImpl(skel, localPos, localRot, Vec3::Zero(), Mat3::Identity());
}

}  // namespace movin
