#include "movin/ik.hpp"

#include <algorithm>
#include <cmath>

namespace movin {

namespace {

// Component of v perpendicular to the unit vector dir.
Vec3 rejectFrom(const Vec3& v, const Vec3& dir) { return v - v.dot(dir) * dir; }

Mat3 fromTwoVectors(const Vec3& from, const Vec3& to) {
  return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

}  // namespace

bool solveTwoBoneIk(const Skeleton& skel, int upper, int lower, int end,
                    const Vec3& targetWorld, const Vec3& bendHintWorld, const Vec3& rootPos,
                    const Mat3& rootRot, std::vector<Mat3>& localRot) {
  if (upper < 0 || lower < 0 || end < 0 || end >= skel.jointCount() ||
      skel.joints[end].parent != lower || skel.joints[lower].parent != upper)
    throw ValidationError("solveTwoBoneIk: joints do not form a chain");
  if (static_cast<int>(localRot.size()) != skel.jointCount())
    throw ValidationError("solveTwoBoneIk: localRot size mismatch");

  const double l1 = skel.joints[lower].offset.norm();
  const double l2 = skel.joints[end].offset.norm();
  if (l1 < 1e-6 || l2 < 1e-6) throw ValidationError("solveTwoBoneIk: zero-length bone");

  Mat localPos(skel.jointCount(), 3);
  for (int j = 0; j < skel.jointCount(); ++j) localPos.row(j) = skel.joints[j].offset.transpose();
  const JointStates states = forwardKinematics(skel, localPos, localRot, rootPos, rootRot);

  const Vec3 a = states.positions.row(upper).transpose();
  const Vec3 b = states.positions.row(lower).transpose();
  const Vec3 c = states.positions.row(end).transpose();

  // Clamp the target onto the reachable annulus around the upper joint.
  Vec3 toTarget = targetWorld - a;
  double d = toTarget.norm();
  const Vec3 dir = d > 1e-9 ? Vec3(toTarget / d) : (b - a).normalized();
  bool clamped = false;
  if (d > l1 + l2) {
    d = l1 + l2;
    clamped = true;
  } else if (d < std::abs(l1 - l2)) {
    d = std::abs(l1 - l2);
    clamped = true;
  }
  d = std::max(d, 1e-9);
  const Vec3 target = a + dir * d;

  // Place the middle joint by the law of cosines, bending in the chain's
  // current plane (or toward the hint when the chain is straight).
  const double cosUpper = std::clamp((l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d), -1.0, 1.0);
  const double sinUpper = std::sqrt(1.0 - cosUpper * cosUpper);
  Vec3 side = rejectFrom(b - a, dir);
  if (side.norm() < 1e-7) side = rejectFrom(bendHintWorld, dir);
  if (side.norm() < 1e-7) side = rejectFrom(Vec3::UnitX(), dir);
  if (side.norm() < 1e-7) side = rejectFrom(Vec3::UnitY(), dir);
  const Vec3 perp = side.normalized();
  const Vec3 bTarget = a + l1 * (cosUpper * dir + sinUpper * perp);

  // Swing the upper subtree so the middle joint lands on bTarget, then the
  // lower subtree so the end joint lands on the target.
  const Mat3 swing1 = fromTwoVectors(b - a, bTarget - a);
  const Vec3 cAfterSwing = bTarget + swing1 * (c - b);
  const Mat3 swing2 = fromTwoVectors(cAfterSwing - bTarget, target - bTarget);

  const Mat3 upperParentWorld =
      skel.joints[upper].parent < 0 ? rootRot : states.rotations[skel.joints[upper].parent];
  const Mat3 upperWorldNew = swing1 * states.rotations[upper];
  const Mat3 lowerWorldNew = swing2 * swing1 * states.rotations[lower];
  localRot[upper] = upperParentWorld.transpose() * upperWorldNew;
  localRot[lower] = upperWorldNew.transpose() * lowerWorldNew;
  localRot[end] = lowerWorldNew.transpose() * states.rotations[end];  // keep world orientation
  return clamped;
}

}  // namespace movin
