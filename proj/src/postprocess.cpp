#include "movin/postprocess.hpp"

namespace movin {

std::pair<bool, bool> detectContacts(const GlobalPoseFeature& g) {
  return {g.data(15) >= 0.5, g.data(16) >= 0.5};
}

namespace {

/// Skeleton whose rest offsets are replaced by the pose's own local
/// positions, so the IK solves against exactly the geometry FK will use.
Skeleton poseGeometry(const Skeleton& skel, const LocalPoseFeature& pose) {
  Skeleton geo = skel;
  for (int j = 0; j < geo.jointCount(); ++j)
    geo.joints[static_cast<std::size_t>(j)].offset = pose.positions().row(j).transpose();
  return geo;
}

}  // namespace

FootIkResult applyFootIk(const Skeleton& skel, const LocalPoseFeature& raw,
                         const GlobalPoseFeature& g, bool leftContact, bool rightContact,
                         const LocalPoseFeature& prevCorrected, const GlobalPoseFeature& prevG,
                         const FootIkOptions& opts) {
  if (opts.alpha < 0.0 || opts.alpha > 1.0)
    throw ValidationError("applyFootIk: alpha must lie in [0, 1]");
  if (raw.jointCount() != skel.jointCount() || prevCorrected.jointCount() != skel.jointCount())
    throw ValidationError("applyFootIk: joint count mismatch");

  FootIkResult out;
  out.pose = raw;
  if (!leftContact && !rightContact) return out;

  const Skeleton geo = poseGeometry(skel, raw);
  const JointStates rawStates = featureStates(skel, raw, g);
  const JointStates prevStates = featureStates(skel, prevCorrected, prevG);
  std::vector<Mat3> localRot = raw.jointRotations();
  const Vec3 rootPos = g.rootPosition();
  const Mat3 rootRot = g.rootRotation();
  const Vec3 bendHint = rootRot * Vec3::UnitZ();  // knees bow forward

  auto solve = [&](int ankle, bool* clamped) {
    const int knee = skel.joints[static_cast<std::size_t>(ankle)].parent;
    const int hip = knee < 0 ? -1 : skel.joints[static_cast<std::size_t>(knee)].parent;
    if (hip < 0) throw ValidationError("applyFootIk: foot chain too short");
    const Vec3 rawAnkle = rawStates.positions.row(ankle).transpose();
    const Vec3 prevAnkle = prevStates.positions.row(ankle).transpose();
    const Vec3 target = prevAnkle + opts.alpha * (rawAnkle - prevAnkle);
    *clamped = solveTwoBoneIk(geo, hip, knee, ankle, target, bendHint, rootPos, rootRot, localRot);
    for (const int j : {hip, knee, ankle})
      out.pose.rotations6d().row(j) =
          rot6dFromMatrix(localRot[static_cast<std::size_t>(j)]).transpose();
  };
  if (leftContact) solve(skel.leftFoot, &out.leftClamped);
  if (rightContact) solve(skel.rightFoot, &out.rightClamped);
  return out;
}

}  // namespace movin
