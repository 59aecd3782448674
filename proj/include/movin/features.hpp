#pragma once

#include <vector>

#include "movin/skeleton.hpp"

namespace movin {

/// Per-joint parent-relative pose feature: one row per joint,
/// columns [0:3) position (m), [3:9) 6-D rotation, [9:12) linear velocity
/// (m/s), [12:15) angular velocity (axis-angle rate, rad/s).
struct LocalPoseFeature {
  Mat data;  // n_j x 15

  LocalPoseFeature() = default;
  explicit LocalPoseFeature(int jointCount) { data = Mat::Zero(jointCount, 15); }

  int jointCount() const { return static_cast<int>(data.rows()); }

  auto positions() { return data.leftCols<3>(); }
  auto positions() const { return data.leftCols<3>(); }
  auto rotations6d() { return data.middleCols<6>(3); }
  auto rotations6d() const { return data.middleCols<6>(3); }
  auto linearVelocities() { return data.middleCols<3>(9); }
  auto linearVelocities() const { return data.middleCols<3>(9); }
  auto angularVelocities() { return data.middleCols<3>(12); }
  auto angularVelocities() const { return data.middleCols<3>(12); }

  Mat3 jointRotation(int j) const { return matrixFromRot6d(rotations6d().row(j).transpose()); }
  std::vector<Mat3> jointRotations() const;
};

/// Root transform + velocities + foot contacts, 17 values:
/// [0:3) world position (m), [3:9) 6-D rotation, [9:12) linear velocity
/// (m/s), [12:15) angular velocity (rad/s), [15:17) contacts in [0,1].
struct GlobalPoseFeature {
  Eigen::Matrix<double, 17, 1> data = Eigen::Matrix<double, 17, 1>::Zero();

  auto rootPosition() { return data.segment<3>(0); }
  auto rootPosition() const { return data.segment<3>(0); }
  auto rootRotation6d() { return data.segment<6>(3); }
  auto rootRotation6d() const { return data.segment<6>(3); }
  auto linearVelocity() { return data.segment<3>(9); }
  auto linearVelocity() const { return data.segment<3>(9); }
  auto angularVelocity() { return data.segment<3>(12); }
  auto angularVelocity() const { return data.segment<3>(12); }
  auto contacts() { return data.segment<2>(15); }
  auto contacts() const { return data.segment<2>(15); }

  Mat3 rootRotation() const { return matrixFromRot6d(rootRotation6d()); }
};

/// Rest pose at the world origin facing +Z: identity rotations, rest
/// offsets, zero velocities, both feet in contact, root at stand height.
GlobalPoseFeature restGlobalPose(const Skeleton& skel);
LocalPoseFeature restLocalPose(const Skeleton& skel);

/// Stand height: root height that puts the lowest rest-pose joint at the
/// ground.
double standHeight(const Skeleton& skel);

/// One animation frame: world root transform + per-joint local rotations
/// (entry 0 is unused and kept identity; the root's rotation lives in
/// rootRot).
struct ClipFrame {
  Vec3 rootPos = Vec3::Zero();
  Mat3 rootRot = Mat3::Identity();
  std::vector<Mat3> localRot;
};

/// Motion sampled at 20 Hz on a fixed skeleton.
struct MotionClip {
  Skeleton skeleton;
  std::vector<ClipFrame> frames;
  double frameRate = kFrameRate;

  int frameCount() const { return static_cast<int>(frames.size()); }

  /// Throws ValidationError unless frameRate == 20, frameCount >= 2 and all
  /// frames match the skeleton.
  void validate() const;
};

/// World-space joint states of one clip frame (rest offsets + frame
/// rotations through FK).
JointStates clipFrameStates(const MotionClip& clip, int frame);

/// Contact = foot world height < heightThresh AND foot world speed
/// (backward difference; frame 0 copies frame 1) < speedThresh.
/// Returns frameCount x 2 of {0,1}, columns (left, right).
Mat labelFootContacts(const MotionClip& clip, double heightThresh = 0.05,
                      double speedThresh = 0.15);

/// Global/local feature pair per frame. Velocities are backward finite
/// differences at the clip rate with frame 0 copying frame 1; contacts come
/// from labelFootContacts. Requires >= 2 frames.
struct FeatureSequence {
  std::vector<GlobalPoseFeature> global;
  std::vector<LocalPoseFeature> local;

  int frameCount() const { return static_cast<int>(global.size()); }
};

FeatureSequence deriveFeatures(const MotionClip& clip, double heightThresh = 0.05,
                               double speedThresh = 0.15);

/// Inverse of deriveFeatures up to velocities/contacts: rebuilds a clip from
/// the root transform and local joint rotations. Local positions in the
/// features are ignored; the skeleton's rest offsets are used.
MotionClip clipFromFeatures(const Skeleton& skel, const FeatureSequence& seq);

/// FK straight from a feature pair; the root-relative overload pins the
/// root transform to identity (character space).
JointStates featureStates(const Skeleton& skel, const LocalPoseFeature& local,
                          const GlobalPoseFeature& global);
JointStates featureStates(const Skeleton& skel, const LocalPoseFeature& local);

}  // namespace movin
