#include "movin/features.hpp"

#include <cmath>

namespace movin {

std::vector<Mat3> LocalPoseFeature::jointRotations() const {
  std::vector<Mat3> rots(jointCount());
  for (int j = 0; j < jointCount(); ++j) rots[j] = jointRotation(j);
  return rots;
}

double standHeight(const Skeleton& skel) {
  LocalPoseFeature rest = restLocalPose(skel);
  const JointStates states = forwardKinematics(skel, rest.positions(), rest.jointRotations());
  const double lowest = states.positions.col(1).minCoeff();
  return -lowest;
}

GlobalPoseFeature restGlobalPose(const Skeleton& skel) {
  GlobalPoseFeature g;
  g.rootPosition() = Vec3(0.0, standHeight(skel), 0.0);
  g.rootRotation6d() = identityRot6d();
  g.contacts() << 1.0, 1.0;
  return g;
}

LocalPoseFeature restLocalPose(const Skeleton& skel) {
  LocalPoseFeature x(skel.jointCount());
  for (int j = 0; j < skel.jointCount(); ++j) {
    x.positions().row(j) = skel.joints[j].offset.transpose();
    x.rotations6d().row(j) = identityRot6d().transpose();
  }
  return x;
}

void MotionClip::validate() const {
  skeleton.validate();
  if (frameRate != kFrameRate)
    throw ValidationError("MotionClip frame rate must be 20 Hz");
  if (frameCount() < 2) throw ValidationError("MotionClip needs at least 2 frames");
  for (const ClipFrame& f : frames)
    if (static_cast<int>(f.localRot.size()) != skeleton.jointCount())
      throw ValidationError("MotionClip frame joint count mismatch");
}

JointStates clipFrameStates(const MotionClip& clip, int frame) {
  const Skeleton& skel = clip.skeleton;
  Mat localPos(skel.jointCount(), 3);
  for (int j = 0; j < skel.jointCount(); ++j)
    localPos.row(j) = skel.joints[j].offset.transpose();
  std::vector<Mat3> rot = clip.frames[frame].localRot;
  rot[0] = Mat3::Identity();
  return forwardKinematics(skel, localPos, rot, clip.frames[frame].rootPos,
                           clip.frames[frame].rootRot);
}

Mat labelFootContacts(const MotionClip& clip, double heightThresh, double speedThresh) {
  clip.validate();
  const int n = clip.frameCount();
  Mat feet(n, 6);  // world positions of (left, right) per frame
  for (int t = 0; t < n; ++t) {
    const JointStates s = clipFrameStates(clip, t);
    feet.block<1, 3>(t, 0) = s.positions.row(clip.skeleton.leftFoot);
    feet.block<1, 3>(t, 3) = s.positions.row(clip.skeleton.rightFoot);
  }
  Mat contacts(n, 2);
  for (int t = 0; t < n; ++t) {
    const int tPrev = std::max(1, t);  // frame 0 copies frame 1's velocity
    for (int f = 0; f < 2; ++f) {
      const double height = feet(t, f * 3 + 1);
      const double speed =
          (feet.block<1, 3>(tPrev, f * 3) - feet.block<1, 3>(tPrev - 1, f * 3)).norm() *
          clip.frameRate;
      contacts(t, f) = (height < heightThresh && speed < speedThresh) ? 1.0 : 0.0;
    }
  }
  return contacts;
}

FeatureSequence deriveFeatures(const MotionClip& clip, double heightThresh,
                               double speedThresh) {
  clip.validate();
  const Skeleton& skel = clip.skeleton;
  const int n = clip.frameCount();
  const int nj = skel.jointCount();
  const double rate = clip.frameRate;

  const Mat contacts = labelFootContacts(clip, heightThresh, speedThresh);

  FeatureSequence seq;
  seq.global.resize(n);
  seq.local.resize(n);

  for (int t = 0; t < n; ++t) {
    const ClipFrame& f = clip.frames[t];
    GlobalPoseFeature& g = seq.global[t];
    g.rootPosition() = f.rootPos;
    g.rootRotation6d() = rot6dFromMatrix(f.rootRot);
    g.contacts() = contacts.row(t).transpose();

    LocalPoseFeature x(nj);
    for (int j = 0; j < nj; ++j) {
      x.positions().row(j) = skel.joints[j].offset.transpose();
      const Mat3 rot = (j == 0) ? Mat3::Identity() : f.localRot[j];
      x.rotations6d().row(j) = rot6dFromMatrix(rot).transpose();
    }
    seq.local[t] = std::move(x);
  }

  // Backward differences; frame 0 copies frame 1.
  for (int t = 0; t < n; ++t) {
    const int tc = std::max(1, t);
    const ClipFrame& cur = clip.frames[tc];
    const ClipFrame& prev = clip.frames[tc - 1];
    seq.global[t].linearVelocity() = (cur.rootPos - prev.rootPos) * rate;
    seq.global[t].angularVelocity() =
        axisAngleFromMatrix(prev.rootRot.transpose() * cur.rootRot) * rate;
    for (int j = 0; j < nj; ++j) {
      seq.local[t].linearVelocities().row(j) =
          (seq.local[tc].positions().row(j) - seq.local[tc - 1].positions().row(j)) * rate;
      const Mat3 rc = (j == 0) ? Mat3::Identity() : cur.localRot[j];
      const Mat3 rp = (j == 0) ? Mat3::Identity() : prev.localRot[j];
      seq.local[t].angularVelocities().row(j) =
          (axisAngleFromMatrix(rp.transpose() * rc) * rate).transpose();
    }
  }
  return seq;
}

MotionClip clipFromFeatures(const Skeleton& skel, const FeatureSequence& seq) {
  MotionClip clip;
  clip.skeleton = skel;
  clip.frames.resize(seq.frameCount());
  for (int t = 0; t < seq.frameCount(); ++t) {
    if (seq.local[t].jointCount() != skel.jointCount())
      throw ValidationError("clipFromFeatures: joint count mismatch");
    ClipFrame& f = clip.frames[t];
    f.rootPos = seq.global[t].rootPosition();
    f.rootRot = seq.global[t].rootRotation();
    f.localRot.assign(skel.jointCount(), Mat3::Identity());
    for (int j = 1; j < skel.jointCount(); ++j) f.localRot[j] = seq.local[t].jointRotation(j);
  }
  return clip;
}

JointStates featureStates(const Skeleton& skel, const LocalPoseFeature& local,
                          const GlobalPoseFeature& global) {
  if (local.jointCount() != skel.jointCount())
    throw ValidationError("featureStates: joint count mismatch");
  return forwardKinematics(skel, local.positions(), local.jointRotations(),
                           global.rootPosition(), global.rootRotation());
}

JointStates featureStates(const Skeleton& skel, const LocalPoseFeature& local) {
  if (local.jointCount() != skel.jointCount())
    throw ValidationError("featureStates: joint count mismatch");
  return forwardKinematics(skel, local.positions(), local.jointRotations());
}

}  // namespace movin
