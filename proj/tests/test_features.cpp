#include <doctest.h>

#include "movin/features.hpp"

using namespace movin;

namespace {

MotionClip staticClip(int frames) {
  MotionClip clip;
  clip.skeleton = defaultSkeleton();
  ClipFrame f;
  f.rootPos = Vec3(0.3, standHeight(clip.skeleton), 2.0);
  f.rootRot = matrixFromAxisAngle(Vec3(0, 0.4, 0));
  f.localRot.assign(clip.skeleton.jointCount(), Mat3::Identity());
  clip.frames.assign(frames, f);
  return clip;
}

}  // namespace

TEST_CASE("static clip derives exactly zero velocities") {
  const FeatureSequence seq = deriveFeatures(staticClip(10));
  for (int t = 0; t < seq.frameCount(); ++t) {
    CHECK(seq.global[t].linearVelocity().norm() == 0.0);
    CHECK(seq.global[t].angularVelocity().norm() == 0.0);
    CHECK(seq.local[t].linearVelocities().cwiseAbs().maxCoeff() == 0.0);
    CHECK(seq.local[t].angularVelocities().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("root translating at 1 m/s derives unit linear velocity") {
  MotionClip clip = staticClip(20);
  for (int t = 0; t < clip.frameCount(); ++t)
    clip.frames[t].rootPos[0] = t / clip.frameRate;  // +X at 1 m/s
  const FeatureSequence seq = deriveFeatures(clip);
  for (int t = 0; t < seq.frameCount(); ++t)
    CHECK((seq.global[t].linearVelocity() - Vec3(1, 0, 0)).norm() < 1e-9);
}

TEST_CASE("feature widths are 17 and n_j x 15") {
  const FeatureSequence seq = deriveFeatures(staticClip(4));
  for (int t = 0; t < seq.frameCount(); ++t) {
    CHECK(seq.global[t].data.size() == 17);
    CHECK(seq.local[t].data.rows() == 21);
    CHECK(seq.local[t].data.cols() == 15);
  }
}

TEST_CASE("single-frame clips are rejected") {
  MotionClip clip = staticClip(1);
  CHECK_THROWS_AS(deriveFeatures(clip), ValidationError);
}

TEST_CASE("wrong frame rate is rejected") {
  MotionClip clip = staticClip(4);
  clip.frameRate = 30.0;
  CHECK_THROWS_AS(clip.validate(), ValidationError);
}

TEST_CASE("derived features reproduce root-relative joint positions through fk") {
  MotionClip clip = staticClip(6);
  Rng rng(41);
  for (ClipFrame& f : clip.frames) {
    f.rootPos += Vec3(rng.uniform(-0.1, 0.1), 0, rng.uniform(-0.1, 0.1));
    f.rootRot = randomRotation(rng);
    for (int j = 1; j < static_cast<int>(f.localRot.size()); ++j)
      f.localRot[j] = matrixFromAxisAngle(
          Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)));
  }
  const FeatureSequence seq = deriveFeatures(clip);
  for (int t = 0; t < clip.frameCount(); ++t) {
    const JointStates world = clipFrameStates(clip, t);
    const JointStates rel = featureStates(clip.skeleton, seq.local[t]);
    const Mat3 rootRot = clip.frames[t].rootRot;
    for (int j = 0; j < clip.skeleton.jointCount(); ++j) {
      const Vec3 expected =
          rootRot.transpose() * (world.positions.row(j).transpose() - clip.frames[t].rootPos);
      CHECK((rel.positions.row(j).transpose() - expected).norm() < 1e-5);
    }
  }
}

TEST_CASE("derived features with the root applied reproduce world positions") {
  MotionClip clip = staticClip(4);
  const FeatureSequence seq = deriveFeatures(clip);
  for (int t = 0; t < clip.frameCount(); ++t) {
    const JointStates world = clipFrameStates(clip, t);
    const JointStates viaFeatures = featureStates(clip.skeleton, seq.local[t], seq.global[t]);
    CHECK((world.positions - viaFeatures.positions).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("foot contact labeling thresholds") {
  // Standing still: feet planted at ankle rest height, zero speed.
  const MotionClip still = staticClip(8);
  const Mat contacts = labelFootContacts(still);
  CHECK(contacts.rows() == 8);
  CHECK(contacts.minCoeff() == 1.0);

  // Lift the whole body half a meter: height dominates.
  MotionClip lifted = staticClip(8);
  for (ClipFrame& f : lifted.frames) f.rootPos[1] += 0.5;
  CHECK(labelFootContacts(lifted).maxCoeff() == 0.0);

  // Planted but fast: slide the body sideways at 1 m/s.
  MotionClip sliding = staticClip(8);
  for (int t = 0; t < sliding.frameCount(); ++t)
    sliding.frames[t].rootPos[0] += t / sliding.frameRate;
  CHECK(labelFootContacts(sliding).maxCoeff() == 0.0);
}

TEST_CASE("ground-truth contacts are exactly binary") {
  const Mat contacts = labelFootContacts(staticClip(5));
  for (int i = 0; i < contacts.size(); ++i) {
    const double v = contacts.data()[i];
    CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("rest pose faces the sensor with feet in contact") {
  const Skeleton skel = defaultSkeleton();
  const GlobalPoseFeature g = restGlobalPose(skel);
  const LocalPoseFeature x = restLocalPose(skel);
  CHECK(g.contacts()[0] == 1.0);
  CHECK(g.contacts()[1] == 1.0);
  const JointStates s = featureStates(skel, x, g);
  CHECK(s.positions(skel.leftFoot, 1) == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(s.positions(skel.leftFoot, 1) < 0.05);
}
