#include <doctest.h>

#include <cmath>

#include "movin/lidar.hpp"
#include "movin/motion_gen.hpp"

using namespace movin;

namespace {

double horizontalDistance(const Vec3& a, const Vec3& b) {
  return std::hypot(a[0] - b[0], a[2] - b[2]);
}

}  // namespace

TEST_CASE("category vocabulary and validation") {
  CHECK(motionCategories().size() == 4);
  CHECK(categoryFamily("idle") == "static");
  CHECK(categoryFamily("squat") == "static");
  CHECK(categoryFamily("walk") == "locomotion");
  CHECK(categoryFamily("jog") == "locomotion");
  CHECK_THROWS_AS(categoryFamily("moonwalk"), ValidationError);
  CHECK_THROWS_AS(generateSequence("moonwalk", 5.0, 1), ValidationError);
  CHECK_THROWS_AS(generateSequence("idle", 0.5, 1), ValidationError);
}

TEST_CASE("five seconds means exactly 100 frames") {
  for (const std::string& category : motionCategories()) {
    const MotionClip clip = generateSequence(category, 5.0, 3);
    CHECK(clip.frameCount() == 100);
    CHECK(clip.frameRate == 20.0);
  }
}

TEST_CASE("idle stays put") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const MotionClip clip = generateSequence("idle", 5.0, seed);
    for (const ClipFrame& f : clip.frames)
      CHECK(horizontalDistance(f.rootPos, clip.frames[0].rootPos) < 0.1);
  }
}

TEST_CASE("walk at 1 m/s covers 5 m of path in 5 s") {
  GenerateOptions opts;
  opts.speed = 1.0;
  for (std::uint64_t seed : {4, 5, 6}) {
    const MotionClip clip = generateSequence("walk", 5.0, seed, opts);
    double path = 0.0;
    for (int t = 1; t < clip.frameCount(); ++t)
      path += horizontalDistance(clip.frames[t].rootPos, clip.frames[t - 1].rootPos);
    CHECK(path > 4.9);
    CHECK(path < 5.1);
  }
}

TEST_CASE("sequences are deterministic in the seed") {
  const MotionClip a = generateSequence("jog", 3.0, 42);
  const MotionClip b = generateSequence("jog", 3.0, 42);
  REQUIRE(a.frameCount() == b.frameCount());
  for (int t = 0; t < a.frameCount(); ++t) {
    CHECK((a.frames[t].rootPos - b.frames[t].rootPos).norm() == 0.0);
    for (int j = 0; j < a.skeleton.jointCount(); ++j)
      CHECK((a.frames[t].localRot[j] - b.frames[t].localRot[j]).cwiseAbs().maxCoeff() == 0.0);
  }
  const MotionClip c = generateSequence("jog", 3.0, 43);
  CHECK((a.frames[50].rootPos - c.frames[50].rootPos).norm() > 1e-6);
}

TEST_CASE("subject size varies within 10 percent") {
  const Skeleton base = defaultSkeleton();
  bool sawVariety = false;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const MotionClip clip = generateSequence("idle", 1.0, seed);
    const double ratio = clip.skeleton.joints[2].offset.norm() / base.joints[2].offset.norm();
    CHECK(ratio >= 0.9);
    CHECK(ratio <= 1.1);
    if (std::abs(ratio - 1.0) > 0.02) sawVariety = true;
  }
  CHECK(sawVariety);

  GenerateOptions pinned;
  pinned.scale = 1.0;
  const MotionClip clip = generateSequence("idle", 1.0, 9, pinned);
  CHECK((clip.skeleton.joints[2].offset - base.joints[2].offset).norm() == 0.0);
}

TEST_CASE("static categories keep both feet in contact") {
  for (const std::string& category : {std::string("idle"), std::string("squat")}) {
    for (std::uint64_t seed : {7, 8}) {
      const MotionClip clip = generateSequence(category, 4.0, seed);
      const Mat contacts = labelFootContacts(clip);
      CHECK(contacts.minCoeff() == 1.0);
    }
  }
}

TEST_CASE("walk contacts alternate and match the stance schedule") {
  GenerateOptions opts;
  opts.speed = 1.0;
  const double gaitT = 0.65;  // min(0.9, 0.65 / speed)
  const double duty = 0.55;
  for (std::uint64_t seed : {10, 11}) {
    const MotionClip clip = generateSequence("walk", 6.0, seed, opts);
    const Mat contacts = labelFootContacts(clip);
    // Every foot both plants and swings.
    for (int f = 0; f < 2; ++f) {
      CHECK(contacts.col(f).minCoeff() == 0.0);
      CHECK(contacts.col(f).maxCoeff() == 1.0);
    }
    // Agreement with the analytic schedule, modulo boundary frames.
    int agree = 0;
    for (int t = 0; t < clip.frameCount(); ++t) {
      const double phi = t * kFrameTime / gaitT;
      const double left = std::fmod(phi, 1.0) < duty ? 1.0 : 0.0;
      const double right = std::fmod(phi + 0.5, 1.0) < duty ? 1.0 : 0.0;
      agree += (contacts(t, 0) == left) + (contacts(t, 1) == right);
    }
    CHECK(agree > 2 * clip.frameCount() * 0.8);
  }
}

TEST_CASE("bone lengths never change during a gait") {
  const MotionClip clip = generateSequence("jog", 4.0, 12);
  const Skeleton& skel = clip.skeleton;
  for (int t = 0; t < clip.frameCount(); t += 7) {
    const JointStates s = clipFrameStates(clip, t);
    for (int j = 1; j < skel.jointCount(); ++j) {
      const double bone =
          (s.positions.row(j) - s.positions.row(skel.joints[j].parent)).norm();
      CHECK(bone == doctest::Approx(skel.joints[j].offset.norm()).epsilon(1e-9));
    }
  }
}

TEST_CASE("roots stay inside the sensor field of view at 2-4 m") {
  for (const std::string& category : motionCategories()) {
    for (std::uint64_t seed : {13, 14, 15}) {
      const MotionClip clip = generateSequence(category, 12.0, seed);
      for (const ClipFrame& f : clip.frames) {
        const double dist = std::hypot(f.rootPos[0], f.rootPos[2]);
        CHECK(dist >= 2.0);
        CHECK(dist <= 4.0);
        CHECK(std::abs(std::atan2(f.rootPos[0], f.rootPos[2])) < 60.0 * kPi / 180.0);
      }
    }
  }
}

TEST_CASE("scan counts stay inside the physical band across 1000 poses") {
  const SensorConfig cfg;
  int minCount = 1 << 30;
  int maxCount = 0;
  int scans = 0;
  std::uint64_t seed = 100;
  while (scans < 1000) {
    for (const std::string& category : motionCategories()) {
      const MotionClip clip = generateSequence(category, 5.0, seed++);
      const BodyProxy proxy = defaultProxy(clip.skeleton);
      for (int t = 0; t < clip.frameCount() && scans < 1000; t += 7, ++scans) {
        const int n =
            simulateScan(proxy, clip.skeleton, clipFrameStates(clip, t), cfg, seed + t)
                .pointCount();
        minCount = std::min(minCount, n);
        maxCount = std::max(maxCount, n);
      }
    }
  }
  INFO("count range [" << minCount << ", " << maxCount << "]");
  CHECK(minCount >= 150);
  CHECK(maxCount <= 350);
}
