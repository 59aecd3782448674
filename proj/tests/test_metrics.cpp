#include <doctest.h>

#include "json.hpp"
#include "movin/metrics.hpp"
#include "movin/motion_gen.hpp"
#include "movin/rng.hpp"

using namespace movin;

namespace {

Skeleton walkSkeleton() { return generateSequence("walk", 2.0, 5).skeleton; }

/// T copies of one walking frame: every velocity-style metric sees zeros.
FeatureSequence staticSequence(const Skeleton& skel, int frames) {
  const MotionClip clip = generateSequence("walk", 2.0, 5);
  REQUIRE(clip.skeleton.jointCount() == skel.jointCount());
  const FeatureSequence walk = deriveFeatures(clip);
  FeatureSequence seq;
  seq.global.assign(frames, walk.global[20]);
  seq.local.assign(frames, walk.local[20]);
  return seq;
}

/// Same rigid world transform applied to every frame's root.
FeatureSequence rigidlyMoved(const FeatureSequence& seq, const Mat3& rot, const Vec3& trans) {
  FeatureSequence out = seq;
  for (int t = 0; t < out.frameCount(); ++t) {
    out.global[t].rootPosition() = rot * seq.global[t].rootPosition() + trans;
    out.global[t].rootRotation6d() =
        rot6dFromMatrix(Mat3(rot * seq.global[t].rootRotation()));
  }
  return out;
}

FeatureSequence noisyCopy(const FeatureSequence& seq, std::uint64_t seed) {
  Rng rng(seed);
  FeatureSequence out = seq;
  for (int t = 0; t < out.frameCount(); ++t) {
    for (int j = 0; j < out.local[t].jointCount(); ++j) {
      const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
      const Mat3 r = out.local[t].jointRotation(j) * matrixFromAxisAngle(0.03 * axis.normalized());
      out.local[t].rotations6d().row(j) = rot6dFromMatrix(r).transpose();
      out.local[t].positions().row(j) +=
          0.005 * Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
    }
    out.global[t].rootPosition() += 0.01 * Vec3(rng.normal(), rng.normal(), rng.normal());
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    out.global[t].rootRotation6d() = rot6dFromMatrix(
        Mat3(out.global[t].rootRotation() * matrixFromAxisAngle(0.02 * axis.normalized())));
  }
  return out;
}

}  // namespace

TEST_CASE("identical sequences score zero everywhere") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence seq = deriveFeatures(generateSequence("walk", 2.0, 5));
  const PoseErrors pe = poseErrors(skel, seq, seq);
  CHECK(pe.mjpeCm == 0.0);
  CHECK(pe.mjreDeg < 1e-6);
  CHECK(pe.mppeCm == 0.0);
  CHECK(pe.mpreDeg < 1e-6);
  const VelocityErrors ve = velocityErrors(skel, seq, seq);
  CHECK(ve.mjlveCmS == 0.0);
  CHECK(ve.mjaveDegS < 1e-5);
  CHECK(ve.mplveCmS == 0.0);
  CHECK(ve.mpaveDegS < 1e-5);
  CHECK(contactAccuracy(seq, seq) == 100.0);
}

TEST_CASE("a uniform pelvis-frame offset reads back exactly") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence gt = staticSequence(skel, 4);
  FeatureSequence pred = gt;
  // Shifting the root's local position moves every root-relative joint by
  // the same centimeter.
  for (int t = 0; t < pred.frameCount(); ++t) pred.local[t].data(0, 0) += 0.01;
  const PoseErrors pe = poseErrors(skel, pred, gt);
  CHECK(pe.mjpeCm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pe.mjreDeg < 1e-6);
  CHECK(pe.mppeCm == 0.0);
}

TEST_CASE("a single ten degree joint error averages over all joints") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence gt = staticSequence(skel, 4);
  FeatureSequence pred = gt;
  const int j = skel.indexOf("LeftArm");
  REQUIRE(j > 0);
  const Mat3 extra = matrixFromAxisAngle(Vec3(10.0 * kPi / 180.0, 0.0, 0.0));
  for (int t = 0; t < pred.frameCount(); ++t) {
    const Mat3 r = pred.local[t].jointRotation(j) * extra;
    pred.local[t].rotations6d().row(j) = rot6dFromMatrix(r).transpose();
  }
  const PoseErrors pe = poseErrors(skel, pred, gt);
  CHECK(pe.mjreDeg == doctest::Approx(10.0 / skel.jointCount()).epsilon(1e-6));
}

TEST_CASE("a one centimeter per frame drift is twenty centimeters per second") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence gt = staticSequence(skel, 5);
  FeatureSequence pred = gt;
  const int hand = skel.indexOf("LeftHand");
  REQUIRE(hand > 0);
  for (int t = 0; t < pred.frameCount(); ++t) pred.local[t].data(hand, 0) += 0.01 * t;
  const VelocityErrors ve = velocityErrors(skel, pred, gt);
  // 20 cm/s on one of the twenty non-pelvis joints.
  CHECK(ve.mjlveCmS == doctest::Approx(20.0 / (skel.jointCount() - 1)).epsilon(1e-9));
  CHECK(ve.mjaveDegS < 1e-5);
  CHECK(ve.mplveCmS == 0.0);

  // Swapping prediction and reference cannot change any error.
  const VelocityErrors sw = velocityErrors(skel, gt, pred);
  CHECK(sw.mjlveCmS == ve.mjlveCmS);
  CHECK(sw.mjaveDegS == ve.mjaveDegS);
  CHECK(sw.mplveCmS == ve.mplveCmS);
  CHECK(sw.mpaveDegS == ve.mpaveDegS);
}

TEST_CASE("pelvis drift and a constant root rotation error read back exactly") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence gt = staticSequence(skel, 5);
  FeatureSequence pred = gt;
  const Mat3 extra = matrixFromAxisAngle(Vec3(0.0, 10.0 * kPi / 180.0, 0.0));
  for (int t = 0; t < pred.frameCount(); ++t) {
    pred.global[t].rootPosition() += Vec3(0.01 * t, 0.0, 0.0);
    pred.global[t].rootRotation6d() =
        rot6dFromMatrix(Mat3(pred.global[t].rootRotation() * extra));
  }
  const PoseErrors pe = poseErrors(skel, pred, gt);
  CHECK(pe.mppeCm == doctest::Approx(100.0 * 0.01 * (0 + 1 + 2 + 3 + 4) / 5.0).epsilon(1e-9));
  CHECK(pe.mpreDeg == doctest::Approx(10.0).epsilon(1e-6));
  const VelocityErrors ve = velocityErrors(skel, pred, gt);
  CHECK(ve.mplveCmS == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(ve.mpaveDegS < 1e-5);
}

TEST_CASE("jitter vanishes on constant velocity and acceleration") {
  const Skeleton skel = walkSkeleton();
  FeatureSequence linear = staticSequence(skel, 8);
  FeatureSequence quadratic = staticSequence(skel, 8);
  for (int t = 0; t < 8; ++t) {
    linear.global[t].rootPosition() += Vec3(0.02 * t, 0.0, 0.0);
    quadratic.global[t].rootPosition() += Vec3(0.02 * t, 0.001 * t * t, 0.0);
  }
  CHECK(jitterMetric(skel, linear) < 1e-9);
  CHECK(jitterMetric(skel, quadratic) < 1e-9);
}

TEST_CASE("alternating one centimeter steps have a closed-form jitter") {
  const Skeleton skel = walkSkeleton();
  FeatureSequence seq = staticSequence(skel, 9);
  const int hand = skel.indexOf("LeftHand");
  for (int t = 0; t < 9; ++t) seq.local[t].data(hand, 0) += 0.01 * (t % 2);
  // Third difference of an alternating sequence has norm 4 * 0.01; one joint
  // out of 21 carries it in every window.
  const double expected =
      (0.04 * 0.04) * kFrameRate * kFrameRate * kFrameRate / skel.jointCount();
  CHECK(jitterMetric(skel, seq) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("contact accuracy counts matches above the half threshold") {
  const Skeleton skel = walkSkeleton();
  FeatureSequence gt = staticSequence(skel, 10);
  FeatureSequence pred = gt;
  for (int t = 0; t < 10; ++t) {
    gt.global[t].data(15) = 1.0;
    gt.global[t].data(16) = 0.0;
    pred.global[t].data(15) = 0.9;
    pred.global[t].data(16) = 0.1;
  }
  CHECK(contactAccuracy(pred, gt) == 100.0);

  pred.global[3].data(16) = 0.8;  // one wrong label out of twenty
  CHECK(contactAccuracy(pred, gt) == 95.0);

  for (int t = 0; t < 10; ++t) {
    pred.global[t].data(15) = 0.0;
    pred.global[t].data(16) = 1.0;
  }
  CHECK(contactAccuracy(pred, gt) == 0.0);

  // 0.5 itself counts as contact.
  pred = gt;
  pred.global[0].data(15) = 0.5;
  CHECK(contactAccuracy(pred, gt) == 100.0);
}

TEST_CASE("every metric is invariant under a rigid world transform") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence gt = deriveFeatures(generateSequence("walk", 2.0, 5));
  const FeatureSequence pred = noisyCopy(gt, 99);

  Rng rng(7);
  const Mat3 rot = randomRotation(rng);
  const Vec3 trans(3.0, -1.0, 12.0);
  const FeatureSequence gtMoved = rigidlyMoved(gt, rot, trans);
  const FeatureSequence predMoved = rigidlyMoved(pred, rot, trans);

  const PoseErrors pe = poseErrors(skel, pred, gt);
  const PoseErrors peMoved = poseErrors(skel, predMoved, gtMoved);
  CHECK(peMoved.mjpeCm == doctest::Approx(pe.mjpeCm).epsilon(1e-9));
  CHECK(peMoved.mjreDeg == doctest::Approx(pe.mjreDeg).epsilon(1e-9));
  CHECK(peMoved.mppeCm == doctest::Approx(pe.mppeCm).epsilon(1e-9));
  CHECK(peMoved.mpreDeg == doctest::Approx(pe.mpreDeg).epsilon(1e-7));

  const VelocityErrors ve = velocityErrors(skel, pred, gt);
  const VelocityErrors veMoved = velocityErrors(skel, predMoved, gtMoved);
  CHECK(veMoved.mjlveCmS == doctest::Approx(ve.mjlveCmS).epsilon(1e-9));
  CHECK(veMoved.mjaveDegS == doctest::Approx(ve.mjaveDegS).epsilon(1e-9));
  CHECK(veMoved.mplveCmS == doctest::Approx(ve.mplveCmS).epsilon(1e-9));
  CHECK(veMoved.mpaveDegS == doctest::Approx(ve.mpaveDegS).epsilon(1e-7));

  CHECK(jitterMetric(skel, predMoved) == doctest::Approx(jitterMetric(skel, pred)).epsilon(1e-9));
  CHECK(contactAccuracy(predMoved, gtMoved) == contactAccuracy(pred, gt));
}

TEST_CASE("shape problems are rejected") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence seq = staticSequence(skel, 6);
  FeatureSequence shorter = seq;
  shorter.global.pop_back();
  shorter.local.pop_back();
  CHECK_THROWS_AS(poseErrors(skel, seq, shorter), ValidationError);
  CHECK_THROWS_AS(velocityErrors(skel, shorter, seq), ValidationError);
  CHECK_THROWS_AS(contactAccuracy(seq, shorter), ValidationError);

  FeatureSequence tiny = seq;
  tiny.global.resize(3);
  tiny.local.resize(3);
  CHECK_THROWS_AS(jitterMetric(skel, tiny), ValidationError);

  FeatureSequence single = seq;
  single.global.resize(1);
  single.local.resize(1);
  CHECK_THROWS_AS(velocityErrors(skel, single, single), ValidationError);
}

TEST_CASE("the report renders as an aligned table and as JSON") {
  const Skeleton skel = walkSkeleton();
  const FeatureSequence gt = deriveFeatures(generateSequence("walk", 2.0, 5));
  const FeatureSequence pred = noisyCopy(gt, 3);
  const MetricsReport report = evaluateSequences(skel, pred, gt);
  CHECK(report.frames == gt.frameCount());
  CHECK(report.pose.mjpeCm > 0.0);
  CHECK(report.jitterRef > 0.0);

  const std::string table = metricsTable(report);
  CHECK(table.find("MJPE") != std::string::npos);
  CHECK(table.find("MJAVE") != std::string::npos);
  CHECK(table.find("Cont.") != std::string::npos);
  CHECK(table.find("pelvis metrics") != std::string::npos);

  const auto j = nlohmann::json::parse(metricsJson(report));
  CHECK(j.at("mjpe_cm").get<double>() == report.pose.mjpeCm);
  CHECK(j.at("mpave_deg_s").get<double>() == report.vel.mpaveDegS);
  CHECK(j.at("contact_pct").get<double>() == report.contactPct);
  CHECK(j.at("frames").get<int>() == report.frames);
}
