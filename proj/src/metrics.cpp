#include "movin/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "movin/common.hpp"
#include "movin/rotations.hpp"

namespace movin {
namespace {

constexpr double kRadToDeg = 180.0 / kPi;

void checkPair(const Skeleton& skel, const FeatureSequence& pred,
               const FeatureSequence& gt, int minFrames) {
  if (pred.frameCount() != gt.frameCount()) {
    throw ValidationError("metrics: sequence lengths differ");
  }
  if (pred.frameCount() < minFrames) {
    throw ValidationError("metrics: sequence too short");
  }
  const int n = skel.jointCount();
  for (int t = 0; t < pred.frameCount(); ++t) {
    if (pred.local[t].jointCount() != n || gt.local[t].jointCount() != n) {
      throw ValidationError("metrics: joint count mismatch");
    }
  }
}

/// Relative-rotation angular velocity in rad/s: |axisAngle(R_prev^T R_cur)| * rate
/// as a vector, so prediction/reference rates can be compared by norm.
Vec3 angularRate(const Mat3& prev, const Mat3& cur) {
  return axisAngleFromMatrix(Mat3(prev.transpose() * cur)) * kFrameRate;
}

}  // namespace

PoseErrors poseErrors(const Skeleton& skel, const FeatureSequence& pred,
                      const FeatureSequence& gt) {
  checkPair(skel, pred, gt, 1);
  const int frames = pred.frameCount();
  const int n = skel.jointCount();

  PoseErrors err;
  for (int t = 0; t < frames; ++t) {
    const JointStates predRel = featureStates(skel, pred.local[t]);
    const JointStates gtRel = featureStates(skel, gt.local[t]);
    for (int j = 1; j < n; ++j) {
      err.mjpeCm += (predRel.positions.row(j) - gtRel.positions.row(j)).norm();
    }
    for (int j = 0; j < n; ++j) {
      err.mjreDeg +=
          geodesicAngle(pred.local[t].jointRotation(j), gt.local[t].jointRotation(j));
    }
    err.mppeCm += (pred.global[t].rootPosition() - gt.global[t].rootPosition()).norm();
    err.mpreDeg += geodesicAngle(pred.global[t].rootRotation(), gt.global[t].rootRotation());
  }
  err.mjpeCm *= 100.0 / (frames * (n - 1));
  err.mjreDeg *= kRadToDeg / (frames * n);
  err.mppeCm *= 100.0 / frames;
  err.mpreDeg *= kRadToDeg / frames;
  return err;
}

VelocityErrors velocityErrors(const Skeleton& skel, const FeatureSequence& pred,
                              const FeatureSequence& gt) {
  checkPair(skel, pred, gt, 2);
  const int frames = pred.frameCount();
  const int n = skel.jointCount();

  VelocityErrors err;
  JointStates predPrev = featureStates(skel, pred.local[0]);
  JointStates gtPrev = featureStates(skel, gt.local[0]);
  for (int t = 1; t < frames; ++t) {
    const JointStates predCur = featureStates(skel, pred.local[t]);
    const JointStates gtCur = featureStates(skel, gt.local[t]);
    for (int j = 1; j < n; ++j) {
      err.mjlveCmS += ((predCur.positions.row(j) - predPrev.positions.row(j)) -
                       (gtCur.positions.row(j) - gtPrev.positions.row(j)))
                          .norm() *
                      kFrameRate;
    }
    for (int j = 0; j < n; ++j) {
      const Vec3 wp = angularRate(pred.local[t - 1].jointRotation(j),
                                  pred.local[t].jointRotation(j));
      const Vec3 wg =
          angularRate(gt.local[t - 1].jointRotation(j), gt.local[t].jointRotation(j));
      err.mjaveDegS += (wp - wg).norm();
    }
    const Vec3 rp =
        (pred.global[t].rootPosition() - pred.global[t - 1].rootPosition()) * kFrameRate;
    const Vec3 rg =
        (gt.global[t].rootPosition() - gt.global[t - 1].rootPosition()) * kFrameRate;
    err.mplveCmS += (rp - rg).norm();
    const Vec3 ap =
        angularRate(pred.global[t - 1].rootRotation(), pred.global[t].rootRotation());
    const Vec3 ag = angularRate(gt.global[t - 1].rootRotation(), gt.global[t].rootRotation());
    err.mpaveDegS += (ap - ag).norm();
    predPrev = predCur;
    gtPrev = gtCur;
  }
  const int steps = frames - 1;
  err.mjlveCmS *= 100.0 / (steps * (n - 1));
  err.mjaveDegS *= kRadToDeg / (steps * n);
  err.mplveCmS *= 100.0 / steps;
  err.mpaveDegS *= kRadToDeg / steps;
  return err;
}

double jitterMetric(const Skeleton& skel, const FeatureSequence& seq) {
  const int frames = seq.frameCount();
  if (frames < 4) {
    throw ValidationError("jitter: need at least 4 frames");
  }
  const int n = skel.jointCount();

  std::vector<Mat> world;
  world.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    world.push_back(featureStates(skel, seq.local[t], seq.global[t]).positions);
  }

  double sum = 0.0;
  for (int t = 3; t < frames; ++t) {
    const Mat d3 = world[t] - 3.0 * world[t - 1] + 3.0 * world[t - 2] - world[t - 3];
    sum += d3.rowwise().squaredNorm().sum();
  }
  const double rate3 = kFrameRate * kFrameRate * kFrameRate;
  return sum * rate3 / ((frames - 3) * n);
}

double contactAccuracy(const FeatureSequence& pred, const FeatureSequence& gt) {
  if (pred.frameCount() != gt.frameCount() || pred.frameCount() < 1) {
    throw ValidationError("contact accuracy: sequence lengths differ or empty");
  }
  int matches = 0;
  for (int t = 0; t < pred.frameCount(); ++t) {
    for (int f = 0; f < 2; ++f) {
      const bool p = pred.global[t].contacts()(f) >= 0.5;
      const bool g = gt.global[t].contacts()(f) >= 0.5;
      matches += (p == g) ? 1 : 0;
    }
  }
  return 100.0 * matches / (pred.frameCount() * 2);
}

MetricsReport evaluateSequences(const Skeleton& skel, const FeatureSequence& pred,
                                const FeatureSequence& gt) {
  MetricsReport report;
  report.pose = poseErrors(skel, pred, gt);
  report.vel = velocityErrors(skel, pred, gt);
  report.jitterPred = jitterMetric(skel, pred);
  report.jitterRef = jitterMetric(skel, gt);
  report.contactPct = contactAccuracy(pred, gt);
  report.frames = pred.frameCount();
  return report;
}

std::string metricsTable(const MetricsReport& report) {
  char line[96];
  std::string out;
  const auto row = [&](const char* name, const char* unit, double value) {
    std::snprintf(line, sizeof(line), "  %-6s %-9s %10.4f\n", name, unit, value);
    out += line;
  };
  out += "joint metrics\n";
  row("MJPE", "[cm]", report.pose.mjpeCm);
  row("MJRE", "[deg]", report.pose.mjreDeg);
  row("MJLVE", "[cm/s]", report.vel.mjlveCmS);
  row("MJAVE", "[deg/s]", report.vel.mjaveDegS);
  row("Jitt.", "[m2/s3]", report.jitterPred);
  row("(ref)", "[m2/s3]", report.jitterRef);
  out += "pelvis metrics\n";
  row("MPPE", "[cm]", report.pose.mppeCm);
  row("MPRE", "[deg]", report.pose.mpreDeg);
  row("MPLVE", "[cm/s]", report.vel.mplveCmS);
  row("MPAVE", "[deg/s]", report.vel.mpaveDegS);
  row("Cont.", "[%]", report.contactPct);
  return out;
}

std::string metricsJson(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["frames"] = report.frames;
  j["mjpe_cm"] = report.pose.mjpeCm;
  j["mjre_deg"] = report.pose.mjreDeg;
  j["mjlve_cm_s"] = report.vel.mjlveCmS;
  j["mjave_deg_s"] = report.vel.mjaveDegS;
  j["jitter_pred_m2_s3"] = report.jitterPred;
  j["jitter_ref_m2_s3"] = report.jitterRef;
  j["mppe_cm"] = report.pose.mppeCm;
  j["mpre_deg"] = report.pose.mpreDeg;
  j["mplve_cm_s"] = report.vel.mplveCmS;
  j["mpave_deg_s"] = report.vel.mpaveDegS;
  j["contact_pct"] = report.contactPct;
  return j.dump(2);
}

}  // namespace movin
