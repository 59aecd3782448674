#include "movin/motion_gen.hpp"

#include <algorithm>
#include <cmath>

#include "movin/ik.hpp"
#include "movin/rng.hpp"

namespace movin {

namespace {

Mat3 rotX(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rotY(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rotZ(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

constexpr double kDeg = kPi / 180.0;

// Named joint handles resolved once per sequence.
struct Rig {
  Skeleton skel;
  double scale;
  double height;    // scaled stand height
  double ankleY;    // planted ankle height
  double hipWidth;  // lateral anchor offset
  int spine, chest, neck, head;
  int armL, armR, foreL, foreR;
  int hipL, kneeL, ankleL, hipR, kneeR, ankleR;

  explicit Rig(double s)
      : skel(scaledSkeleton(defaultSkeleton(), s)),
        scale(s),
        height(standHeight(skel)),
        spine(skel.indexOf("Spine")),
        chest(skel.indexOf("Chest")),
        neck(skel.indexOf("Neck")),
        head(skel.indexOf("Head")),
        armL(skel.indexOf("LeftArm")),
        armR(skel.indexOf("RightArm")),
        foreL(skel.indexOf("LeftForeArm")),
        foreR(skel.indexOf("RightForeArm")),
        hipL(skel.indexOf("LeftUpLeg")),
        kneeL(skel.indexOf("LeftLeg")),
        ankleL(skel.leftFoot),
        hipR(skel.indexOf("RightUpLeg")),
        kneeR(skel.indexOf("RightLeg")),
        ankleR(skel.rightFoot) {
    ankleY = height + skel.joints[hipL].offset[1] + skel.joints[kneeL].offset[1] +
             skel.joints[ankleL].offset[1];
    hipWidth = std::abs(skel.joints[hipL].offset[0]);
  }

  // Arms hanging at the sides with a sagittal swing angle (radians, positive
  // forward) and an extra forward raise used by squats.
  void poseArms(ClipFrame& f, double swingL, double swingR, double raise) const {
    f.localRot[armL] = rotX(swingL - raise) * rotZ(-75.0 * kDeg);
    f.localRot[armR] = rotX(swingR - raise) * rotZ(75.0 * kDeg);
    f.localRot[foreL] = rotZ(-12.0 * kDeg);
    f.localRot[foreR] = rotZ(12.0 * kDeg);
  }

  void plantFeet(ClipFrame& f, const Vec3& targetL, const Vec3& targetR) const {
    const Vec3 hint = f.rootRot * Vec3::UnitZ();  // knees bow forward
    solveTwoBoneIk(skel, hipL, kneeL, ankleL, targetL, hint, f.rootPos, f.rootRot, f.localRot);
    solveTwoBoneIk(skel, hipR, kneeR, ankleR, targetR, hint, f.rootPos, f.rootRot, f.localRot);
  }
};

ClipFrame blankFrame(const Rig& rig) {
  ClipFrame f;
  f.localRot.assign(rig.skel.jointCount(), Mat3::Identity());
  return f;
}

// Rest-pose ankle anchors for a subject standing at `center` with `yaw`.
std::pair<Vec3, Vec3> standAnchors(const Rig& rig, const Vec3& center, double yaw) {
  const Vec3 side = rotY(yaw) * Vec3(rig.hipWidth, 0.0, 0.0);
  const Vec3 up(0.0, rig.ankleY, 0.0);
  return {center + side + up, center - side + up};
}

MotionClip generateIdle(const Rig& rig, int frames, Rng& rng) {
  const double radius = rng.uniform(3.15, 3.55);
  const double azimuth = rng.uniform(-35.0, 35.0) * kDeg;
  const Vec3 center(radius * std::sin(azimuth), 0.0, radius * std::cos(azimuth));
  const double yaw0 = kPi + rng.uniform(-0.6, 0.6);  // roughly facing the sensor

  const double swayAmpX = rng.uniform(0.005, 0.02);
  const double swayAmpZ = rng.uniform(0.005, 0.02);
  const double swayFreqX = rng.uniform(0.1, 0.3);
  const double swayFreqZ = rng.uniform(0.1, 0.3);
  const double swayPhase = rng.uniform(0.0, 2.0 * kPi);
  const double lookFreq = rng.uniform(0.05, 0.12);
  const double lookAmp = rng.uniform(4.0, 10.0) * kDeg;
  const double breathFreq = rng.uniform(0.2, 0.35);

  const auto [anchorL, anchorR] = standAnchors(rig, center, yaw0);
  MotionClip clip;
  clip.skeleton = rig.skel;
  clip.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double t = i * kFrameTime;
    ClipFrame f = blankFrame(rig);
    const Vec3 sway(swayAmpX * std::sin(2 * kPi * swayFreqX * t + swayPhase), 0.0,
                    swayAmpZ * std::sin(2 * kPi * swayFreqZ * t));
    f.rootPos = center + Vec3(0, rig.height, 0) + sway;
    f.rootRot = rotY(yaw0 + 2.0 * kDeg * std::sin(2 * kPi * 0.1 * t + swayPhase));
    f.localRot[rig.chest] = rotX(1.5 * kDeg * std::sin(2 * kPi * breathFreq * t));
    f.localRot[rig.head] = rotY(lookAmp * std::sin(2 * kPi * lookFreq * t));
    rig.poseArms(f, 1.0 * kDeg * std::sin(2 * kPi * swayFreqX * t),
                 1.0 * kDeg * std::sin(2 * kPi * swayFreqZ * t + swayPhase), 0.0);
    rig.plantFeet(f, anchorL, anchorR);
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

MotionClip generateSquat(const Rig& rig, int frames, Rng& rng) {
  const double radius = rng.uniform(3.15, 3.55);
  const double azimuth = rng.uniform(-35.0, 35.0) * kDeg;
  const Vec3 center(radius * std::sin(azimuth), 0.0, radius * std::cos(azimuth));
  const double yaw = kPi + rng.uniform(-0.5, 0.5);
  const double depth = rng.uniform(0.22, 0.35) * rig.scale;
  const double period = rng.uniform(2.5, 4.0);
  const double phase = rng.uniform(0.0, 2.0 * kPi);

  const auto [anchorL, anchorR] = standAnchors(rig, center, yaw);
  MotionClip clip;
  clip.skeleton = rig.skel;
  clip.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double t = i * kFrameTime;
    // 0 standing, 1 at the bottom of the squat.
    const double down = 0.5 * (1.0 - std::cos(2 * kPi * t / period + phase));
    ClipFrame f = blankFrame(rig);
    f.rootPos = center + Vec3(0, rig.height - depth * down, 0);
    f.rootRot = rotY(yaw);
    f.localRot[rig.spine] = rotX(14.0 * kDeg * down);  // lean into the squat
    f.localRot[rig.chest] = rotX(8.0 * kDeg * down);
    rig.poseArms(f, 0.0, 0.0, 55.0 * kDeg * down);  // arms rise for balance
    rig.plantFeet(f, anchorL, anchorR);
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

// Precomputed root kinematics for one locomotion frame.
struct PathSample {
  double arc = 0.0;  // signed arc-length position along the circle
  double yaw = 0.0;  // world heading of the character's +Z
};

// Walks at constant speed along a circular arc around the sensor, turning in
// place (arc position frozen, yaw blending through pi) at the field-of-view
// edges. Returns one sample per frame plus a lookup for arbitrary times.
class ArcPath {
 public:
  ArcPath(double radius, double speed, double window, double theta0, int dir, int frames)
      : radius_(radius) {
    samples_.reserve(frames);
    double theta = theta0;
    // Tangent heading is theta + dir*pi/2, which also makes the pi-turn at
    // an edge (toward the sensor) land exactly on the reversed heading, so
    // yaw stays continuous and interpolation-safe.
    double yaw = theta + dir * kPi / 2.0;
    const int turnFrames = static_cast<int>(std::lround(kTurnTime / kFrameTime));
    int turnLeft = 0;
    for (int i = 0; i < frames; ++i) {
      samples_.push_back({theta * radius_, yaw});
      if (turnLeft > 0) {
        yaw += -dir * kPi / turnFrames;
        if (--turnLeft == 0) dir = -dir;
      } else {
        theta += dir * (speed / radius_) * kFrameTime;
        if (std::abs(theta) >= window) {
          theta = std::clamp(theta, -window, window);
          turnLeft = turnFrames;
        }
        yaw = theta + dir * kPi / 2.0;
      }
    }
  }

  // Linear interpolation of (arc, yaw) at time t; clamped at both ends.
  PathSample at(double t) const {
    const double x = std::clamp(t / kFrameTime, 0.0, static_cast<double>(samples_.size() - 1));
    const int i = std::min(static_cast<int>(x), static_cast<int>(samples_.size()) - 2);
    const double u = std::clamp(x - i, 0.0, 1.0);
    const PathSample& a = samples_[i];
    const PathSample& b = samples_[i + 1];
    return {a.arc + u * (b.arc - a.arc), a.yaw + u * (b.yaw - a.yaw)};
  }

  Vec3 worldPoint(double arc) const {
    const double theta = arc / radius_;
    return Vec3(radius_ * std::sin(theta), 0.0, radius_ * std::cos(theta));
  }

 private:
  static constexpr double kTurnTime = 0.6;

  double headingFor(double theta, int dir) const {
    const Vec3 tangent(std::cos(theta), 0.0, -std::sin(theta));
    const Vec3 v = dir * tangent;
    return std::atan2(v[0], v[2]);
  }

  double radius_;
  std::vector<PathSample> samples_;
};

MotionClip generateGait(const Rig& rig, int frames, Rng& rng, double speed, bool jog) {
  const double radius = rng.uniform(2.87, 3.02);
  const double window = 50.0 * kDeg;
  const int dir = rng.uniform() < 0.5 ? 1 : -1;
  const ArcPath path(radius, speed, window, -dir * window, dir, frames);

  const double gaitT = std::min(0.9, 0.65 / std::max(speed, 0.1));
  const double duty = 0.55;             // stance fraction per foot
  const double lift = jog ? 0.09 : 0.06;
  const double bob = jog ? 0.03 : 0.015;
  const double armswing = (jog ? 30.0 : 18.0) * kDeg;
  const double crouch = 0.03 * rig.scale;  // slack so strides stay reachable

  // Ankle anchor for stride k of one foot: the path point under the root at
  // the foot's mid-stance (its phase runs `shift` cycles ahead of time),
  // moved to that foot's side of the path.
  auto anchor = [&](int k, double side, double shift) -> Vec3 {
    const double tMid = (k - shift + 0.5 * duty) * gaitT;
    const PathSample s = path.at(tMid);
    const Vec3 lateral = rotY(s.yaw) * Vec3(side * rig.hipWidth, 0.0, 0.0);
    return path.worldPoint(s.arc) + lateral + Vec3(0, rig.ankleY, 0);
  };

  // Ankle target at foot phase `phi` (in cycles): planted during stance,
  // smoothstep-with-lift between consecutive anchors during swing.
  auto footTarget = [&](double phi, double side, double shift) {
    const int k = static_cast<int>(std::floor(phi));
    const double frac = phi - k;
    if (frac < duty) return anchor(k, side, shift);
    const double u = (frac - duty) / (1.0 - duty);
    const Vec3 from = anchor(k, side, shift);
    const Vec3 to = anchor(k + 1, side, shift);
    Vec3 p = from + smoothstep(u) * (to - from);
    p[1] += lift * std::sin(kPi * u);
    return p;
  };

  MotionClip clip;
  clip.skeleton = rig.skel;
  clip.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double t = i * kFrameTime;
    const double phi = t / gaitT;
    const PathSample s = path.at(t);

    ClipFrame f = blankFrame(rig);
    f.rootPos = path.worldPoint(s.arc) +
                Vec3(0, rig.height - crouch + bob * std::sin(2 * kPi * (2.0 * phi)), 0);
    f.rootRot = rotY(s.yaw);
    f.localRot[rig.spine] = rotY(4.0 * kDeg * std::sin(2 * kPi * phi));
    const double swing = std::sin(2 * kPi * phi);
    rig.poseArms(f, -armswing * swing, armswing * swing, 0.0);
    rig.plantFeet(f, footTarget(phi, 1.0, 0.0), footTarget(phi + 0.5, -1.0, 0.5));
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

}  // namespace

const std::vector<std::string>& motionCategories() {
  static const std::vector<std::string> kCategories = {"idle", "squat", "walk", "jog"};
  return kCategories;
}

std::string categoryFamily(const std::string& category) {
  if (category == "idle" || category == "squat") return "static";
  if (category == "walk" || category == "jog") return "locomotion";
  throw ValidationError("unknown motion category: " + category);
}

MotionClip generateSequence(const std::string& category, double durationS, std::uint64_t seed,
                            const GenerateOptions& opts) {
  const std::string family = categoryFamily(category);  // validates the name
  if (durationS < 1.0) throw ValidationError("generateSequence: duration must be >= 1 s");
  const int frames = static_cast<int>(std::lround(durationS * kFrameRate));

  Rng rng(seed);
  const double scale = opts.scale > 0.0 ? opts.scale : rng.uniform(0.9, 1.1);
  const Rig rig(scale);

  MotionClip clip;
  if (category == "idle") {
    clip = generateIdle(rig, frames, rng);
  } else if (category == "squat") {
    clip = generateSquat(rig, frames, rng);
  } else {
    const double fallback = category == "jog" ? rng.uniform(1.6, 2.2) : rng.uniform(0.8, 1.25);
    const double speed = opts.speed > 0.0 ? opts.speed : fallback;
    clip = generateGait(rig, frames, rng, speed, category == "jog");
  }
  clip.validate();
  return clip;
}

}  // namespace movin
