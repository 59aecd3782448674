#include "movin/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace movin {

namespace {

// Smallest positive root of |o + t*d - c| = r, or negative when none.
double raySphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 m = o - c;
  const double b = m.dot(d);
  const double q = m.squaredNorm() - r * r;
  const double disc = b * b - q;
  if (disc < 0.0) return -1.0;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  if (t0 > 0.0) return t0;
  const double t1 = -b + s;
  return t1 > 0.0 ? t1 : -1.0;
}

}  // namespace

void SensorConfig::validate() const {
  if (hFovDeg <= 0 || hFovDeg > 360 || vFovDeg <= 0 || vFovDeg >= 180)
    throw ValidationError("SensorConfig: field of view out of range");
  if (hRes < 1 || vRes < 1) throw ValidationError("SensorConfig: resolution must be positive");
  if (rateHz <= 0) throw ValidationError("SensorConfig: rate must be positive");
  if (maxRange <= 0) throw ValidationError("SensorConfig: max_range must be positive");
  if (noiseSigma < 0) throw ValidationError("SensorConfig: noise_sigma must be >= 0");
  if (!position.allFinite() || !orientation.allFinite() || !isRotationMatrix(orientation))
    throw ValidationError("SensorConfig: bad sensor pose");
}

SensorConfig SensorConfig::fromConfig(const Config& cfg) {
  cfg.requireKnownKeys({"position", "yaw_deg", "pitch_deg", "h_fov_deg", "v_fov_deg", "h_res",
                        "v_res", "rate_hz", "max_range", "noise_sigma"});
  SensorConfig s;
  s.position = cfg.getVec3("position", s.position);
  const double yaw = cfg.getDouble("yaw_deg", 0.0);
  const double pitch = cfg.getDouble("pitch_deg", 0.0);
  s.orientation = (Eigen::AngleAxisd(yaw * kPi / 180.0, Vec3::UnitY()) *
                   Eigen::AngleAxisd(pitch * kPi / 180.0, Vec3::UnitX()))
                      .toRotationMatrix();
  s.hFovDeg = cfg.getDouble("h_fov_deg", s.hFovDeg);
  s.vFovDeg = cfg.getDouble("v_fov_deg", s.vFovDeg);
  s.hRes = cfg.getInt("h_res", s.hRes);
  s.vRes = cfg.getInt("v_res", s.vRes);
  s.rateHz = cfg.getDouble("rate_hz", s.rateHz);
  s.maxRange = cfg.getDouble("max_range", s.maxRange);
  s.noiseSigma = cfg.getDouble("noise_sigma", s.noiseSigma);
  s.validate();
  return s;
}

Vec3 SensorConfig::rayDirection(int row, int col) const {
  const double azimuth =
      (-0.5 + (col + 0.5) / hRes) * hFovDeg * kPi / 180.0;  // + to the sensor's left
  const double elevation = (-0.5 + (row + 0.5) / vRes) * vFovDeg * kPi / 180.0;
  const Vec3 local(std::sin(azimuth) * std::cos(elevation), std::sin(elevation),
                   std::cos(azimuth) * std::cos(elevation));
  return orientation * local;
}

void BodyProxy::validate(const Skeleton& skel) const {
  if (capsules.empty()) throw ValidationError("BodyProxy: no capsules");
  for (const Capsule& c : capsules) {
    if (c.jointA < 0 || c.jointA >= skel.jointCount() || c.jointB < 0 ||
        c.jointB >= skel.jointCount())
      throw ValidationError("BodyProxy: capsule references a missing joint");
    if (!(c.radius > 0)) throw ValidationError("BodyProxy: capsule radius must be positive");
  }
}

BodyProxy defaultProxy(const Skeleton& skel) {
  auto j = [&](const char* name) {
    const int idx = skel.indexOf(name);
    if (idx < 0) throw ValidationError(std::string("defaultProxy: skeleton lacks joint ") + name);
    return idx;
  };
  BodyProxy proxy;
  auto add = [&](const char* a, const char* b, double r) {
    proxy.capsules.push_back({j(a), j(b), r});
  };
  add("Hips", "Spine", 0.072);
  add("Spine", "Chest", 0.067);
  add("Chest", "Neck", 0.060);
  add("Neck", "Head", 0.035);
  add("Head", "Head", 0.06);  // sphere
  add("LeftShoulder", "LeftArm", 0.034);
  add("LeftArm", "LeftForeArm", 0.031);
  add("LeftForeArm", "LeftHand", 0.026);
  add("RightShoulder", "RightArm", 0.034);
  add("RightArm", "RightForeArm", 0.031);
  add("RightForeArm", "RightHand", 0.026);
  add("LeftUpLeg", "LeftLeg", 0.045);
  add("LeftLeg", "LeftFoot", 0.039);
  add("LeftFoot", "LeftToe", 0.033);
  add("RightUpLeg", "RightLeg", 0.045);
  add("RightLeg", "RightFoot", 0.039);
  add("RightFoot", "RightToe", 0.033);
  proxy.validate(skel);
  return proxy;
}

Mat PointCloudHistory::stacked() const {
  const int n = static_cast<int>(clouds[0].rows());
  for (const Mat& c : clouds)
    if (c.rows() != n || c.cols() != 3)
      throw ValidationError("PointCloudHistory: ragged cloud stack");
  Mat out(kHistoryLen * n, 3);
  for (int i = 0; i < kHistoryLen; ++i) out.middleRows(i * n, n) = clouds[i];
  return out;
}

double rayCapsuleDistance(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                          double radius) {
  const Vec3 axis = b - a;
  const double len = axis.norm();
  if (len < 1e-9) return raySphere(origin, dir, a, radius);

  const Vec3 u = axis / len;
  // Quadratic for the infinite cylinder, using components orthogonal to u.
  const Vec3 m = origin - a;
  const Vec3 mPerp = m - m.dot(u) * u;
  const Vec3 dPerp = dir - dir.dot(u) * u;
  const double qa = dPerp.squaredNorm();
  const double qb = 2.0 * mPerp.dot(dPerp);
  const double qc = mPerp.squaredNorm() - radius * radius;

  double best = -1.0;
  if (qa > 1e-12) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      for (const double t : {(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)}) {
        if (t <= 0.0) continue;
        const double along = (m + t * dir).dot(u);
        if (along >= 0.0 && along <= len && (best < 0.0 || t < best)) best = t;
      }
    }
  }
  for (const Vec3& cap : {a, b}) {
    const double t = raySphere(origin, dir, cap, radius);
    if (t > 0.0 && (best < 0.0 || t < best)) best = t;
  }
  return best;
}

PointCloudFrame simulateScan(const BodyProxy& proxy, const Skeleton& skel,
                             const JointStates& pose, const SensorConfig& cfg,
                             std::uint64_t seed, int frameIndex) {
  cfg.validate();
  proxy.validate(skel);
  if (pose.jointCount() != skel.jointCount())
    throw ValidationError("simulateScan: pose joint count mismatch");

  std::vector<std::array<Vec3, 2>> segments(proxy.capsules.size());
  for (size_t i = 0; i < proxy.capsules.size(); ++i) {
    segments[i][0] = pose.positions.row(proxy.capsules[i].jointA).transpose();
    segments[i][1] = pose.positions.row(proxy.capsules[i].jointB).transpose();
  }

  Rng rng(seed);
  std::vector<Vec3> hits;
  for (int row = 0; row < cfg.vRes; ++row) {
    for (int col = 0; col < cfg.hRes; ++col) {
      const Vec3 dir = cfg.rayDirection(row, col);
      double nearest = -1.0;
      for (size_t i = 0; i < proxy.capsules.size(); ++i) {
        const double t = rayCapsuleDistance(cfg.position, dir, segments[i][0], segments[i][1],
                                            proxy.capsules[i].radius);
        if (t > 0.0 && (nearest < 0.0 || t < nearest)) nearest = t;
      }
      if (nearest > 0.0 && nearest <= cfg.maxRange) {
        const double range = nearest + cfg.noiseSigma * rng.normal();
        hits.push_back(cfg.position + range * dir);
      }
    }
  }

  PointCloudFrame frame;
  frame.frameIndex = frameIndex;
  frame.points.resize(static_cast<int>(hits.size()), 3);
  for (size_t i = 0; i < hits.size(); ++i) frame.points.row(static_cast<int>(i)) = hits[i].transpose();
  return frame;
}

Mat sampleOrPad(const PointCloudFrame& frame, int target, std::uint64_t seed) {
  if (target < 0) throw ValidationError("sampleOrPad: target must be >= 0");
  const int n = frame.pointCount();
  Mat out = Mat::Zero(target, 3);
  if (n <= target) {
    out.topRows(n) = frame.points;
    return out;
  }
  // Partial Fisher-Yates draw of `target` indices, then kept in scan order.
  std::vector<int> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < target; ++i) {
    const int k = i + static_cast<int>(rng.uniformInt(static_cast<std::uint64_t>(n - i)));
    std::swap(indices[i], indices[k]);
  }
  std::sort(indices.begin(), indices.begin() + target);
  for (int i = 0; i < target; ++i) out.row(i) = frame.points.row(indices[i]);
  return out;
}

PointCloudHistory assembleHistory(const std::vector<PointCloudFrame>& frames, int t,
                                  std::uint64_t seed, int target) {
  if (t < 0 || t >= static_cast<int>(frames.size()))
    throw ValidationError("assembleHistory: frame index out of range");
  PointCloudHistory history;
  const Rng parent(seed);
  for (int i = 0; i < kHistoryLen; ++i) {
    const int src = std::max(0, t - i * kHistoryStride);
    Rng fork = parent.fork(static_cast<std::uint64_t>(i));
    history.clouds[i] = sampleOrPad(frames[src], target, fork.next());
  }
  return history;
}

}  // namespace movin
