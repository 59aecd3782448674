#pragma once

#include <array>
#include <vector>

#include "movin/config.hpp"
#include "movin/rng.hpp"
#include "movin/skeleton.hpp"

namespace movin {

constexpr int kHistoryLen = 5;
constexpr int kHistoryStride = 5;  // frames between the stacked past clouds
constexpr int kPointsPerFrame = 256;

/// Virtual solid-state LiDAR: a fixed grid of rays over a horizontal/vertical
/// field of view. The optical axis is the sensor frame's +Z, +Y up.
struct SensorConfig {
  Vec3 position = Vec3(0.0, 0.9, 0.0);
  Mat3 orientation = Mat3::Identity();
  double hFovDeg = 120.0;
  double vFovDeg = 35.0;
  int hRes = 192;
  int vRes = 56;
  double rateHz = kFrameRate;
  double maxRange = 10.0;   // meters
  double noiseSigma = 0.01;  // meters, Gaussian range noise

  void validate() const;

  /// Reads the documented key/value schema; unknown keys are rejected.
  /// Keys (all optional): position = x,y,z; yaw_deg; pitch_deg; h_fov_deg;
  /// v_fov_deg; h_res; v_res; rate_hz; max_range; noise_sigma.
  static SensorConfig fromConfig(const Config& cfg);

  /// World-frame direction of the ray at (row, col), rows bottom-up.
  Vec3 rayDirection(int row, int col) const;
};

/// Synthetic subject geometry: capsules strung between joints (a degenerate
/// capsule with jointA == jointB is a sphere).
struct BodyProxy {
  struct Capsule {
    int jointA = -1;
    int jointB = -1;
    double radius = 0.0;
  };
  std::vector<Capsule> capsules;

  void validate(const Skeleton& skel) const;
};

/// 17-capsule proxy for the stock 21-joint skeleton.
BodyProxy defaultProxy(const Skeleton& skel);

struct PointCloudFrame {
  Mat points;  // N x 3, world frame, meters
  int frameIndex = 0;

  int pointCount() const { return static_cast<int>(points.rows()); }
};

/// Stacked clouds at offsets {0, 5, 10, 15, 20} behind the current frame,
/// most recent first, each sampled/padded to the same row count
/// (kPointsPerFrame by default).
struct PointCloudHistory {
  std::array<Mat, kHistoryLen> clouds;

  /// All clouds stacked into (kHistoryLen * rows) x 3, most recent first.
  Mat stacked() const;
};

/// Smallest positive ray parameter t with |o + t*d - capsule| = 0, or a
/// negative value when the ray misses. d must be unit length.
double rayCapsuleDistance(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                          double radius);

/// Casts one ray per (row, col); the nearest capsule hit within max_range is
/// returned with Gaussian range noise. Background is implicitly discarded:
/// only the body proxy exists in the scene.
PointCloudFrame simulateScan(const BodyProxy& proxy, const Skeleton& skel,
                             const JointStates& pose, const SensorConfig& cfg,
                             std::uint64_t seed, int frameIndex = 0);

/// Exactly `target` rows: a seeded uniform subset (kept in scan order) when
/// the frame is larger, zero rows appended when smaller.
Mat sampleOrPad(const PointCloudFrame& frame, int target, std::uint64_t seed);

/// History for frame t from per-frame clouds, offsets clamped to the first
/// frame; each selected cloud is re-sampled with a seed forked per slot.
PointCloudHistory assembleHistory(const std::vector<PointCloudFrame>& frames, int t,
                                  std::uint64_t seed, int target = kPointsPerFrame);

}  // namespace movin
