#pragma once

#include <string>

#include "movin/features.hpp"

namespace movin {

/// Position/rotation errors split the way the evaluation table does: joint
/// rows (J*) are averaged in the pelvis frame over the non-pelvis joints for
/// positions and over all joints' local rotations; pelvis rows (P*) use the
/// world-frame root.
struct PoseErrors {
  double mjpeCm = 0.0;
  double mjreDeg = 0.0;
  double mppeCm = 0.0;
  double mpreDeg = 0.0;
};

/// Finite-difference velocity errors at the 20 Hz frame rate (cm/s, deg/s),
/// same frame conventions as PoseErrors.
struct VelocityErrors {
  double mjlveCmS = 0.0;
  double mjaveDegS = 0.0;
  double mplveCmS = 0.0;
  double mpaveDegS = 0.0;
};

PoseErrors poseErrors(const Skeleton& skel, const FeatureSequence& pred,
                      const FeatureSequence& gt);
VelocityErrors velocityErrors(const Skeleton& skel, const FeatureSequence& pred,
                              const FeatureSequence& gt);

/// Mean squared third finite difference of world joint positions, scaled by
/// rate^3 (m^2/s^3). Zero on constant-velocity and constant-acceleration
/// motion; needs at least 4 frames.
double jitterMetric(const Skeleton& skel, const FeatureSequence& seq);

/// Percentage of matching contact labels over frames x 2 feet; predictions
/// and references are both thresholded at 0.5 (inclusive).
double contactAccuracy(const FeatureSequence& pred, const FeatureSequence& gt);

struct MetricsReport {
  PoseErrors pose;
  VelocityErrors vel;
  double jitterPred = 0.0;
  double jitterRef = 0.0;
  double contactPct = 0.0;
  int frames = 0;
};

MetricsReport evaluateSequences(const Skeleton& skel, const FeatureSequence& pred,
                                const FeatureSequence& gt);

/// Aligned two-block text table (joint rows, then pelvis rows + contacts).
std::string metricsTable(const MetricsReport& report);
/// The same numbers as a single JSON object.
std::string metricsJson(const MetricsReport& report);

}  // namespace movin
