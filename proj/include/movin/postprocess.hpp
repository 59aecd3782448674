#pragma once

#include <utility>

#include "movin/features.hpp"
#include "movin/ik.hpp"

namespace movin {

/// Thresholds the predicted contact probabilities at 0.5 (inclusive).
/// Returns (left, right).
std::pair<bool, bool> detectContacts(const GlobalPoseFeature& g);

struct FootIkOptions {
  /// Per-frame blend toward the raw foot position; 0 pins the foot at the
  /// previous corrected position, 1 disables the correction.
  double alpha = 0.2;
};

struct FootIkResult {
  LocalPoseFeature pose;
  bool leftClamped = false;   // target was outside the leg's reach
  bool rightClamped = false;
};

/// Contact-driven foot-sliding cleanup. For each contacting foot the world
/// ankle target is lerp(previous corrected ankle, raw ankle, alpha); a
/// two-bone hip/knee IK reaches it using the pose's own bone geometry, so
/// feature-space bone lengths are untouched. Non-contacting legs and the
/// root pass through unchanged.
FootIkResult applyFootIk(const Skeleton& skel, const LocalPoseFeature& raw,
                         const GlobalPoseFeature& g, bool leftContact, bool rightContact,
                         const LocalPoseFeature& prevCorrected, const GlobalPoseFeature& prevG,
                         const FootIkOptions& opts = {});

}  // namespace movin
