#pragma once

#include "movin/skeleton.hpp"

namespace movin {

/// Two-bone analytic IK on a grandparent/parent/child chain (hip/knee/ankle
/// or shoulder/elbow/wrist). Rewrites localRot[upper], localRot[lower] and
/// localRot[end] so the end joint reaches targetWorld with both bone lengths
/// intact and the end joint's world orientation unchanged. Targets outside
/// the reachable annulus are clamped to its boundary. The bend plane keeps
/// the chain's current plane and falls back to bendHintWorld (the direction
/// the middle joint should bow toward) when the chain is straight. Returns
/// true when the target was clamped.
bool solveTwoBoneIk(const Skeleton& skel, int upper, int lower, int end,
                    const Vec3& targetWorld, const Vec3& bendHintWorld, const Vec3& rootPos,
                    const Mat3& rootRot, std::vector<Mat3>& localRot);

}  // namespace movin
