#pragma once

#include <iosfwd>
#include <string>

#include "movin/features.hpp"

namespace movin {

/// Writes a clip as BVH: Y-up right-handed coordinates in meters, a
/// 6-channel root (positions then Z/Y/X rotations in degrees) and 3-channel
/// ZYX rotations on every other joint, zero-length end sites on leaves.
void writeBvh(std::ostream& out, const MotionClip& clip);
void writeBvhFile(const std::string& path, const MotionClip& clip);

/// Reads a BVH compatible with writeBvh's layout (any per-joint channel
/// order is accepted; position channels add to the joint offset). Joint
/// names must be the ones the stock skeleton uses, which is how foot and
/// body-part metadata are recovered. Throws IoError on malformed files and
/// ValidationError on unsupported skeletons.
MotionClip readBvh(std::istream& in);
MotionClip readBvhFile(const std::string& path);

}  // namespace movin
