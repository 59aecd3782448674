#pragma once

#include <string>
#include <vector>

#include "movin/common.hpp"
#include "movin/rotations.hpp"

namespace movin {

struct Joint {
  std::string name;
  int parent = -1;          // -1 for the root
  Vec3 offset = Vec3::Zero();  // meters, in the parent's frame
};

/// Joint hierarchy in topological order (parent index < joint index).
struct Skeleton {
  std::vector<Joint> joints;
  int leftFoot = -1;
  int rightFoot = -1;
  /// Body-part id per joint (contiguous ids starting at 0); drives the
  /// graph-conv pooling. Part 0 is the torso chain by convention.
  std::vector<int> bodyPart;

  int jointCount() const { return static_cast<int>(joints.size()); }
  int partCount() const;
  int indexOf(const std::string& name) const;  // -1 if absent

  /// Throws ValidationError on broken invariants: multiple/misplaced roots,
  /// non-topological parents, non-finite offsets, bad foot indices.
  void validate() const;

  /// Symmetrically normalized adjacency (self loops + parent-child edges):
  /// D^-1/2 (A + I) D^-1/2.
  Mat normalizedAdjacency() const;
};

/// 21-joint humanoid, meters, Y-up, rest pose = T-pose with the root at the
/// origin (stand height placed by the rest GlobalPoseFeature, not here).
Skeleton defaultSkeleton();

/// Same topology with every offset scaled by `scale` (body-size variation).
Skeleton scaledSkeleton(const Skeleton& base, double scale);

/// World (or root-relative) transform per joint.
struct JointStates {
  Mat positions;                // n_j x 3
  std::vector<Mat3> rotations;  // n_j

  int jointCount() const { return static_cast<int>(rotations.size()); }
};

/// Composes transforms down the hierarchy: joint i sits at
/// parent * (translate by localPos.row(i), rotate by localRot[i]).
/// With rootPos/rootRot the chain starts from that world transform;
/// the root-relative overload starts from identity.
JointStates forwardKinematics(const Skeleton& skel, const Mat& localPos,
                              const std::vector<Mat3>& localRot, const Vec3& rootPos,
                              const Mat3& rootRot);
JointStates forwardKinematics(const Skeleton& skel, const Mat& localPos,
                              const std::vector<Mat3>& localRot);

}  // namespace movin
