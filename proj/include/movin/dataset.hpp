#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "movin/features.hpp"
#include "movin/lidar.hpp"

namespace movin {

/// One supervised 20 Hz step: the point-cloud history at frame t plus pose
/// features at t-1 (autoregressive conditions) and t (targets).
struct TrainingExample {
  PointCloudHistory history;
  GlobalPoseFeature prevG;
  LocalPoseFeature prevX;
  GlobalPoseFeature curG;
  LocalPoseFeature curX;
};

/// One recorded sequence: raw per-frame scans plus the derived pose
/// features. Payloads are held at float32 precision (what the files store),
/// so a saved and reloaded record is bitwise-identical to the original.
struct SequenceRecord {
  std::string id;
  std::string category;
  std::string split;   // "train" or "test"
  double scale = 1.0;  // skeleton offset scale of this subject
  std::vector<PointCloudFrame> scans;  // ragged, one per frame
  FeatureSequence features;

  int frameCount() const { return features.frameCount(); }
};

/// Sequence collection plus the skeleton topology and sensor it was recorded
/// with. Loaded datasets are immutable by convention; writers own their
/// directory exclusively.
struct Dataset {
  Skeleton skeleton;
  SensorConfig sensor;
  std::vector<SequenceRecord> sequences;

  std::vector<int> splitIndices(const std::string& split) const;

  /// Throws ValidationError on duplicate ids, unknown category or split tag,
  /// scan/feature frame-count mismatch, or non-finite payloads.
  void validate() const;
};

/// Simulates one scan per clip frame (default body proxy, seeded per frame)
/// and pairs consecutive feature frames: one example per frame t >= 1 with
/// the history assembled per assembleHistory. Deterministic given the seed.
std::vector<TrainingExample> buildExamples(const MotionClip& clip, const SensorConfig& cfg,
                                           std::uint64_t seed,
                                           int targetPoints = kPointsPerFrame);

/// Same pairing over the stored scans of a record.
std::vector<TrainingExample> buildExamples(const SequenceRecord& rec, std::uint64_t seed,
                                           int targetPoints = kPointsPerFrame);

struct DatasetSpec {
  int sequencesPerCategory = 4;
  double durationS = 10.0;
  double testFraction = 0.25;  // tail of each category becomes the test split
  /// Subset of motionCategories() to generate; empty means all. A category's
  /// content only depends on the seed, not on which subset it is part of.
  std::vector<std::string> categories;
};

/// Procedural dataset over every motion category: per-sequence subject
/// scale drawn from +-10%, scans simulated with the given sensor.
Dataset generateDataset(const DatasetSpec& spec, const SensorConfig& sensor,
                        std::uint64_t seed);

/// Directory layout: manifest.json plus seq_<id>.pc.bin / seq_<id>.pose.bin
/// per sequence. Binary files carry an 8-byte magic ("MOVINPCD" clouds,
/// "MOVINPSE" poses), a version byte, a shape header and little-endian
/// float32 payloads; see the README for the exact byte layout.
void saveDataset(const Dataset& ds, const std::filesystem::path& dir);

/// Inverse of saveDataset. Throws BadMagicError / VersionError /
/// TruncatedError for the matching file defects, IoError for missing files
/// or trailing bytes, ValidationError for manifest inconsistencies.
Dataset loadDataset(const std::filesystem::path& dir);

/// Standalone pose files in the same "MOVINPSE" format the dataset uses
/// (float32 payload; a save/load round trip is lossless on saved data).
void savePoseFile(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence loadPoseFile(const std::filesystem::path& path);

}  // namespace movin
