#include "movin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <utility>

#include "json.hpp"
#include "movin/io.hpp"
#include "movin/motion_gen.hpp"
#include "movin/rng.hpp"

namespace movin {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint8_t kBinVersion = 1;
constexpr int kManifestVersion = 1;
constexpr char kCloudMagic[9] = "MOVINPCD";
constexpr char kPoseMagic[9] = "MOVINPSE";

// Sub-stream tags under one sequence seed; forked so the per-frame scan and
// per-example history draws never share state.
constexpr std::uint64_t kScaleTag = 0;
constexpr std::uint64_t kClipTag = 1;
constexpr std::uint64_t kScanTag = 2;
constexpr std::uint64_t kHistoryTag = 3;

/// Payloads live at float32 precision so the binary files round-trip
/// bitwise.
Mat snapF32(const Mat& m) { return m.cast<float>().cast<double>(); }

void snapF32(FeatureSequence& seq) {
  for (auto& g : seq.global) g.data = g.data.cast<float>().cast<double>().eval();
  for (auto& x : seq.local) x.data = snapF32(x.data);
}

std::vector<TrainingExample> pairExamples(const std::vector<PointCloudFrame>& scans,
                                          const FeatureSequence& feats, Rng histRng,
                                          int targetPoints) {
  std::vector<TrainingExample> out;
  out.reserve(scans.empty() ? 0 : scans.size() - 1);
  for (int t = 1; t < static_cast<int>(scans.size()); ++t) {
    TrainingExample ex;
    ex.history = assembleHistory(scans, t, histRng.fork(static_cast<std::uint64_t>(t)).next(),
                                 targetPoints);
    ex.prevG = feats.global[t - 1];
    ex.prevX = feats.local[t - 1];
    ex.curG = feats.global[t];
    ex.curX = feats.local[t];
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<PointCloudFrame> simulateClipScans(const MotionClip& clip, const SensorConfig& cfg,
                                               Rng scanRng) {
  const BodyProxy proxy = defaultProxy(clip.skeleton);
  std::vector<PointCloudFrame> scans;
  scans.reserve(clip.frames.size());
  for (int f = 0; f < clip.frameCount(); ++f)
    scans.push_back(simulateScan(proxy, clip.skeleton, clipFrameStates(clip, f), cfg,
                                 scanRng.fork(static_cast<std::uint64_t>(f)).next(), f));
  return scans;
}

json sensorToJson(const SensorConfig& s) {
  json j;
  j["position"] = {s.position[0], s.position[1], s.position[2]};
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(s.orientation(r, c));
  j["orientation"] = rot;
  j["h_fov_deg"] = s.hFovDeg;
  j["v_fov_deg"] = s.vFovDeg;
  j["h_res"] = s.hRes;
  j["v_res"] = s.vRes;
  j["rate_hz"] = s.rateHz;
  j["max_range"] = s.maxRange;
  j["noise_sigma"] = s.noiseSigma;
  return j;
}

SensorConfig sensorFromJson(const json& j) {
  SensorConfig s;
  const auto& pos = j.at("position");
  s.position = Vec3(pos.at(0), pos.at(1), pos.at(2));
  const auto& rot = j.at("orientation");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s.orientation(r, c) = rot.at(3 * r + c);
  s.hFovDeg = j.at("h_fov_deg");
  s.vFovDeg = j.at("v_fov_deg");
  s.hRes = j.at("h_res");
  s.vRes = j.at("v_res");
  s.rateHz = j.at("rate_hz");
  s.maxRange = j.at("max_range");
  s.noiseSigma = j.at("noise_sigma");
  return s;
}

json skeletonToJson(const Skeleton& skel) {
  json j;
  j["joints"] = json::array();
  for (const auto& jt : skel.joints) {
    json e;
    e["name"] = jt.name;
    e["parent"] = jt.parent;
    e["offset"] = {jt.offset[0], jt.offset[1], jt.offset[2]};
    j["joints"].push_back(e);
  }
  j["left_foot"] = skel.leftFoot;
  j["right_foot"] = skel.rightFoot;
  j["body_part"] = skel.bodyPart;
  return j;
}

Skeleton skeletonFromJson(const json& j) {
  Skeleton skel;
  for (const auto& e : j.at("joints")) {
    Joint jt;
    jt.name = e.at("name").get<std::string>();
    jt.parent = e.at("parent");
    const auto& off = e.at("offset");
    jt.offset = Vec3(off.at(0), off.at(1), off.at(2));
    skel.joints.push_back(std::move(jt));
  }
  skel.leftFoot = j.at("left_foot");
  skel.rightFoot = j.at("right_foot");
  skel.bodyPart = j.at("body_part").get<std::vector<int>>();
  skel.validate();
  return skel;
}

void writeClouds(const std::string& path, const SequenceRecord& rec) {
  BinaryWriter w(path);
  w.magic(kCloudMagic);
  w.u8(kBinVersion);
  w.u32(static_cast<std::uint32_t>(rec.scans.size()));
  for (const auto& pf : rec.scans) w.u32(static_cast<std::uint32_t>(pf.pointCount()));
  for (const auto& pf : rec.scans) w.matrixF32(pf.points);
  w.close();
}

std::vector<PointCloudFrame> readClouds(const std::string& path) {
  BinaryReader r(path);
  r.expectMagic(kCloudMagic);
  r.expectVersion(kBinVersion);
  const std::uint32_t frames = r.u32();
  if (frames > (1u << 24)) throw IoError("unreasonable frame count in " + path);
  std::vector<std::uint32_t> counts(frames);
  for (auto& c : counts) {
    c = r.u32();
    if (c > (1u << 24)) throw IoError("unreasonable point count in " + path);
  }
  std::vector<PointCloudFrame> scans(frames);
  for (std::uint32_t f = 0; f < frames; ++f) {
    scans[f].points = r.matrixF32(counts[f], 3);
    scans[f].frameIndex = static_cast<int>(f);
  }
  if (!r.atEnd()) throw IoError("trailing bytes in " + path);
  return scans;
}

void writePoses(const std::string& path, const SequenceRecord& rec) {
  savePoseFile(path, rec.features);
}

FeatureSequence readPoses(const std::string& path) { return loadPoseFile(path); }

}  // namespace

void savePoseFile(const std::filesystem::path& path, const FeatureSequence& seq) {
  BinaryWriter w(path.string());
  w.magic(kPoseMagic);
  w.u8(kBinVersion);
  const int jointCount = seq.local.empty() ? 0 : seq.local.front().jointCount();
  w.u32(static_cast<std::uint32_t>(seq.frameCount()));
  w.u32(17);
  w.u32(static_cast<std::uint32_t>(jointCount));
  w.u32(15);
  for (int f = 0; f < seq.frameCount(); ++f) {
    w.matrixF32(seq.global[f].data.transpose());
    w.matrixF32(seq.local[f].data);
  }
  w.close();
}

FeatureSequence loadPoseFile(const std::filesystem::path& path) {
  BinaryReader r(path.string());
  r.expectMagic(kPoseMagic);
  r.expectVersion(kBinVersion);
  const std::uint32_t frames = r.u32();
  if (frames > (1u << 24)) throw IoError("unreasonable frame count in " + path.string());
  const std::uint32_t gWidth = r.u32();
  const std::uint32_t xRows = r.u32();
  const std::uint32_t xCols = r.u32();
  if (gWidth != 17 || xCols != 15 || xRows == 0 || xRows > 1024)
    throw ValidationError("unexpected feature shape in " + path.string());
  FeatureSequence seq;
  seq.global.resize(frames);
  seq.local.resize(frames);
  for (std::uint32_t f = 0; f < frames; ++f) {
    seq.global[f].data = r.matrixF32(1, 17).transpose();
    seq.local[f].data = r.matrixF32(xRows, 15);
  }
  if (!r.atEnd()) throw IoError("trailing bytes in " + path.string());
  return seq;
}

std::vector<int> Dataset::splitIndices(const std::string& split) const {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(sequences.size()); ++i)
    if (sequences[i].split == split) idx.push_back(i);
  return idx;
}

void Dataset::validate() const {
  skeleton.validate();
  sensor.validate();
  std::set<std::string> ids;
  for (const auto& rec : sequences) {
    if (!ids.insert(rec.id).second) throw ValidationError("duplicate sequence id: " + rec.id);
    categoryFamily(rec.category);  // rejects unknown categories
    if (rec.split != "train" && rec.split != "test")
      throw ValidationError("unknown split tag '" + rec.split + "' in " + rec.id);
    if (!std::isfinite(rec.scale) || rec.scale <= 0.0)
      throw ValidationError("bad subject scale in " + rec.id);
    if (rec.frameCount() < 2)
      throw ValidationError("sequence " + rec.id + " has fewer than 2 frames");
    if (static_cast<int>(rec.scans.size()) != rec.frameCount())
      throw ValidationError("scan/feature frame mismatch in " + rec.id);
    for (const auto& pf : rec.scans) {
      if (pf.points.cols() != 3 || !pf.points.allFinite())
        throw ValidationError("bad point cloud payload in " + rec.id);
    }
    for (int f = 0; f < rec.frameCount(); ++f) {
      if (!rec.features.global[f].data.allFinite() || !rec.features.local[f].data.allFinite())
        throw ValidationError("non-finite feature payload in " + rec.id);
      if (rec.features.local[f].jointCount() != skeleton.jointCount())
        throw ValidationError("feature joint count mismatch in " + rec.id);
    }
  }
}

std::vector<TrainingExample> buildExamples(const MotionClip& clip, const SensorConfig& cfg,
                                           std::uint64_t seed, int targetPoints) {
  clip.validate();
  cfg.validate();
  Rng root(seed);
  const auto scans = simulateClipScans(clip, cfg, root.fork(kScanTag));
  return pairExamples(scans, deriveFeatures(clip), root.fork(kHistoryTag), targetPoints);
}

std::vector<TrainingExample> buildExamples(const SequenceRecord& rec, std::uint64_t seed,
                                           int targetPoints) {
  if (static_cast<int>(rec.scans.size()) != rec.frameCount() || rec.frameCount() < 2)
    throw ValidationError("buildExamples: malformed sequence record " + rec.id);
  return pairExamples(rec.scans, rec.features, Rng(seed).fork(kHistoryTag), targetPoints);
}

Dataset generateDataset(const DatasetSpec& spec, const SensorConfig& sensor,
                        std::uint64_t seed) {
  if (spec.sequencesPerCategory < 1)
    throw ValidationError("generateDataset: need at least one sequence per category");
  if (!(spec.testFraction >= 0.0 && spec.testFraction <= 1.0))
    throw ValidationError("generateDataset: test fraction must lie in [0, 1]");
  sensor.validate();

  Dataset ds;
  ds.skeleton = defaultSkeleton();
  ds.sensor = sensor;
  Rng root(seed);
  const auto& all = motionCategories();
  std::vector<std::size_t> chosen;
  if (spec.categories.empty()) {
    for (std::size_t ci = 0; ci < all.size(); ++ci) chosen.push_back(ci);
  } else {
    for (const std::string& name : spec.categories) {
      const auto it = std::find(all.begin(), all.end(), name);
      if (it == all.end())
        throw ValidationError("generateDataset: unknown category " + name);
      chosen.push_back(static_cast<std::size_t>(it - all.begin()));
    }
  }
  const int n = spec.sequencesPerCategory;
  const int nTest = std::min<int>(n, static_cast<int>(std::lround(spec.testFraction * n)));
  for (const std::size_t ci : chosen) {
    const std::string& category = all[ci];
    Rng catRng = root.fork(ci);
    for (int k = 0; k < n; ++k) {
      Rng seqRng = catRng.fork(static_cast<std::uint64_t>(k));
      SequenceRecord rec;
      char idBuf[64];
      std::snprintf(idBuf, sizeof idBuf, "%s_%03d", category.c_str(), k);
      rec.id = idBuf;
      rec.category = category;
      rec.split = (k >= n - nTest) ? "test" : "train";
      rec.scale = seqRng.fork(kScaleTag).uniform(0.9, 1.1);
      const MotionClip clip = generateSequence(category, spec.durationS,
                                               seqRng.fork(kClipTag).next(),
                                               GenerateOptions{0.0, rec.scale});
      rec.scans = simulateClipScans(clip, sensor, seqRng.fork(kScanTag));
      for (auto& pf : rec.scans) pf.points = snapF32(pf.points);
      rec.features = deriveFeatures(clip);
      snapF32(rec.features);
      ds.sequences.push_back(std::move(rec));
    }
  }
  ds.validate();
  return ds;
}

void saveDataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format"] = "movin-dataset";
  manifest["version"] = kManifestVersion;
  manifest["skeleton"] = skeletonToJson(ds.skeleton);
  manifest["sensor"] = sensorToJson(ds.sensor);
  manifest["sequences"] = json::array();
  for (const auto& rec : ds.sequences) {
    json e;
    e["id"] = rec.id;
    e["category"] = rec.category;
    e["split"] = rec.split;
    e["scale"] = rec.scale;
    e["frames"] = rec.frameCount();
    manifest["sequences"].push_back(e);
    writeClouds((dir / ("seq_" + rec.id + ".pc.bin")).string(), rec);
    writePoses((dir / ("seq_" + rec.id + ".pose.bin")).string(), rec);
  }

  const auto manifestPath = dir / "manifest.json";
  std::ofstream out(manifestPath);
  if (!out) throw IoError("cannot open for writing: " + manifestPath.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + manifestPath.string());
}

Dataset loadDataset(const std::filesystem::path& dir) {
  const auto manifestPath = dir / "manifest.json";
  std::ifstream in(manifestPath);
  if (!in) throw IoError("cannot open for reading: " + manifestPath.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("manifest parse error in " + manifestPath.string() + ": " + e.what());
  }

  Dataset ds;
  struct Entry {
    std::string id, category, split;
    double scale = 1.0;
    int frames = 0;
  };
  std::vector<Entry> entries;
  try {
    if (manifest.at("format").get<std::string>() != "movin-dataset")
      throw BadMagicError("not a dataset manifest: " + manifestPath.string());
    if (manifest.at("version").get<int>() != kManifestVersion)
      throw VersionError("unsupported dataset manifest version in " + manifestPath.string());
    ds.skeleton = skeletonFromJson(manifest.at("skeleton"));
    ds.sensor = sensorFromJson(manifest.at("sensor"));
    for (const auto& e : manifest.at("sequences"))
      entries.push_back({e.at("id").get<std::string>(), e.at("category").get<std::string>(),
                         e.at("split").get<std::string>(), e.at("scale").get<double>(),
                         e.at("frames").get<int>()});
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + manifestPath.string() + ": " + e.what());
  }

  for (const auto& entry : entries) {
    SequenceRecord rec;
    rec.id = entry.id;
    rec.category = entry.category;
    rec.split = entry.split;
    rec.scale = entry.scale;
    rec.scans = readClouds((dir / ("seq_" + entry.id + ".pc.bin")).string());
    rec.features = readPoses((dir / ("seq_" + entry.id + ".pose.bin")).string());
    if (static_cast<int>(rec.scans.size()) != entry.frames ||
        rec.features.frameCount() != entry.frames)
      throw ValidationError("stored frame count of sequence " + entry.id +
                            " disagrees with the manifest");
    ds.sequences.push_back(std::move(rec));
  }
  ds.validate();
  return ds;
}

}  // namespace movin
