#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "movin/bvh.hpp"
#include "movin/dataset.hpp"
#include "movin/inference.hpp"
#include "movin/metrics.hpp"
#include "movin/train.hpp"

namespace {

using namespace movin;

Config loadConfigFile(const std::string& path) {
  if (path.empty()) return Config();
  return Config::fromFile(path);
}

const SequenceRecord& pickSequence(const Dataset& ds, const std::string& id) {
  if (id.empty()) {
    const auto test = ds.splitIndices("test");
    const int idx = test.empty() ? 0 : test.front();
    if (ds.sequences.empty()) throw ValidationError("dataset has no sequences");
    return ds.sequences[static_cast<std::size_t>(idx)];
  }
  for (const auto& rec : ds.sequences)
    if (rec.id == id) return rec;
  throw ValidationError("no sequence with id " + id);
}

Skeleton stockSkeletonFor(const FeatureSequence& seq) {
  Skeleton skel = defaultSkeleton();
  if (seq.frameCount() < 1 || seq.local.front().jointCount() != skel.jointCount())
    throw ValidationError("pose file does not use the stock 21-joint skeleton");
  return skel;
}

int runGenData(const std::string& outDir, const std::string& categoriesCsv, double duration,
               int perCategory, double testFraction, std::uint64_t seed,
               const std::string& configPath) {
  DatasetSpec spec;
  spec.durationS = duration;
  spec.sequencesPerCategory = perCategory;
  spec.testFraction = testFraction;
  std::stringstream ss(categoriesCsv);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) spec.categories.push_back(item);
  const SensorConfig sensor = SensorConfig::fromConfig(loadConfigFile(configPath));

  const Dataset ds = generateDataset(spec, sensor, seed);
  saveDataset(ds, outDir);
  int frames = 0;
  for (const auto& rec : ds.sequences) frames += rec.frameCount();
  std::printf("wrote %zu sequences (%d frames) to %s\n", ds.sequences.size(), frames,
              outDir.c_str());
  return 0;
}

int runTrain(const std::string& datasetDir, const std::string& outDir,
             const std::string& configPath, std::uint64_t seed, int epochs, bool noPastPcd,
             bool noAutoregressive, int points) {
  const Dataset ds = loadDataset(datasetDir);
  const Config file = loadConfigFile(configPath);

  ModelConfig mcfg = ModelConfig::fromConfig(file);
  mcfg.nJoints = ds.skeleton.jointCount();
  if (noPastPcd) mcfg.historyLen = 1;  // "w/o past pcd": only the current cloud
  if (points > 0) mcfg.pointsPerFrame = points;

  TrainConfig tcfg = TrainConfig::fromConfig(file);
  tcfg.outDir = outDir;
  tcfg.seed = seed;
  if (epochs > 0) tcfg.epochs = epochs;
  if (noAutoregressive) tcfg.autoregressive = false;

  MovinModel<float> model(mcfg, ds.skeleton, seed);
  const auto logs = train(model, ds, tcfg);
  const EpochLog& last = logs.back();
  std::printf("trained %d epochs: L_rec_local %.6f L_rec_fk %.6f L_rec_global %.6f L_kl %.6f\n",
              static_cast<int>(logs.size()), last.recLocal, last.recFk, last.recGlobal,
              last.kl);
  std::printf("checkpoint: %s\n",
              (std::filesystem::path(outDir) / "checkpoint_final.ckpt").string().c_str());
  return 0;
}

int runInfer(const std::string& ckptPath, const std::string& datasetDir,
             const std::string& sequenceId, const std::string& outPath, bool footIk,
             bool sampleLatent, bool noAutoregressive, std::uint64_t seed) {
  const MovinModel<float> model = loadCheckpoint<float>(ckptPath);
  const Dataset ds = loadDataset(datasetDir);
  const SequenceRecord& rec = pickSequence(ds, sequenceId);

  SessionOptions opts;
  opts.footIk = footIk;
  opts.sampleLatent = sampleLatent;
  opts.autoregressive = !noAutoregressive;
  opts.seed = seed;
  Session session(model, opts);

  FeatureSequence pred;
  for (const PointCloudFrame& scan : rec.scans) {
    const PoseFrame pose = session.step(scan);
    pred.global.push_back(pose.global);
    pred.local.push_back(pose.local);
  }
  savePoseFile(outPath, pred);
  std::printf("inferred %d frames from %s: step p50 %.2f ms, p99 %.2f ms\n", pred.frameCount(),
              rec.id.c_str(), percentileMs(session.latenciesMs(), 0.5),
              percentileMs(session.latenciesMs(), 0.99));
  return 0;
}

int runStreamCmd(const std::string& ckptPath, std::uint16_t port, bool once, bool footIk,
                 bool sampleLatent, std::uint64_t seed, int queueCapacity) {
  const MovinModel<float> model = loadCheckpoint<float>(ckptPath);
  std::uint16_t bound = 0;
  const int listenFd = listenLocal(port, &bound);
  std::printf("listening on 127.0.0.1:%u\n", bound);
  std::fflush(stdout);

  do {
    const int clientFd = acceptClient(listenFd);
    SessionOptions opts;
    opts.footIk = footIk;
    opts.sampleLatent = sampleLatent;
    opts.seed = seed;
    Session session(model, opts);
    const StreamReport report =
        servePoseClient(session, clientFd, static_cast<std::size_t>(queueCapacity));
    closeFd(clientFd);
    std::printf(
        "{\"produced\": %d, \"processed\": %d, \"dropped\": %d, \"p50_ms\": %.3f, "
        "\"p99_ms\": %.3f}\n",
        report.produced, report.processed, report.dropped, report.p50Ms, report.p99Ms);
    std::fflush(stdout);
  } while (!once);
  closeFd(listenFd);
  return 0;
}

int runEval(const std::string& predPath, const std::string& gtPath, bool jsonOnly) {
  const FeatureSequence pred = loadPoseFile(predPath);
  const FeatureSequence gt = loadPoseFile(gtPath);
  const Skeleton skel = stockSkeletonFor(gt);
  const MetricsReport report = evaluateSequences(skel, pred, gt);
  if (!jsonOnly) std::fputs(metricsTable(report).c_str(), stdout);
  std::printf("%s\n", metricsJson(report).c_str());
  return 0;
}

int runExportBvh(const std::string& posePath, const std::string& outPath, double scale) {
  const FeatureSequence seq = loadPoseFile(posePath);
  Skeleton skel = stockSkeletonFor(seq);
  if (scale != 1.0) skel = scaledSkeleton(skel, scale);
  writeBvhFile(outPath, clipFromFeatures(skel, seq));
  std::printf("wrote %d frames to %s\n", seq.frameCount(), outPath.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-LiDAR motion capture pipeline"};
  app.require_subcommand(1);

  std::string outDir, categories, configPath, datasetDir, sequenceId, ckptPath, outPath;
  std::string predPath, gtPath, posePath;
  double duration = 10.0, testFraction = 0.25, scale = 1.0;
  int perCategory = 4, epochs = 0, points = 0, queueCapacity = 4;
  std::uint64_t seed = 0;
  std::uint16_t port = 0;
  bool noPastPcd = false, noAutoregressive = false, footIk = false, sampleLatent = false;
  bool once = false, jsonOnly = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic LiDAR mocap dataset");
  gen->add_option("out", outDir, "output directory")->required();
  gen->add_option("--categories", categories, "comma-separated categories (default: all)");
  gen->add_option("--duration", duration, "seconds per sequence");
  gen->add_option("--per-category", perCategory, "sequences per category");
  gen->add_option("--test-fraction", testFraction, "tail fraction placed in the test split");
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--config", configPath, "sensor config file");

  auto* tr = app.add_subcommand("train", "Train the pose model on a dataset directory");
  tr->add_option("dataset", datasetDir, "dataset directory")->required();
  tr->add_option("--out", outDir, "log/checkpoint directory")->required();
  tr->add_option("--config", configPath, "model/train config file");
  tr->add_option("--seed", seed, "model init and training seed");
  tr->add_option("--epochs", epochs, "override epoch count");
  tr->add_flag("--no-past-pcd", noPastPcd, "ablation: only the current point cloud");
  tr->add_flag("--no-autoregressive", noAutoregressive,
               "ablation: rest-pose conditions instead of previous outputs");
  tr->add_option("--points", points, "ablation: points per cloud (default 256)");

  auto* inf = app.add_subcommand("infer", "Run a checkpoint over one recorded sequence");
  inf->add_option("checkpoint", ckptPath, "checkpoint file")->required();
  inf->add_option("--dataset", datasetDir, "dataset directory")->required();
  inf->add_option("--sequence", sequenceId, "sequence id (default: first test sequence)");
  inf->add_option("--out", outPath, "output pose file")->required();
  inf->add_flag("--foot-ik", footIk, "contact-driven foot IK on emitted poses");
  inf->add_flag("--sample-latent", sampleLatent, "sample z instead of the prior mean");
  inf->add_flag("--no-autoregressive", noAutoregressive,
                "ablation: keep conditions at the initial pose");
  inf->add_option("--seed", seed, "latent/history sampling seed");

  auto* st = app.add_subcommand("stream", "Serve poses over a local socket");
  st->add_option("checkpoint", ckptPath, "checkpoint file")->required();
  st->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one)");
  st->add_flag("--once", once, "exit after the first client disconnects");
  st->add_flag("--foot-ik", footIk, "contact-driven foot IK on emitted poses");
  st->add_flag("--sample-latent", sampleLatent, "sample z instead of the prior mean");
  st->add_option("--seed", seed, "latent/history sampling seed");
  st->add_option("--queue", queueCapacity, "frame queue capacity (drop-oldest)");

  auto* ev = app.add_subcommand("eval", "Compare a predicted pose file against ground truth");
  ev->add_option("pred", predPath, "predicted pose file")->required();
  ev->add_option("gt", gtPath, "ground-truth pose file")->required();
  ev->add_flag("--json", jsonOnly, "machine-readable output only");

  auto* ex = app.add_subcommand("export-bvh", "Convert a pose file to BVH");
  ex->add_option("poses", posePath, "pose file")->required();
  ex->add_option("out", outPath, "BVH output path")->required();
  ex->add_option("--scale", scale, "skeleton offset scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return runGenData(outDir, categories, duration, perCategory, testFraction, seed,
                        configPath);
    if (tr->parsed())
      return runTrain(datasetDir, outDir, configPath, seed, epochs, noPastPcd,
                      noAutoregressive, points);
    if (inf->parsed())
      return runInfer(ckptPath, datasetDir, sequenceId, outPath, footIk, sampleLatent,
                      noAutoregressive, seed);
    if (st->parsed())
      return runStreamCmd(ckptPath, port, once, footIk, sampleLatent, seed, queueCapacity);
    if (ev->parsed()) return runEval(predPath, gtPath, jsonOnly);
    if (ex->parsed()) return runExportBvh(posePath, outPath, scale);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
