#include <sys/socket.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "movin/bvh.hpp"
#include "movin/dataset.hpp"
#include "movin/inference.hpp"

using namespace movin;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exitCode = -1;
  std::string output;  // stdout and stderr combined
};

/// Runs the installed binary with the given argument string and captures
/// everything it prints. The path comes in at compile time so the test works
/// from any build directory.
CliResult runCli(const std::string& args) {
  const std::string cmd = std::string(MOVIN_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) res.output += buf;
  const int status = pclose(pipe);
  res.exitCode = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path freshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("movin_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Dataset + tiny trained checkpoint shared by the pipeline tests; generating
/// and training once keeps the suite fast.
struct Workspace {
  fs::path dir;
  fs::path dataset;
  fs::path runDir;
  fs::path checkpoint;
};

const Workspace& sharedWorkspace() {
  static const Workspace ws = [] {
    Workspace w;
    w.dir = freshDir("workspace");
    w.dataset = w.dir / "ds";
    w.runDir = w.dir / "run";
    w.checkpoint = w.runDir / "checkpoint_final.ckpt";

    const fs::path cfg = w.dir / "tiny.cfg";
    std::ofstream out(cfg);
    out << "model.channels = 16\n"
           "model.transformer_layers = 1\n"
           "model.transformer_heads = 4\n"
           "model.mlp_hidden = 32\n"
           "model.gating_hidden = 32\n"
           "model.n_experts = 2\n"
           "model.points_per_frame = 64\n"
           "train.epochs = 2\n"
           "train.rollout_len = 2\n"
           "train.batch_size = 2\n";
    out.close();

    const CliResult gen =
        runCli("gen-data " + w.dataset.string() +
               " --categories walk,idle --duration 3 --per-category 2"
               " --test-fraction 0.5 --seed 5");
    REQUIRE_MESSAGE(gen.exitCode == 0, gen.output);
    const CliResult train = runCli("train " + w.dataset.string() + " --out " +
                                   w.runDir.string() + " --config " + cfg.string() +
                                   " --seed 3");
    REQUIRE_MESSAGE(train.exitCode == 0, train.output);
    return w;
  }();
  return ws;
}

/// The eval command prints a table followed by a pretty-printed JSON object;
/// parse the object.
nlohmann::json tailJson(const std::string& output) {
  const std::size_t brace = output.find('{');
  REQUIRE(brace != std::string::npos);
  return nlohmann::json::parse(output.substr(brace));
}

}  // namespace

TEST_CASE("help and usage errors map to the documented exit codes") {
  CHECK(runCli("--help").exitCode == 0);
  CHECK(runCli("gen-data --help").exitCode == 0);
  CHECK(runCli("frobnicate").exitCode == 1);          // unknown subcommand
  CHECK(runCli("eval onlyone.bin").exitCode == 1);    // missing required arg
  CHECK(runCli("train --out x").exitCode == 1);       // missing positional
  CHECK(runCli("infer x.ckpt --bogus").exitCode == 1);
}

TEST_CASE("a missing input file is a runtime error, not a crash") {
  const CliResult res = runCli("eval nope.bin nope.bin");
  CHECK(res.exitCode == 2);
  CHECK(res.output.find("error:") != std::string::npos);

  CHECK(runCli("infer nope.ckpt --dataset nowhere --out x.bin").exitCode == 2);
  CHECK(runCli("gen-data /tmp/movin_cli_badcat --categories sprint").exitCode == 2);
}

TEST_CASE("gen-data writes a loadable dataset and is deterministic in the seed") {
  const Workspace& ws = sharedWorkspace();
  const Dataset ds = loadDataset(ws.dataset.string());
  REQUIRE(ds.sequences.size() == 4);
  std::vector<std::string> categories;
  for (const auto& rec : ds.sequences) categories.push_back(rec.category);
  CHECK(std::count(categories.begin(), categories.end(), "walk") == 2);
  CHECK(std::count(categories.begin(), categories.end(), "idle") == 2);
  CHECK(ds.splitIndices("test").size() == 2);
  for (const auto& rec : ds.sequences) CHECK(rec.frameCount() == 60);

  const fs::path again = freshDir("gen_again") / "ds";
  const CliResult rerun =
      runCli("gen-data " + again.string() +
             " --categories walk,idle --duration 3 --per-category 2"
             " --test-fraction 0.5 --seed 5");
  REQUIRE_MESSAGE(rerun.exitCode == 0, rerun.output);
  for (const char* file : {"manifest.json", "seq_walk_000.pc.bin", "seq_walk_000.pose.bin"})
    CHECK(slurp(ws.dataset / file) == slurp(again / file));
}

TEST_CASE("train writes the loss log and both checkpoints") {
  const Workspace& ws = sharedWorkspace();
  CHECK(fs::exists(ws.checkpoint));
  CHECK(fs::exists(ws.runDir / "checkpoint_latest.ckpt"));

  std::ifstream log(ws.runDir / "train_log.jsonl");
  REQUIRE(bool(log));
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    const auto entry = nlohmann::json::parse(line);
    CHECK(entry.at("epoch") == lines);
    CHECK(std::isfinite(entry.at("L_rec_local").get<double>()));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("infer writes a pose file covering the requested sequence") {
  const Workspace& ws = sharedWorkspace();
  const Dataset ds = loadDataset(ws.dataset.string());

  const fs::path out = ws.dir / "pred_default.bin";
  const CliResult res = runCli("infer " + ws.checkpoint.string() + " --dataset " +
                               ws.dataset.string() + " --out " + out.string());
  REQUIRE_MESSAGE(res.exitCode == 0, res.output);
  const FeatureSequence pred = loadPoseFile(out);
  const int firstTest = ds.splitIndices("test").front();
  CHECK(pred.frameCount() == ds.sequences[static_cast<std::size_t>(firstTest)].frameCount());
  CHECK(pred.local.front().jointCount() == ds.skeleton.jointCount());

  const fs::path byId = ws.dir / "pred_by_id.bin";
  const std::string id = ds.sequences.front().id;
  const CliResult named =
      runCli("infer " + ws.checkpoint.string() + " --dataset " + ws.dataset.string() +
             " --sequence " + id + " --out " + byId.string() + " --foot-ik");
  REQUIRE_MESSAGE(named.exitCode == 0, named.output);
  CHECK(loadPoseFile(byId).frameCount() == ds.sequences.front().frameCount());

  CHECK(runCli("infer " + ws.checkpoint.string() + " --dataset " + ws.dataset.string() +
               " --sequence no_such_seq --out x.bin")
            .exitCode == 2);
}

TEST_CASE("eval of a file against itself reports zero error and full contact") {
  const Workspace& ws = sharedWorkspace();
  const fs::path pose = ws.dir / "pred_default.bin";
  REQUIRE(fs::exists(pose));  // written by the infer test

  const CliResult res = runCli("eval " + pose.string() + " " + pose.string());
  REQUIRE_MESSAGE(res.exitCode == 0, res.output);
  CHECK(res.output.find("joint metrics") != std::string::npos);
  CHECK(res.output.find("Cont.") != std::string::npos);

  const auto report = tailJson(res.output);
  CHECK(report.at("mjpe_cm").get<double>() == 0.0);
  CHECK(report.at("mplve_cm_s").get<double>() == 0.0);
  CHECK(report.at("contact_pct").get<double>() == 100.0);

  const CliResult json = runCli("eval " + pose.string() + " " + pose.string() + " --json");
  REQUIRE(json.exitCode == 0);
  CHECK(json.output.front() == '{');
  CHECK(tailJson(json.output) == report);
}

TEST_CASE("export-bvh round-trips through the BVH reader") {
  const Workspace& ws = sharedWorkspace();
  const fs::path pose = ws.dir / "pred_default.bin";
  REQUIRE(fs::exists(pose));
  const fs::path bvh = ws.dir / "pred.bvh";

  const CliResult res =
      runCli("export-bvh " + pose.string() + " " + bvh.string() + " --scale 1.0");
  REQUIRE_MESSAGE(res.exitCode == 0, res.output);

  const MotionClip clip = readBvhFile(bvh.string());
  CHECK(clip.frames.size() == static_cast<std::size_t>(loadPoseFile(pose).frameCount()));
  CHECK(clip.skeleton.jointCount() == 21);
}

TEST_CASE("the stream server speaks the wire protocol over a loopback socket") {
  const Workspace& ws = sharedWorkspace();
  const std::string cmd = std::string(MOVIN_CLI_PATH) + " stream " + ws.checkpoint.string() +
                          " --port 0 --once 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);

  char line[256];
  REQUIRE(std::fgets(line, sizeof(line), pipe) != nullptr);
  const std::string banner(line);
  const std::size_t colon = banner.rfind(':');
  REQUIRE(colon != std::string::npos);
  const auto port = static_cast<std::uint16_t>(std::stoi(banner.substr(colon + 1)));

  const int fd = connectLocal(port);
  const int sent = 6;
  for (int t = 0; t < sent; ++t) {
    PointCloudFrame frame;
    frame.frameIndex = t;
    frame.points = Mat::Constant(32, 3, 0.5);
    frame.points.col(1).setConstant(1.0);
    REQUIRE(writeMessage(fd, encodeFramePayload(frame)));
  }
  ::shutdown(fd, SHUT_WR);

  std::vector<PoseFrame> poses;
  std::vector<std::uint8_t> payload;
  while (readMessage(fd, payload)) poses.push_back(decodePosePayload(payload));
  closeFd(fd);

  REQUIRE(!poses.empty());
  CHECK(poses.size() <= static_cast<std::size_t>(sent));
  for (std::size_t i = 1; i < poses.size(); ++i)
    CHECK(poses[i].frameIndex > poses[i - 1].frameIndex);
  CHECK(poses.front().local.jointCount() == 21);

  std::string rest;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) rest += buf;
  const int status = pclose(pipe);
  CHECK((WIFEXITED(status) && WEXITSTATUS(status) == 0));
  const auto report = tailJson(rest);
  CHECK(report.at("produced").get<int>() == sent);
  CHECK(report.at("processed").get<int>() + report.at("dropped").get<int>() == sent);
}
