#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "movin/features.hpp"
#include "movin/model.hpp"
#include "movin/rng.hpp"

using namespace movin;

namespace {

Mat randomMat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  return m;
}

ModelConfig smallConfig() {
  ModelConfig c;
  c.channels = 16;
  c.transformerLayers = 2;
  c.transformerHeads = 4;
  c.mlpHidden = 32;
  c.gatingHidden = 32;
  c.nExperts = 4;
  c.pointsPerFrame = 64;
  return c;
}

/// Four-joint chain with two body parts; small enough for finite-difference
/// sweeps over the whole network.
Skeleton tinySkeleton() {
  Skeleton s;
  s.joints.push_back({"Root", -1, Vec3(0.0, 0.9, 0.0)});
  s.joints.push_back({"Mid", 0, Vec3(0.0, 0.2, 0.0)});
  s.joints.push_back({"TipA", 1, Vec3(0.1, 0.1, 0.0)});
  s.joints.push_back({"TipB", 1, Vec3(-0.1, 0.1, 0.0)});
  s.leftFoot = 2;
  s.rightFoot = 3;
  s.bodyPart = {0, 0, 1, 1};
  s.validate();
  return s;
}

ModelConfig tinyConfig() {
  ModelConfig c;
  c.channels = 8;
  c.transformerLayers = 1;
  c.transformerHeads = 2;
  c.mlpHidden = 16;
  c.gatingHidden = 16;
  c.nExperts = 2;
  c.nJoints = 4;
  c.pointsPerFrame = 16;
  c.historyLen = 2;
  c.saStages = 1;
  return c;
}

PointCloudHistory randomHistory(int points, Rng& rng) {
  PointCloudHistory h;
  for (auto& cloud : h.clouds) cloud = randomMat(points, 3, rng);
  return h;
}

LocalPoseFeature randomLocal(const Skeleton& skel, Rng& rng) {
  LocalPoseFeature x = restLocalPose(skel);
  x.data += randomMat(x.data.rows(), x.data.cols(), rng, 0.2);
  return x;
}

GlobalPoseFeature randomGlobal(Rng& rng) {
  GlobalPoseFeature g;
  for (Eigen::Index i = 0; i < g.data.size(); ++i) g.data(i) = 0.3 * rng.normal();
  return g;
}

TrainingExample syntheticExample(const Skeleton& skel, int points, std::uint64_t seed) {
  Rng rng(seed);
  TrainingExample ex;
  ex.history = randomHistory(points, rng);
  ex.prevX = randomLocal(skel, rng);
  ex.curX = randomLocal(skel, rng);
  ex.prevG = randomGlobal(rng);
  ex.curG = randomGlobal(rng);
  return ex;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("sa schedule follows the pyramid") {
  const ModelConfig cfg;  // 256 points, 3 stages, 64 channels
  const auto stages = saSchedule(cfg);
  REQUIRE(stages.size() == 3);
  CHECK(stages[0].centroids == 64);
  CHECK(stages[1].centroids == 16);
  CHECK(stages[2].centroids == 1);
  CHECK(stages[0].groupSize == 16);
  CHECK(stages[1].groupSize == 16);
  CHECK(stages[2].groupSize == 16);  // everything that is left
  CHECK(stages[0].radius == doctest::Approx(0.2));
  CHECK(stages[1].radius == doctest::Approx(0.6));
  CHECK(std::isinf(stages[2].radius));
  CHECK(stages[0].inWidth == 3);
  CHECK(stages[1].inWidth == 3 + 32);
  CHECK(stages[2].inWidth == 3 + 64);
  CHECK(stages[0].hidden == 32);
  CHECK(stages[0].outWidth == 32);
  CHECK(stages[1].outWidth == 64);
  CHECK(stages[2].hidden == 64);
  CHECK(stages[2].outWidth == 64);

  ModelConfig flat = tinyConfig();
  const auto single = saSchedule(flat);
  REQUIRE(single.size() == 1);
  CHECK(single[0].centroids == 1);
  CHECK(single[0].groupSize == flat.pointsPerFrame);
  CHECK(std::isinf(single[0].radius));
  CHECK(single[0].hidden == flat.channels);
  CHECK(single[0].outWidth == flat.channels);
}

TEST_CASE("config validation rejects inconsistent settings") {
  auto broken = [](auto&& mutate) {
    ModelConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ValidationError);
  };
  broken([](ModelConfig& c) { c.channels = 15; });
  broken([](ModelConfig& c) { c.transformerHeads = 5; });  // does not divide 64
  broken([](ModelConfig& c) { c.pointsPerFrame = 100; });  // not a multiple of 16
  broken([](ModelConfig& c) { c.historyLen = 0; });
  broken([](ModelConfig& c) { c.historyLen = kHistoryLen + 1; });
  broken([](ModelConfig& c) { c.saStages = 4; });
  broken([](ModelConfig& c) { c.nExperts = 0; });

  const Config file = Config::fromString("model.channels = 32\nmodel.sa_stages = 2\n");
  const ModelConfig m = ModelConfig::fromConfig(file);
  CHECK(m.channels == 32);
  CHECK(m.saStages == 2);
  CHECK(m.transformerLayers == 2);
  CHECK(m.pointsPerFrame == kPointsPerFrame);
}

TEST_CASE("point encoder emits one row per history frame") {
  const ModelConfig cfg;  // full-size defaults
  const Skeleton skel = defaultSkeleton();
  MovinModelF model(cfg, skel, 1);
  Rng rng(2);
  const PointCloudHistory history = randomHistory(cfg.pointsPerFrame, rng);

  ModelPass<float> pass(model);
  const int fp = pass.embedPointCloud(history);
  CHECK(pass.tape().val(fp).rows() == 5);
  CHECK(pass.tape().val(fp).cols() == 64);
  CHECK(pass.tape().val(fp).allFinite());

  ModelConfig current = cfg;
  current.historyLen = 1;
  MovinModelF single(current, skel, 1);
  ModelPass<float> singlePass(single);
  const int one = singlePass.embedPointCloud(history);
  CHECK(singlePass.tape().val(one).rows() == 1);
  CHECK(singlePass.tape().val(one).cols() == 64);
}

TEST_CASE("point encoder is invariant to point order") {
  const ModelConfig cfg = smallConfig();
  MovinModelF model(cfg, defaultSkeleton(), 3);
  Rng rng(4);
  PointCloudHistory history = randomHistory(cfg.pointsPerFrame, rng);
  history.clouds[0].row(5) = history.clouds[0].row(9);  // duplicates must not break ties
  history.clouds[1].row(7).setZero();                   // padding-like rows

  ModelPass<float> pass(model);
  const Eigen::MatrixXf base = pass.tape().val(pass.embedPointCloud(history));

  PointCloudHistory shuffled = history;
  Rng shuffleRng(5);
  for (auto& cloud : shuffled.clouds) {
    for (Eigen::Index i = cloud.rows() - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(
          shuffleRng.uniformInt(static_cast<std::uint64_t>(i) + 1));
      cloud.row(i).swap(cloud.row(j));
    }
  }
  REQUIRE(shuffled.clouds[0] != history.clouds[0]);

  ModelPass<float> pass2(model);
  const Eigen::MatrixXf permuted = pass2.tape().val(pass2.embedPointCloud(history));
  const Eigen::MatrixXf permuted2 = pass2.tape().val(pass2.embedPointCloud(shuffled));
  CHECK((permuted - base).cwiseAbs().maxCoeff() == 0.0f);  // same pass, same input
  CHECK((permuted2 - base).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("all-zero clouds embed to finite values") {
  const ModelConfig cfg = smallConfig();
  MovinModelF model(cfg, defaultSkeleton(), 6);
  PointCloudHistory history;
  for (auto& cloud : history.clouds) cloud = Mat::Zero(cfg.pointsPerFrame, 3);
  ModelPass<float> pass(model);
  const int fp = pass.embedPointCloud(history);
  CHECK(pass.tape().val(fp).allFinite());
}

TEST_CASE("local embed pools by body part") {
  const Skeleton skel = defaultSkeleton();
  ModelConfig cfg = smallConfig();
  MovinModelF model(cfg, skel, 7);
  Rng rng(8);
  const LocalPoseFeature x1 = randomLocal(skel, rng);
  LocalPoseFeature x2 = x1;
  const int hand = skel.indexOf("LeftHand");
  REQUIRE(hand >= 0);
  x2.data.row(hand).array() += 0.3;
  const int handPart = skel.bodyPart[static_cast<std::size_t>(hand)];

  ModelPass<float> pass(model);
  const Eigen::MatrixXf a = pass.tape().val(pass.embedLocalPooled(x1.data));
  const Eigen::MatrixXf b = pass.tape().val(pass.embedLocalPooled(x2.data));
  REQUIRE(a.rows() == skel.partCount());
  REQUIRE(a.cols() == cfg.channels);
  for (int p = 0; p < skel.partCount(); ++p) {
    const float diff = (a.row(p) - b.row(p)).cwiseAbs().maxCoeff();
    if (p == handPart)
      CHECK(diff > 0.0f);
    else
      CHECK(diff == 0.0f);
  }
}

TEST_CASE("zero pose with zero biases embeds to zero") {
  const Skeleton skel = defaultSkeleton();
  MovinModelF model(smallConfig(), skel, 9);
  model.params().value("gc.b").setZero();
  model.params().value("lproj.b").setZero();
  ModelPass<float> pass(model);
  const int fx = pass.embedLocalPose(Mat::Zero(skel.jointCount(), 15));
  CHECK(pass.tape().val(fx).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("posterior emits clamped moments and attends to order") {
  const ModelConfig cfg = smallConfig();
  const Skeleton skel = defaultSkeleton();
  MovinModelF model(cfg, skel, 10);
  CHECK(model.params().value("post.pos").rows() == 11);  // mu, sigma, 5 cloud rows, 4 poses

  Rng rng(11);
  const PointCloudHistory history = randomHistory(cfg.pointsPerFrame, rng);
  const LocalPoseFeature xPrev = randomLocal(skel, rng);
  const LocalPoseFeature xCur = randomLocal(skel, rng);
  const GlobalPoseFeature gPrev = randomGlobal(rng);
  const GlobalPoseFeature gCur = randomGlobal(rng);

  ModelPass<float> pass(model);
  const int fp = pass.embedPointCloud(history);
  const int fxPrev = pass.embedLocalPose(xPrev.data);
  const int fgPrev = pass.embedGlobalPose(gPrev);
  const int fxCur = pass.embedLocalPose(xCur.data);
  const int fgCur = pass.embedGlobalPose(gCur);
  const auto [mu, logSigma] = pass.encodePosterior(fp, fxPrev, fgPrev, fxCur, fgCur);
  CHECK(pass.tape().val(mu).rows() == 1);
  CHECK(pass.tape().val(mu).cols() == cfg.channels);
  CHECK(pass.tape().val(logSigma).minCoeff() >= -10.0f);
  CHECK(pass.tape().val(logSigma).maxCoeff() <= 4.0f);
  CHECK(pass.tape().val(mu).allFinite());

  // Swapping which slot an embedding occupies must change the statistics:
  // the learned positional rows break the symmetry.
  const auto [muSwap, lsSwap] = pass.encodePosterior(fp, fxCur, fgPrev, fxPrev, fgCur);
  CHECK((pass.tape().val(mu) - pass.tape().val(muSwap)).norm() > 1e-6f);
  (void)lsSwap;
}

TEST_CASE("latent sampling is reparameterized") {
  const Vec mu = Vec::Zero(4);
  const Vec logSigma = Vec::Zero(4);
  Rng rng(12);
  double sum = 0.0;
  double sumSq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const LatentSample s = sampleLatent(mu, logSigma, rng);
    sum += s.z.sum();
    sumSq += s.z.squaredNorm();
  }
  const double n = 4.0 * draws;
  const double mean = sum / n;
  const double var = sumSq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);

  // A collapsed sigma reduces the draw to the mean.
  Vec muShift = Vec::LinSpaced(4, 1.0, 4.0);
  Rng rng2(13);
  const LatentSample tight = sampleLatent(muShift, Vec::Constant(4, -1e9), rng2);
  CHECK((tight.z - muShift).cwiseAbs().maxCoeff() < 1e-4);

  Rng a(14), b(14);
  CHECK(sampleLatent(mu, logSigma, a).z == sampleLatent(mu, logSigma, b).z);
  CHECK_THROWS_AS(sampleLatent(mu, Vec::Zero(3), rng), ValidationError);
}

TEST_CASE("gating is a softmax over experts") {
  const ModelConfig cfg = smallConfig();
  MovinModelF model(cfg, defaultSkeleton(), 15);
  ModelPass<float> pass(model);
  Rng rng(16);
  for (int trial = 0; trial < 5; ++trial) {
    const int cond = pass.tape().constant(
        randomMat(1, cfg.conditionWidth(), rng, 2.0).cast<float>());
    const auto w = pass.tape().val(pass.gating(cond));
    REQUIRE(w.cols() == cfg.nExperts);
    CHECK(w.minCoeff() >= 0.0f);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("identical experts make the gating irrelevant") {
  const ModelConfig cfg = smallConfig();
  MovinModelF model(cfg, defaultSkeleton(), 17);
  auto& store = model.params();
  for (int k = 1; k < cfg.nExperts; ++k)
    for (const char* part : {".w1", ".b1", ".w2", ".b2", ".w3", ".b3"})
      store.value("expert" + std::to_string(k) + part) = store.value("expert0" + std::string(part));

  Rng rng(18);
  const Mat z = randomMat(1, cfg.channels, rng);
  const Mat fp = randomMat(cfg.historyLen, cfg.channels, rng);
  const Mat fx = randomMat(1, cfg.channels, rng);
  const Mat fg = randomMat(1, cfg.channels, rng);

  auto decode = [&](MovinModelF& m, Eigen::MatrixXf* gate) {
    ModelPass<float> pass(m);
    auto& t = pass.tape();
    const int fd = pass.decodeMoe(t.constant(z.cast<float>()), t.constant(fp.cast<float>()),
                                  t.constant(fx.cast<float>()), t.constant(fg.cast<float>()));
    if (gate) {
      const int cond = pass.conditionVector(t.constant(z.cast<float>()),
                                            t.constant(fp.cast<float>()),
                                            t.constant(fx.cast<float>()),
                                            t.constant(fg.cast<float>()));
      *gate = t.val(pass.gating(cond));
    }
    return Eigen::MatrixXf(t.val(fd));
  };

  Eigen::MatrixXf gate1, gate2;
  const Eigen::MatrixXf fd1 = decode(model, &gate1);
  store.value("gate.b3") += Eigen::MatrixXf::Constant(1, cfg.nExperts, 1.5f).eval();
  store.value("gate.b3")(0, 0) -= 3.0f;  // actually move the distribution
  const Eigen::MatrixXf fd2 = decode(model, &gate2);
  CHECK((gate1 - gate2).cwiseAbs().maxCoeff() > 1e-3f);
  CHECK((fd1 - fd2).cwiseAbs().maxCoeff() < 1e-4f);
}

TEST_CASE("decoder and expanders produce pose features") {
  const ModelConfig cfg = smallConfig();
  const Skeleton skel = defaultSkeleton();
  MovinModelF model(cfg, skel, 19);
  ModelPass<float> pass(model);
  auto& t = pass.tape();
  Rng rng(20);

  const int fd = pass.decodeMoe(t.constant(randomMat(1, cfg.channels, rng).cast<float>()),
                                t.constant(randomMat(cfg.historyLen, cfg.channels, rng).cast<float>()),
                                t.constant(randomMat(1, cfg.channels, rng).cast<float>()),
                                t.constant(randomMat(1, cfg.channels, rng).cast<float>()));
  CHECK(t.val(fd).rows() == 1);
  CHECK(t.val(fd).cols() == 2 * cfg.channels);

  for (int trial = 0; trial < 10; ++trial) {
    const int wild = t.constant(randomMat(1, 2 * cfg.channels, rng, 5.0).cast<float>());
    const auto [xhat, ghat] = pass.expandFeatures(wild);
    CHECK(t.val(xhat).rows() == skel.jointCount());
    CHECK(t.val(xhat).cols() == 15);
    CHECK(t.val(ghat).rows() == 1);
    CHECK(t.val(ghat).cols() == 17);
    CHECK(t.val(ghat)(0, 15) >= 0.0f);
    CHECK(t.val(ghat)(0, 15) <= 1.0f);
    CHECK(t.val(ghat)(0, 16) >= 0.0f);
    CHECK(t.val(ghat)(0, 16) <= 1.0f);
  }
}

TEST_CASE("forward train composes the full graph deterministically") {
  const ModelConfig cfg = smallConfig();
  const Skeleton skel = defaultSkeleton();
  const TrainingExample ex = syntheticExample(skel, cfg.pointsPerFrame, 21);

  auto run = [&](std::uint64_t modelSeed, std::uint64_t epsSeed) {
    MovinModelF model(cfg, skel, modelSeed);
    ModelPass<float> pass(model);
    Rng eps(epsSeed);
    const auto nodes = pass.forwardTrain(ex, eps);
    CHECK(pass.tape().val(nodes.xhat).rows() == skel.jointCount());
    CHECK(pass.tape().val(nodes.xhat).cols() == 15);
    CHECK(pass.tape().val(nodes.ghat).cols() == 17);
    CHECK(pass.tape().val(nodes.mu).cols() == cfg.channels);
    CHECK(pass.tape().val(nodes.z).cols() == cfg.channels);
    CHECK(pass.tape().val(nodes.xhat).allFinite());
    CHECK(pass.tape().val(nodes.ghat).allFinite());
    return Eigen::MatrixXf(pass.tape().val(nodes.xhat));
  };

  const Eigen::MatrixXf first = run(22, 23);
  const Eigen::MatrixXf again = run(22, 23);
  CHECK(first == again);
  const Eigen::MatrixXf otherEps = run(22, 24);
  CHECK((first - otherEps).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("inference defaults to the prior mean") {
  const ModelConfig cfg = smallConfig();
  const Skeleton skel = defaultSkeleton();
  MovinModelF model(cfg, skel, 25);
  const TrainingExample ex = syntheticExample(skel, cfg.pointsPerFrame, 26);

  ModelPass<float> passA(model, /*trainable=*/false);
  const auto a = passA.forwardInfer(ex.history, ex.prevX, ex.prevG);
  ModelPass<float> passB(model, /*trainable=*/false);
  const Vec zero = Vec::Zero(cfg.channels);
  const auto b = passB.forwardInfer(ex.history, ex.prevX, ex.prevG, &zero);
  CHECK(passA.tape().val(a.xhat) == passB.tape().val(b.xhat));
  CHECK(passA.tape().val(a.ghat) == passB.tape().val(b.ghat));

  ModelPass<float> passC(model, /*trainable=*/false);
  const Vec bad = Vec::Zero(cfg.channels + 1);
  CHECK_THROWS_AS(passC.forwardInfer(ex.history, ex.prevX, ex.prevG, &bad), ValidationError);
}

TEST_CASE("fk node matches the analytic joint states") {
  const Skeleton skel = defaultSkeleton();
  ModelConfig cfg = smallConfig();
  MovinModelD model(cfg, skel, 27);
  Rng rng(28);
  const LocalPoseFeature x = randomLocal(skel, rng);
  const JointStates states = featureStates(skel, x);

  ModelPass<double> pass(model);
  const int node = pass.fkPositions(pass.tape().constant(x.data));
  const Mat got = pass.tape().val(node);
  REQUIRE(got.rows() == skel.jointCount());
  CHECK((got - states.positions).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("parameter gradients agree with finite differences") {
  const ModelConfig cfg = tinyConfig();
  const Skeleton skel = tinySkeleton();
  MovinModelD model(cfg, skel, 29);
  const TrainingExample ex = syntheticExample(skel, cfg.pointsPerFrame, 30);

  auto loss = [&](ModelPass<double>& pass) {
    Rng eps(31);
    const auto nodes = pass.forwardTrain(ex, eps);
    auto& t = pass.tape();
    return t.add(t.sum(nodes.xhat), t.sum(nodes.ghat));
  };

  ModelPass<double> pass(model);
  const int root = loss(pass);
  pass.tape().backward(root);

  Rng pick(32);
  auto& store = model.params();
  const std::vector<std::string> names = {"sa0.w1",     "gc.w",         "lproj.b",
                                          "gmlp.w1",    "post.mu_token", "post.pos",
                                          "post.l0.wq", "post.l0.ln1.g", "gate.w1",
                                          "expert1.w2", "degcn.out.w",   "demlp.w2"};
  for (const auto& name : names) {
    const int idx = store.find(name);
    REQUIRE(idx >= 0);
    auto& value = store.entry(idx).value;
    const Mat grad = pass.tape().grad(pass.paramNode(idx));
    for (int probe = 0; probe < 4; ++probe) {
      const auto r = static_cast<Eigen::Index>(pick.uniformInt(static_cast<std::uint64_t>(value.rows())));
      const auto c = static_cast<Eigen::Index>(pick.uniformInt(static_cast<std::uint64_t>(value.cols())));
      const double saved = value(r, c);
      const double h = 1e-5;
      value(r, c) = saved + h;
      ModelPass<double> plus(model);
      const double up = plus.tape().val(loss(plus))(0, 0);
      value(r, c) = saved - h;
      ModelPass<double> minus(model);
      const double down = minus.tape().val(loss(minus))(0, 0);
      value(r, c) = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(grad(r, c) - fd) <= 1e-6 + 1e-4 * std::abs(fd));
    }
  }
}

TEST_CASE("checkpoints round trip bitwise") {
  const auto dir = std::filesystem::temp_directory_path() / "movin_ckpt_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  const ModelConfig cfg = smallConfig();
  const Skeleton skel = defaultSkeleton();
  MovinModelF model(cfg, skel, 33);
  saveCheckpoint(model, path);

  MovinModelF loaded = loadCheckpoint<float>(path);
  CHECK(loaded.config() == model.config());
  REQUIRE(loaded.params().count() == model.params().count());
  for (int i = 0; i < model.params().count(); ++i) {
    const auto& a = model.params().entry(i);
    const auto& b = loaded.params().entry(i);
    CHECK(a.name == b.name);
    CHECK(a.decay == b.decay);
    CHECK(a.value == b.value);
  }
  CHECK(loaded.skeleton().joints[3].name == skel.joints[3].name);
  CHECK(loaded.skeleton().joints[3].offset == skel.joints[3].offset);

  // Loading into a model with a different architecture must be refused.
  ModelConfig other = cfg;
  other.channels = 32;
  MovinModelF wrong(other, skel, 34);
  CHECK_THROWS_AS(loadCheckpointInto(wrong, path), ValidationError);
  loadCheckpointInto(model, path);  // same config is fine

  const std::string bytes = slurp(path);
  std::string bad = bytes;
  bad[0] = 'X';
  spit(dir / "magic.ckpt", bad);
  CHECK_THROWS_AS(loadCheckpoint<float>((dir / "magic.ckpt").string()), BadMagicError);

  bad = bytes;
  bad[8] = 9;
  spit(dir / "version.ckpt", bad);
  CHECK_THROWS_AS(loadCheckpoint<float>((dir / "version.ckpt").string()), VersionError);

  spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 13));
  CHECK_THROWS_AS(loadCheckpoint<float>((dir / "short.ckpt").string()), TruncatedError);

  spit(dir / "long.ckpt", bytes + "tail");
  CHECK_THROWS_AS(loadCheckpoint<float>((dir / "long.ckpt").string()), IoError);

  bad = bytes;
  const auto at = bad.find("demlp.w1");
  REQUIRE(at != std::string::npos);
  bad[at] = 'q';
  spit(dir / "renamed.ckpt", bad);
  CHECK_THROWS_AS(loadCheckpoint<float>((dir / "renamed.ckpt").string()), ValidationError);

  std::filesystem::remove_all(dir);
}

TEST_CASE("parameter table is a pure function of the config") {
  const ModelConfig cfg = smallConfig();
  const Skeleton skel = defaultSkeleton();
  MovinModelF a(cfg, skel, 35);
  MovinModelF b(cfg, skel, 36);
  REQUIRE(a.params().count() == b.params().count());
  CHECK(a.params().scalarCount() == b.params().scalarCount());
  CHECK(a.params().scalarCount() > 0);
  CHECK(a.params().allFinite());
  CHECK(b.params().allFinite());
  bool anyDiff = false;
  for (int i = 0; i < a.params().count(); ++i) {
    CHECK(a.params().entry(i).name == b.params().entry(i).name);
    CHECK(a.params().entry(i).value.rows() == b.params().entry(i).value.rows());
    CHECK(a.params().entry(i).value.cols() == b.params().entry(i).value.cols());
    if (a.params().entry(i).value != b.params().entry(i).value) anyDiff = true;
  }
  CHECK(anyDiff);  // different seeds give different weights

  MovinModelF c(cfg, skel, 35);
  bool allSame = true;
  for (int i = 0; i < a.params().count(); ++i)
    if (a.params().entry(i).value != c.params().entry(i).value) allSame = false;
  CHECK(allSame);  // same seed reproduces the initialization
}
