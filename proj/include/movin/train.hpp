#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "movin/dataset.hpp"
#include "movin/model.hpp"

namespace movin {

/// Optimizer and schedule settings for a training run.
struct TrainConfig {
  double lr = 1e-4;
  double weightDecay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 120;
  double wKl = 1.0;
  int rolloutLen = 8;
  /// Scheduled sampling: teacher-forcing probability 1 for the first
  /// `rampFlat` fraction of epochs, then linear to 0 at `rampEnd`.
  double rampFlat = 0.2;
  double rampEnd = 0.8;
  int batchSize = 8;
  /// Cleared by the "w/o autoreg." ablation: conditions stay at the rest
  /// pose instead of the previous frame's outputs.
  bool autoregressive = true;
  std::uint64_t seed = 0;
  /// Where the loss log and checkpoints go; empty disables file output.
  std::string outDir;

  void validate() const;

  /// Optional keys: train.lr, train.weight_decay, train.epochs, train.w_kl,
  /// train.rollout_len, train.ramp_flat, train.ramp_end, train.batch_size,
  /// train.autoregressive, train.seed, train.out_dir.
  static TrainConfig fromConfig(const Config& cfg);
};

/// Probability of feeding ground-truth conditions at `epoch` (0-based);
/// monotone non-increasing, 1 at the start and 0 from rampEnd onwards.
double samplingProbability(const TrainConfig& cfg, int epoch);

/// Plain-value losses (the on-tape builders below mirror these exactly).
double reconstructionLoss(const Skeleton& skel, const LocalPoseFeature& xhat,
                          const GlobalPoseFeature& ghat, const LocalPoseFeature& x,
                          const GlobalPoseFeature& g);
double klLoss(const Vec& mu, const Vec& logSigma);

/// KL(N(mu, sigma) || N(0, I)) = 0.5 sum(mu^2 + sigma^2 - 1 - 2 log sigma).
template <class S>
int klNode(Tape<S>& t, int mu, int logSigma) {
  const Eigen::Index cols = t.val(mu).cols();
  if (t.val(mu).rows() != 1 || t.val(logSigma).rows() != 1 || cols != t.val(logSigma).cols())
    throw ValidationError("klNode: mu / logSigma must be matching rows");
  const int ones = t.constant(Tape<S>::MatX::Ones(1, cols));
  const int twoS = t.scale(logSigma, S(2));
  const int inner = t.sub(t.sub(t.add(t.mul(mu, mu), t.expOf(twoS)), twoS), ones);
  return t.scale(t.sum(inner), S(0.5));
}

template <class S>
struct LossNodes {
  int recLocal = -1;
  int recFk = -1;
  int recGlobal = -1;
  int rec = -1;
  int kl = -1;
  int total = -1;  // rec + wKl * kl
};

/// L1 reconstruction terms (pose features, root-relative FK positions,
/// global feature) plus the weighted KL, all as tape nodes.
template <class S>
LossNodes<S> buildLosses(ModelPass<S>& pass, const typename ModelPass<S>::TrainNodes& nodes,
                         const TrainingExample& ex, double wKl) {
  if (wKl < 0) throw ValidationError("buildLosses: wKl must be >= 0");
  auto& t = pass.tape();
  const int xTrue = t.constant(ex.curX.data.template cast<S>().eval());
  const int gTrue = t.constant(ex.curG.data.transpose().template cast<S>().eval());
  LossNodes<S> l;
  l.recLocal = t.sumAbs(t.sub(nodes.xhat, xTrue));
  l.recFk = t.sumAbs(t.sub(pass.fkPositions(nodes.xhat), pass.fkPositions(xTrue)));
  l.recGlobal = t.sumAbs(t.sub(nodes.ghat, gTrue));
  l.rec = t.add(t.add(l.recLocal, l.recFk), l.recGlobal);
  l.kl = klNode(t, nodes.mu, nodes.logSigma);
  l.total = t.add(l.rec, t.scale(l.kl, static_cast<S>(wKl)));
  return l;
}

/// Per-rollout loss components, averaged over the rollout steps.
struct StepLosses {
  double recLocal = 0.0;
  double recFk = 0.0;
  double recGlobal = 0.0;
  double kl = 0.0;
  double total = 0.0;

  StepLosses& operator+=(const StepLosses& o) {
    recLocal += o.recLocal;
    recFk += o.recFk;
    recGlobal += o.recGlobal;
    kl += o.kl;
    total += o.total;
    return *this;
  }
  void scaleBy(double f) {
    recLocal *= f;
    recFk *= f;
    recGlobal *= f;
    kl *= f;
    total *= f;
  }
  bool finite() const {
    return std::isfinite(recLocal) && std::isfinite(recFk) && std::isfinite(recGlobal) &&
           std::isfinite(kl) && std::isfinite(total);
  }
};

/// Runs the model over `segment` (consecutive examples), feeding ground
/// truth with probability `p` and otherwise the model's own previous output
/// (values only; gradients never cross step boundaries). Accumulates the
/// averaged parameter gradients into `grads` when given.
template <class S>
StepLosses rolloutStep(const MovinModel<S>& model, const std::vector<TrainingExample>& segment,
                       double p, double wKl, Rng& rng,
                       std::vector<typename MovinModel<S>::MatX>* grads,
                       bool autoregressive = true) {
  if (segment.empty()) throw ValidationError("rolloutStep: empty segment");
  Rng coin = rng.fork(0);
  Rng epsRoot = rng.fork(1);
  const int paramCount = model.params().count();
  if (grads && static_cast<int>(grads->size()) != paramCount)
    throw ValidationError("rolloutStep: gradient accumulator size mismatch");

  // The "w/o autoreg." variant pins the conditions to the rest pose: no
  // ground-truth history, no fed-back outputs.
  const LocalPoseFeature restX = restLocalPose(model.skeleton());
  const GlobalPoseFeature restG = restGlobalPose(model.skeleton());

  StepLosses out;
  LocalPoseFeature fedX;
  GlobalPoseFeature fedG;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    TrainingExample ex = segment[i];
    if (!autoregressive) {
      ex.prevX = restX;
      ex.prevG = restG;
    } else if (i > 0 && coin.uniform() >= p) {
      ex.prevX = fedX;
      ex.prevG = fedG;
    }
    ModelPass<S> pass(model, /*trainable=*/grads != nullptr);
    Rng eps = epsRoot.fork(static_cast<std::uint64_t>(i));
    const auto nodes = pass.forwardTrain(ex, eps);
    const LossNodes<S> loss = buildLosses(pass, nodes, ex, wKl);
    auto& t = pass.tape();
    StepLosses step;
    step.recLocal = static_cast<double>(t.val(loss.recLocal)(0, 0));
    step.recFk = static_cast<double>(t.val(loss.recFk)(0, 0));
    step.recGlobal = static_cast<double>(t.val(loss.recGlobal)(0, 0));
    step.kl = static_cast<double>(t.val(loss.kl)(0, 0));
    step.total = static_cast<double>(t.val(loss.total)(0, 0));
    out += step;
    if (grads) {
      t.backward(loss.total);
      const S w = S(1) / S(segment.size());
      for (int k = 0; k < paramCount; ++k)
        (*grads)[static_cast<std::size_t>(k)] += w * t.grad(pass.paramNode(k));
    }
    fedX.data = t.val(nodes.xhat).template cast<double>();
    fedG.data = t.val(nodes.ghat).row(0).transpose().template cast<double>();
  }
  out.scaleBy(1.0 / static_cast<double>(segment.size()));
  return out;
}

/// Adam with decoupled weight decay; decay applies only to entries flagged
/// in the parameter store (weights, not biases/norms/tokens).
template <class S>
class AdamW {
 public:
  using MatX = typename ParamStore<S>::MatX;

  AdamW(ParamStore<S>& store, const TrainConfig& cfg) : store_(&store), cfg_(cfg) {
    m_.reserve(static_cast<std::size_t>(store.count()));
    v_.reserve(static_cast<std::size_t>(store.count()));
    for (int i = 0; i < store.count(); ++i) {
      const auto& value = store.entry(i).value;
      m_.push_back(MatX::Zero(value.rows(), value.cols()));
      v_.push_back(MatX::Zero(value.rows(), value.cols()));
    }
  }

  void step(const std::vector<MatX>& grads) {
    if (static_cast<int>(grads.size()) != store_->count())
      throw ValidationError("AdamW: gradient count mismatch");
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S lr = static_cast<S>(cfg_.lr);
    const S eps = static_cast<S>(cfg_.epsilon);
    const S mCorr = S(1) / (S(1) - std::pow(b1, S(t_)));
    const S vCorr = S(1) / (S(1) - std::pow(b2, S(t_)));
    for (int i = 0; i < store_->count(); ++i) {
      auto& entry = store_->entry(i);
      const MatX& g = grads[static_cast<std::size_t>(i)];
      auto& m = m_[static_cast<std::size_t>(i)];
      auto& v = v_[static_cast<std::size_t>(i)];
      m = b1 * m + (S(1) - b1) * g;
      v = (b2 * v.array() + (S(1) - b2) * g.array().square()).matrix();
      MatX update = ((m * mCorr).array() / ((v * vCorr).array().sqrt() + eps)).matrix();
      if (entry.decay) update += static_cast<S>(cfg_.weightDecay) * entry.value;
      entry.value -= lr * update;
    }
  }

  int stepCount() const { return t_; }

 private:
  ParamStore<S>* store_;
  TrainConfig cfg_;
  std::vector<MatX> m_, v_;
  int t_ = 0;
};

/// One line of the training log (wallclock = seconds since the run began).
struct EpochLog {
  int epoch = 0;
  double recLocal = 0.0;
  double recFk = 0.0;
  double recGlobal = 0.0;
  double kl = 0.0;
  double wallclock = 0.0;
};

std::string epochLogLine(const EpochLog& log);

namespace detail {

/// All rollout windows of the train split: examples grouped by sequence plus
/// (sequence, start) segment coordinates.
struct SegmentIndex {
  std::vector<std::vector<TrainingExample>> examples;
  std::vector<std::pair<int, int>> segments;
};

SegmentIndex indexSegments(const Dataset& ds, int rolloutLen, std::uint64_t seed,
                           int targetPoints = kPointsPerFrame);

void writeEpochLogs(const std::vector<EpochLog>& logs, const std::string& path);

}  // namespace detail

/// Full training loop: shuffled rollout segments, AdamW updates, per-epoch
/// loss log, checkpoint_latest / checkpoint_final when outDir is set.
/// Throws TrainingError naming the epoch and batch on a non-finite loss.
template <class S>
std::vector<EpochLog> train(MovinModel<S>& model, const Dataset& ds, const TrainConfig& cfg) {
  using MatX = typename MovinModel<S>::MatX;
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Rng root(cfg.seed);
  const detail::SegmentIndex index = detail::indexSegments(
      ds, cfg.rolloutLen, root.fork(1).next(), model.config().pointsPerFrame);
  const int segmentCount = static_cast<int>(index.segments.size());

  AdamW<S> opt(model.params(), cfg);
  std::vector<MatX> grads;
  for (int i = 0; i < model.params().count(); ++i) {
    const auto& value = model.params().entry(i).value;
    grads.push_back(MatX::Zero(value.rows(), value.cols()));
  }

  if (!cfg.outDir.empty()) std::filesystem::create_directories(cfg.outDir);
  std::vector<EpochLog> logs;
  std::vector<int> order(index.segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epochRng = root.fork(1000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epochRng.uniformInt(i)]);
    const double p = samplingProbability(cfg, epoch);

    StepLosses epochLoss;
    int cursor = 0;
    int batchIdx = 0;
    while (cursor < segmentCount) {
      const int batch = std::min(cfg.batchSize, segmentCount - cursor);
      for (auto& g : grads) g.setZero();
      StepLosses batchLoss;
      for (int b = 0; b < batch; ++b) {
        const auto [seq, startIdx] = index.segments[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor + b)])];
        const auto& all = index.examples[static_cast<std::size_t>(seq)];
        const std::vector<TrainingExample> segment(
            all.begin() + startIdx, all.begin() + startIdx + cfg.rolloutLen);
        Rng segRng = epochRng.fork(100000 + static_cast<std::uint64_t>(cursor + b));
        batchLoss += rolloutStep(model, segment, p, cfg.wKl, segRng, &grads, cfg.autoregressive);
      }
      if (!batchLoss.finite())
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batchIdx));
      const S inv = S(1) / S(batch);
      for (auto& g : grads) g *= inv;
      opt.step(grads);
      epochLoss += batchLoss;
      cursor += batch;
      ++batchIdx;
    }

    epochLoss.scaleBy(1.0 / static_cast<double>(segmentCount));
    EpochLog log;
    log.epoch = epoch;
    log.recLocal = epochLoss.recLocal;
    log.recFk = epochLoss.recFk;
    log.recGlobal = epochLoss.recGlobal;
    log.kl = epochLoss.kl;
    log.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    logs.push_back(log);

    if (!cfg.outDir.empty()) {
      detail::writeEpochLogs(logs, cfg.outDir + "/train_log.jsonl");
      saveCheckpoint(model, cfg.outDir + "/checkpoint_latest.ckpt");
    }
  }
  if (!cfg.outDir.empty()) saveCheckpoint(model, cfg.outDir + "/checkpoint_final.ckpt");
  return logs;
}

}  // namespace movin
