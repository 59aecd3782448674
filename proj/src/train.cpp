#include "movin/train.hpp"

#include <fstream>

#include "json.hpp"

#include "movin/features.hpp"

namespace movin {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("train config: lr must be > 0");
  if (weightDecay < 0.0) throw ValidationError("train config: weight decay must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ValidationError("train config: betas must lie in [0, 1)");
  if (epsilon <= 0.0) throw ValidationError("train config: epsilon must be > 0");
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (wKl < 0.0) throw ValidationError("train config: w_kl must be >= 0");
  if (rolloutLen < 1) throw ValidationError("train config: rollout_len must be >= 1");
  if (rampFlat < 0.0 || rampEnd > 1.0 || rampFlat >= rampEnd)
    throw ValidationError("train config: sampling ramp must satisfy 0 <= flat < end <= 1");
  if (batchSize < 1) throw ValidationError("train config: batch_size must be >= 1");
}

TrainConfig TrainConfig::fromConfig(const Config& cfg) {
  TrainConfig t;
  t.lr = cfg.getDouble("train.lr", t.lr);
  t.weightDecay = cfg.getDouble("train.weight_decay", t.weightDecay);
  t.epochs = cfg.getInt("train.epochs", t.epochs);
  t.wKl = cfg.getDouble("train.w_kl", t.wKl);
  t.rolloutLen = cfg.getInt("train.rollout_len", t.rolloutLen);
  t.rampFlat = cfg.getDouble("train.ramp_flat", t.rampFlat);
  t.rampEnd = cfg.getDouble("train.ramp_end", t.rampEnd);
  t.batchSize = cfg.getInt("train.batch_size", t.batchSize);
  t.autoregressive = cfg.getBool("train.autoregressive", t.autoregressive);
  t.seed = static_cast<std::uint64_t>(cfg.getInt("train.seed", 0));
  t.outDir = cfg.getString("train.out_dir", t.outDir);
  t.validate();
  return t;
}

double samplingProbability(const TrainConfig& cfg, int epoch) {
  const double f = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  if (f < cfg.rampFlat) return 1.0;
  if (f >= cfg.rampEnd) return 0.0;
  return (cfg.rampEnd - f) / (cfg.rampEnd - cfg.rampFlat);
}

double reconstructionLoss(const Skeleton& skel, const LocalPoseFeature& xhat,
                          const GlobalPoseFeature& ghat, const LocalPoseFeature& x,
                          const GlobalPoseFeature& g) {
  if (xhat.data.rows() != x.data.rows() || xhat.data.cols() != x.data.cols() ||
      xhat.data.rows() != skel.jointCount())
    throw ValidationError("reconstructionLoss: pose feature shape mismatch");
  const double local = (xhat.data - x.data).cwiseAbs().sum();
  const Mat fkHat = featureStates(skel, xhat).positions;
  const Mat fkRef = featureStates(skel, x).positions;
  const double fk = (fkHat - fkRef).cwiseAbs().sum();
  const double global = (ghat.data - g.data).cwiseAbs().sum();
  return local + fk + global;
}

double klLoss(const Vec& mu, const Vec& logSigma) {
  if (mu.size() != logSigma.size()) throw ValidationError("klLoss: size mismatch");
  const auto s2 = (2.0 * logSigma.array()).exp();
  return 0.5 * (mu.array().square() + s2 - 1.0 - 2.0 * logSigma.array()).sum();
}

std::string epochLogLine(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["L_rec_local"] = log.recLocal;
  j["L_rec_fk"] = log.recFk;
  j["L_rec_global"] = log.recGlobal;
  j["L_kl"] = log.kl;
  j["wallclock"] = log.wallclock;
  return j.dump();
}

namespace detail {

SegmentIndex indexSegments(const Dataset& ds, int rolloutLen, std::uint64_t seed,
                           int targetPoints) {
  const std::vector<int> trainSeqs = ds.splitIndices("train");
  if (trainSeqs.empty()) throw TrainingError("train split is empty");
  Rng root(seed);
  SegmentIndex index;
  for (std::size_t si = 0; si < trainSeqs.size(); ++si) {
    const auto& rec = ds.sequences[static_cast<std::size_t>(trainSeqs[si])];
    index.examples.push_back(buildExamples(rec, root.fork(si).next(), targetPoints));
    const int n = static_cast<int>(index.examples.back().size());
    for (int t = 0; t + rolloutLen <= n; ++t)
      index.segments.emplace_back(static_cast<int>(si), t);
  }
  if (index.segments.empty())
    throw TrainingError("no rollout segments: sequences shorter than the rollout length");
  return index;
}

void writeEpochLogs(const std::vector<EpochLog>& logs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good()) throw IoError("cannot write " + path);
  for (const EpochLog& log : logs) out << epochLogLine(log) << "\n";
}

}  // namespace detail

}  // namespace movin
