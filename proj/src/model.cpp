#include "movin/model.hpp"

namespace movin {

void ModelConfig::validate() const {
  if (channels < 2 || channels % 2 != 0)
    throw ValidationError("model config: channels must be even and >= 2");
  if (transformerLayers < 1) throw ValidationError("model config: transformerLayers must be >= 1");
  if (transformerHeads < 1 || channels % transformerHeads != 0)
    throw ValidationError("model config: transformerHeads must divide channels");
  if (mlpHidden < 1 || gatingHidden < 1)
    throw ValidationError("model config: hidden widths must be >= 1");
  if (nExperts < 1) throw ValidationError("model config: nExperts must be >= 1");
  if (nJoints < 2) throw ValidationError("model config: nJoints must be >= 2");
  if (historyLen < 1 || historyLen > kHistoryLen)
    throw ValidationError("model config: historyLen out of range");
  if (saStages < 1 || saStages > 3) throw ValidationError("model config: saStages out of range");
  const int divisor = saStages == 3 ? 16 : (saStages == 2 ? 4 : 1);
  if (pointsPerFrame < divisor || pointsPerFrame % divisor != 0)
    throw ValidationError("model config: pointsPerFrame must be a positive multiple of " +
                          std::to_string(divisor));
}

ModelConfig ModelConfig::fromConfig(const Config& cfg) {
  ModelConfig m;
  m.channels = cfg.getInt("model.channels", m.channels);
  m.transformerLayers = cfg.getInt("model.transformer_layers", m.transformerLayers);
  m.transformerHeads = cfg.getInt("model.transformer_heads", m.transformerHeads);
  m.mlpHidden = cfg.getInt("model.mlp_hidden", m.mlpHidden);
  m.nExperts = cfg.getInt("model.n_experts", m.nExperts);
  m.gatingHidden = cfg.getInt("model.gating_hidden", m.gatingHidden);
  m.nJoints = cfg.getInt("model.n_joints", m.nJoints);
  m.pointsPerFrame = cfg.getInt("model.points_per_frame", m.pointsPerFrame);
  m.historyLen = cfg.getInt("model.history_len", m.historyLen);
  m.saStages = cfg.getInt("model.sa_stages", m.saStages);
  m.validate();
  return m;
}

std::vector<SaStage> saSchedule(const ModelConfig& cfg) {
  const int N = cfg.pointsPerFrame;
  const int C = cfg.channels;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<int> counts;
  if (cfg.saStages == 3)
    counts = {N / 4, N / 16, 1};
  else if (cfg.saStages == 2)
    counts = {N / 4, 1};
  else
    counts = {1};
  const std::vector<double> fullRadii = {0.2, 0.6, inf};
  std::vector<SaStage> stages;
  int prevOut = 0;
  int prevCount = N;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const bool last = j + 1 == counts.size();
    SaStage st;
    st.centroids = counts[j];
    st.groupSize = last ? prevCount : 16;
    st.radius = last ? inf : fullRadii[j];
    st.inWidth = 3 + prevOut;
    st.hidden = last ? C : C / 2;
    st.outWidth = (last || j + 2 == counts.size()) ? C : C / 2;
    stages.push_back(st);
    prevOut = st.outWidth;
    prevCount = st.centroids;
  }
  return stages;
}

LatentSample sampleLatent(const Vec& mu, const Vec& logSigma, Rng& rng) {
  if (mu.size() != logSigma.size())
    throw ValidationError("sampleLatent: mu / logSigma size mismatch");
  LatentSample s;
  s.mu = mu;
  s.logSigma = logSigma;
  s.eps.resize(mu.size());
  for (Eigen::Index i = 0; i < s.eps.size(); ++i) s.eps(i) = rng.normal();
  s.z = mu.array() + logSigma.array().exp().max(1e-6) * s.eps.array();
  return s;
}

}  // namespace movin
