#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "movin/config.hpp"
#include "movin/dataset.hpp"
#include "movin/io.hpp"
#include "movin/rng.hpp"
#include "movin/tape.hpp"

namespace movin {

/// Architecture knobs. The last three fields double as the ablation
/// switches: historyLen 1 drops the past clouds, pointsPerFrame scales the
/// sampled cloud size, saStages shrinks the point encoder.
struct ModelConfig {
  int channels = 64;
  int transformerLayers = 2;
  int transformerHeads = 4;
  int mlpHidden = 256;
  int nExperts = 8;
  int gatingHidden = 256;
  int nJoints = 21;
  int pointsPerFrame = kPointsPerFrame;
  int historyLen = kHistoryLen;
  int saStages = 3;

  /// Tokens fed to the posterior: mu, sigma, the cloud rows, and the four
  /// pose embeddings.
  int sequenceLength() const { return 2 + historyLen + 4; }
  /// Width of the decoder conditioning (z, flattened f^p, f^x, f^g).
  int conditionWidth() const { return (historyLen + 3) * channels; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  /// Optional keys: channels, transformer_layers, transformer_heads,
  /// mlp_hidden, n_experts, gating_hidden, n_joints, points_per_frame,
  /// history_len, sa_stages.
  static ModelConfig fromConfig(const Config& cfg);
};

/// One hierarchical set-abstraction stage of the point encoder.
struct SaStage {
  int centroids = 1;
  int groupSize = 16;
  double radius = std::numeric_limits<double>::infinity();
  int inWidth = 3;
  int hidden = 32;
  int outWidth = 64;
};

/// Stage schedule derived from the config (centroid counts N/4 -> N/16 -> 1,
/// radii 0.2 / 0.6 / unbounded, group size 16 except the final full group).
std::vector<SaStage> saSchedule(const ModelConfig& cfg);

/// Named dense parameters with their optimizer decay flag. Entry order is
/// fixed by construction and defines the checkpoint layout.
template <class S>
class ParamStore {
 public:
  using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  struct Entry {
    std::string name;
    MatX value;
    bool decay = true;
  };

  /// bound > 0 draws U(-bound, bound) elementwise; bound == 0 fills with
  /// `fill`.
  int add(const std::string& name, int rows, int cols, S bound, bool decay, Rng& rng,
          S fill = S(0)) {
    if (find(name) >= 0) throw ValidationError("duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.decay = decay;
    e.value.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        e.value(i, j) = bound > S(0) ? static_cast<S>(rng.uniform(-double(bound), double(bound)))
                                     : fill;
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  Entry& entry(int i) { return entries_[static_cast<std::size_t>(i)]; }
  const Entry& entry(int i) const { return entries_[static_cast<std::size_t>(i)]; }
  MatX& value(const std::string& name) {
    const int i = find(name);
    if (i < 0) throw ValidationError("unknown parameter: " + name);
    return entries_[static_cast<std::size_t>(i)].value;
  }
  int count() const { return static_cast<int>(entries_.size()); }

  std::size_t scalarCount() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  bool allFinite() const {
    for (const auto& e : entries_)
      if (!e.value.allFinite()) return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

/// Reparameterized draw z = mu + sigma * eps with sigma floored at 1e-6.
struct LatentSample {
  Vec mu;
  Vec logSigma;
  Vec eps;
  Vec z;
};

LatentSample sampleLatent(const Vec& mu, const Vec& logSigma, Rng& rng);

namespace detail {

/// Farthest-point sampling with value-based tie breaking (max norm start,
/// lexicographically smaller coordinates win ties), so the selection depends
/// only on the point multiset, never on row order.
template <class S>
std::vector<int> farthestPointSample(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& pts,
                                     int m) {
  using RowX = Eigen::Matrix<S, 1, Eigen::Dynamic>;
  const Eigen::Index n = pts.rows();
  if (m < 1 || m > n) throw ValidationError("farthestPointSample: bad centroid count");
  auto lexLess = [&](Eigen::Index i, Eigen::Index j) {
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      if (pts(i, c) < pts(j, c)) return true;
      if (pts(i, c) > pts(j, c)) return false;
    }
    return false;
  };
  Eigen::Index best = 0;
  S bestScore = pts.row(0).squaredNorm();
  for (Eigen::Index i = 1; i < n; ++i) {
    const S score = pts.row(i).squaredNorm();
    if (score > bestScore || (score == bestScore && lexLess(i, best))) {
      best = i;
      bestScore = score;
    }
  }
  std::vector<int> out{static_cast<int>(best)};
  Eigen::Matrix<S, Eigen::Dynamic, 1> dist(n);
  RowX last = pts.row(best);
  for (Eigen::Index i = 0; i < n; ++i) dist(i) = (pts.row(i) - last).squaredNorm();
  while (static_cast<int>(out.size()) < m) {
    best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (dist(i) > dist(best) || (dist(i) == dist(best) && lexLess(i, best))) best = i;
    out.push_back(static_cast<int>(best));
    last = pts.row(best);
    for (Eigen::Index i = 0; i < n; ++i)
      dist(i) = std::min(dist(i), S((pts.row(i) - last).squaredNorm()));
  }
  return out;
}

/// Indices of the k nearest points within `radius` of the centroid, sorted
/// by (distance, lexicographic coordinates); short groups repeat the nearest
/// member (the centroid itself is always a member).
template <class S>
std::vector<int> groupNeighbors(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& pts,
                                Eigen::Index centroid, double radius, int k) {
  const S r2 = std::isinf(radius) ? std::numeric_limits<S>::infinity()
                                  : static_cast<S>(radius * radius);
  std::vector<std::pair<S, int>> cands;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const S d2 = (pts.row(i) - pts.row(centroid)).squaredNorm();
    if (d2 <= r2) cands.emplace_back(d2, static_cast<int>(i));
  }
  std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      if (pts(a.second, c) < pts(b.second, c)) return true;
      if (pts(a.second, c) > pts(b.second, c)) return false;
    }
    return false;
  });
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    out.push_back(cands[std::min<std::size_t>(static_cast<std::size_t>(i), cands.size() - 1)]
                      .second);
  return out;
}

}  // namespace detail

/// The CVAE parameters plus the skeleton-derived constants every pass needs
/// (normalized adjacency, body-part pool/unpool operators).
template <class S>
class MovinModel {
 public:
  using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  MovinModel(const ModelConfig& cfg, const Skeleton& skel, std::uint64_t seed)
      : cfg_(cfg), skel_(skel) {
    cfg_.validate();
    skel_.validate();
    if (skel_.jointCount() != cfg_.nJoints)
      throw ValidationError("model: skeleton joint count disagrees with the config");
    if (static_cast<int>(skel_.bodyPart.size()) != skel_.jointCount())
      throw ValidationError("model: skeleton needs body-part ids");
    adjacency_ = skel_.normalizedAdjacency();
    const int parts = skel_.partCount();
    pool_ = Mat::Zero(parts, skel_.jointCount());
    unpool_ = Mat::Zero(skel_.jointCount(), parts);
    std::vector<int> partSize(static_cast<std::size_t>(parts), 0);
    for (int j = 0; j < skel_.jointCount(); ++j) ++partSize[static_cast<std::size_t>(skel_.bodyPart[static_cast<std::size_t>(j)])];
    for (int j = 0; j < skel_.jointCount(); ++j) {
      const int p = skel_.bodyPart[static_cast<std::size_t>(j)];
      pool_(p, j) = 1.0 / partSize[static_cast<std::size_t>(p)];
      unpool_(j, p) = 1.0;
    }
    build(seed);
  }

  const ModelConfig& config() const { return cfg_; }
  const Skeleton& skeleton() const { return skel_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }
  const Mat& adjacency() const { return adjacency_; }
  const Mat& pool() const { return pool_; }
  const Mat& unpool() const { return unpool_; }

 private:
  void build(std::uint64_t seed) {
    Rng rng(seed);
    const int C = cfg_.channels;
    const int parts = skel_.partCount();
    auto weight = [&](const std::string& n, int r, int c) {
      params_.add(n, r, c, S(1) / std::sqrt(S(r)), true, rng);
    };
    auto bias = [&](const std::string& n, int c, int fanIn) {
      params_.add(n, 1, c, S(1) / std::sqrt(S(fanIn)), false, rng);
    };
    auto fixed = [&](const std::string& n, int r, int c, S fill) {
      params_.add(n, r, c, S(0), false, rng, fill);
    };
    auto norm = [&](const std::string& n) {
      fixed(n + ".g", 1, C, S(1));
      fixed(n + ".b", 1, C, S(0));
    };

    const auto stages = saSchedule(cfg_);
    for (std::size_t j = 0; j < stages.size(); ++j) {
      const std::string p = "sa" + std::to_string(j);
      weight(p + ".w1", stages[j].inWidth, stages[j].hidden);
      bias(p + ".b1", stages[j].hidden, stages[j].inWidth);
      weight(p + ".w2", stages[j].hidden, stages[j].outWidth);
      bias(p + ".b2", stages[j].outWidth, stages[j].hidden);
    }

    weight("gc.w", 15, C);
    bias("gc.b", C, 15);
    weight("lproj.w", parts * C, C);
    bias("lproj.b", C, parts * C);

    weight("gmlp.w1", 17, cfg_.mlpHidden);
    bias("gmlp.b1", cfg_.mlpHidden, 17);
    weight("gmlp.w2", cfg_.mlpHidden, C);
    bias("gmlp.b2", C, cfg_.mlpHidden);

    fixed("post.mu_token", 1, C, S(0));
    fixed("post.sigma_token", 1, C, S(0));
    params_.add("post.pos", cfg_.sequenceLength(), C, S(1) / std::sqrt(S(C)), false, rng);
    for (int l = 0; l < cfg_.transformerLayers; ++l) {
      const std::string p = "post.l" + std::to_string(l);
      norm(p + ".ln1");
      for (const char* w : {".wq", ".wk", ".wv", ".wo"}) weight(p + w, C, C);
      for (const char* b : {".bq", ".bk", ".bv", ".bo"}) bias(p + b, C, C);
      norm(p + ".ln2");
      weight(p + ".mlp.w1", C, cfg_.mlpHidden);
      bias(p + ".mlp.b1", cfg_.mlpHidden, C);
      weight(p + ".mlp.w2", cfg_.mlpHidden, C);
      bias(p + ".mlp.b2", C, cfg_.mlpHidden);
    }
    norm("post.lnf");

    const int cond = cfg_.conditionWidth();
    weight("gate.w1", cond, cfg_.gatingHidden);
    bias("gate.b1", cfg_.gatingHidden, cond);
    weight("gate.w2", cfg_.gatingHidden, cfg_.gatingHidden);
    bias("gate.b2", cfg_.gatingHidden, cfg_.gatingHidden);
    weight("gate.w3", cfg_.gatingHidden, cfg_.nExperts);
    bias("gate.b3", cfg_.nExperts, cfg_.gatingHidden);

    for (int k = 0; k < cfg_.nExperts; ++k) {
      const std::string p = "expert" + std::to_string(k);
      weight(p + ".w1", cond, cfg_.mlpHidden);
      bias(p + ".b1", cfg_.mlpHidden, cond);
      weight(p + ".w2", cfg_.mlpHidden, cfg_.mlpHidden);
      bias(p + ".b2", cfg_.mlpHidden, cfg_.mlpHidden);
      weight(p + ".w3", cfg_.mlpHidden, 2 * C);
      bias(p + ".b3", 2 * C, cfg_.mlpHidden);
    }

    weight("degcn.proj.w", C, parts * C);
    bias("degcn.proj.b", parts * C, C);
    weight("degcn.gc.w", C, C);
    bias("degcn.gc.b", C, C);
    weight("degcn.out.w", C, 15);
    bias("degcn.out.b", 15, C);

    weight("demlp.w1", C, cfg_.mlpHidden);
    bias("demlp.b1", cfg_.mlpHidden, C);
    weight("demlp.w2", cfg_.mlpHidden, 17);
    bias("demlp.b2", 17, cfg_.mlpHidden);
  }

  ModelConfig cfg_;
  Skeleton skel_;
  ParamStore<S> params_;
  Mat adjacency_, pool_, unpool_;
};

/// One tape forward over a model. Binds every parameter as a tape leaf
/// (trainable -> gradients flow) and exposes the network blocks plus the
/// composed training/inference passes. Keep the model alive while using it.
template <class S>
class ModelPass {
 public:
  using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ModelPass(const MovinModel<S>& model, bool trainable = true) : model_(&model) {
    const auto& store = model.params();
    paramNodes_.reserve(static_cast<std::size_t>(store.count()));
    for (int i = 0; i < store.count(); ++i)
      paramNodes_.push_back(trainable ? tape_.input(store.entry(i).value)
                                      : tape_.constant(store.entry(i).value));
  }

  Tape<S>& tape() { return tape_; }
  const Tape<S>& tape() const { return tape_; }
  int paramNode(int entryIndex) const { return paramNodes_[static_cast<std::size_t>(entryIndex)]; }

  /// Embeds the first historyLen clouds (most recent first) through the
  /// shared set-abstraction encoder: one C-row each.
  int embedPointCloud(const PointCloudHistory& history) {
    const auto& cfg = model_->config();
    int rows = -1;
    for (int h = 0; h < cfg.historyLen; ++h) {
      const Mat& cloud = history.clouds[static_cast<std::size_t>(h)];
      if (cloud.rows() != cfg.pointsPerFrame || cloud.cols() != 3)
        throw ValidationError("embedPointCloud: cloud shape mismatch");
      const int f = cloudFeature(cloud.cast<S>());
      rows = (rows < 0) ? f : tape_.concatRows(rows, f);
    }
    return rows;
  }

  /// Graph convolution + body-part mean pooling, before the C projection.
  int embedLocalPooled(const Mat& x) {
    const auto& cfg = model_->config();
    if (x.rows() != cfg.nJoints || x.cols() != 15)
      throw ValidationError("embedLocalPose: feature shape mismatch");
    const int conv = linear(tape_.matmul(tape_.constant(model_->adjacency().template cast<S>()),
                                         tape_.constant(x.cast<S>())),
                            "gc.w", "gc.b");
    return tape_.matmul(tape_.constant(model_->pool().template cast<S>()), tape_.relu(conv));
  }

  int embedLocalPose(const Mat& x) {
    const int pooled = embedLocalPooled(x);
    const int parts = static_cast<int>(model_->pool().rows());
    return linear(tape_.reshapeRowMajor(pooled, 1, parts * model_->config().channels), "lproj.w",
                  "lproj.b");
  }

  int embedGlobalPose(const GlobalPoseFeature& g) {
    const Mat row = g.data.transpose();
    return linear(tape_.relu(linear(tape_.constant(row.cast<S>()), "gmlp.w1", "gmlp.b1")),
                  "gmlp.w2", "gmlp.b2");
  }

  /// Returns (mu, logSigma), logSigma clamped to [-10, 4].
  std::pair<int, int> encodePosterior(int fp, int fxPrev, int fgPrev, int fxCur, int fgCur) {
    const auto& cfg = model_->config();
    const int C = cfg.channels;
    if (tape_.val(fp).rows() != cfg.historyLen || tape_.val(fp).cols() != C)
      throw ValidationError("encodePosterior: f^p shape mismatch");
    int tokens = tape_.concatRows(p("post.mu_token"), p("post.sigma_token"));
    tokens = tape_.concatRows(tokens, fp);
    for (int e : {fxPrev, fgPrev, fxCur, fgCur}) tokens = tape_.concatRows(tokens, e);
    tokens = tape_.add(tokens, p("post.pos"));

    const int heads = cfg.transformerHeads;
    const int dh = C / heads;
    const S attScale = S(1) / std::sqrt(S(dh));
    const int seq = cfg.sequenceLength();
    for (int l = 0; l < cfg.transformerLayers; ++l) {
      const std::string pre = "post.l" + std::to_string(l);
      const int a = layerNorm(tokens, pre + ".ln1");
      const int q = linear(a, pre + ".wq", pre + ".bq");
      const int k = linear(a, pre + ".wk", pre + ".bk");
      const int v = linear(a, pre + ".wv", pre + ".bv");
      int heads_out = -1;
      for (int h = 0; h < heads; ++h) {
        const int qh = tape_.block(q, 0, h * dh, seq, dh);
        const int kh = tape_.block(k, 0, h * dh, seq, dh);
        const int vh = tape_.block(v, 0, h * dh, seq, dh);
        const int att = tape_.softmaxRows(tape_.scale(tape_.matmul(qh, tape_.transpose(kh)),
                                                      attScale));
        const int oh = tape_.matmul(att, vh);
        heads_out = (heads_out < 0) ? oh : tape_.concatCols(heads_out, oh);
      }
      tokens = tape_.add(tokens, linear(heads_out, pre + ".wo", pre + ".bo"));
      const int m = layerNorm(tokens, pre + ".ln2");
      const int mlp = linear(tape_.relu(linear(m, pre + ".mlp.w1", pre + ".mlp.b1")),
                             pre + ".mlp.w2", pre + ".mlp.b2");
      tokens = tape_.add(tokens, mlp);
    }
    const int f = layerNorm(tokens, "post.lnf");
    const int mu = tape_.block(f, 0, 0, 1, C);
    const int logSigma = tape_.clampOf(tape_.block(f, 1, 0, 1, C), S(-10), S(4));
    return {mu, logSigma};
  }

  /// z = mu + exp(logSigma) * eps with eps drawn once from the rng.
  int sampleLatentNode(int mu, int logSigma, Rng& rng) {
    MatX eps(1, tape_.val(mu).cols());
    for (Eigen::Index i = 0; i < eps.cols(); ++i) eps(0, i) = static_cast<S>(rng.normal());
    return tape_.add(mu, tape_.mul(tape_.expOf(logSigma), tape_.constant(eps)));
  }

  /// The decoder conditioning row (z, flattened f^p, f^x_prev, f^g_prev).
  int conditionVector(int z, int fp, int fxPrev, int fgPrev) {
    const auto& cfg = model_->config();
    const int flat = tape_.reshapeRowMajor(fp, 1, cfg.historyLen * cfg.channels);
    return tape_.concatCols(tape_.concatCols(z, flat), tape_.concatCols(fxPrev, fgPrev));
  }

  /// Softmax gating weights, 1 x nExperts.
  int gating(int cond) {
    const int h1 = tape_.relu(linear(cond, "gate.w1", "gate.b1"));
    const int h2 = tape_.relu(linear(h1, "gate.w2", "gate.b2"));
    return tape_.softmaxRows(linear(h2, "gate.w3", "gate.b3"));
  }

  /// Blends the experts' parameters with the gating weights, then runs the
  /// blended 3-layer decoder on the conditioning row. Returns f^d (1 x 2C).
  int decodeMoe(int z, int fp, int fxPrev, int fgPrev) {
    const int cond = conditionVector(z, fp, fxPrev, fgPrev);
    const int w = gating(cond);
    int h = cond;
    for (int layer = 1; layer <= 3; ++layer) {
      int wBlend = -1;
      int bBlend = -1;
      for (int k = 0; k < model_->config().nExperts; ++k) {
        const std::string pre = "expert" + std::to_string(k);
        const int wk = tape_.block(w, 0, k, 1, 1);
        const int pw = tape_.scaleBy(p(pre + ".w" + std::to_string(layer)), wk);
        const int pb = tape_.scaleBy(p(pre + ".b" + std::to_string(layer)), wk);
        wBlend = (wBlend < 0) ? pw : tape_.add(wBlend, pw);
        bBlend = (bBlend < 0) ? pb : tape_.add(bBlend, pb);
      }
      h = tape_.addRowVector(tape_.matmul(h, wBlend), bBlend);
      if (layer < 3) h = tape_.relu(h);
    }
    return h;
  }

  /// f^d -> (x̂ node nJoints x 15, ĝ node 1 x 17); contact slots squashed.
  std::pair<int, int> expandFeatures(int fd) {
    const auto& cfg = model_->config();
    const int C = cfg.channels;
    if (tape_.val(fd).rows() != 1 || tape_.val(fd).cols() != 2 * C)
      throw ValidationError("expandFeatures: f^d must be 1 x 2C");
    const int parts = static_cast<int>(model_->pool().rows());

    const int dl = tape_.block(fd, 0, 0, 1, C);
    const int partRows = tape_.reshapeRowMajor(linear(dl, "degcn.proj.w", "degcn.proj.b"),
                                               parts, C);
    const int joints = tape_.matmul(tape_.constant(model_->unpool().template cast<S>()),
                                    partRows);
    const int conv = tape_.relu(linear(
        tape_.matmul(tape_.constant(model_->adjacency().template cast<S>()), joints), "degcn.gc.w",
        "degcn.gc.b"));
    const int xhat = linear(conv, "degcn.out.w", "degcn.out.b");

    const int dg = tape_.block(fd, 0, C, 1, C);
    const int out = linear(tape_.relu(linear(dg, "demlp.w1", "demlp.b1")), "demlp.w2", "demlp.b2");
    const int ghat = tape_.concatCols(tape_.block(out, 0, 0, 1, 15),
                                      tape_.logistic(tape_.block(out, 0, 15, 1, 2)));
    return {xhat, ghat};
  }

  /// Root-relative FK positions (nJoints x 3) of a pose-feature node,
  /// decoding each row's 6-D rotation and chaining the local positions;
  /// matches featureStates(skel, local) on valid features.
  int fkPositions(int x) {
    const auto& skel = model_->skeleton();
    const int n = skel.jointCount();
    if (tape_.val(x).rows() != n || tape_.val(x).cols() != 15)
      throw ValidationError("fkPositions: feature shape mismatch");
    std::vector<int> pos(static_cast<std::size_t>(n)), rot(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const int local = rot6dToMatrixNode(tape_.block(x, j, 3, 1, 6));
      const int offset = tape_.block(x, j, 0, 1, 3);
      const int parent = skel.joints[static_cast<std::size_t>(j)].parent;
      if (parent < 0) {
        pos[static_cast<std::size_t>(j)] = offset;
        rot[static_cast<std::size_t>(j)] = local;
      } else {
        const int pr = rot[static_cast<std::size_t>(parent)];
        pos[static_cast<std::size_t>(j)] =
            tape_.add(pos[static_cast<std::size_t>(parent)],
                      tape_.matmul(offset, tape_.transpose(pr)));
        rot[static_cast<std::size_t>(j)] = tape_.matmul(pr, local);
      }
    }
    int stacked = pos[0];
    for (int j = 1; j < n; ++j) stacked = tape_.concatRows(stacked, pos[static_cast<std::size_t>(j)]);
    return stacked;
  }

  struct TrainNodes {
    int fp = -1, fxPrev = -1, fgPrev = -1, fxCur = -1, fgCur = -1;
    int mu = -1, logSigma = -1, z = -1;
    int xhat = -1, ghat = -1;
  };

  /// Full training pass: embeddings, posterior, reparameterized draw,
  /// MoE decode, expansion.
  TrainNodes forwardTrain(const TrainingExample& ex, Rng& rng) {
    TrainNodes n;
    n.fp = embedPointCloud(ex.history);
    n.fxPrev = embedLocalPose(ex.prevX.data);
    n.fgPrev = embedGlobalPose(ex.prevG);
    n.fxCur = embedLocalPose(ex.curX.data);
    n.fgCur = embedGlobalPose(ex.curG);
    std::tie(n.mu, n.logSigma) = encodePosterior(n.fp, n.fxPrev, n.fgPrev, n.fxCur, n.fgCur);
    n.z = sampleLatentNode(n.mu, n.logSigma, rng);
    std::tie(n.xhat, n.ghat) = expandFeatures(decodeMoe(n.z, n.fp, n.fxPrev, n.fgPrev));
    return n;
  }

  struct InferNodes {
    int xhat = -1, ghat = -1;
  };

  /// Inference skips the posterior entirely; z defaults to the prior mean.
  InferNodes forwardInfer(const PointCloudHistory& history, const LocalPoseFeature& prevX,
                          const GlobalPoseFeature& prevG, const Vec* z = nullptr) {
    const int C = model_->config().channels;
    MatX zRow = MatX::Zero(1, C);
    if (z) {
      if (z->size() != C) throw ValidationError("forwardInfer: z width mismatch");
      zRow = z->transpose().template cast<S>();
    }
    const int fp = embedPointCloud(history);
    const int fx = embedLocalPose(prevX.data);
    const int fg = embedGlobalPose(prevG);
    InferNodes n;
    std::tie(n.xhat, n.ghat) = expandFeatures(decodeMoe(tape_.constant(zRow), fp, fx, fg));
    return n;
  }

 private:
  int p(const std::string& name) {
    const int i = model_->params().find(name);
    if (i < 0) throw ValidationError("unknown parameter: " + name);
    return paramNodes_[static_cast<std::size_t>(i)];
  }

  int linear(int x, const std::string& w, const std::string& b) {
    return tape_.addRowVector(tape_.matmul(x, p(w)), p(b));
  }

  int layerNorm(int x, const std::string& pre) {
    return tape_.addRowVector(tape_.mulRowVector(tape_.layerNormRows(x), p(pre + ".g")),
                              p(pre + ".b"));
  }

  /// Gram-Schmidt 6-D rotation decode; returns a 3x3 node whose columns are
  /// the orthonormalized basis (same convention as matrixFromRot6d).
  int rot6dToMatrixNode(int row6) {
    const int a = tape_.block(row6, 0, 0, 1, 3);
    const int b = tape_.block(row6, 0, 3, 1, 3);
    const int c1 = tape_.normalizeRow(a);
    const int dot = tape_.sum(tape_.mul(c1, b));
    const int c2 = tape_.normalizeRow(tape_.sub(b, tape_.scaleBy(c1, dot)));
    const int c3 = tape_.crossRow(c1, c2);
    return tape_.transpose(tape_.concatRows(tape_.concatRows(c1, c2), c3));
  }

  /// One cloud through the stage schedule to a single C-row.
  int cloudFeature(const MatX& cloud) {
    MatX pos = cloud;
    int feat = -1;
    const auto stages = saSchedule(model_->config());
    for (std::size_t j = 0; j < stages.size(); ++j) {
      const SaStage& st = stages[j];
      const auto centers = detail::farthestPointSample(pos, st.centroids);
      MatX newPos(st.centroids, 3);
      MatX localXyz(static_cast<Eigen::Index>(st.centroids) * st.groupSize, 3);
      std::vector<int> flat;
      flat.reserve(static_cast<std::size_t>(st.centroids) * static_cast<std::size_t>(st.groupSize));
      for (int ci = 0; ci < st.centroids; ++ci) {
        newPos.row(ci) = pos.row(centers[static_cast<std::size_t>(ci)]);
        const auto nb = detail::groupNeighbors(pos, centers[static_cast<std::size_t>(ci)],
                                               st.radius, st.groupSize);
        for (int k = 0; k < st.groupSize; ++k) {
          flat.push_back(nb[static_cast<std::size_t>(k)]);
          localXyz.row(static_cast<Eigen::Index>(ci) * st.groupSize + k) =
              pos.row(nb[static_cast<std::size_t>(k)]) - newPos.row(ci);
        }
      }
      int group = tape_.constant(localXyz);
      if (feat >= 0) group = tape_.concatCols(group, tape_.selectRows(feat, std::move(flat)));
      const std::string pre = "sa" + std::to_string(j);
      const int h = tape_.relu(linear(group, pre + ".w1", pre + ".b1"));
      const int o = tape_.relu(linear(h, pre + ".w2", pre + ".b2"));
      feat = tape_.blockRowsMax(o, st.groupSize);
      pos = std::move(newPos);
    }
    return feat;
  }

  const MovinModel<S>* model_;
  Tape<S> tape_;
  std::vector<int> paramNodes_;
};

/// Checkpoint layout: magic, version byte, config words, the skeleton, then
/// each parameter as (name, rows, cols, float32 payload).
template <class S>
void saveCheckpoint(const MovinModel<S>& model, const std::string& path) {
  BinaryWriter w(path);
  w.magic("MOVINCKP");
  w.u8(1);
  const ModelConfig& c = model.config();
  for (int v : {c.channels, c.transformerLayers, c.transformerHeads, c.mlpHidden, c.nExperts,
                c.gatingHidden, c.nJoints, c.pointsPerFrame, c.historyLen, c.saStages})
    w.u32(static_cast<std::uint32_t>(v));
  const Skeleton& skel = model.skeleton();
  w.u32(static_cast<std::uint32_t>(skel.jointCount()));
  for (const auto& j : skel.joints) {
    w.str(j.name);
    w.u32(static_cast<std::uint32_t>(j.parent + 1));
    for (int k = 0; k < 3; ++k) w.u64(std::bit_cast<std::uint64_t>(j.offset[k]));
  }
  w.u32(static_cast<std::uint32_t>(skel.leftFoot));
  w.u32(static_cast<std::uint32_t>(skel.rightFoot));
  for (int part : skel.bodyPart) w.u32(static_cast<std::uint32_t>(part));
  const auto& store = model.params();
  w.u32(static_cast<std::uint32_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) {
    const auto& e = store.entry(i);
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.value.rows()));
    w.u32(static_cast<std::uint32_t>(e.value.cols()));
    for (Eigen::Index r = 0; r < e.value.rows(); ++r)
      for (Eigen::Index cI = 0; cI < e.value.cols(); ++cI)
        w.f32(static_cast<float>(e.value(r, cI)));
  }
  w.close();
}

template <class S>
MovinModel<S> loadCheckpoint(const std::string& path) {
  BinaryReader r(path);
  r.expectMagic("MOVINCKP");
  r.expectVersion(1);
  ModelConfig c;
  for (int* f : {&c.channels, &c.transformerLayers, &c.transformerHeads, &c.mlpHidden,
                 &c.nExperts, &c.gatingHidden, &c.nJoints, &c.pointsPerFrame, &c.historyLen,
                 &c.saStages})
    *f = static_cast<int>(r.u32());
  Skeleton skel;
  const std::uint32_t joints = r.u32();
  if (joints > 1024) throw IoError("unreasonable joint count in " + path);
  for (std::uint32_t j = 0; j < joints; ++j) {
    Joint jt;
    jt.name = r.str();
    jt.parent = static_cast<int>(r.u32()) - 1;
    for (int k = 0; k < 3; ++k) jt.offset[k] = std::bit_cast<double>(r.u64());
    skel.joints.push_back(std::move(jt));
  }
  skel.leftFoot = static_cast<int>(r.u32());
  skel.rightFoot = static_cast<int>(r.u32());
  for (std::uint32_t j = 0; j < joints; ++j) skel.bodyPart.push_back(static_cast<int>(r.u32()));

  MovinModel<S> model(c, skel, 0);
  auto& store = model.params();
  const std::uint32_t count = r.u32();
  if (static_cast<int>(count) != store.count())
    throw ValidationError("checkpoint parameter count mismatch in " + path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const int idx = store.find(name);
    if (idx < 0) throw ValidationError("unknown checkpoint parameter " + name + " in " + path);
    auto& value = store.entry(idx).value;
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (static_cast<Eigen::Index>(rows) != value.rows() ||
        static_cast<Eigen::Index>(cols) != value.cols())
      throw ValidationError("checkpoint shape mismatch for " + name + " in " + path);
    for (std::uint32_t row = 0; row < rows; ++row)
      for (std::uint32_t col = 0; col < cols; ++col)
        value(row, col) = static_cast<S>(r.f32());
  }
  if (!r.atEnd()) throw IoError("trailing bytes in " + path);
  return model;
}

/// Loads into an existing model, rejecting any config disagreement.
template <class S>
void loadCheckpointInto(MovinModel<S>& model, const std::string& path) {
  MovinModel<S> loaded = loadCheckpoint<S>(path);
  if (!(loaded.config() == model.config()))
    throw ValidationError("checkpoint config mismatch: " + path);
  model.params() = loaded.params();
}

using MovinModelF = MovinModel<float>;
using MovinModelD = MovinModel<double>;

}  // namespace movin
