#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <vector>

#include "movin/model.hpp"
#include "movin/postprocess.hpp"

namespace movin {

struct SessionOptions {
  /// z ~ N(0, I) per step when set; the default z = 0 (the prior mean) makes
  /// runs reproducible.
  bool sampleLatent = false;
  /// Contact-driven foot IK on the emitted pose. The network keeps seeing
  /// its own raw outputs either way.
  bool footIk = false;
  /// When cleared the conditions stay pinned to the initial pose instead of
  /// the previous outputs (the "w/o autoreg." variant).
  bool autoregressive = true;
  std::uint64_t seed = 0;
};

/// One emitted pose: the frame it answers plus the feature pair.
struct PoseFrame {
  int frameIndex = 0;
  GlobalPoseFeature global;
  LocalPoseFeature local;
};

/// Streaming autoregressive decoder: push one point-cloud frame, get one
/// pose. Keeps the cloud ring buffer (21 frames covers the stride-5 history)
/// and the previous outputs as next-step conditions; everything is seeded,
/// so a fixed input stream replays bit-identically.
class Session {
 public:
  /// Conditions start from the skeleton's rest pose at the world origin.
  explicit Session(const MovinModelF& model, const SessionOptions& opts = {});
  /// Conditions start from the supplied pose (joint count must match).
  Session(const MovinModelF& model, const LocalPoseFeature& initX,
          const GlobalPoseFeature& initG, const SessionOptions& opts = {});

  /// Runs one 20 Hz step: ring push, history assembly, forward pass, optional
  /// foot IK. Malformed clouds (wrong column count, non-finite values) throw
  /// ValidationError and leave the session untouched.
  PoseFrame step(const PointCloudFrame& frame);

  int steps() const { return steps_; }
  /// Wall-clock per completed step, milliseconds, oldest first.
  const std::vector<double>& latenciesMs() const { return latenciesMs_; }
  const MovinModelF& model() const { return *model_; }

 private:
  const MovinModelF* model_;
  SessionOptions opts_;
  Rng root_;
  std::vector<PointCloudFrame> ring_;
  LocalPoseFeature condX_;   // network conditions (raw previous outputs)
  GlobalPoseFeature condG_;
  LocalPoseFeature prevOutX_;  // previous emitted pose, for foot-IK continuity
  GlobalPoseFeature prevOutG_;
  int steps_ = 0;
  std::vector<double> latenciesMs_;
};

/// Single-producer/single-consumer handoff with a hard capacity: pushing
/// into a full queue drops the oldest entry (fresh frames beat complete
/// ones). pop blocks until an item or close arrives.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity = 4) : cap_(capacity) {
    if (capacity == 0) throw ValidationError("BoundedQueue: capacity must be positive");
  }

  /// Returns the number of entries dropped to make room (0 or 1).
  int push(T item) {
    std::lock_guard<std::mutex> lock(m_);
    int dropped = 0;
    if (q_.size() == cap_) {
      q_.pop_front();
      dropped = 1;
    }
    q_.push_back(std::move(item));
    cv_.notify_one();
    return dropped;
  }

  /// False once the queue is closed and drained.
  bool pop(T& out) {
    std::unique_lock<std::mutex> lock(m_);
    cv_.wait(lock, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    return true;
  }

  void close() {
    std::lock_guard<std::mutex> lock(m_);
    closed_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  std::size_t cap_;
  bool closed_ = false;
};

struct StreamReport {
  int produced = 0;
  int processed = 0;
  int dropped = 0;
  double p50Ms = 0.0;
  double p99Ms = 0.0;
};

/// nullopt ends the stream.
using FrameSource = std::function<std::optional<PointCloudFrame>()>;
using PoseSink = std::function<void(const PoseFrame&)>;

/// Producer thread feeds the bounded queue from `source`; the calling thread
/// steps the session on every surviving frame and hands the pose to `sink`.
/// Returns once the source is exhausted and the queue drained.
StreamReport runStream(Session& session, const FrameSource& source, const PoseSink& sink,
                       std::size_t queueCapacity = 4);

/// Nearest-rank percentile (q in [0, 1]) of an unsorted sample; 0 when empty.
double percentileMs(std::vector<double> samples, double q);

// Wire protocol: every message is a little-endian u32 payload length followed
// by the payload. Frames carry u32 frame index, u32 point count, then
// N x 3 float32 rows; poses carry u32 frame index, the 17 global floats, then
// n_j x 15 local floats.
std::vector<std::uint8_t> encodeFramePayload(const PointCloudFrame& frame);
PointCloudFrame decodeFramePayload(const std::vector<std::uint8_t>& payload);
std::vector<std::uint8_t> encodePosePayload(const PoseFrame& pose);
PoseFrame decodePosePayload(const std::vector<std::uint8_t>& payload);

/// Blocking fd message pump. writeMessage prefixes the length; readMessage
/// returns false on a clean EOF at a message boundary and throws IoError on
/// a mid-message cut or oversized announcement.
bool writeMessage(int fd, const std::vector<std::uint8_t>& payload);
bool readMessage(int fd, std::vector<std::uint8_t>& payload);

/// Loopback TCP plumbing (127.0.0.1 only). listenLocal with port 0 picks a
/// free port and reports it; all three throw IoError on failure.
int listenLocal(std::uint16_t port, std::uint16_t* boundPort = nullptr);
int acceptClient(int listenFd);
int connectLocal(std::uint16_t port);
void closeFd(int fd) noexcept;

/// Serves one connected client: frame messages in, pose records out, via the
/// bounded-queue contract (so a slow link drops stale frames). Returns the
/// run report when the client stops sending.
StreamReport servePoseClient(Session& session, int clientFd, std::size_t queueCapacity = 4);

}  // namespace movin
