#include "movin/inference.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <thread>

namespace movin {
namespace {

constexpr int kRingCapacity = (kHistoryLen - 1) * kHistoryStride + 1;

void checkFrame(const PointCloudFrame& frame) {
  if (frame.pointCount() > 0 && frame.points.cols() != 3)
    throw ValidationError("step: point cloud must be N x 3");
  if (!frame.points.allFinite()) throw ValidationError("step: non-finite point cloud");
}

double millisSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void putF32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  putU32(out, bits);
}

std::uint32_t getU32(const std::vector<std::uint8_t>& in, std::size_t at) {
  if (at + 4 > in.size()) throw IoError("message payload ends early");
  return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

float getF32(const std::vector<std::uint8_t>& in, std::size_t at) {
  const std::uint32_t bits = getU32(in, at);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

constexpr std::uint32_t kMaxPayload = 64u << 20;  // sanity cap on announcements

}  // namespace

Session::Session(const MovinModelF& model, const SessionOptions& opts)
    : Session(model, restLocalPose(model.skeleton()), restGlobalPose(model.skeleton()), opts) {}

Session::Session(const MovinModelF& model, const LocalPoseFeature& initX,
                 const GlobalPoseFeature& initG, const SessionOptions& opts)
    : model_(&model), opts_(opts), root_(opts.seed) {
  if (initX.jointCount() != model.config().nJoints)
    throw ValidationError("Session: initial pose has the wrong joint count");
  condX_ = initX;
  condG_ = initG;
  prevOutX_ = initX;
  prevOutG_ = initG;
  ring_.reserve(kRingCapacity);
}

PoseFrame Session::step(const PointCloudFrame& frame) {
  checkFrame(frame);
  const auto t0 = std::chrono::steady_clock::now();

  ring_.push_back(frame);
  if (static_cast<int>(ring_.size()) > kRingCapacity) ring_.erase(ring_.begin());
  const std::uint64_t histSeed = root_.fork(2 * static_cast<std::uint64_t>(steps_)).next();
  const PointCloudHistory history = assembleHistory(
      ring_, static_cast<int>(ring_.size()) - 1, histSeed, model_->config().pointsPerFrame);

  Vec z;
  const Vec* zp = nullptr;
  if (opts_.sampleLatent) {
    Rng zRng = root_.fork(2 * static_cast<std::uint64_t>(steps_) + 1);
    z = Vec(model_->config().channels);
    for (Eigen::Index c = 0; c < z.size(); ++c) z(c) = zRng.normal();
    zp = &z;
  }

  ModelPass<float> pass(*model_, /*trainable=*/false);
  const auto nodes = pass.forwardInfer(history, condX_, condG_, zp);

  PoseFrame out;
  out.frameIndex = frame.frameIndex;
  out.local = LocalPoseFeature(model_->config().nJoints);
  out.local.data = pass.tape().val(nodes.xhat).template cast<double>();
  out.global.data = pass.tape().val(nodes.ghat).row(0).transpose().template cast<double>();

  if (opts_.footIk) {
    const auto [left, right] = detectContacts(out.global);
    out.local = applyFootIk(model_->skeleton(), out.local, out.global, left, right, prevOutX_,
                            prevOutG_)
                    .pose;
  }
  if (opts_.autoregressive) {
    // The network keeps conditioning on its raw outputs; the IK correction
    // only affects what leaves the session.
    condX_.data = pass.tape().val(nodes.xhat).template cast<double>();
    condG_ = out.global;
  }
  prevOutX_ = out.local;
  prevOutG_ = out.global;
  ++steps_;
  latenciesMs_.push_back(millisSince(t0));
  return out;
}

double percentileMs(std::vector<double> samples, double q) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(samples.size()) - 1.0,
                       std::max(0.0, std::ceil(q * static_cast<double>(samples.size())) - 1.0)));
  return samples[rank];
}

StreamReport runStream(Session& session, const FrameSource& source, const PoseSink& sink,
                       std::size_t queueCapacity) {
  BoundedQueue<PointCloudFrame> queue(queueCapacity);
  StreamReport report;
  std::mutex counts;

  std::thread producer([&] {
    while (auto frame = source()) {
      const int dropped = queue.push(std::move(*frame));
      std::lock_guard<std::mutex> lock(counts);
      ++report.produced;
      report.dropped += dropped;
    }
    queue.close();
  });

  const std::size_t firstLatency = session.latenciesMs().size();
  PointCloudFrame frame;
  try {
    while (queue.pop(frame)) {
      sink(session.step(frame));
      ++report.processed;
    }
  } catch (...) {
    queue.close();
    while (queue.pop(frame)) {  // unblock and drain the producer
    }
    producer.join();
    throw;
  }
  producer.join();

  std::vector<double> window(session.latenciesMs().begin() +
                                 static_cast<std::ptrdiff_t>(firstLatency),
                             session.latenciesMs().end());
  report.p50Ms = percentileMs(window, 0.50);
  report.p99Ms = percentileMs(window, 0.99);
  return report;
}

std::vector<std::uint8_t> encodeFramePayload(const PointCloudFrame& frame) {
  checkFrame(frame);
  std::vector<std::uint8_t> out;
  out.reserve(8 + static_cast<std::size_t>(frame.pointCount()) * 12);
  putU32(out, static_cast<std::uint32_t>(frame.frameIndex));
  putU32(out, static_cast<std::uint32_t>(frame.pointCount()));
  for (int i = 0; i < frame.pointCount(); ++i)
    for (int c = 0; c < 3; ++c) putF32(out, static_cast<float>(frame.points(i, c)));
  return out;
}

PointCloudFrame decodeFramePayload(const std::vector<std::uint8_t>& payload) {
  const std::uint32_t index = getU32(payload, 0);
  const std::uint32_t count = getU32(payload, 4);
  if (payload.size() != 8 + static_cast<std::size_t>(count) * 12)
    throw IoError("frame payload length does not match its point count");
  PointCloudFrame frame;
  frame.frameIndex = static_cast<int>(index);
  frame.points = Mat(count, 3);
  for (std::uint32_t i = 0; i < count; ++i)
    for (int c = 0; c < 3; ++c)
      frame.points(i, c) = getF32(payload, 8 + (static_cast<std::size_t>(i) * 3 + c) * 4);
  return frame;
}

std::vector<std::uint8_t> encodePosePayload(const PoseFrame& pose) {
  std::vector<std::uint8_t> out;
  const int n = pose.local.jointCount();
  out.reserve(4 + static_cast<std::size_t>(17 + n * 15) * 4);
  putU32(out, static_cast<std::uint32_t>(pose.frameIndex));
  for (int i = 0; i < 17; ++i) putF32(out, static_cast<float>(pose.global.data(i)));
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < 15; ++c) putF32(out, static_cast<float>(pose.local.data(j, c)));
  return out;
}

PoseFrame decodePosePayload(const std::vector<std::uint8_t>& payload) {
  if (payload.size() < 4 + 17 * 4 || (payload.size() - 4) % 4 != 0)
    throw IoError("pose payload has a malformed size");
  const std::size_t floats = (payload.size() - 4) / 4;
  if ((floats - 17) % 15 != 0) throw IoError("pose payload does not split into joints");
  PoseFrame pose;
  pose.frameIndex = static_cast<int>(getU32(payload, 0));
  for (int i = 0; i < 17; ++i) pose.global.data(i) = getF32(payload, 4 + 4 * i);
  const int n = static_cast<int>((floats - 17) / 15);
  pose.local = LocalPoseFeature(n);
  std::size_t at = 4 + 17 * 4;
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < 15; ++c, at += 4) pose.local.data(j, c) = getF32(payload, at);
  return pose;
}

bool writeMessage(int fd, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> framed;
  framed.reserve(4 + payload.size());
  putU32(framed, static_cast<std::uint32_t>(payload.size()));
  framed.insert(framed.end(), payload.begin(), payload.end());
  std::size_t sent = 0;
  while (sent < framed.size()) {
    const ssize_t n = ::send(fd, framed.data() + sent, framed.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

namespace {

/// True when exactly n bytes arrived; false on EOF before the first byte;
/// IoError on a cut inside the span.
bool readExact(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw IoError("connection closed mid-message");
    }
    if (r < 0) throw IoError("socket read failed");
    got += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

bool readMessage(int fd, std::vector<std::uint8_t>& payload) {
  std::uint8_t head[4];
  if (!readExact(fd, head, 4)) return false;
  const std::uint32_t len = static_cast<std::uint32_t>(head[0]) |
                            (static_cast<std::uint32_t>(head[1]) << 8) |
                            (static_cast<std::uint32_t>(head[2]) << 16) |
                            (static_cast<std::uint32_t>(head[3]) << 24);
  if (len > kMaxPayload) throw IoError("message announces an oversized payload");
  payload.resize(len);
  if (len > 0 && !readExact(fd, payload.data(), len))
    throw IoError("connection closed mid-message");
  return true;
}

int listenLocal(std::uint16_t port, std::uint16_t* boundPort) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError("socket() failed");
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(fd, 1) < 0) {
    ::close(fd);
    throw IoError("cannot listen on 127.0.0.1");
  }
  if (boundPort) {
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    *boundPort = ntohs(addr.sin_port);
  }
  return fd;
}

int acceptClient(int listenFd) {
  const int fd = ::accept(listenFd, nullptr, nullptr);
  if (fd < 0) throw IoError("accept() failed");
  return fd;
}

int connectLocal(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw IoError("cannot connect to 127.0.0.1");
  }
  return fd;
}

void closeFd(int fd) noexcept {
  if (fd >= 0) ::close(fd);
}

StreamReport servePoseClient(Session& session, int clientFd, std::size_t queueCapacity) {
  const FrameSource source = [clientFd]() -> std::optional<PointCloudFrame> {
    std::vector<std::uint8_t> payload;
    if (!readMessage(clientFd, payload)) return std::nullopt;
    return decodeFramePayload(payload);
  };
  const PoseSink sink = [clientFd](const PoseFrame& pose) {
    writeMessage(clientFd, encodePosePayload(pose));
  };
  return runStream(session, source, sink, queueCapacity);
}

}  // namespace movin
