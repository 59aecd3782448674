#include "movin/bvh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace movin {

namespace {

std::vector<std::vector<int>> childLists(const Skeleton& skel) {
  std::vector<std::vector<int>> children(skel.jointCount());
  for (int j = 1; j < skel.jointCount(); ++j) children[skel.joints[j].parent].push_back(j);
  return children;
}

void writeOffset(std::ostream& out, const std::string& indent, const Vec3& v) {
  out << indent << "OFFSET " << v[0] << " " << v[1] << " " << v[2] << "\n";
}

void writeJoint(std::ostream& out, const Skeleton& skel,
                const std::vector<std::vector<int>>& children, int j, int depth) {
  const std::string indent(static_cast<size_t>(depth) * 2, ' ');
  const std::string inner(static_cast<size_t>(depth + 1) * 2, ' ');
  out << indent << (j == 0 ? "ROOT " : "JOINT ") << skel.joints[j].name << "\n"
      << indent << "{\n";
  writeOffset(out, inner, skel.joints[j].offset);
  if (j == 0)
    out << inner
        << "CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation\n";
  else
    out << inner << "CHANNELS 3 Zrotation Yrotation Xrotation\n";
  if (children[j].empty()) {
    out << inner << "End Site\n" << inner << "{\n";
    writeOffset(out, inner + "  ", Vec3::Zero());
    out << inner << "}\n";
  } else {
    for (int c : children[j]) writeJoint(out, skel, children, c, depth + 1);
  }
  out << indent << "}\n";
}

struct Token {
  std::string text;
  int line = 0;
};

class Tokens {
 public:
  explicit Tokens(std::istream& in) {
    std::string lineText;
    int line = 1;
    while (std::getline(in, lineText)) {
      std::istringstream ls(lineText);
      std::string word;
      while (ls >> word) tokens_.push_back({word, line});
      ++line;
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }

  const Token& peek() const {
    if (done()) throw IoError("bvh: unexpected end of file");
    return tokens_[pos_];
  }

  std::string next() {
    const Token& t = peek();
    ++pos_;
    return t.text;
  }

  void expect(const std::string& word) {
    const Token t = peek();
    if (next() != word)
      throw IoError("bvh: expected '" + word + "' but found '" + t.text + "' at line " +
                    std::to_string(t.line));
  }

  double number() {
    const Token t = peek();
    try {
      size_t used = 0;
      const double v = std::stod(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument(t.text);
      ++pos_;
      return v;
    } catch (const std::exception&) {
      throw IoError("bvh: expected a number but found '" + t.text + "' at line " +
                    std::to_string(t.line));
    }
  }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

// One frame-data channel: which joint it drives and what it does.
struct Channel {
  int joint = -1;
  enum Kind { kXpos, kYpos, kZpos, kXrot, kYrot, kZrot } kind = kXpos;
};

Channel::Kind channelKind(const std::string& name) {
  if (name == "Xposition") return Channel::kXpos;
  if (name == "Yposition") return Channel::kYpos;
  if (name == "Zposition") return Channel::kZpos;
  if (name == "Xrotation") return Channel::kXrot;
  if (name == "Yrotation") return Channel::kYrot;
  if (name == "Zrotation") return Channel::kZrot;
  throw IoError("bvh: unknown channel '" + name + "'");
}

Mat3 axisRotationDeg(Channel::Kind kind, double deg) {
  const double rad = deg * kPi / 180.0;
  switch (kind) {
    case Channel::kXrot:
      return Eigen::AngleAxisd(rad, Vec3::UnitX()).toRotationMatrix();
    case Channel::kYrot:
      return Eigen::AngleAxisd(rad, Vec3::UnitY()).toRotationMatrix();
    default:
      return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix();
  }
}

void parseJoint(Tokens& toks, Skeleton& skel, std::vector<Channel>& channels, int parent) {
  const std::string kw = toks.next();
  if (kw == "End") {  // End Site: offset only, no channels, no frame data
    toks.expect("Site");
    toks.expect("{");
    toks.expect("OFFSET");
    for (int i = 0; i < 3; ++i) toks.number();
    toks.expect("}");
    return;
  }
  if (kw != (parent < 0 ? std::string("ROOT") : std::string("JOINT")))
    throw IoError("bvh: expected " + std::string(parent < 0 ? "ROOT" : "JOINT") +
                  " but found '" + kw + "'");

  Joint joint;
  joint.name = toks.next();
  joint.parent = parent;
  const int index = skel.jointCount();
  toks.expect("{");
  toks.expect("OFFSET");
  for (int i = 0; i < 3; ++i) joint.offset[i] = toks.number();
  skel.joints.push_back(joint);

  toks.expect("CHANNELS");
  const int n = static_cast<int>(toks.number());
  for (int i = 0; i < n; ++i) channels.push_back({index, channelKind(toks.next())});

  while (toks.peek().text != "}") parseJoint(toks, skel, channels, index);
  toks.expect("}");
}

}  // namespace

void writeBvh(std::ostream& out, const MotionClip& clip) {
  clip.validate();
  const Skeleton& skel = clip.skeleton;
  const std::vector<std::vector<int>> children = childLists(skel);

  out << std::fixed << std::setprecision(6);
  out << "HIERARCHY\n";
  writeJoint(out, skel, children, 0, 0);
  out << "MOTION\n"
      << "Frames: " << clip.frameCount() << "\n"
      << "Frame Time: " << 1.0 / clip.frameRate << "\n";

  for (const ClipFrame& f : clip.frames) {
    out << f.rootPos[0] << " " << f.rootPos[1] << " " << f.rootPos[2];
    const Vec3 rootZyx = eulerZyxDegFromMatrix(f.rootRot);
    out << " " << rootZyx[0] << " " << rootZyx[1] << " " << rootZyx[2];
    for (int j = 1; j < skel.jointCount(); ++j) {
      const Vec3 zyx = eulerZyxDegFromMatrix(f.localRot[j]);
      out << " " << zyx[0] << " " << zyx[1] << " " << zyx[2];
    }
    out << "\n";
  }
  if (!out) throw IoError("bvh: write failed");
}

void writeBvhFile(const std::string& path, const MotionClip& clip) {
  std::ofstream out(path);
  if (!out) throw IoError("bvh: cannot open " + path + " for writing");
  writeBvh(out, clip);
}

MotionClip readBvh(std::istream& in) {
  Tokens toks(in);
  toks.expect("HIERARCHY");

  Skeleton skel;
  std::vector<Channel> channels;
  parseJoint(toks, skel, channels, -1);

  // Foot and body-part metadata are not part of BVH; recover them by name
  // from the stock skeleton.
  const Skeleton stock = defaultSkeleton();
  skel.bodyPart.resize(skel.jointCount());
  for (int j = 0; j < skel.jointCount(); ++j) {
    const int s = stock.indexOf(skel.joints[j].name);
    if (s < 0)
      throw ValidationError("bvh: unsupported skeleton, unknown joint '" + skel.joints[j].name +
                            "'");
    skel.bodyPart[j] = stock.bodyPart[s];
    if (s == stock.leftFoot) skel.leftFoot = j;
    if (s == stock.rightFoot) skel.rightFoot = j;
  }
  skel.validate();

  toks.expect("MOTION");
  toks.expect("Frames:");
  const int frames = static_cast<int>(toks.number());
  toks.expect("Frame");
  toks.expect("Time:");
  const double frameTime = toks.number();
  if (frameTime <= 0) throw IoError("bvh: non-positive frame time");

  MotionClip clip;
  clip.skeleton = skel;
  const double rate = 1.0 / frameTime;
  clip.frameRate = std::abs(rate - std::round(rate)) < 1e-6 ? std::round(rate) : rate;
  clip.frames.resize(frames);
  for (ClipFrame& f : clip.frames) {
    f.localRot.assign(skel.jointCount(), Mat3::Identity());
    std::vector<Vec3> translation(skel.jointCount(), Vec3::Zero());
    for (const Channel& ch : channels) {
      const double v = toks.number();
      switch (ch.kind) {
        case Channel::kXpos:
          translation[ch.joint][0] += v;
          break;
        case Channel::kYpos:
          translation[ch.joint][1] += v;
          break;
        case Channel::kZpos:
          translation[ch.joint][2] += v;
          break;
        default:
          // Rotation channels compose in listed order.
          f.localRot[ch.joint] = f.localRot[ch.joint] * axisRotationDeg(ch.kind, v);
      }
    }
    f.rootPos = skel.joints[0].offset + translation[0];
    f.rootRot = f.localRot[0];
    f.localRot[0] = Mat3::Identity();
  }
  if (!toks.done()) throw IoError("bvh: trailing data after the last frame");
  clip.validate();
  return clip;
}

MotionClip readBvhFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("bvh: cannot open " + path);
  return readBvh(in);
}

}  // namespace movin
