#include "raylift/skeleton.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

namespace raylift {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// canonical segment lengths (m); the walker rescales them to the limb budget
struct BoneTable {
  double hipw = 0.13;
  double spine = 0.22;     // hip -> mid spine
  double neckseg = 0.26;   // mid spine -> neck
  double chinseg = 0.10;   // neck -> chin
  double headseg = 0.11;   // chin -> head
  double shoulderw = 0.16;
  double uparm = 0.28;
  double forearm = 0.25;
  double thigh = 0.44;
  double shank = 0.43;
};

// joint indices of the 17-joint set
enum J17 {
  kHip = 0, kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle,
  kSpine, kNeck, kChin, kHead, kLSho, kLElb, kLWri, kRSho, kRElb, kRWri,
};

struct GaitParams {
  double psi0, psi_amp, psi_freq, psi_phase;
  double rx, ry, om1, om2, p1, p2;
  double gait_freq, hip_amp, knee_amp, arm_amp;
  double crouch_freq, crouch_phase, crouch_depth;
};

GaitParams draw_params(Rng& rng) {
  GaitParams g;
  g.psi0 = rng.uniform(0, kTau);
  g.psi_amp = rng.uniform(0.5, 0.9);
  g.psi_freq = rng.uniform(0.03, 0.06);
  g.psi_phase = rng.uniform(0, kTau);
  g.rx = rng.uniform(0.30, 0.55);
  g.ry = rng.uniform(0.30, 0.55);
  g.om1 = kTau * rng.uniform(0.02, 0.05);
  g.om2 = kTau * rng.uniform(0.02, 0.05);
  g.p1 = rng.uniform(0, kTau);
  g.p2 = rng.uniform(0, kTau);
  g.gait_freq = rng.uniform(0.8, 1.1);
  g.hip_amp = rng.uniform(0.38, 0.50);
  g.knee_amp = rng.uniform(0.45, 0.60);
  g.arm_amp = rng.uniform(0.25, 0.35);
  g.crouch_freq = rng.uniform(0.05, 0.09);
  g.crouch_phase = rng.uniform(0, kTau);
  g.crouch_depth = rng.uniform(0.5, 0.8);
  return g;
}

double crouch_amount(const GaitParams& g, double t) {
  double raw = std::sin(kTau * g.crouch_freq * t + g.crouch_phase);
  double x = (raw - 0.55) / 0.45;
  if (x <= 0) return 0;
  if (x >= 1) return g.crouch_depth;
  return g.crouch_depth * x * x * (3 - 2 * x);
}

// one 17-joint frame; bones from `bt`, already scaled
Eigen::Matrix<double, Eigen::Dynamic, 3> walker_frame(const BoneTable& bt, const GaitParams& g,
                                                      double t) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> p(17, 3);

  double psi = g.psi0 + g.psi_amp * std::sin(kTau * g.psi_freq * t + g.psi_phase);
  Eigen::Vector3d fwd(std::cos(psi), std::sin(psi), 0);
  Eigen::Vector3d left(-std::sin(psi), std::cos(psi), 0);
  Eigen::Vector3d up(0, 0, 1);

  double crouch = crouch_amount(g, t);
  double phase = kTau * g.gait_freq * t;

  Eigen::Vector3d root(g.rx * std::sin(g.om1 * t + g.p1), g.ry * std::sin(g.om2 * t + g.p2),
                       bt.thigh + bt.shank);
  p.row(kHip) = root.transpose();

  auto leg = [&](double leg_phase, double side, int hip, int knee, int ankle) {
    Eigen::Vector3d hip_j = root + side * bt.hipw * left;
    double a_hip = g.hip_amp * std::sin(leg_phase) + 0.5 * crouch;
    double bend = g.knee_amp * std::max(0.0, std::sin(leg_phase)) + crouch;
    Eigen::Vector3d d_thigh = std::sin(a_hip) * fwd - std::cos(a_hip) * up;
    Eigen::Vector3d knee_j = hip_j + bt.thigh * d_thigh;
    double a_shank = a_hip - bend;
    Eigen::Vector3d d_shank = std::sin(a_shank) * fwd - std::cos(a_shank) * up;
    Eigen::Vector3d ankle_j = knee_j + bt.shank * d_shank;
    p.row(hip) = hip_j.transpose();
    p.row(knee) = knee_j.transpose();
    p.row(ankle) = ankle_j.transpose();
  };
  leg(phase, +1.0, kLHip, kLKnee, kLAnkle);
  leg(phase + kTau / 2, -1.0, kRHip, kRKnee, kRAnkle);

  // One shared lean direction keeps the whole back straight within a frame,
  // which keeps the reduced set's hip->head and hip->shoulder spans rigid.
  double lean = 0.05 + 0.35 * crouch + 0.03 * std::sin(2 * phase);
  Eigen::Vector3d d_back = std::sin(lean) * fwd + std::cos(lean) * up;
  Eigen::Vector3d spine_j = root + bt.spine * d_back;
  Eigen::Vector3d neck_j = spine_j + bt.neckseg * d_back;
  Eigen::Vector3d chin_j = neck_j + bt.chinseg * d_back;
  Eigen::Vector3d head_j = chin_j + bt.headseg * d_back;
  p.row(kSpine) = spine_j.transpose();
  p.row(kNeck) = neck_j.transpose();
  p.row(kChin) = chin_j.transpose();
  p.row(kHead) = head_j.transpose();

  auto arm = [&](double arm_phase, double side, int sho, int elb, int wri) {
    Eigen::Vector3d sho_j = neck_j + side * bt.shoulderw * left;
    double a_arm = g.arm_amp * std::sin(arm_phase);
    Eigen::Vector3d d_up = std::sin(a_arm) * fwd - std::cos(a_arm) * up;
    Eigen::Vector3d elb_j = sho_j + bt.uparm * d_up;
    double a_fore = a_arm + 0.35 + 0.10 * std::cos(arm_phase);
    Eigen::Vector3d d_fore = std::sin(a_fore) * fwd - std::cos(a_fore) * up;
    Eigen::Vector3d wri_j = elb_j + bt.forearm * d_fore;
    p.row(sho) = sho_j.transpose();
    p.row(elb) = elb_j.transpose();
    p.row(wri) = wri_j.transpose();
  };
  // arms swing against the same-side leg
  arm(phase + kTau / 2, +1.0, kLSho, kLElb, kLWri);
  arm(phase, -1.0, kRSho, kRElb, kRWri);

  // drop the frame so the lower ankle rests on the ground
  double foot = std::min(p(kRAnkle, 2), p(kLAnkle, 2));
  p.col(2).array() -= foot;
  return p;
}

JointSet make_h36m17() {
  JointSet js;
  js.name = "h36m17";
  js.joint_names = {"hip",  "right_hip",  "right_knee",  "right_ankle", "left_hip", "left_knee",
                    "left_ankle", "spine", "neck", "chin", "head", "left_shoulder", "left_elbow",
                    "left_wrist", "right_shoulder", "right_elbow", "right_wrist"};
  js.root = 0;
  js.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
  js.mirror_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}};
  js.groups = {{0, 7, 8, 9, 10}, {11, 12, 13}, {14, 15, 16}, {4, 5, 6}, {1, 2, 3}};
  return js;
}

JointSet make_body14() {
  JointSet js;
  js.name = "body14";
  js.joint_names = {"hip", "right_hip", "right_knee", "right_ankle", "left_hip", "left_knee",
                    "left_ankle", "head", "left_shoulder", "left_elbow", "left_wrist",
                    "right_shoulder", "right_elbow", "right_wrist"};
  js.root = 0;
  js.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 0, 8, 9, 0, 11, 12};
  js.mirror_pairs = {{4, 1}, {5, 2}, {6, 3}, {8, 11}, {9, 12}, {10, 13}};
  js.groups = {{0, 7}, {8, 9, 10}, {11, 12, 13}, {4, 5, 6}, {1, 2, 3}};
  return js;
}

void write_line(std::FILE* f, const std::string& s) {
  std::fwrite(s.data(), 1, s.size(), f);
  std::fputc('\n', f);
}

std::string frame_to_json(int t, const Eigen::Matrix<double, Eigen::Dynamic, 3>& m) {
  std::string s = "{\"t\":" + std::to_string(t) + ",\"p\":[";
  for (long j = 0; j < m.rows(); ++j) {
    if (j) s += ',';
    s += '[';
    s += fmt_double(m(j, 0));
    s += ',';
    s += fmt_double(m(j, 1));
    s += ',';
    s += fmt_double(m(j, 2));
    s += ']';
  }
  s += "]}";
  return s;
}

}  // namespace

void JointSet::validate() const {
  int j = joints();
  expect(j > 0, ErrorCode::InvalidArgument, "joint set is empty");
  expect(int(parents.size()) == j, ErrorCode::InvalidArgument, "parents size mismatch");
  expect(root >= 0 && root < j && parents[root] == -1, ErrorCode::InvalidArgument,
         "root must be parentless");
  for (int i = 0; i < j; ++i) {
    if (i == root) continue;
    expect(parents[i] >= 0 && parents[i] < i, ErrorCode::InvalidArgument,
           "parents must precede children");
  }
  expect(!mirror_pairs.empty(), ErrorCode::InvalidArgument, "mirror pairs missing");
  for (auto [l, r] : mirror_pairs)
    expect(l >= 0 && l < j && r >= 0 && r < j && l != r, ErrorCode::InvalidArgument,
           "mirror pair out of range");
  expect(groups.size() == 5, ErrorCode::InvalidArgument, "expected five limb groups");
  std::set<int> seen;
  for (const auto& g : groups) {
    expect(!g.empty(), ErrorCode::InvalidArgument, "empty limb group");
    for (int i : g)
      expect(i >= 0 && i < j && seen.insert(i).second, ErrorCode::InvalidArgument,
             "groups must partition the joints");
  }
  expect(int(seen.size()) == j, ErrorCode::InvalidArgument, "groups must cover all joints");
}

bool JointSet::operator==(const JointSet& o) const {
  return name == o.name && joint_names == o.joint_names && root == o.root && parents == o.parents &&
         mirror_pairs == o.mirror_pairs && groups == o.groups;
}

const JointSet& JointSet::h36m17() {
  static const JointSet js = make_h36m17();
  return js;
}

const JointSet& JointSet::body14() {
  static const JointSet js = make_body14();
  return js;
}

Pose3D MotionSequence::pose(int t) const {
  expect(t >= 0 && t < frame_count(), ErrorCode::InvalidArgument, "frame index out of range");
  Pose3D p;
  p.points = frames[t];
  p.frame = Frame::WCS;
  p.root = joints.root;
  return p;
}

void MotionSequence::validate() const {
  joints.validate();
  expect(fps > 0, ErrorCode::InvalidArgument, "fps must be positive");
  expect(!frames.empty(), ErrorCode::InvalidArgument, "sequence has no frames");
  for (const auto& f : frames) {
    expect(int(f.rows()) == joints.joints(), ErrorCode::JointSetMismatch,
           "frame joint count mismatch");
    expect(f.allFinite(), ErrorCode::InvalidArgument, "non-finite joint position");
  }
  auto ref = bone_lengths(frames[0], joints);
  double total = 0;
  for (double b : ref) total += b;
  expect(std::abs(total - limb_total) <= 1e-9 * std::max(1.0, limb_total),
         ErrorCode::InvalidArgument, "limb_total does not match the bones");
  for (const auto& f : frames) {
    auto cur = bone_lengths(f, joints);
    for (size_t b = 0; b < ref.size(); ++b) {
      if (ref[b] <= 0) continue;
      expect(std::abs(cur[b] - ref[b]) <= tol::kBoneDrift * ref[b], ErrorCode::InvalidArgument,
             "bone " + std::to_string(b) + " drifts across frames");
    }
  }
}

std::vector<double> bone_lengths(const Eigen::Matrix<double, Eigen::Dynamic, 3>& frame,
                                 const JointSet& joints) {
  std::vector<double> out(joints.joints(), 0.0);
  for (int j = 0; j < joints.joints(); ++j) {
    if (joints.parents[j] < 0) continue;
    out[j] = (frame.row(j) - frame.row(joints.parents[j])).norm();
  }
  return out;
}

MotionSequence generate_walker(std::uint64_t seed, double duration_s, const JointSet& joints,
                               double limb_total, double fps) {
  expect(limb_total >= 2.5 && limb_total <= 4.5, ErrorCode::InvalidArgument,
         "limb budget must lie in [2.5, 4.5] m");
  expect(duration_s > 0 && fps > 0, ErrorCode::InvalidArgument, "duration and fps must be positive");
  bool reduced;
  if (joints == JointSet::h36m17()) reduced = false;
  else if (joints == JointSet::body14()) reduced = true;
  else throw Error(ErrorCode::JointSetMismatch, "walker knows h36m17 and body14 only");

  Rng rng(seed ^ 0x77a1f5b9d24c3e8bULL);
  GaitParams g = draw_params(rng);

  // calibrate the bone table against the requested joint set's bone sum
  BoneTable unit;
  auto probe = walker_frame(unit, g, 0.0);
  Eigen::Matrix<double, Eigen::Dynamic, 3> probe_set = probe;
  if (reduced) {
    const auto& map = reduction_map_17to14();
    probe_set.resize(14, 3);
    for (int j = 0; j < 14; ++j) probe_set.row(j) = probe.row(map[j]);
  }
  double unit_sum = 0;
  for (double b : bone_lengths(probe_set, joints)) unit_sum += b;
  double s = limb_total / unit_sum;
  BoneTable bt = unit;
  bt.hipw *= s; bt.spine *= s; bt.neckseg *= s; bt.chinseg *= s; bt.headseg *= s;
  bt.shoulderw *= s; bt.uparm *= s; bt.forearm *= s; bt.thigh *= s; bt.shank *= s;

  MotionSequence seq;
  seq.joints = joints;
  seq.fps = fps;
  seq.subject = "walker-" + std::to_string(seed);
  seq.limb_total = limb_total;
  int frames = int(std::llround(duration_s * fps));
  seq.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    auto f = walker_frame(bt, g, double(i) / fps);
    if (reduced) {
      const auto& map = reduction_map_17to14();
      Eigen::Matrix<double, Eigen::Dynamic, 3> r(14, 3);
      for (int j = 0; j < 14; ++j) r.row(j) = f.row(map[j]);
      seq.frames.push_back(std::move(r));
    } else {
      seq.frames.push_back(std::move(f));
    }
  }
  return seq;
}

MotionSequence scale_bones(const MotionSequence& seq, double s) {
  expect(s > 0 && std::isfinite(s), ErrorCode::InvalidArgument, "bone scale must be positive");
  MotionSequence out = seq;
  out.limb_total = seq.limb_total * s;
  for (int t = 0; t < seq.frame_count(); ++t) {
    const auto& in = seq.frames[t];
    auto& dst = out.frames[t];
    dst.row(seq.joints.root) = in.row(seq.joints.root);
    for (int j = 0; j < seq.joints.joints(); ++j) {
      int p = seq.joints.parents[j];
      if (p < 0) continue;
      dst.row(j) = dst.row(p) + s * (in.row(j) - in.row(p));
    }
  }
  return out;
}

Pose3D horizontal_flip(const Pose3D& pose, const JointSet& joints) {
  expect(pose.joints() == joints.joints(), ErrorCode::JointSetMismatch, "flip joint count mismatch");
  Pose3D out = pose;
  out.points.col(0) = -pose.points.col(0);
  for (auto [l, r] : joints.mirror_pairs) {
    out.points.row(l).swap(out.points.row(r));
  }
  return out;
}

RayPose horizontal_flip(const RayPose& rays, const JointSet& joints) {
  expect(rays.joints() == joints.joints(), ErrorCode::JointSetMismatch, "flip joint count mismatch");
  RayPose out = rays;
  out.points.col(0) = -rays.points.col(0);
  for (auto [l, r] : joints.mirror_pairs) out.points.row(l).swap(out.points.row(r));
  return out;
}

Pose2D horizontal_flip(const Pose2D& px, const JointSet& joints, double image_width) {
  expect(px.joints() == joints.joints(), ErrorCode::JointSetMismatch, "flip joint count mismatch");
  expect(image_width > 0, ErrorCode::InvalidArgument, "image width must be positive");
  Pose2D out = px;
  out.points.col(0) = image_width - px.points.col(0).array();
  for (auto [l, r] : joints.mirror_pairs) out.points.row(l).swap(out.points.row(r));
  return out;
}

const std::vector<int>& reduction_map_17to14() {
  static const std::vector<int> map = {0, 1, 2, 3, 4, 5, 6, 10, 11, 12, 13, 14, 15, 16};
  return map;
}

Pose3D to_reduced_jointset(const Pose3D& pose, const JointSet& from) {
  expect(from == JointSet::h36m17(), ErrorCode::JointSetMismatch,
         "reduction is defined for h36m17 input");
  expect(pose.joints() == from.joints(), ErrorCode::JointSetMismatch, "pose joint count mismatch");
  const auto& map = reduction_map_17to14();
  Pose3D out;
  out.frame = pose.frame;
  out.root = 0;
  out.points.resize(14, 3);
  for (int j = 0; j < 14; ++j) out.points.row(j) = pose.points.row(map[j]);
  return out;
}

MotionSequence to_reduced_jointset(const MotionSequence& seq) {
  expect(seq.joints == JointSet::h36m17(), ErrorCode::JointSetMismatch,
         "reduction is defined for h36m17 input");
  const auto& map = reduction_map_17to14();
  MotionSequence out;
  out.joints = JointSet::body14();
  out.fps = seq.fps;
  out.subject = seq.subject;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> r(14, 3);
    for (int j = 0; j < 14; ++j) r.row(j) = f.row(map[j]);
    out.frames.push_back(std::move(r));
  }
  double total = 0;
  for (double b : bone_lengths(out.frames[0], out.joints)) total += b;
  out.limb_total = total;
  return out;
}

void save_motion_jsonl(const MotionSequence& seq, const std::string& path) {
  seq.validate();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  expect(f != nullptr, ErrorCode::IoError, "cannot open " + path + " for writing");
  std::string header = "{\"type\":\"motion_header\",\"format_version\":1,\"joint_set\":\"" +
                       seq.joints.name + "\",\"fps\":" + fmt_double(seq.fps) + ",\"subject\":\"" +
                       seq.subject + "\",\"limb_total\":" + fmt_double(seq.limb_total) +
                       ",\"frames\":" + std::to_string(seq.frame_count()) + "}";
  write_line(f, header);
  for (int t = 0; t < seq.frame_count(); ++t) write_line(f, frame_to_json(t, seq.frames[t]));
  std::fclose(f);
}

MotionSequence load_motion_jsonl(const std::string& path) {
  std::ifstream in(path);
  expect(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::string line;
  expect(bool(std::getline(in, line)), ErrorCode::IoError, "missing motion header");
  nlohmann::json h = nlohmann::json::parse(line);
  expect(h.value("type", "") == "motion_header", ErrorCode::IoError, "bad motion header");

  MotionSequence seq;
  std::string set_name = h.at("joint_set").get<std::string>();
  if (set_name == "h36m17") seq.joints = JointSet::h36m17();
  else if (set_name == "body14") seq.joints = JointSet::body14();
  else throw Error(ErrorCode::JointSetMismatch, "unknown joint set " + set_name);
  seq.fps = h.at("fps").get<double>();
  seq.subject = h.at("subject").get<std::string>();
  seq.limb_total = h.at("limb_total").get<double>();
  int frames = h.at("frames").get<int>();

  seq.frames.reserve(frames);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    const auto& pts = j.at("p");
    Eigen::Matrix<double, Eigen::Dynamic, 3> m(pts.size(), 3);
    for (size_t r = 0; r < pts.size(); ++r)
      for (int c = 0; c < 3; ++c) m(long(r), c) = pts[r][c].get<double>();
    seq.frames.push_back(std::move(m));
  }
  expect(seq.frame_count() == frames, ErrorCode::IoError, "frame count mismatch in " + path);
  seq.validate();
  return seq;
}

}  // namespace raylift
