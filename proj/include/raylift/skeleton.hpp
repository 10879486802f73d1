#pragma once

#include <string>
#include <utility>
#include <vector>

#include "raylift/geometry.hpp"

namespace raylift {

// Topology of a skeleton: parent tree rooted at the pelvis, left/right mirror
// pairs, and five limb groups (torso, left arm, right arm, left leg, right
// leg) used by the per-group feature extractors.
struct JointSet {
  std::string name;
  std::vector<std::string> joint_names;
  int root = 0;
  std::vector<int> parents;                      // -1 for the root; parents precede children
  std::vector<std::pair<int, int>> mirror_pairs; // (left, right)
  std::vector<std::vector<int>> groups;          // torso, larm, rarm, lleg, rleg

  int joints() const { return int(joint_names.size()); }
  void validate() const;
  bool operator==(const JointSet& o) const;

  // 17-joint set: pelvis, legs, spine chain, head chain, arms.
  static const JointSet& h36m17();
  // 14-joint set: h36m17 with the mid-spine, neck and chin removed.
  static const JointSet& body14();
};

// World-frame joint trajectories at a fixed frame rate. Bones are rigid:
// lengths drift at most tol::kBoneDrift relative over the whole sequence.
struct MotionSequence {
  JointSet joints;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> frames;  // T entries, J x 3 each
  double fps = 0;
  std::string subject;
  double limb_total = 0;  // sum of all bone lengths (m)

  int frame_count() const { return int(frames.size()); }
  Pose3D pose(int t) const;
  void validate() const;
};

// Bone lengths of one frame, indexed by child joint (root slot is 0).
std::vector<double> bone_lengths(const Eigen::Matrix<double, Eigen::Dynamic, 3>& frame,
                                 const JointSet& joints);

// Deterministic procedural walker: sinusoidal gait with turning, arm swing
// and occasional crouching. The root wanders inside a 6 m square around the
// origin and the lower foot touches the ground every frame. limb_total must
// lie in [2.5, 4.5] m.
MotionSequence generate_walker(std::uint64_t seed, double duration_s, const JointSet& joints,
                               double limb_total, double fps = 5.0);

// Multiply every bone by s, walking the tree from the root outward; the root
// trajectory is unchanged.
MotionSequence scale_bones(const MotionSequence& seq, double s);

// Mirror a pose laterally: negate x, then swap left/right joints.
Pose3D horizontal_flip(const Pose3D& pose, const JointSet& joints);
RayPose horizontal_flip(const RayPose& rays, const JointSet& joints);
// Pixel flip mirrors about the vertical centerline of an image of the given width.
Pose2D horizontal_flip(const Pose2D& px, const JointSet& joints, double image_width);

// h36m17 -> body14 index map and conversions.
const std::vector<int>& reduction_map_17to14();
Pose3D to_reduced_jointset(const Pose3D& pose, const JointSet& from);
MotionSequence to_reduced_jointset(const MotionSequence& seq);

// One JSON object per line: a header describing the joint set followed by one
// frame per line. Numbers round-trip exactly.
void save_motion_jsonl(const MotionSequence& seq, const std::string& path);
MotionSequence load_motion_jsonl(const std::string& path);

}  // namespace raylift
