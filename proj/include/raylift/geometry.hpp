#pragma once

#include <Eigen/Dense>

#include "raylift/common.hpp"

// Camera geometry for monocular pose lifting.
//
// Conventions, fixed across the whole toolkit:
//  - World (WCS): right-handed, z up, ground plane z = 0, meters.
//  - Camera (CCS): x right, y down, z along the optical axis, meters.
//  - Normalized (NCS): camera frame rotated level (pitch removed) and shifted
//    so its origin sits on the ground directly below the camera; y points
//    down, so a point at world height z has y_n = -z under zero roll.
//  - Angles in radians. Pitch is positive when the camera looks down.

namespace raylift {

enum class Frame { WCS, CCS, NCS };

inline const char* frame_name(Frame f) {
  switch (f) {
    case Frame::WCS: return "WCS";
    case Frame::CCS: return "CCS";
    case Frame::NCS: return "NCS";
  }
  return "?";
}

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

// World-to-camera rigid transform: p_c = r_w2c * p_w + t_w2c.
struct CameraExtrinsics {
  Eigen::Matrix3d r_w2c = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_w2c = Eigen::Vector3d::Zero();

  void validate() const;
  Eigen::Vector3d camera_center() const { return -(r_w2c.transpose() * t_w2c); }
};

// Camera-to-normalized transform: p_n = r_c2n * p_c + t_c2n.
struct NcsTransform {
  Eigen::Matrix3d r_c2n = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_c2n = Eigen::Vector3d::Zero();
  double theta = 0;  // camera pitch absorbed by the rotation
  double h = 0;      // camera height above ground
};

struct Pose2D {
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;  // J x 2 pixels
  int joints() const { return int(points.rows()); }
};

// Bundle of view rays, one per joint. In CCS every entry has unit depth
// (x, y, 1) and the shared origin is the camera center (0,0,0). The transform
// to NCS is affine, so entries stay points on their rays and the shared
// origin moves to (0, -h, 0); together they still describe the same 3D lines.
struct RayPose {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;  // J x 3
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Frame frame = Frame::CCS;
  int joints() const { return int(points.rows()); }
};

struct Pose3D {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;  // J x 3 meters
  Frame frame = Frame::WCS;
  int root = 0;
  int joints() const { return int(points.rows()); }
};

// Pinhole projection of a world pose. Every joint must have camera-frame
// depth > tol::kBehindCamera, otherwise BehindCamera names the joint.
Pose2D project(const Pose3D& world, const CameraIntrinsics& intr, const CameraExtrinsics& extr);

// Inverse of the intrinsic part of projection: pixel -> unit-depth ray.
RayPose decouple_intrinsics(const Pose2D& px, const CameraIntrinsics& intr);

// Unit-depth rays straight from camera-frame points, bit-stable under
// intrinsic changes (no pixel round trip).
RayPose rays_from_camera_points(const Pose3D& cam);

// Height of the camera center above the ground plane; NegativeHeight below 0.
double camera_height(const CameraExtrinsics& extr);

// Pitch in [-pi/2, pi/2], positive looking down.
double camera_pitch(const CameraExtrinsics& extr);

// Rotation about the optical axis relative to a level camera (x axis
// horizontal); zero for all rigs this toolkit builds.
double camera_roll(const CameraExtrinsics& extr);

// Rotation that removes pitch theta: ((1,0,0),(0,cos,sin),(0,-sin,cos)).
Eigen::Matrix3d ncs_rotation(double theta);

// Assemble the NCS transform for a camera. Requires |roll| < tol::kRollMax
// (RollTooLarge otherwise) and non-negative camera height.
NcsTransform build_ncs(const CameraExtrinsics& extr);

Pose3D world_to_camera(const Pose3D& world, const CameraExtrinsics& extr);
Pose3D camera_to_world(const Pose3D& cam, const CameraExtrinsics& extr);

Pose3D camera_to_normalized(const Pose3D& cam, const NcsTransform& ncs);
RayPose camera_to_normalized(const RayPose& rays, const NcsTransform& ncs);
RayPose normalized_to_camera_rays(const RayPose& rays, const NcsTransform& ncs);

Pose3D world_to_normalized(const Pose3D& world, const CameraExtrinsics& extr, const NcsTransform& ncs);

// Inverse of world_to_normalized.
Pose3D unnormalize(const Pose3D& normalized, const CameraExtrinsics& extr, const NcsTransform& ncs);

// Zero-roll rig looking from `eye` toward `target`. The view direction must
// not be vertical.
CameraExtrinsics look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

// Zero-roll rig on the orbit circle around a ground point: slant distance
// `dist` toward azimuth `yaw`, height dist*sin(pitch), aimed at the center.
// camera_pitch and camera_height recover pitch and dist*sin(pitch) exactly.
CameraExtrinsics orbit_rig(const Eigen::Vector3d& ground_center, double yaw, double pitch, double dist);

}  // namespace raylift
