#include "raylift/geometry.hpp"

#include <cmath>
#include <string>

namespace raylift {

namespace {

double clamp_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  expect(m.allFinite(), ErrorCode::InvalidArgument, std::string(what) + " contains non-finite values");
}

}  // namespace

void CameraIntrinsics::validate() const {
  expect(std::isfinite(fx) && std::isfinite(fy) && fx > 0 && fy > 0,
         ErrorCode::InvalidArgument, "focal lengths must be positive");
  expect(width > 0 && height > 0, ErrorCode::InvalidArgument, "image size must be positive");
  expect(std::isfinite(cx) && std::isfinite(cy) && cx >= 0 && cx <= width && cy >= 0 && cy <= height,
         ErrorCode::InvalidArgument, "principal point must lie inside the image");
}

void CameraExtrinsics::validate() const {
  check_finite(r_w2c, "rotation");
  check_finite(t_w2c, "translation");
  double ortho = (r_w2c.transpose() * r_w2c - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  expect(ortho < tol::kOrthonormal, ErrorCode::InvalidArgument,
         "rotation is not orthonormal (defect " + fmt_double(ortho) + ")");
  expect(r_w2c.determinant() > 0, ErrorCode::InvalidArgument, "rotation must be proper (det +1)");
}

Pose2D project(const Pose3D& world, const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  expect(world.frame == Frame::WCS, ErrorCode::FrameMismatch,
         std::string("project expects a WCS pose, got ") + frame_name(world.frame));
  intr.validate();
  check_finite(world.points, "pose");

  Pose2D out;
  out.points.resize(world.points.rows(), 2);
  for (long j = 0; j < world.points.rows(); ++j) {
    Eigen::Vector3d pc = extr.r_w2c * world.points.row(j).transpose() + extr.t_w2c;
    expect(pc.z() > tol::kBehindCamera, ErrorCode::BehindCamera,
           "joint " + std::to_string(j) + " has depth " + fmt_double(pc.z()));
    out.points(j, 0) = intr.fx * pc.x() / pc.z() + intr.cx;
    out.points(j, 1) = intr.fy * pc.y() / pc.z() + intr.cy;
  }
  return out;
}

RayPose decouple_intrinsics(const Pose2D& px, const CameraIntrinsics& intr) {
  intr.validate();
  check_finite(px.points, "pixels");
  RayPose out;
  out.frame = Frame::CCS;
  out.origin.setZero();
  out.points.resize(px.points.rows(), 3);
  for (long j = 0; j < px.points.rows(); ++j) {
    out.points(j, 0) = (px.points(j, 0) - intr.cx) / intr.fx;
    out.points(j, 1) = (px.points(j, 1) - intr.cy) / intr.fy;
    out.points(j, 2) = 1.0;
  }
  return out;
}

RayPose rays_from_camera_points(const Pose3D& cam) {
  expect(cam.frame == Frame::CCS, ErrorCode::FrameMismatch,
         std::string("rays_from_camera_points expects CCS, got ") + frame_name(cam.frame));
  check_finite(cam.points, "pose");
  RayPose out;
  out.frame = Frame::CCS;
  out.origin.setZero();
  out.points.resize(cam.points.rows(), 3);
  for (long j = 0; j < cam.points.rows(); ++j) {
    double z = cam.points(j, 2);
    expect(z > tol::kBehindCamera, ErrorCode::BehindCamera,
           "joint " + std::to_string(j) + " has depth " + fmt_double(z));
    out.points(j, 0) = cam.points(j, 0) / z;
    out.points(j, 1) = cam.points(j, 1) / z;
    out.points(j, 2) = 1.0;
  }
  return out;
}

double camera_height(const CameraExtrinsics& extr) {
  double h = extr.camera_center().z();
  expect(h >= 0.0, ErrorCode::NegativeHeight,
         "camera center is below the ground plane (z = " + fmt_double(h) + ")");
  return h;
}

double camera_pitch(const CameraExtrinsics& extr) {
  // optical axis in world coordinates is the third row of r_w2c
  Eigen::Vector3d axis_w = extr.r_w2c.row(2).transpose();
  return std::asin(clamp_unit(-axis_w.z()));
}

double camera_roll(const CameraExtrinsics& extr) {
  // for a roll-free camera the x axis stays horizontal
  Eigen::Vector3d x_w = extr.r_w2c.row(0).transpose();
  return std::asin(clamp_unit(x_w.z()));
}

Eigen::Matrix3d ncs_rotation(double theta) {
  double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix3d r;
  r << 1, 0, 0,
       0, c, s,
       0, -s, c;
  return r;
}

NcsTransform build_ncs(const CameraExtrinsics& extr) {
  extr.validate();
  double roll = camera_roll(extr);
  expect(std::abs(roll) < tol::kRollMax, ErrorCode::RollTooLarge,
         "camera roll " + fmt_double(roll) + " exceeds " + fmt_double(tol::kRollMax));
  NcsTransform ncs;
  ncs.theta = camera_pitch(extr);
  ncs.h = camera_height(extr);
  ncs.r_c2n = ncs_rotation(ncs.theta);
  ncs.t_c2n = Eigen::Vector3d(0.0, -ncs.h, 0.0);
  return ncs;
}

Pose3D world_to_camera(const Pose3D& world, const CameraExtrinsics& extr) {
  expect(world.frame == Frame::WCS, ErrorCode::FrameMismatch,
         std::string("world_to_camera expects WCS, got ") + frame_name(world.frame));
  Pose3D out = world;
  out.frame = Frame::CCS;
  out.points = ((extr.r_w2c * world.points.transpose()).colwise() + extr.t_w2c).transpose();
  return out;
}

Pose3D camera_to_world(const Pose3D& cam, const CameraExtrinsics& extr) {
  expect(cam.frame == Frame::CCS, ErrorCode::FrameMismatch,
         std::string("camera_to_world expects CCS, got ") + frame_name(cam.frame));
  Pose3D out = cam;
  out.frame = Frame::WCS;
  out.points = (extr.r_w2c.transpose() * (cam.points.transpose().colwise() - extr.t_w2c)).transpose();
  return out;
}

Pose3D camera_to_normalized(const Pose3D& cam, const NcsTransform& ncs) {
  expect(cam.frame == Frame::CCS, ErrorCode::FrameMismatch,
         std::string("camera_to_normalized expects CCS, got ") + frame_name(cam.frame));
  Pose3D out = cam;
  out.frame = Frame::NCS;
  out.points = ((ncs.r_c2n * cam.points.transpose()).colwise() + ncs.t_c2n).transpose();
  return out;
}

RayPose camera_to_normalized(const RayPose& rays, const NcsTransform& ncs) {
  expect(rays.frame == Frame::CCS, ErrorCode::FrameMismatch,
         std::string("camera_to_normalized expects CCS rays, got ") + frame_name(rays.frame));
  RayPose out = rays;
  out.frame = Frame::NCS;
  out.points = ((ncs.r_c2n * rays.points.transpose()).colwise() + ncs.t_c2n).transpose();
  out.origin = ncs.r_c2n * rays.origin + ncs.t_c2n;
  return out;
}

RayPose normalized_to_camera_rays(const RayPose& rays, const NcsTransform& ncs) {
  expect(rays.frame == Frame::NCS, ErrorCode::FrameMismatch,
         std::string("normalized_to_camera_rays expects NCS rays, got ") + frame_name(rays.frame));
  RayPose out = rays;
  out.frame = Frame::CCS;
  out.points = (ncs.r_c2n.transpose() * (rays.points.transpose().colwise() - ncs.t_c2n)).transpose();
  out.origin = ncs.r_c2n.transpose() * (rays.origin - ncs.t_c2n);
  return out;
}

Pose3D world_to_normalized(const Pose3D& world, const CameraExtrinsics& extr, const NcsTransform& ncs) {
  expect(world.frame == Frame::WCS, ErrorCode::FrameMismatch,
         std::string("world_to_normalized expects WCS, got ") + frame_name(world.frame));
  Pose3D out = world;
  out.frame = Frame::NCS;
  Eigen::Matrix3d r_w2n = ncs.r_c2n * extr.r_w2c;
  Eigen::Vector3d t_w2n = ncs.r_c2n * extr.t_w2c + ncs.t_c2n;
  out.points = ((r_w2n * world.points.transpose()).colwise() + t_w2n).transpose();
  return out;
}

Pose3D unnormalize(const Pose3D& normalized, const CameraExtrinsics& extr, const NcsTransform& ncs) {
  expect(normalized.frame == Frame::NCS, ErrorCode::FrameMismatch,
         std::string("unnormalize expects NCS, got ") + frame_name(normalized.frame));
  Pose3D out = normalized;
  out.frame = Frame::WCS;
  Eigen::Matrix3d r_w2n = ncs.r_c2n * extr.r_w2c;
  Eigen::Vector3d t_w2n = ncs.r_c2n * extr.t_w2c + ncs.t_c2n;
  out.points = (r_w2n.transpose() * (normalized.points.transpose().colwise() - t_w2n)).transpose();
  return out;
}

CameraExtrinsics look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  Eigen::Vector3d fwd = target - eye;
  expect(fwd.norm() > 1e-12, ErrorCode::InvalidArgument, "look_at eye and target coincide");
  fwd.normalize();
  Eigen::Vector3d hor(fwd.x(), fwd.y(), 0.0);
  expect(hor.norm() > 1e-12, ErrorCode::InvalidArgument, "look_at direction is vertical");

  Eigen::Vector3d x_c = fwd.cross(Eigen::Vector3d::UnitZ()).normalized();
  Eigen::Vector3d y_c = fwd.cross(x_c);  // points downward for z-up worlds
  CameraExtrinsics extr;
  extr.r_w2c.row(0) = x_c.transpose();
  extr.r_w2c.row(1) = y_c.transpose();
  extr.r_w2c.row(2) = fwd.transpose();
  extr.t_w2c = -(extr.r_w2c * eye);
  return extr;
}

CameraExtrinsics orbit_rig(const Eigen::Vector3d& ground_center, double yaw, double pitch, double dist) {
  expect(dist > 0, ErrorCode::InvalidArgument, "orbit distance must be positive");
  expect(std::abs(pitch) < M_PI / 2, ErrorCode::InvalidArgument, "orbit pitch must be below 90 degrees");
  expect(std::abs(ground_center.z()) < 1e-12, ErrorCode::InvalidArgument,
         "orbit center must lie on the ground plane");

  Eigen::Vector3d pos = ground_center + dist * Eigen::Vector3d(std::cos(pitch) * std::cos(yaw),
                                                               std::cos(pitch) * std::sin(yaw),
                                                               std::sin(pitch));
  // Build the rotation from the level frame so pitch extraction is exact:
  // the level optical axis points from the camera toward the center.
  double az = std::atan2(ground_center.y() - pos.y(), ground_center.x() - pos.x());
  Eigen::Matrix3d level;
  level.row(0) << std::sin(az), -std::cos(az), 0;
  level.row(1) << 0, 0, -1;
  level.row(2) << std::cos(az), std::sin(az), 0;
  CameraExtrinsics extr;
  extr.r_w2c = ncs_rotation(-pitch) * level;
  extr.t_w2c = -(extr.r_w2c * pos);
  return extr;
}

}  // namespace raylift
