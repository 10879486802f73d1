#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "raylift/geometry.hpp"

using namespace raylift;

namespace {

CameraIntrinsics make_intr(double fx, double fy, double cx, double cy) {
  CameraIntrinsics k;
  k.fx = fx; k.fy = fy; k.cx = cx; k.cy = cy;
  k.width = 1000; k.height = 1000;
  return k;
}

Pose3D pose_from(std::initializer_list<Eigen::Vector3d> pts, Frame frame) {
  Pose3D p;
  p.points.resize(long(pts.size()), 3);
  long i = 0;
  for (const auto& v : pts) p.points.row(i++) = v.transpose();
  p.frame = frame;
  return p;
}

// random rig on the orbit circle; pitch kept off the degenerate poles
CameraExtrinsics random_rig(Rng& rng, Eigen::Vector3d* center_out = nullptr) {
  Eigen::Vector3d center(rng.uniform(-2, 2), rng.uniform(-2, 2), 0);
  double yaw = rng.uniform(0, 2 * M_PI);
  double pitch = rng.uniform(0.01, 1.2);
  double dist = rng.uniform(4, 15);
  if (center_out) *center_out = center;
  return orbit_rig(center, yaw, pitch, dist);
}

}  // namespace

TEST_CASE("projection hits the principal point for points on the optical axis") {
  auto intr = make_intr(1149.7, 1147.6, 508.8, 508.1);
  CameraExtrinsics extr;  // identity: CCS == WCS
  auto px = project(pose_from({{0, 0, 4.0}}, Frame::WCS), intr, extr);
  CHECK(px.points(0, 0) == doctest::Approx(508.8).epsilon(1e-15));
  CHECK(px.points(0, 1) == doctest::Approx(508.1).epsilon(1e-15));
}

TEST_CASE("projection of a hand-checked point") {
  auto intr = make_intr(1000, 800, 500, 400);
  CameraExtrinsics extr;
  auto px = project(pose_from({{0.5, -0.25, 2.0}}, Frame::WCS), intr, extr);
  CHECK(px.points(0, 0) == doctest::Approx(750.0).epsilon(1e-15));
  CHECK(px.points(0, 1) == doctest::Approx(300.0).epsilon(1e-15));
}

TEST_CASE("joint behind the camera is rejected with its index") {
  auto intr = make_intr(1000, 1000, 500, 500);
  CameraExtrinsics extr;
  auto pose = pose_from({{0, 0, 3.0}, {0, 0, 2.0}, {0.1, 0.1, -0.5}}, Frame::WCS);
  try {
    project(pose, intr, extr);
    FAIL("expected BehindCamera");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BehindCamera);
    CHECK(std::string(e.what()).find("joint 2") != std::string::npos);
  }
}

TEST_CASE("decoupling the principal point gives the unit ray") {
  auto intr = make_intr(1200, 1100, 512, 490);
  Pose2D px;
  px.points.resize(1, 2);
  px.points << 512, 490;
  auto rays = decouple_intrinsics(px, intr);
  CHECK(rays.frame == Frame::CCS);
  CHECK(rays.points(0, 0) == 0.0);
  CHECK(rays.points(0, 1) == 0.0);
  CHECK(rays.points(0, 2) == 1.0);
  CHECK(rays.origin.norm() == 0.0);
}

TEST_CASE("decouple(project(p)) equals p/z for random cameras and points") {
  Rng rng(11);
  for (int it = 0; it < 200; ++it) {
    auto intr = make_intr(rng.uniform(800, 1500), rng.uniform(800, 1500),
                          rng.uniform(400, 600), rng.uniform(400, 600));
    Pose3D cam;
    cam.frame = Frame::CCS;
    cam.points.resize(5, 3);
    for (int j = 0; j < 5; ++j)
      cam.points.row(j) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 12);
    CameraExtrinsics ident;
    Pose3D world = cam;
    world.frame = Frame::WCS;
    auto rays = decouple_intrinsics(project(world, intr, ident), intr);
    for (int j = 0; j < 5; ++j) {
      double z = cam.points(j, 2);
      CHECK(rays.points(j, 0) == doctest::Approx(cam.points(j, 0) / z).epsilon(1e-12));
      CHECK(rays.points(j, 1) == doctest::Approx(cam.points(j, 1) / z).epsilon(1e-12));
      CHECK(rays.points(j, 2) == 1.0);
    }
  }
}

TEST_CASE("rays are invariant to the intrinsics that rendered them") {
  Rng rng(12);
  for (int it = 0; it < 100; ++it) {
    Pose3D cam;
    cam.frame = Frame::CCS;
    cam.points.resize(4, 3);
    for (int j = 0; j < 4; ++j)
      cam.points.row(j) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 10);
    Pose3D world = cam;
    world.frame = Frame::WCS;
    CameraExtrinsics ident;
    auto ka = make_intr(rng.uniform(900, 1400), rng.uniform(900, 1400), 500, 500);
    auto kb = make_intr(rng.uniform(900, 1400), rng.uniform(900, 1400), 530, 470);
    auto ra = decouple_intrinsics(project(world, ka, ident), ka);
    auto rb = decouple_intrinsics(project(world, kb, ident), kb);
    CHECK((ra.points - rb.points).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("camera height for an axis-aligned rig") {
  CameraExtrinsics extr;
  extr.t_w2c << 0, 0, -3;
  CHECK(camera_height(extr) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("camera below the ground plane is rejected") {
  CameraExtrinsics extr;
  extr.t_w2c << 0, 0, 1.0;  // center at z = -1
  CHECK_THROWS_AS((void)camera_height(extr), Error);
}

TEST_CASE("orbit rigs recover pitch, height and position exactly") {
  Rng rng(13);
  for (int it = 0; it < 200; ++it) {
    Eigen::Vector3d center(rng.uniform(-3, 3), rng.uniform(-3, 3), 0);
    double yaw = rng.uniform(0, 2 * M_PI);
    double pitch = rng.uniform(0.005, 1.35);
    double dist = rng.uniform(3, 16);
    auto extr = orbit_rig(center, yaw, pitch, dist);
    extr.validate();
    CHECK(camera_pitch(extr) == doctest::Approx(pitch).epsilon(1e-9));
    CHECK(camera_height(extr) == doctest::Approx(dist * std::sin(pitch)).epsilon(1e-9));
    CHECK(std::abs(camera_roll(extr)) < 1e-12);
    Eigen::Vector3d expected_pos =
        center + dist * Eigen::Vector3d(std::cos(pitch) * std::cos(yaw),
                                        std::cos(pitch) * std::sin(yaw), std::sin(pitch));
    CHECK((extr.camera_center() - expected_pos).norm() < 1e-9);
    // optical axis aimed at the center
    Eigen::Vector3d axis_w = extr.r_w2c.row(2).transpose();
    CHECK((axis_w - (center - expected_pos).normalized()).norm() < 1e-9);
  }
}

TEST_CASE("look_at matches orbit_rig for the same eye and target") {
  Eigen::Vector3d center(0.5, -1.0, 0);
  auto a = orbit_rig(center, 0.8, 0.4, 9.0);
  auto b = look_at(a.camera_center(), center);
  CHECK((a.r_w2c - b.r_w2c).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.t_w2c - b.t_w2c).norm() < 1e-12);
}

TEST_CASE("normalization rotation has the documented shape") {
  Eigen::Matrix3d r0 = ncs_rotation(0.0);
  CHECK((r0 - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);

  Eigen::Matrix3d r90 = ncs_rotation(M_PI / 2);
  Eigen::Matrix3d want;
  want << 1, 0, 0,
          0, 0, 1,
          0, -1, 0;
  CHECK((r90 - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("build_ncs is the identity for a level camera on the ground") {
  auto extr = orbit_rig(Eigen::Vector3d::Zero(), 0.3, 0.0, 8.0);
  // pitch 0 puts the camera at height 0
  auto ncs = build_ncs(extr);
  CHECK(ncs.theta == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(ncs.h == doctest::Approx(0.0).epsilon(1e-15));
  CHECK((ncs.r_c2n - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ncs.t_c2n.norm() < 1e-12);
}

TEST_CASE("normalization translation is (0,-h,0)") {
  auto extr = orbit_rig(Eigen::Vector3d(1, 2, 0), 1.1, 0.35, 10.0);
  auto ncs = build_ncs(extr);
  CHECK(ncs.t_c2n(0) == 0.0);
  CHECK(ncs.t_c2n(1) == doctest::Approx(-ncs.h).epsilon(1e-15));
  CHECK(ncs.t_c2n(2) == 0.0);
  CHECK(ncs.h == doctest::Approx(camera_height(extr)).epsilon(1e-15));
  CHECK(ncs.theta == doctest::Approx(camera_pitch(extr)).epsilon(1e-15));
}

TEST_CASE("rolled cameras are rejected, nearly level ones accepted") {
  auto extr = orbit_rig(Eigen::Vector3d::Zero(), 0.9, 0.3, 9.0);
  auto roll_by = [&](double rho) {
    Eigen::Matrix3d m;
    m << std::cos(rho), std::sin(rho), 0,
        -std::sin(rho), std::cos(rho), 0,
         0, 0, 1;
    CameraExtrinsics out;
    out.r_w2c = m * extr.r_w2c;
    out.t_w2c = -(out.r_w2c * extr.camera_center());
    return out;
  };
  CHECK_THROWS_AS((void)build_ncs(roll_by(0.10)), Error);
  try {
    (void)build_ncs(roll_by(0.10));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RollTooLarge);
  }
  CHECK_NOTHROW((void)build_ncs(roll_by(0.02)));
}

TEST_CASE("ground points land on the y=0 plane in NCS") {
  Rng rng(14);
  for (int it = 0; it < 200; ++it) {
    Eigen::Vector3d center;
    auto extr = random_rig(rng, &center);
    auto ncs = build_ncs(extr);
    Pose3D ground;
    ground.frame = Frame::WCS;
    ground.points.resize(3, 3);
    for (int j = 0; j < 3; ++j)
      ground.points.row(j) << center.x() + rng.uniform(-2, 2), center.y() + rng.uniform(-2, 2), 0.0;
    auto pn = world_to_normalized(ground, extr, ncs);
    CHECK(pn.frame == Frame::NCS);
    CHECK(pn.points.col(1).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("a point at world height z has y_n = -z") {
  Rng rng(15);
  for (int it = 0; it < 100; ++it) {
    auto extr = random_rig(rng);
    auto ncs = build_ncs(extr);
    double z = rng.uniform(0, 2);
    Pose3D p;
    p.frame = Frame::WCS;
    p.points.resize(1, 3);
    p.points << rng.uniform(-2, 2), rng.uniform(-2, 2), z;
    auto pn = world_to_normalized(p, extr, ncs);
    CHECK(pn.points(0, 1) == doctest::Approx(-z).epsilon(1e-10));
  }
}

TEST_CASE("frame change round trips and composition agree") {
  Rng rng(16);
  for (int it = 0; it < 200; ++it) {
    auto extr = random_rig(rng);
    auto ncs = build_ncs(extr);
    Pose3D w;
    w.frame = Frame::WCS;
    w.points.resize(6, 3);
    for (int j = 0; j < 6; ++j)
      w.points.row(j) << rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2);

    auto via_cam = camera_to_normalized(world_to_camera(w, extr), ncs);
    auto direct = world_to_normalized(w, extr, ncs);
    CHECK((via_cam.points - direct.points).cwiseAbs().maxCoeff() < 1e-12);

    auto back = unnormalize(direct, extr, ncs);
    CHECK(back.frame == Frame::WCS);
    CHECK((back.points - w.points).cwiseAbs().maxCoeff() < 1e-12);

    auto cam_back = camera_to_world(world_to_camera(w, extr), extr);
    CHECK((cam_back.points - w.points).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("frame changes preserve pairwise distances") {
  Rng rng(17);
  auto extr = random_rig(rng);
  auto ncs = build_ncs(extr);
  Pose3D w;
  w.frame = Frame::WCS;
  w.points.resize(8, 3);
  for (int j = 0; j < 8; ++j)
    w.points.row(j) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2);
  auto n = world_to_normalized(w, extr, ncs);
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) {
      double dw = (w.points.row(a) - w.points.row(b)).norm();
      double dn = (n.points.row(a) - n.points.row(b)).norm();
      CHECK(dw == doctest::Approx(dn).epsilon(1e-12));
    }
}

TEST_CASE("ray transform to NCS keeps points on the 3D line") {
  Rng rng(18);
  for (int it = 0; it < 100; ++it) {
    Eigen::Vector3d center;
    auto extr = random_rig(rng, &center);
    auto ncs = build_ncs(extr);

    // a ground point visible from the rig
    Eigen::Vector3d g(center.x() + rng.uniform(-1.5, 1.5), center.y() + rng.uniform(-1.5, 1.5), 0.0);
    Pose3D gw;
    gw.frame = Frame::WCS;
    gw.points.resize(1, 3);
    gw.points = g.transpose();
    auto cam = world_to_camera(gw, extr);
    auto rays = rays_from_camera_points(cam);
    CHECK(rays.points(0, 2) == 1.0);
    auto nrays = camera_to_normalized(rays, ncs);
    CHECK(nrays.frame == Frame::NCS);
    CHECK((nrays.origin - Eigen::Vector3d(0, -ncs.h, 0)).norm() < 1e-15);

    // the ray's intersection with the NCS ground plane is the point itself
    Eigen::Vector3d dir = nrays.points.row(0).transpose() - nrays.origin;
    double t = -nrays.origin.y() / dir.y();
    Eigen::Vector3d hit = nrays.origin + t * dir;
    auto gn = world_to_normalized(gw, extr, ncs);
    CHECK((hit - gn.points.row(0).transpose()).norm() < 1e-9);
  }
}

TEST_CASE("ray NCS transform round trips back to CCS") {
  Rng rng(19);
  auto extr = random_rig(rng);
  auto ncs = build_ncs(extr);
  Pose2D px;
  px.points.resize(4, 2);
  for (int j = 0; j < 4; ++j) px.points.row(j) << rng.uniform(0, 1000), rng.uniform(0, 1000);
  auto rays = decouple_intrinsics(px, make_intr(1100, 1100, 500, 500));
  auto n = camera_to_normalized(rays, ncs);
  auto back = normalized_to_camera_rays(n, ncs);
  CHECK(back.frame == Frame::CCS);
  CHECK((back.points - rays.points).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.origin.norm() < 1e-12);
}

TEST_CASE("frame tags are enforced") {
  auto extr = orbit_rig(Eigen::Vector3d::Zero(), 0.2, 0.3, 8.0);
  auto ncs = build_ncs(extr);

  Pose3D n;
  n.frame = Frame::NCS;
  n.points.resize(1, 3);
  n.points << 0, 0, 5;
  CHECK_THROWS_AS((void)world_to_camera(n, extr), Error);
  CHECK_THROWS_AS((void)camera_to_normalized(n, ncs), Error);

  RayPose r;
  r.points.resize(1, 3);
  r.points << 0, 0, 1;
  r.frame = Frame::NCS;
  CHECK_THROWS_AS((void)camera_to_normalized(r, ncs), Error);
}

TEST_CASE("validation rejects broken inputs") {
  CameraIntrinsics k = make_intr(-5, 1000, 500, 500);
  CHECK_THROWS_AS(k.validate(), Error);

  CameraExtrinsics e;
  e.r_w2c(0, 0) = 2.0;
  CHECK_THROWS_AS(e.validate(), Error);

  Pose2D px;
  px.points.resize(1, 2);
  px.points << std::nan(""), 10.0;
  CHECK_THROWS_AS((void)decouple_intrinsics(px, make_intr(1000, 1000, 500, 500)), Error);
}
