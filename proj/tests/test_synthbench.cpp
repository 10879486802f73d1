#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "raylift/metrics.hpp"
#include "raylift/synthbench.hpp"

using namespace raylift;

namespace {

constexpr double kDeg = M_PI / 180.0;

std::vector<SubjectSequence> one_walker(std::uint64_t seed, double dur = 30) {
  SubjectSequence s;
  s.motion = generate_walker(seed, dur, JointSet::h36m17(), 3.8, 5.0);
  return {s};
}

bool close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("arithmetic grids are inclusive and validated") {
  auto r = grid_values({60, 300, 120});
  REQUIRE(r.size() == 3);
  CHECK(r == std::vector<double>{60, 180, 300});
  CHECK(grid_values({2, 36, 2}).size() == 18);
  auto d = grid_values({9.05, 12.85, 0.76});
  REQUIRE(d.size() == 6);
  CHECK(close(d.back(), 12.85, 1e-12));
  CHECK(grid_values({7, 7, 1}) == std::vector<double>{7});  // zero width -> singleton
  CHECK_THROWS_AS(grid_values({5, 4, 1}), Error);
  CHECK_THROWS_AS(grid_values({0, 1, -1}), Error);
  try {
    grid_values({5, 4, 1});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGrid);
  }

  auto l = grid_linspace(1100, 1180, 10);
  REQUIRE(l.size() == 10);
  CHECK(l.front() == 1100.0);
  CHECK(l.back() == 1180.0);
}

TEST_CASE("published-scale camera sets hit the documented counts with zero discards") {
  auto seqs = one_walker(1);
  Eigen::Vector3d center = scene_center(seqs);
  CHECK(center.z() == 0.0);
  CHECK(std::abs(center.x()) < 1.0);

  auto train_cfg = full_train_bench(1);
  auto ext_cfg = full_extrinsic_bench(1);
  auto intr_cfg = full_intrinsic_bench(1);

  auto train = build_cameras(train_cfg.cameras, center);
  auto ext = build_cameras(ext_cfg.cameras, center);
  auto intr = build_cameras(intr_cfg.cameras, center);
  CHECK(train.size() == 324);
  CHECK(ext.size() == 126);
  CHECK(intr.size() == 100);

  // the field-of-view filter kept everything, so the raw grids are the counts
  auto raw = filter_fov(train, seqs);
  CHECK(raw.discarded == 0);

  // ids contiguous from zero
  for (size_t i = 0; i < ext.size(); ++i) CHECK(ext[i].id == int(i));

  // every camera is valid and recovers its grid pitch and distance
  for (const auto& c : train) {
    c.intrinsics.validate();
    c.extrinsics.validate();
    CHECK(close(camera_pitch(c.extrinsics), c.axes.at("pitch") * kDeg));
    CHECK(close((c.extrinsics.camera_center() - center).norm(), c.axes.at("translation"), 1e-9));
    CHECK(close(camera_height(c.extrinsics),
                c.axes.at("translation") * std::sin(c.axes.at("pitch") * kDeg), 1e-9));
    CHECK(std::abs(camera_roll(c.extrinsics)) < 1e-12);
  }
}

TEST_CASE("every joint of every frame projects in-frame for all published-scale cameras") {
  auto seqs = one_walker(1);
  Eigen::Vector3d center = scene_center(seqs);
  std::vector<VirtualCamera> all;
  for (const auto& cfg : {full_train_bench(1), full_extrinsic_bench(1), full_intrinsic_bench(1)})
    for (auto& c : build_cameras(cfg.cameras, center)) all.push_back(c);
  REQUIRE(all.size() == 550);

  const auto& seq = seqs[0].motion;
  long violations = 0;
  for (const auto& cam : all) {
    for (int t = 0; t < seq.frame_count(); ++t) {
      Pose2D px = project(seq.pose(t), cam.intrinsics, cam.extrinsics);
      for (int j = 0; j < px.joints(); ++j) {
        bool in = px.points(j, 0) >= 0.0 && px.points(j, 0) <= cam.intrinsics.width &&
                  px.points(j, 1) >= 0.0 && px.points(j, 1) <= cam.intrinsics.height;
        if (!in) ++violations;
      }
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("training and extrinsic-test rigs never share a grid point") {
  auto seqs = one_walker(1);
  Eigen::Vector3d center = scene_center(seqs);
  auto train = build_cameras(full_train_bench(1).cameras, center);
  auto ext = build_cameras(full_extrinsic_bench(1).cameras, center);
  for (const auto& a : train)
    for (const auto& b : ext) {
      bool same = close(a.axes.at("rotation"), b.axes.at("rotation"), 1e-6) &&
                  close(a.axes.at("pitch"), b.axes.at("pitch"), 1e-6) &&
                  close(a.axes.at("translation"), b.axes.at("translation"), 1e-6);
      CHECK(!same);
    }
}

TEST_CASE("a full-circle rotation grid folds onto twelve distinct rigs") {
  AugmentationConfig cfg;
  cfg.base = h36m_like_intrinsics();
  cfg.extrinsic_blocks = {{{0, 360, 30}, {19, 19, 1}, {11, 11, 1}}};
  auto seqs = one_walker(4, 4);
  auto cams = build_cameras(cfg, scene_center(seqs));
  CHECK(cams.size() == 12);

  // 0 and 360 degrees are the same rig
  Eigen::Vector3d c(0.2, -0.1, 0);
  auto a = orbit_rig(c, 0.0, 19 * kDeg, 11.0);
  auto b = orbit_rig(c, 2 * M_PI, 19 * kDeg, 11.0);
  CHECK((a.r_w2c - b.r_w2c).norm() < 1e-12);
  CHECK((a.t_w2c - b.t_w2c).norm() < 1e-11);
}

TEST_CASE("intrinsic grid covers the product and zero-width ranges collapse") {
  AugmentationConfig cfg;
  cfg.base = h36m_like_intrinsics();
  cfg.intrinsic_mode = IntrinsicMode::Cross;
  cfg.focal = {1100, 1180, 40};      // 3 values
  cfg.principal = {480, 520, 20};    // 3 values
  auto grid = augment_intrinsics(cfg.base, cfg);
  CHECK(grid.size() == 9);
  for (const auto& i : grid) {
    CHECK(i.fx == i.fy);
    CHECK(i.cx == i.cy);
    CHECK(i.width == cfg.base.width);
  }

  cfg.focal = {1150, 1150, 1};
  cfg.principal = {500, 500, 1};
  CHECK(augment_intrinsics(cfg.base, cfg).size() == 1);
}

TEST_CASE("camera noise perturbs exactly the requested family") {
  auto seqs = one_walker(5, 4);
  Eigen::Vector3d center = scene_center(seqs);
  AugmentationConfig cfg;
  cfg.base = h36m_like_intrinsics();
  cfg.extrinsic_blocks = {{{40, 40, 1}, {14, 14, 1}, {9, 9, 1}}};
  auto cams = build_cameras(cfg, center);
  REQUIRE(cams.size() == 1);
  const VirtualCamera& cam = cams[0];

  // zero std is the identity apart from the recorded axis
  for (auto fam : {NoiseFamily::Focal, NoiseFamily::Center, NoiseFamily::Pitch, NoiseFamily::Yaw,
                   NoiseFamily::Translation}) {
    auto n = add_camera_noise(cam, fam, 0.0, 7);
    CHECK(n.intrinsics.fx == cam.intrinsics.fx);
    CHECK(n.intrinsics.cx == cam.intrinsics.cx);
    CHECK((n.extrinsics.r_w2c - cam.extrinsics.r_w2c).norm() == 0.0);
    CHECK((n.extrinsics.t_w2c - cam.extrinsics.t_w2c).norm() == 0.0);
    CHECK(n.axes.at("noise_std") == 0.0);
  }

  // focal noise leaves extrinsics and center bit-identical
  auto nf = add_camera_noise(cam, NoiseFamily::Focal, 5.0, 7);
  CHECK(nf.intrinsics.fx != cam.intrinsics.fx);
  CHECK(nf.intrinsics.fx - cam.intrinsics.fx == nf.intrinsics.fy - cam.intrinsics.fy);
  CHECK(nf.intrinsics.cx == cam.intrinsics.cx);
  CHECK((nf.extrinsics.r_w2c - cam.extrinsics.r_w2c).norm() == 0.0);
  CHECK((nf.extrinsics.t_w2c - cam.extrinsics.t_w2c).norm() == 0.0);
  CHECK(nf.axes.at("noise_std") == 5.0);

  auto nc = add_camera_noise(cam, NoiseFamily::Center, 3.0, 8);
  CHECK(nc.intrinsics.cx != cam.intrinsics.cx);
  CHECK(nc.intrinsics.fx == cam.intrinsics.fx);
  CHECK((nc.extrinsics.r_w2c - cam.extrinsics.r_w2c).norm() == 0.0);

  // pitch noise: a pure extra pitch rotation about an unchanged camera center
  auto np = add_camera_noise(cam, NoiseFamily::Pitch, 0.01, 9);
  CHECK(np.intrinsics.fx == cam.intrinsics.fx);
  CHECK((np.extrinsics.camera_center() - cam.extrinsics.camera_center()).norm() < 1e-12);
  double delta = camera_pitch(np.extrinsics) - camera_pitch(cam.extrinsics);
  CHECK(std::abs(delta) > 1e-5);
  CHECK(std::abs(delta) < 0.05);
  Eigen::Matrix3d recomposed = ncs_rotation(-delta) * cam.extrinsics.r_w2c;
  CHECK((np.extrinsics.r_w2c - recomposed).norm() < 1e-9);
  CHECK(std::abs(camera_roll(np.extrinsics)) < 1e-9);

  // yaw noise: center and pitch preserved, heading turned
  auto ny = add_camera_noise(cam, NoiseFamily::Yaw, 0.01, 10);
  CHECK((ny.extrinsics.camera_center() - cam.extrinsics.camera_center()).norm() < 1e-12);
  CHECK(close(camera_pitch(ny.extrinsics), camera_pitch(cam.extrinsics)));
  CHECK((ny.extrinsics.r_w2c - cam.extrinsics.r_w2c).norm() > 1e-5);
  CHECK(std::abs(camera_roll(ny.extrinsics)) < 1e-9);

  // translation noise: rotation bit-identical, center displaced
  auto nt = add_camera_noise(cam, NoiseFamily::Translation, 0.05, 11);
  CHECK((nt.extrinsics.r_w2c - cam.extrinsics.r_w2c).norm() == 0.0);
  double moved = (nt.extrinsics.camera_center() - cam.extrinsics.camera_center()).norm();
  CHECK(moved > 1e-4);
  CHECK(moved < 1.0);

  // determinism
  auto r1 = add_camera_noise(cam, NoiseFamily::Pitch, 0.01, 9);
  CHECK((r1.extrinsics.r_w2c - np.extrinsics.r_w2c).norm() == 0.0);
  auto r2 = add_camera_noise(cam, NoiseFamily::Pitch, 0.01, 10);
  CHECK((r2.extrinsics.r_w2c - np.extrinsics.r_w2c).norm() > 0.0);

  CHECK(noise_family_from_name("pitch") == NoiseFamily::Pitch);
  CHECK_THROWS_AS(noise_family_from_name("wobble"), Error);
}

TEST_CASE("materialized windows: counts, reprojection, and normalization round trip") {
  auto seqs = one_walker(6, 6);  // 30 frames
  Eigen::Vector3d center = scene_center(seqs);
  AugmentationConfig cfg;
  cfg.base = h36m_like_intrinsics();
  cfg.extrinsic_blocks = {{{0, 120, 120}, {12, 18, 6}, {9, 9, 1}}};  // 2 x 2 x 1 rigs
  auto cams = build_cameras(cfg, center);
  REQUIRE(cams.size() == 4);

  MaterializeStats stats;
  auto recs = materialize(seqs, cams, 4, 1, 0.0, 99, 1, &stats);
  CHECK(stats.total() == 0);
  CHECK(recs.size() == 4 * (30 - 8));

  const auto& seq = seqs[0].motion;
  for (const auto& r : recs) {
    REQUIRE(r.pixels.size() == 9);
    REQUIRE(r.rays_ncs.size() == 9);
    const auto& cam = cams[size_t(r.camera_id)];
    NcsTransform ncs = build_ncs(cam.extrinsics);
    CHECK(r.theta == ncs.theta);
    CHECK(r.h == ncs.h);
    CHECK(r.gt_ncs.frame == Frame::NCS);
    CHECK(r.gt_wcs.frame == Frame::WCS);

    // rays reproject onto the stored pixels
    for (int f = 0; f < 9; ++f) {
      CHECK(r.rays_ncs[f].frame == Frame::NCS);
      CHECK((r.rays_ncs[f].origin - ncs.t_c2n).norm() == 0.0);
      RayPose ccs = normalized_to_camera_rays(r.rays_ncs[f], ncs);
      for (int j = 0; j < 17; ++j) {
        double z = ccs.points(j, 2);
        double u = cam.intrinsics.fx * ccs.points(j, 0) / z + cam.intrinsics.cx;
        double v = cam.intrinsics.fy * ccs.points(j, 1) / z + cam.intrinsics.cy;
        CHECK(close(u, r.pixels[f].points(j, 0)));
        CHECK(close(v, r.pixels[f].points(j, 1)));
      }
    }

    // center-frame GT round trips and matches the sequence
    Pose3D back = unnormalize(r.gt_ncs, cam.extrinsics, ncs);
    CHECK((back.points - r.gt_wcs.points).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((r.gt_wcs.points - seq.frames[size_t(r.t0 + 4)]).norm() == 0.0);
  }

  // stride thins the windows deterministically
  auto strided = materialize(seqs, cams, 4, 4, 0.0, 99, 1);
  CHECK(strided.size() == 4 * 6);  // t0 in {0,4,8,12,16,20}
  CHECK(strided[0].t0 == 0);
  CHECK(strided[1].t0 == 4);
}

TEST_CASE("keypoint jitter moves pixels and keeps rays consistent with them") {
  auto seqs = one_walker(7, 4);
  Eigen::Vector3d center = scene_center(seqs);
  AugmentationConfig cfg;
  cfg.base = h36m_like_intrinsics();
  cfg.extrinsic_blocks = {{{90, 90, 1}, {15, 15, 1}, {8, 8, 1}}};
  auto cams = build_cameras(cfg, center);
  REQUIRE(cams.size() == 1);
  NcsTransform ncs = build_ncs(cams[0].extrinsics);

  auto clean = materialize(seqs, cams, 4, 1, 0.0, 5, 1);
  auto noisy = materialize(seqs, cams, 4, 1, 1.5, 5, 1);
  REQUIRE(clean.size() == noisy.size());

  double max_shift = 0;
  for (size_t i = 0; i < clean.size(); ++i) {
    for (int f = 0; f < 9; ++f) {
      max_shift = std::max(max_shift, (noisy[i].pixels[f].points - clean[i].pixels[f].points)
                                          .cwiseAbs()
                                          .maxCoeff());
      RayPose ccs = normalized_to_camera_rays(noisy[i].rays_ncs[f], ncs);
      for (int j = 0; j < 17; ++j) {
        double z = ccs.points(j, 2);
        double u = cams[0].intrinsics.fx * ccs.points(j, 0) / z + cams[0].intrinsics.cx;
        CHECK(close(u, noisy[i].pixels[f].points(j, 0)));
      }
    }
    // ground truth stays clean
    CHECK((noisy[i].gt_wcs.points - clean[i].gt_wcs.points).norm() == 0.0);
  }
  CHECK(max_shift > 0.5);
  CHECK(max_shift < 12.0);

  // overlapping windows see the same jitter for the same underlying frame
  for (size_t i = 0; i + 1 < noisy.size(); ++i) {
    if (noisy[i].camera_id != noisy[i + 1].camera_id) continue;
    if (noisy[i + 1].t0 != noisy[i].t0 + 1) continue;
    CHECK((noisy[i].pixels[1].points - noisy[i + 1].pixels[0].points).norm() == 0.0);
  }
}

TEST_CASE("bone-scale augmentation produces correctly scaled subjects") {
  BenchConfig cfg = desk_train_bench(11);
  cfg.duration_s = 4;
  cfg.bone_scales = {0.9, 1.0, 1.1};
  Dataset ds = build_dataset(cfg);
  CHECK(ds.cameras.size() == 24);
  std::set<double> scales;
  for (const auto& r : ds.records) scales.insert(r.bone_scale);
  CHECK(scales == std::set<double>{0.9, 1.0, 1.1});
  for (const auto& r : ds.records) {
    double total = 0;
    for (double b : bone_lengths(r.gt_wcs.points, ds.joints)) total += b;
    CHECK(close(total, 3.8 * r.bone_scale, 1e-8));
  }
}

TEST_CASE("dataset files are byte-reproducible and parallel-build invariant") {
  BenchConfig cfg = desk_holdout_bench(21);
  cfg.duration_s = 4;
  Dataset d1 = build_dataset(cfg);
  Dataset d2 = build_dataset(cfg);
  save_dataset_jsonl(d1, "bench_a.jsonl");
  save_dataset_jsonl(d2, "bench_b.jsonl");
  CHECK(read_text_file("bench_a.jsonl") == read_text_file("bench_b.jsonl"));

  cfg.jobs = 3;
  Dataset d3 = build_dataset(cfg);
  save_dataset_jsonl(d3, "bench_c.jsonl");
  CHECK(read_text_file("bench_a.jsonl") == read_text_file("bench_c.jsonl"));

  // a different seed changes the motion, hence the bytes
  BenchConfig other = desk_holdout_bench(22);
  other.duration_s = 4;
  save_dataset_jsonl(build_dataset(other), "bench_d.jsonl");
  CHECK(read_text_file("bench_a.jsonl") != read_text_file("bench_d.jsonl"));

  // jitter is part of the seeded stream
  BenchConfig noisy = desk_holdout_bench(21, 1.5);
  noisy.duration_s = 4;
  Dataset n1 = build_dataset(noisy);
  Dataset n2 = build_dataset(noisy);
  save_dataset_jsonl(n1, "bench_e.jsonl");
  save_dataset_jsonl(n2, "bench_f.jsonl");
  CHECK(read_text_file("bench_e.jsonl") == read_text_file("bench_f.jsonl"));
  CHECK(read_text_file("bench_e.jsonl") != read_text_file("bench_a.jsonl"));

  for (const char* f : {"bench_a.jsonl", "bench_b.jsonl", "bench_c.jsonl", "bench_d.jsonl",
                        "bench_e.jsonl", "bench_f.jsonl"})
    std::remove(f);
}

TEST_CASE("dataset reload is bit-exact") {
  BenchConfig cfg = desk_focal_sweep_bench(31);
  cfg.duration_s = 4;
  Dataset ds = build_dataset(cfg);
  CHECK(ds.cameras.size() == 9);
  CHECK(!ds.config_hash.empty());
  CHECK(ds.config_hash == cfg.hash());

  save_dataset_jsonl(ds, "bench_rt.jsonl");
  Dataset back = load_dataset_jsonl("bench_rt.jsonl");
  CHECK(back.config_hash == ds.config_hash);
  CHECK(back.joints == ds.joints);
  CHECK(back.k == ds.k);
  CHECK(back.records.size() == ds.records.size());
  CHECK(back.cameras.size() == ds.cameras.size());
  for (size_t i = 0; i < ds.cameras.size(); ++i) {
    CHECK((back.cameras[i].extrinsics.r_w2c - ds.cameras[i].extrinsics.r_w2c).norm() == 0.0);
    CHECK(back.cameras[i].axes == ds.cameras[i].axes);
  }
  for (size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].camera_id == ds.records[i].camera_id);
    CHECK(back.records[i].subject == ds.records[i].subject);
    CHECK(back.records[i].t0 == ds.records[i].t0);
    CHECK(back.records[i].h == ds.records[i].h);
    for (int f = 0; f < 9; ++f) {
      CHECK((back.records[i].pixels[f].points - ds.records[i].pixels[f].points).norm() == 0.0);
      CHECK((back.records[i].rays_ncs[f].points - ds.records[i].rays_ncs[f].points).norm() == 0.0);
    }
    CHECK((back.records[i].gt_ncs.points - ds.records[i].gt_ncs.points).norm() == 0.0);
    CHECK((back.records[i].gt_wcs.points - ds.records[i].gt_wcs.points).norm() == 0.0);
  }

  save_dataset_jsonl(back, "bench_rt2.jsonl");
  CHECK(read_text_file("bench_rt.jsonl") == read_text_file("bench_rt2.jsonl"));
  std::remove("bench_rt.jsonl");
  std::remove("bench_rt2.jsonl");
}

TEST_CASE("desk presets: counts, shared geometry, and sweep provenance") {
  auto train = desk_train_bench(1);
  auto hold = desk_holdout_bench(1);
  auto sweep = desk_focal_sweep_bench(1);
  auto seqs = one_walker(1, 24);
  Eigen::Vector3d center = scene_center(seqs);

  auto tc = build_cameras(train.cameras, center);
  auto hc = build_cameras(hold.cameras, center);
  auto sc = build_cameras(sweep.cameras, center);
  CHECK(tc.size() == 24);
  CHECK(hc.size() == 12);
  CHECK(sc.size() == 9);
  CHECK(filter_fov(tc, seqs).discarded == 0);
  CHECK(filter_fov(hc, seqs).discarded == 0);

  // sweep cameras share one rig and differ only in focal length
  for (const auto& c : sc) {
    CHECK((c.extrinsics.r_w2c - sc[0].extrinsics.r_w2c).norm() == 0.0);
    CHECK((c.extrinsics.t_w2c - sc[0].extrinsics.t_w2c).norm() == 0.0);
    CHECK(c.intrinsics.cx == sc[0].intrinsics.cx);
  }
  std::set<double> focals;
  for (const auto& c : sc) focals.insert(c.axes.at("focal"));
  CHECK(focals.size() == 9);
  CHECK(*focals.begin() == 1050.0);
  CHECK(*focals.rbegin() == 1250.0);

  // train and holdout never share an extrinsic grid point
  for (const auto& a : tc)
    for (const auto& b : hc)
      CHECK(!(close(a.axes.at("rotation"), b.axes.at("rotation"), 1e-6) &&
              close(a.axes.at("pitch"), b.axes.at("pitch"), 1e-6) &&
              close(a.axes.at("translation"), b.axes.at("translation"), 1e-6)));

  // provenance feeds the sweep aggregator
  BenchConfig small = desk_focal_sweep_bench(41);
  small.duration_s = 4;
  Dataset ds = build_dataset(small);
  std::vector<ScoredSample> scored;
  for (const auto& r : ds.records) {
    ScoredSample s;
    s.score = {1.0, 1.0, 1.0};
    auto axes = ds.camera_by_id(r.camera_id).axes;
    axes["scale"] = r.bone_scale;
    s.axes = axes;
    scored.push_back(s);
  }
  auto rows = sweep_aggregate(scored, SweepAxis::Focal);
  CHECK(rows.size() == 9);
  for (const auto& row : rows) CHECK(focals.count(row.axis_value) == 1);
}
