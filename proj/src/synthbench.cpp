#include "raylift/synthbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Geometry>
#include <json.hpp>

namespace raylift {

namespace {

constexpr double kDeg = M_PI / 180.0;

using json = nlohmann::json;

}  // namespace

std::vector<double> grid_values(const GridSpec& g) {
  expect(g.step > 0, ErrorCode::InvalidArgument, "grid step must be positive");
  expect(g.hi >= g.lo - tol::kGridFuzz, ErrorCode::EmptyGrid, "grid upper end below lower end");
  std::vector<double> out;
  // lo + i*step instead of repeated addition so long grids do not drift
  for (int i = 0;; ++i) {
    double v = g.lo + double(i) * g.step;
    if (v > g.hi + tol::kGridFuzz) break;
    out.push_back(v);
  }
  return out;
}

std::vector<double> grid_linspace(double lo, double hi, int n) {
  expect(n >= 1, ErrorCode::InvalidArgument, "linspace needs at least one value");
  std::vector<double> out(static_cast<size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out[size_t(i)] = lo + (hi - lo) * double(i) / double(n - 1);
  out[size_t(n - 1)] = hi;
  return out;
}

void AugmentationConfig::validate() const {
  base.validate();
  expect(!extrinsic_blocks.empty(), ErrorCode::InvalidArgument,
         "augmentation needs at least one extrinsic grid block");
  for (const auto& b : extrinsic_blocks) {
    grid_values(b.rotation_deg);
    grid_values(b.pitch_deg);
    grid_values(b.translation_m);
  }
  if (intrinsic_mode != IntrinsicMode::UseBase) {
    grid_values(focal);
    grid_values(principal);
  }
}

namespace {

struct IntrChoice {
  CameraIntrinsics intr;
  double focal = 0;
  double principal = 0;
};

// grid intrinsics are square-pixel, centered: fx = fy, cx = cy
std::vector<IntrChoice> intrinsic_pool(const AugmentationConfig& cfg) {
  std::vector<IntrChoice> out;
  if (cfg.intrinsic_mode == IntrinsicMode::UseBase) {
    out.push_back({cfg.base, cfg.base.fx, cfg.base.cx});
    return out;
  }
  for (double f : grid_values(cfg.focal))
    for (double p : grid_values(cfg.principal)) {
      CameraIntrinsics i = cfg.base;
      i.fx = i.fy = f;
      i.cx = i.cy = p;
      out.push_back({i, f, p});
    }
  return out;
}

struct RigChoice {
  CameraExtrinsics extr;
  double rotation = 0;   // degrees, canonical [0, 360)
  double pitch = 0;      // degrees
  double translation = 0;
};

std::vector<RigChoice> rig_list(const Eigen::Vector3d& center, const AugmentationConfig& cfg) {
  std::vector<RigChoice> out;
  for (const auto& block : cfg.extrinsic_blocks) {
    // a full-circle rotation grid would duplicate its first rig; fold to [0, 360)
    std::vector<double> rots;
    std::set<long long> seen;
    for (double r : grid_values(block.rotation_deg)) {
      double canon = std::fmod(r, 360.0);
      if (canon < 0) canon += 360.0;
      if (seen.insert(llround(canon * 1e7)).second) rots.push_back(canon);
    }
    for (double rot : rots)
      for (double pitch : grid_values(block.pitch_deg))
        for (double trans : grid_values(block.translation_m))
          out.push_back({orbit_rig(center, rot * kDeg, pitch * kDeg, trans), rot, pitch, trans});
  }
  return out;
}

}  // namespace

std::vector<CameraIntrinsics> augment_intrinsics(const CameraIntrinsics& base,
                                                 const AugmentationConfig& cfg) {
  AugmentationConfig c = cfg;
  c.base = base;
  std::vector<CameraIntrinsics> out;
  for (const auto& e : intrinsic_pool(c)) out.push_back(e.intr);
  return out;
}

std::vector<CameraExtrinsics> augment_extrinsics(const Eigen::Vector3d& scene_center,
                                                 const AugmentationConfig& cfg) {
  std::vector<CameraExtrinsics> out;
  for (const auto& r : rig_list(scene_center, cfg)) out.push_back(r.extr);
  return out;
}

std::vector<VirtualCamera> build_cameras(const AugmentationConfig& cfg,
                                         const Eigen::Vector3d& scene_center) {
  cfg.validate();
  auto rigs = rig_list(scene_center, cfg);
  auto pool = intrinsic_pool(cfg);
  const size_t nf = cfg.intrinsic_mode == IntrinsicMode::UseBase
                        ? 1
                        : grid_values(cfg.focal).size();
  const size_t np = pool.size() / nf;

  std::vector<VirtualCamera> out;
  auto push = [&out](const RigChoice& r, const IntrChoice& i) {
    VirtualCamera c;
    c.id = int(out.size());
    c.intrinsics = i.intr;
    c.extrinsics = r.extr;
    c.axes = {{"rotation", r.rotation},   {"pitch", r.pitch},      {"translation", r.translation},
              {"focal", i.focal},         {"principal", i.principal}, {"noise_std", 0.0}};
    out.push_back(std::move(c));
  };

  for (size_t ri = 0; ri < rigs.size(); ++ri) {
    switch (cfg.intrinsic_mode) {
      case IntrinsicMode::UseBase:
        push(rigs[ri], pool[0]);
        break;
      case IntrinsicMode::RoundRobin:
        // pool is focal-major, so (f, p) lives at f*np + p
        push(rigs[ri], pool[(ri % nf) * np + (ri % np)]);
        break;
      case IntrinsicMode::Cross:
        for (const auto& e : pool) push(rigs[ri], e);
        break;
    }
  }
  return out;
}

bool fov_ok(const CameraIntrinsics& intr, const CameraExtrinsics& extr,
            const std::vector<SubjectSequence>& seqs) {
  for (const auto& s : seqs) {
    for (int t = 0; t < s.motion.frame_count(); ++t) {
      Pose3D cam = world_to_camera(s.motion.pose(t), extr);
      for (int j = 0; j < cam.joints(); ++j) {
        double z = cam.points(j, 2);
        if (z <= tol::kBehindCamera) return false;
        double u = intr.fx * cam.points(j, 0) / z + intr.cx;
        double v = intr.fy * cam.points(j, 1) / z + intr.cy;
        if (u < 0 || u > intr.width || v < 0 || v > intr.height) return false;
      }
    }
  }
  return true;
}

FovFilterResult filter_fov(const std::vector<VirtualCamera>& cams,
                           const std::vector<SubjectSequence>& seqs) {
  FovFilterResult res;
  for (const auto& c : cams) {
    if (fov_ok(c.intrinsics, c.extrinsics, seqs)) {
      VirtualCamera kept = c;
      kept.id = int(res.kept.size());
      res.kept.push_back(std::move(kept));
    } else {
      ++res.discarded;
      std::ostringstream os;
      os << "camera " << c.id << " (rotation=" << c.axes.at("rotation")
         << ", pitch=" << c.axes.at("pitch") << ", translation=" << c.axes.at("translation")
         << ", focal=" << c.axes.at("focal") << ") pushes joints off-frame";
      res.reasons.push_back(os.str());
    }
  }
  return res;
}

Eigen::Vector3d scene_center(const std::vector<SubjectSequence>& seqs) {
  expect(!seqs.empty(), ErrorCode::InvalidArgument, "scene center needs at least one sequence");
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  long n = 0;
  for (const auto& s : seqs) {
    for (const auto& f : s.motion.frames) {
      acc += f.row(s.motion.joints.root).transpose();
      ++n;
    }
  }
  expect(n > 0, ErrorCode::InvalidArgument, "scene center needs at least one frame");
  acc /= double(n);
  return {acc.x(), acc.y(), 0.0};
}

const char* noise_family_name(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::Focal: return "focal";
    case NoiseFamily::Center: return "center";
    case NoiseFamily::Pitch: return "pitch";
    case NoiseFamily::Yaw: return "yaw";
    case NoiseFamily::Translation: return "translation";
  }
  return "?";
}

NoiseFamily noise_family_from_name(const std::string& name) {
  for (NoiseFamily f : {NoiseFamily::Focal, NoiseFamily::Center, NoiseFamily::Pitch,
                        NoiseFamily::Yaw, NoiseFamily::Translation})
    if (name == noise_family_name(f)) return f;
  throw Error(ErrorCode::InvalidArgument, "unknown noise family: " + name);
}

VirtualCamera add_camera_noise(const VirtualCamera& cam, NoiseFamily family, double std,
                               std::uint64_t seed) {
  expect(std >= 0, ErrorCode::InvalidArgument, "noise std must be non-negative");
  VirtualCamera out = cam;
  out.axes["noise_std"] = std;
  if (std == 0) return out;

  Rng stream = Rng(seed).fork(std::uint64_t(cam.id)).fork(std::uint64_t(family));
  switch (family) {
    case NoiseFamily::Focal: {
      double d = stream.normal() * std;
      out.intrinsics.fx += d;
      out.intrinsics.fy += d;
      break;
    }
    case NoiseFamily::Center: {
      out.intrinsics.cx += stream.normal() * std;
      out.intrinsics.cy += stream.normal() * std;
      break;
    }
    case NoiseFamily::Pitch: {
      // extra tilt about the unchanged camera center: both R and t rotate
      double d = stream.normal() * std;
      Eigen::Matrix3d q = ncs_rotation(-d);
      out.extrinsics.r_w2c = q * cam.extrinsics.r_w2c;
      out.extrinsics.t_w2c = q * cam.extrinsics.t_w2c;
      break;
    }
    case NoiseFamily::Yaw: {
      // pan about the vertical axis through the camera center
      double d = stream.normal() * std;
      Eigen::Matrix3d rz = Eigen::AngleAxisd(d, Eigen::Vector3d::UnitZ()).toRotationMatrix();
      Eigen::Vector3d c = cam.extrinsics.camera_center();
      out.extrinsics.r_w2c = cam.extrinsics.r_w2c * rz.transpose();
      out.extrinsics.t_w2c = -out.extrinsics.r_w2c * c;
      break;
    }
    case NoiseFamily::Translation: {
      Eigen::Vector3d c = cam.extrinsics.camera_center();
      c += Eigen::Vector3d(stream.normal(), stream.normal(), stream.normal()) * std;
      out.extrinsics.t_w2c = -cam.extrinsics.r_w2c * c;
      break;
    }
  }
  return out;
}

namespace {

struct FrameView {
  bool behind = false;
  bool offframe = false;
  Pose2D px;
  RayPose rays_ncs;
  bool usable() const { return !behind && !offframe; }
};

// everything derived from one subject frame as seen by one camera; keypoint
// jitter is drawn from a stream keyed by (camera, subject, frame) so the same
// frame shared by overlapping windows carries the same detections
FrameView view_frame(const Pose3D& world, const VirtualCamera& cam, const NcsTransform& ncs,
                     double pixel_noise_std, std::uint64_t seed, int subject_index, int t) {
  FrameView f;
  Pose3D camp = world_to_camera(world, cam.extrinsics);
  const int J = camp.joints();
  f.px.points.resize(J, 2);
  for (int j = 0; j < J; ++j) {
    double z = camp.points(j, 2);
    if (z <= tol::kBehindCamera) {
      f.behind = true;
      return f;
    }
    f.px.points(j, 0) = cam.intrinsics.fx * camp.points(j, 0) / z + cam.intrinsics.cx;
    f.px.points(j, 1) = cam.intrinsics.fy * camp.points(j, 1) / z + cam.intrinsics.cy;
    if (f.px.points(j, 0) < 0 || f.px.points(j, 0) > cam.intrinsics.width ||
        f.px.points(j, 1) < 0 || f.px.points(j, 1) > cam.intrinsics.height)
      f.offframe = true;
  }
  if (f.offframe) return f;

  if (pixel_noise_std > 0) {
    Rng jitter = Rng(seed)
                     .fork(std::uint64_t(cam.id))
                     .fork(std::uint64_t(subject_index))
                     .fork(std::uint64_t(t));
    for (int j = 0; j < J; ++j) {
      f.px.points(j, 0) += jitter.normal() * pixel_noise_std;
      f.px.points(j, 1) += jitter.normal() * pixel_noise_std;
    }
    // noisy detections only exist as pixels, so their rays must come from them
    f.rays_ncs = camera_to_normalized(decouple_intrinsics(f.px, cam.intrinsics), ncs);
  } else {
    // clean rays bypass the pixel round trip and stay bit-stable under
    // intrinsic changes
    f.rays_ncs = camera_to_normalized(rays_from_camera_points(camp), ncs);
  }
  return f;
}

struct TaskOut {
  std::vector<SampleRecord> records;
  MaterializeStats stats;
};

TaskOut run_task(const SubjectSequence& subj, int subject_index, const VirtualCamera& cam, int k,
                 int stride, double pixel_noise_std, std::uint64_t seed) {
  TaskOut out;
  const MotionSequence& seq = subj.motion;
  NcsTransform ncs = build_ncs(cam.extrinsics);
  const int T = seq.frame_count();
  const int W = 2 * k + 1;
  if (T < W) return out;

  std::vector<FrameView> views(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t)
    views[size_t(t)] = view_frame(seq.pose(t), cam, ncs, pixel_noise_std, seed, subject_index, t);

  for (int t0 = 0; t0 + W <= T; t0 += stride) {
    bool behind = false, offframe = false;
    for (int f = 0; f < W; ++f) {
      behind = behind || views[size_t(t0 + f)].behind;
      offframe = offframe || views[size_t(t0 + f)].offframe;
    }
    if (behind) {
      ++out.stats.skipped_behind;
      continue;
    }
    if (offframe) {
      ++out.stats.skipped_fov;
      continue;
    }

    SampleRecord r;
    r.camera_id = cam.id;
    r.subject_index = subject_index;
    r.subject = seq.subject;
    r.bone_scale = subj.bone_scale;
    r.t0 = t0;
    r.theta = ncs.theta;
    r.h = ncs.h;
    r.pixels.reserve(size_t(W));
    r.rays_ncs.reserve(size_t(W));
    for (int f = 0; f < W; ++f) {
      r.pixels.push_back(views[size_t(t0 + f)].px);
      r.rays_ncs.push_back(views[size_t(t0 + f)].rays_ncs);
    }
    r.gt_wcs = seq.pose(t0 + k);
    r.gt_ncs = world_to_normalized(r.gt_wcs, cam.extrinsics, ncs);
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<SampleRecord> materialize(const std::vector<SubjectSequence>& seqs,
                                      const std::vector<VirtualCamera>& cams, int k, int stride,
                                      double pixel_noise_std, std::uint64_t seed, int jobs,
                                      MaterializeStats* stats) {
  expect(k >= 0, ErrorCode::InvalidArgument, "window half-width must be non-negative");
  expect(stride >= 1, ErrorCode::InvalidArgument, "stride must be at least 1");
  expect(jobs >= 1, ErrorCode::InvalidArgument, "jobs must be at least 1");

  const size_t total = cams.size() * seqs.size();
  std::vector<TaskOut> outs(total);
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (size_t i; (i = cursor.fetch_add(1)) < total;) {
      const VirtualCamera& cam = cams[i / seqs.size()];
      const int si = int(i % seqs.size());
      outs[i] = run_task(seqs[size_t(si)], si, cam, k, stride, pixel_noise_std, seed);
    }
  };

  const int nthreads = int(std::min<size_t>(size_t(jobs), std::max<size_t>(total, 1)));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // task order is (camera, subject, t0), so a flat append is already sorted
  // and the byte layout is independent of the thread count
  std::vector<SampleRecord> records;
  MaterializeStats acc;
  for (auto& o : outs) {
    for (auto& r : o.records) records.push_back(std::move(r));
    acc.skipped_behind += o.stats.skipped_behind;
    acc.skipped_fov += o.stats.skipped_fov;
  }
  if (stats) *stats = acc;
  return records;
}

const VirtualCamera& Dataset::camera_by_id(int id) const {
  expect(id >= 0 && id < int(cameras.size()), ErrorCode::InvalidArgument,
         "unknown camera id " + std::to_string(id));
  const VirtualCamera& c = cameras[size_t(id)];
  expect(c.id == id, ErrorCode::InvalidArgument, "camera list out of order");
  return c;
}

void BenchConfig::validate() const {
  expect(!name.empty(), ErrorCode::InvalidArgument, "benchmark name must not be empty");
  expect(duration_s > 0, ErrorCode::InvalidArgument, "duration must be positive");
  expect(fps > 0, ErrorCode::InvalidArgument, "fps must be positive");
  expect(k >= 0, ErrorCode::InvalidArgument, "window half-width must be non-negative");
  expect(stride >= 1, ErrorCode::InvalidArgument, "stride must be at least 1");
  expect(pixel_noise_std >= 0, ErrorCode::InvalidArgument, "pixel noise std must be non-negative");
  expect(jobs >= 1, ErrorCode::InvalidArgument, "jobs must be at least 1");
  expect(!bone_scales.empty(), ErrorCode::InvalidArgument, "need at least one bone scale");
  for (double s : bone_scales)
    expect(s > 0, ErrorCode::InvalidArgument, "bone scales must be positive");
  cameras.validate();
}

std::string BenchConfig::canonical_string() const {
  std::ostringstream os;
  os << "name=" << name << '\n';
  os << "seed=" << seed << '\n';
  os << "duration_s=" << fmt_double(duration_s) << '\n';
  os << "fps=" << fmt_double(fps) << '\n';
  os << "limb_total=" << fmt_double(limb_total) << '\n';
  os << "bone_scales=";
  for (size_t i = 0; i < bone_scales.size(); ++i) {
    if (i) os << ',';
    os << fmt_double(bone_scales[i]);
  }
  os << '\n';
  os << "k=" << k << '\n';
  os << "stride=" << stride << '\n';
  os << "pixel_noise_std=" << fmt_double(pixel_noise_std) << '\n';
  // jobs stays out: it only parallelizes and never changes the output bytes
  const CameraIntrinsics& b = cameras.base;
  os << "base=" << fmt_double(b.fx) << ',' << fmt_double(b.fy) << ',' << fmt_double(b.cx) << ','
     << fmt_double(b.cy) << ',' << b.width << ',' << b.height << '\n';
  os << "intrinsic_mode=" << int(cameras.intrinsic_mode) << '\n';
  auto grid = [&os](const char* key, const GridSpec& g) {
    os << key << '=' << fmt_double(g.lo) << ',' << fmt_double(g.hi) << ',' << fmt_double(g.step)
       << '\n';
  };
  grid("focal", cameras.focal);
  grid("principal", cameras.principal);
  for (const auto& blk : cameras.extrinsic_blocks) {
    os << "block=" << fmt_double(blk.rotation_deg.lo) << ',' << fmt_double(blk.rotation_deg.hi)
       << ',' << fmt_double(blk.rotation_deg.step) << '|' << fmt_double(blk.pitch_deg.lo) << ','
       << fmt_double(blk.pitch_deg.hi) << ',' << fmt_double(blk.pitch_deg.step) << '|'
       << fmt_double(blk.translation_m.lo) << ',' << fmt_double(blk.translation_m.hi) << ','
       << fmt_double(blk.translation_m.step) << '\n';
  }
  return os.str();
}

std::string BenchConfig::hash() const { return hex64(fnv1a64(canonical_string())); }

Dataset build_dataset(const BenchConfig& cfg) {
  cfg.validate();
  MotionSequence base =
      generate_walker(cfg.seed, cfg.duration_s, JointSet::h36m17(), cfg.limb_total, cfg.fps);

  std::vector<SubjectSequence> seqs;
  for (double s : cfg.bone_scales) {
    SubjectSequence subj;
    subj.bone_scale = s;
    subj.motion = base;
    if (s != 1.0) {
      // scale about the root's ground point so feet keep ground contact and
      // the root path is unchanged
      for (auto& f : subj.motion.frames) {
        Eigen::RowVector3d c = f.row(base.joints.root);
        c(2) = 0.0;
        Eigen::Matrix<double, Eigen::Dynamic, 3> rel = f.rowwise() - c;
        f = (rel * s).rowwise() + c;
      }
      subj.motion.limb_total = base.limb_total * s;
    }
    seqs.push_back(std::move(subj));
  }

  Eigen::Vector3d center = scene_center(seqs);
  auto raw = build_cameras(cfg.cameras, center);
  auto filtered = filter_fov(raw, seqs);

  MaterializeStats stats;
  auto records = materialize(seqs, filtered.kept, cfg.k, cfg.stride, cfg.pixel_noise_std, cfg.seed,
                             cfg.jobs, &stats);

  Dataset ds;
  ds.config_hash = cfg.hash();
  ds.joints = base.joints;
  ds.fps = cfg.fps;
  ds.k = cfg.k;
  ds.stride = cfg.stride;
  ds.width = cfg.cameras.base.width;
  ds.height = cfg.cameras.base.height;
  ds.cameras = std::move(filtered.kept);
  ds.records = std::move(records);
  ds.skipped = stats.total();
  return ds;
}

CameraIntrinsics h36m_like_intrinsics() { return {1149.7, 1147.6, 508.8, 508.1, 1000, 1000}; }

BenchConfig full_train_bench(std::uint64_t seed, double duration_s) {
  BenchConfig c;
  c.name = "full-train";
  c.seed = seed;
  c.duration_s = duration_s;
  c.stride = 5;
  c.cameras.base = h36m_like_intrinsics();
  c.cameras.intrinsic_mode = IntrinsicMode::RoundRobin;
  c.cameras.focal = {1143, 1150, 1};
  c.cameras.principal = {508, 514, 1};
  c.cameras.extrinsic_blocks = {{{60, 300, 120}, {2, 36, 2}, {9.05, 12.85, 0.76}}};
  return c;
}

BenchConfig full_extrinsic_bench(std::uint64_t seed, double duration_s) {
  BenchConfig c;
  c.name = "full-ext-test";
  c.seed = seed;
  c.duration_s = duration_s;
  c.stride = 5;
  c.cameras.base = h36m_like_intrinsics();
  c.cameras.intrinsic_mode = IntrinsicMode::UseBase;
  // a full orbit at one rig plus a pitch/distance fan offset from the
  // training grids: odd pitches and half-step shifted distances
  c.cameras.extrinsic_blocks = {{{0, 360, 30}, {19, 19, 1}, {11, 11, 1}},
                                {{0, 0, 1}, {1, 37, 2}, {9.43, 13.23, 0.76}}};
  return c;
}

BenchConfig full_intrinsic_bench(std::uint64_t seed, double duration_s) {
  BenchConfig c;
  c.name = "full-intr-test";
  c.seed = seed;
  c.duration_s = duration_s;
  c.stride = 5;
  c.cameras.base = h36m_like_intrinsics();
  c.cameras.intrinsic_mode = IntrinsicMode::Cross;
  // ten evenly spaced values per axis
  c.cameras.focal = {1100, 1180, 80.0 / 9};
  c.cameras.principal = {450, 550, 100.0 / 9};
  c.cameras.extrinsic_blocks = {{{0, 0, 1}, {12, 12, 1}, {7, 7, 1}}};
  return c;
}

namespace {

CameraIntrinsics desk_base() { return {1150, 1150, 500, 500, 1000, 1000}; }

BenchConfig desk_common(std::uint64_t seed, double pixel_noise_std) {
  BenchConfig c;
  c.seed = seed;
  c.duration_s = 24;
  c.stride = 4;
  c.pixel_noise_std = pixel_noise_std;
  c.cameras.base = desk_base();
  return c;
}

}  // namespace

BenchConfig desk_train_bench(std::uint64_t seed, double pixel_noise_std) {
  BenchConfig c = desk_common(seed, pixel_noise_std);
  c.name = "desk-train";
  c.cameras.intrinsic_mode = IntrinsicMode::Cross;
  c.cameras.focal = {1050, 1250, 200};
  c.cameras.principal = {500, 500, 1};
  c.cameras.extrinsic_blocks = {{{0, 240, 120}, {8, 24, 16}, {7, 9, 2}}};
  return c;
}

BenchConfig desk_holdout_bench(std::uint64_t seed, double pixel_noise_std) {
  BenchConfig c = desk_common(seed, pixel_noise_std);
  c.name = "desk-holdout";
  c.cameras.intrinsic_mode = IntrinsicMode::UseBase;
  // rotations, pitches, and distances all fall between the desk training grid
  // points, so every holdout rig is unseen without extrapolating any axis
  c.cameras.extrinsic_blocks = {{{60, 300, 120}, {12, 20, 8}, {7.5, 8.5, 1}}};
  return c;
}

BenchConfig desk_focal_sweep_bench(std::uint64_t seed, double pixel_noise_std) {
  BenchConfig c = desk_common(seed, pixel_noise_std);
  c.name = "desk-focal-sweep";
  c.cameras.intrinsic_mode = IntrinsicMode::Cross;
  c.cameras.focal = {1050, 1250, 25};
  c.cameras.principal = {500, 500, 1};
  c.cameras.extrinsic_blocks = {{{60, 60, 1}, {12, 12, 1}, {8, 8, 1}}};
  return c;
}

namespace {

void append_rows3(std::string& s, const Eigen::Matrix<double, Eigen::Dynamic, 3>& m) {
  s += '[';
  for (int r = 0; r < m.rows(); ++r) {
    if (r) s += ',';
    s += '[';
    s += fmt_double(m(r, 0));
    s += ',';
    s += fmt_double(m(r, 1));
    s += ',';
    s += fmt_double(m(r, 2));
    s += ']';
  }
  s += ']';
}

void append_rows2(std::string& s, const Eigen::Matrix<double, Eigen::Dynamic, 2>& m) {
  s += '[';
  for (int r = 0; r < m.rows(); ++r) {
    if (r) s += ',';
    s += '[';
    s += fmt_double(m(r, 0));
    s += ',';
    s += fmt_double(m(r, 1));
    s += ']';
  }
  s += ']';
}

Eigen::Matrix<double, Eigen::Dynamic, 3> rows3_from_json(const json& j) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> m(long(j.size()), 3);
  for (long r = 0; r < m.rows(); ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(size_t(r)).at(size_t(c)).get<double>();
  return m;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> rows2_from_json(const json& j) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> m(long(j.size()), 2);
  for (long r = 0; r < m.rows(); ++r)
    for (int c = 0; c < 2; ++c) m(r, c) = j.at(size_t(r)).at(size_t(c)).get<double>();
  return m;
}

}  // namespace

void save_dataset_jsonl(const Dataset& ds, const std::string& path) {
  std::string out;
  out.reserve(1 << 20);

  out += "{\"type\":\"dataset_header\",\"format_version\":1,\"config_hash\":";
  out += json(ds.config_hash).dump();
  out += ",\"joint_set\":";
  out += json(ds.joints.name).dump();
  out += ",\"fps\":";
  out += fmt_double(ds.fps);
  out += ",\"k\":" + std::to_string(ds.k);
  out += ",\"stride\":" + std::to_string(ds.stride);
  out += ",\"width\":" + std::to_string(ds.width);
  out += ",\"height\":" + std::to_string(ds.height);
  out += ",\"cameras\":" + std::to_string(ds.cameras.size());
  out += ",\"records\":" + std::to_string(ds.records.size());
  out += ",\"skipped\":" + std::to_string(ds.skipped);
  out += "}\n";

  for (const auto& c : ds.cameras) {
    out += "{\"type\":\"camera\",\"id\":" + std::to_string(c.id);
    out += ",\"fx\":";
    out += fmt_double(c.intrinsics.fx);
    out += ",\"fy\":";
    out += fmt_double(c.intrinsics.fy);
    out += ",\"cx\":";
    out += fmt_double(c.intrinsics.cx);
    out += ",\"cy\":";
    out += fmt_double(c.intrinsics.cy);
    out += ",\"width\":" + std::to_string(c.intrinsics.width);
    out += ",\"height\":" + std::to_string(c.intrinsics.height);
    out += ",\"r\":[";
    for (int i = 0; i < 9; ++i) {
      if (i) out += ',';
      out += fmt_double(c.extrinsics.r_w2c(i / 3, i % 3));
    }
    out += "],\"t\":[";
    for (int i = 0; i < 3; ++i) {
      if (i) out += ',';
      out += fmt_double(c.extrinsics.t_w2c(i));
    }
    out += "],\"axes\":{";
    bool first = true;
    for (const auto& [k, v] : c.axes) {  // std::map order keeps this stable
      if (!first) out += ',';
      first = false;
      out += json(k).dump();
      out += ':';
      out += fmt_double(v);
    }
    out += "}}\n";
  }

  for (const auto& r : ds.records) {
    out += "{\"type\":\"record\",\"camera_id\":" + std::to_string(r.camera_id);
    out += ",\"subject_index\":" + std::to_string(r.subject_index);
    out += ",\"subject\":";
    out += json(r.subject).dump();
    out += ",\"bone_scale\":";
    out += fmt_double(r.bone_scale);
    out += ",\"t0\":" + std::to_string(r.t0);
    out += ",\"theta\":";
    out += fmt_double(r.theta);
    out += ",\"h\":";
    out += fmt_double(r.h);
    out += ",\"ray_origin\":[";
    Eigen::Vector3d origin = r.rays_ncs.empty() ? Eigen::Vector3d::Zero().eval()
                                                : r.rays_ncs.front().origin;
    for (int i = 0; i < 3; ++i) {
      if (i) out += ',';
      out += fmt_double(origin(i));
    }
    out += "],\"pixels\":[";
    for (size_t f = 0; f < r.pixels.size(); ++f) {
      if (f) out += ',';
      append_rows2(out, r.pixels[f].points);
    }
    out += "],\"rays\":[";
    for (size_t f = 0; f < r.rays_ncs.size(); ++f) {
      if (f) out += ',';
      append_rows3(out, r.rays_ncs[f].points);
    }
    out += "],\"gt_ncs\":";
    append_rows3(out, r.gt_ncs.points);
    out += ",\"gt_wcs\":";
    append_rows3(out, r.gt_wcs.points);
    out += "}\n";
  }

  write_text_file(path, out);
}

Dataset load_dataset_jsonl(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  expect(bool(std::getline(in, line)), ErrorCode::IoError, "empty dataset file: " + path);
  json header = json::parse(line);
  expect(header.value("type", "") == "dataset_header", ErrorCode::IoError,
         "missing dataset header in " + path);
  expect(header.value("format_version", 0) == 1, ErrorCode::IoError,
         "unsupported dataset format version in " + path);

  Dataset ds;
  ds.config_hash = header.at("config_hash").get<std::string>();
  const std::string set_name = header.at("joint_set").get<std::string>();
  if (set_name == "h36m17") ds.joints = JointSet::h36m17();
  else if (set_name == "body14") ds.joints = JointSet::body14();
  else throw Error(ErrorCode::IoError, "unknown joint set in dataset: " + set_name);
  ds.fps = header.at("fps").get<double>();
  ds.k = header.at("k").get<int>();
  ds.stride = header.at("stride").get<int>();
  ds.width = header.at("width").get<int>();
  ds.height = header.at("height").get<int>();
  ds.skipped = header.at("skipped").get<int>();
  const size_t n_cams = header.at("cameras").get<size_t>();
  const size_t n_recs = header.at("records").get<size_t>();

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "camera") {
      VirtualCamera c;
      c.id = j.at("id").get<int>();
      c.intrinsics = {j.at("fx").get<double>(), j.at("fy").get<double>(),
                      j.at("cx").get<double>(), j.at("cy").get<double>(),
                      j.at("width").get<int>(), j.at("height").get<int>()};
      for (int i = 0; i < 9; ++i)
        c.extrinsics.r_w2c(i / 3, i % 3) = j.at("r").at(size_t(i)).get<double>();
      for (int i = 0; i < 3; ++i) c.extrinsics.t_w2c(i) = j.at("t").at(size_t(i)).get<double>();
      for (const auto& [k, v] : j.at("axes").items()) c.axes[k] = v.get<double>();
      ds.cameras.push_back(std::move(c));
    } else if (type == "record") {
      SampleRecord r;
      r.camera_id = j.at("camera_id").get<int>();
      r.subject_index = j.at("subject_index").get<int>();
      r.subject = j.at("subject").get<std::string>();
      r.bone_scale = j.at("bone_scale").get<double>();
      r.t0 = j.at("t0").get<int>();
      r.theta = j.at("theta").get<double>();
      r.h = j.at("h").get<double>();
      Eigen::Vector3d origin;
      for (int i = 0; i < 3; ++i) origin(i) = j.at("ray_origin").at(size_t(i)).get<double>();
      for (const auto& pj : j.at("pixels")) {
        Pose2D p;
        p.points = rows2_from_json(pj);
        r.pixels.push_back(std::move(p));
      }
      for (const auto& rj : j.at("rays")) {
        RayPose rp;
        rp.points = rows3_from_json(rj);
        rp.origin = origin;
        rp.frame = Frame::NCS;
        r.rays_ncs.push_back(std::move(rp));
      }
      r.gt_ncs.points = rows3_from_json(j.at("gt_ncs"));
      r.gt_ncs.frame = Frame::NCS;
      r.gt_ncs.root = ds.joints.root;
      r.gt_wcs.points = rows3_from_json(j.at("gt_wcs"));
      r.gt_wcs.frame = Frame::WCS;
      r.gt_wcs.root = ds.joints.root;
      ds.records.push_back(std::move(r));
    } else {
      throw Error(ErrorCode::IoError, "unexpected line type in dataset: " + type);
    }
  }

  expect(ds.cameras.size() == n_cams, ErrorCode::IoError, "dataset camera count mismatch");
  expect(ds.records.size() == n_recs, ErrorCode::IoError, "dataset record count mismatch");
  return ds;
}

}  // namespace raylift
