#pragma once

// Virtual-camera benchmark generation: grid augmentation of intrinsics and
// extrinsics around a motion sequence, field-of-view filtering, optional
// Gaussian camera/keypoint noise, and materialization of windowed samples.

#include <map>
#include <string>
#include <vector>

#include "raylift/geometry.hpp"
#include "raylift/skeleton.hpp"

namespace raylift {

// inclusive arithmetic grid lo, lo+step, ... up to hi (within kGridFuzz)
struct GridSpec {
  double lo = 0;
  double hi = 0;
  double step = 1;
};

std::vector<double> grid_values(const GridSpec& g);
std::vector<double> grid_linspace(double lo, double hi, int n);

struct ExtrinsicGrid {
  GridSpec rotation_deg;    // azimuth about the scene center
  GridSpec pitch_deg;       // downward tilt
  GridSpec translation_m;   // camera-to-subject distance
};

// how grid intrinsics combine with the extrinsic rigs
enum class IntrinsicMode {
  UseBase,     // every rig gets the base intrinsics
  RoundRobin,  // rig i takes focal[i mod nf], principal[i mod np]
  Cross,       // every intrinsic grid point times every rig
};

struct AugmentationConfig {
  CameraIntrinsics base;
  GridSpec focal;      // absolute pixels, fx = fy
  GridSpec principal;  // absolute pixels, cx = cy
  IntrinsicMode intrinsic_mode = IntrinsicMode::UseBase;
  std::vector<ExtrinsicGrid> extrinsic_blocks;  // union of product grids

  void validate() const;
};

struct VirtualCamera {
  int id = 0;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  // provenance: rotation, pitch, translation, focal, principal, scale, noise_std
  std::map<std::string, double> axes;
};

// raw grids, before any field-of-view filtering
std::vector<CameraIntrinsics> augment_intrinsics(const CameraIntrinsics& base,
                                                 const AugmentationConfig& cfg);
std::vector<CameraExtrinsics> augment_extrinsics(const Eigen::Vector3d& scene_center,
                                                 const AugmentationConfig& cfg);

// full product grid with provenance axes, ids contiguous from zero; field-of-
// view filtering is a separate pass (filter_fov) so raw counts stay inspectable
std::vector<VirtualCamera> build_cameras(const AugmentationConfig& cfg,
                                         const Eigen::Vector3d& scene_center);

// a motion with the bone-scale factor that produced it
struct SubjectSequence {
  MotionSequence motion;
  double bone_scale = 1.0;
};

bool fov_ok(const CameraIntrinsics& intr, const CameraExtrinsics& extr,
            const std::vector<SubjectSequence>& seqs);

struct FovFilterResult {
  std::vector<VirtualCamera> kept;
  int discarded = 0;
  std::vector<std::string> reasons;
};
FovFilterResult filter_fov(const std::vector<VirtualCamera>& cams,
                           const std::vector<SubjectSequence>& seqs);

// ground projection of the time-averaged root over all sequences
Eigen::Vector3d scene_center(const std::vector<SubjectSequence>& seqs);

enum class NoiseFamily { Focal, Center, Pitch, Yaw, Translation };
const char* noise_family_name(NoiseFamily f);
NoiseFamily noise_family_from_name(const std::string& name);

// Gaussian perturbation of exactly one parameter family; std = 0 returns the
// camera unchanged apart from the recorded noise_std axis
VirtualCamera add_camera_noise(const VirtualCamera& cam, NoiseFamily family, double std,
                               std::uint64_t seed);

struct SampleRecord {
  int camera_id = 0;
  int subject_index = 0;
  std::string subject;
  double bone_scale = 1.0;
  int t0 = 0;         // window start; center frame is t0 + k
  double theta = 0;   // camera pitch, radians
  double h = 0;       // camera height, meters
  std::vector<Pose2D> pixels;     // 2k+1 frames
  std::vector<RayPose> rays_ncs;  // 2k+1 frames, shared origin (0,-h,0)
  Pose3D gt_ncs;                  // center frame
  Pose3D gt_wcs;
};

struct Dataset {
  std::string config_hash;
  JointSet joints;
  double fps = 5;
  int k = 4;
  int stride = 1;
  int width = 0, height = 0;
  std::vector<VirtualCamera> cameras;
  std::vector<SampleRecord> records;
  int skipped = 0;

  const VirtualCamera& camera_by_id(int id) const;
};

struct MaterializeStats {
  int skipped_behind = 0;
  int skipped_fov = 0;
  int total() const { return skipped_behind + skipped_fov; }
};

// one record per camera, sequence, and stride-spaced window whose frames all
// project in-frame; pixel_noise_std > 0 jitters the stored keypoints and
// derives the rays from the jittered pixels
std::vector<SampleRecord> materialize(const std::vector<SubjectSequence>& seqs,
                                      const std::vector<VirtualCamera>& cams, int k, int stride,
                                      double pixel_noise_std, std::uint64_t seed, int jobs,
                                      MaterializeStats* stats = nullptr);

struct BenchConfig {
  std::string name = "custom";
  std::uint64_t seed = 1;
  double duration_s = 30;
  double fps = 5;
  double limb_total = 3.8;
  std::vector<double> bone_scales = {1.0};
  int k = 4;
  int stride = 1;
  double pixel_noise_std = 0;
  int jobs = 1;
  AugmentationConfig cameras;

  void validate() const;
  // every generation-relevant field (jobs excluded); input of the config hash
  std::string canonical_string() const;
  std::string hash() const;
};

Dataset build_dataset(const BenchConfig& cfg);

CameraIntrinsics h36m_like_intrinsics();

// full-scale benchmark presets: 324 training cameras plus 126 extrinsic-test
// and 100 intrinsic-test cameras around one walker
BenchConfig full_train_bench(std::uint64_t seed = 1, double duration_s = 30);
BenchConfig full_extrinsic_bench(std::uint64_t seed = 1, double duration_s = 30);
BenchConfig full_intrinsic_bench(std::uint64_t seed = 1, double duration_s = 30);

// small presets sized for minutes-long CPU experiments
BenchConfig desk_train_bench(std::uint64_t seed = 1, double pixel_noise_std = 0);
BenchConfig desk_holdout_bench(std::uint64_t seed = 2, double pixel_noise_std = 0);
BenchConfig desk_focal_sweep_bench(std::uint64_t seed = 3, double pixel_noise_std = 0);

void save_dataset_jsonl(const Dataset& ds, const std::string& path);
Dataset load_dataset_jsonl(const std::string& path);

}  // namespace raylift
