#pragma once

// Pose-lifting network and its training loop: grouped temporal conv trunks
// plus a global branch per head, optional camera conditioning through a small
// MLP, flip augmentation, checkpointing, and the end-to-end inference path
// from raw 2D windows to world-frame poses.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "raylift/autodiff.hpp"
#include "raylift/geometry.hpp"
#include "raylift/metrics.hpp"
#include "raylift/skeleton.hpp"
#include "raylift/synthbench.hpp"

namespace raylift {

// the temporal receptive field: two k=3 convs, dilations 1 and 3
inline constexpr int kWindowFrames = 9;

enum class InputMode { Pixel, RayCCS, RayNCS };
const char* input_mode_name(InputMode m);
InputMode input_mode_from_name(const std::string& name);

// frame the model predicts in: NCS for ray-NCS input, CCS otherwise
Frame native_frame(InputMode m);

struct CameraEmbeddingInput {
  double theta = 0;  // camera pitch, radians
  double h = 0;      // camera height, meters

  void validate() const;  // finite, h >= 0
};

struct ModelConfig {
  JointSet joints = JointSet::h36m17();
  InputMode input_mode = InputMode::RayNCS;
  bool camera_embedding = false;
  int channels = 64;
  int embed_dim = 64;
  double dropout = 0.25;
  std::uint64_t init_seed = 1;

  void validate() const;
};

// one learnable tensor with its optimizer state
struct Param {
  std::string name;
  ad::Shape shape;
  std::vector<double> value;
  ad::AdamState<double> adam;
};

// non-learned state: batchnorm running stats and output standardization
struct Buffer {
  std::string name;
  std::vector<double> value;
};

struct LiftModel {
  ModelConfig config;
  std::vector<Param> params;
  std::vector<Buffer> buffers;
};

LiftModel create_model(const ModelConfig& cfg);
long parameter_count(const LiftModel& m);
std::vector<double>& model_buffer(LiftModel& m, const std::string& name);
const std::vector<double>& model_buffer(const LiftModel& m, const std::string& name);

// one 9-frame window in a specific input encoding
struct ModelInput {
  InputMode mode = InputMode::RayNCS;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> frames;  // 9 entries, J x 3
  CameraEmbeddingInput cam;
};

// window encodings: stored rays for ray modes (no pixel round trip),
// normalized pixel coordinates for pixel mode
ModelInput input_from_record(const SampleRecord& rec, const Dataset& ds, InputMode mode);
ModelInput input_from_pixels(const std::vector<Pose2D>& window, const CameraIntrinsics& intr,
                             const CameraExtrinsics& extr, InputMode mode);

// training target in the model's native frame
void record_targets(const SampleRecord& rec, const Dataset& ds, InputMode mode,
                    Eigen::Matrix<double, Eigen::Dynamic, 3>& relative, Eigen::Vector3d& root);

struct ForwardResult {
  Eigen::Matrix<double, Eigen::Dynamic, 3> relative;  // J x 3, root-relative
  Eigen::Vector3d root;                               // absolute root
  Frame frame = Frame::NCS;
};

// eval-mode forward of one window; ModeMismatch if the window encoding does
// not match the model, ShapeMismatch on wrong frame/joint counts
ForwardResult forward(const LiftModel& m, const ModelInput& in);

// flip-averaged forward: mean of forward(x) and unflip(forward(flip(x)))
ForwardResult forward_tta(const LiftModel& m, const ModelInput& in);

// eval-mode camera conditioning vector (embed_dim entries); requires a model
// built with camera_embedding
std::vector<double> embed_camera(const LiftModel& m, const CameraEmbeddingInput& cam);

// scalar training loss on plain values: mean per-joint distance on the
// relative pose plus distance on the root, weighted
double loss_value(const ForwardResult& pred, const ForwardResult& gt, double pose_weight = 1.0,
                  double traj_weight = 1.0);

// one batch of compiled samples for the loss graph
struct TrainBatch {
  std::vector<ModelInput> inputs;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> gt_relative;
  std::vector<Eigen::Vector3d> gt_root;
};

// builds the full forward + loss graph on `tape`; param_nodes holds one leaf
// per m.params entry in order. Exposed so gradients can be checked end to end.
int build_loss_graph(ad::Tape<double>& tape, LiftModel& m, const std::vector<int>& param_nodes,
                     const TrainBatch& batch, double pose_weight, double traj_weight,
                     bool training);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double lr = 0.001;
  double decay = 0.99;  // per-epoch exponential factor
  std::uint64_t seed = 1;
  std::string precision = "float64";  // checkpoint storage tag
  bool flip_augmentation = true;
  double pose_loss_weight = 1.0;
  double traj_loss_weight = 1.0;

  void validate() const;
};

struct EpochRow {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_mpjpe_mm = 0;
  double val_mrpe_mm = 0;
};

struct TrainLog {
  std::vector<EpochRow> rows;
  std::string csv() const;  // epoch,lr,train_loss,val_mpjpe_mm,val_mrpe_mm
};

// output standardization from the training targets; called by train_model at
// epoch 0 and stored in buffers so checkpoints carry it
void fit_output_standardization(LiftModel& m, const Dataset& train);

// trains in place over epochs [start_epoch, cfg.epochs); per-epoch randomness
// depends only on (seed, epoch), so resuming from a checkpoint reproduces the
// continuous run bit-exactly. val may be null (val columns become nan).
TrainLog train_model(LiftModel& m, const Dataset& train, const Dataset* val,
                     const TrainConfig& cfg, int start_epoch = 0);

// inference: absolute pose in the model's native frame mapped to world
Pose3D predict_from_record(const LiftModel& m, const SampleRecord& rec, const Dataset& ds,
                           bool tta = true);

// the public raw-input entry point: pixels -> window encoding -> forward ->
// unnormalize to world
Pose3D predict_absolute(const LiftModel& m, const std::vector<Pose2D>& window,
                        const CameraIntrinsics& intr, const CameraExtrinsics& extr,
                        bool tta = true);

struct EvalSummary {
  std::vector<ScoredSample> samples;  // axes: camera provenance + bone scale
  double mpjpe_mm = 0;
  double abs_mpjpe_mm = 0;
  double mrpe_mm = 0;
};

EvalSummary evaluate_model(const LiftModel& m, const Dataset& ds, bool tta = true);

// checkpointing via the tensor manifest: parameters, optimizer moments,
// batchnorm buffers, standardization, and the model configuration
void save_checkpoint(const LiftModel& m, const std::string& path,
                     const nlohmann::json& extra_meta = nlohmann::json::object());

struct LoadedCheckpoint {
  LiftModel model;
  nlohmann::json meta;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// fixed-root-height baseline: intersect the root ray with the horizontal
// plane at the assumed height above ground (Y_N = -height, y pointing down)
Eigen::Vector3d rfrh_localize(const RayPose& rays_ncs, int root, double assumed_height = 0.9395);

}  // namespace raylift
