#pragma once

// Pose scoring. Geometry is stored in meters; every number leaving this
// module is in millimeters.

#include <map>
#include <string>
#include <vector>

#include "raylift/geometry.hpp"

namespace raylift {

// mean per-joint distance after centering both poses on their root joint
double mpjpe(const Pose3D& pred, const Pose3D& gt);

// mean per-joint distance with no alignment
double abs_mpjpe(const Pose3D& pred, const Pose3D& gt);

// distance between the two root positions
double mrpe(const Eigen::Vector3d& pred_root, const Eigen::Vector3d& gt_root);

struct SampleScore {
  double mpjpe_mm = 0;
  double abs_mpjpe_mm = 0;
  double mrpe_mm = 0;
};

// one evaluated sample plus the camera provenance it was rendered with;
// axis keys are the sweep_axis_name() strings
struct ScoredSample {
  SampleScore score;
  std::map<std::string, double> axes;
};

struct EvalReport {
  std::string group_key;
  std::vector<SampleScore> samples;

  int count() const { return int(samples.size()); }
  SampleScore mean() const;
};

enum class SweepAxis { Focal, Principal, Rotation, Pitch, Translation, Scale, NoiseStd };

const char* sweep_axis_name(SweepAxis axis);
SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepRow {
  double axis_value = 0;
  SampleScore mean;
  int n = 0;
};

// one row per distinct axis value, ascending; every sample must carry the axis
std::vector<SweepRow> sweep_aggregate(const std::vector<ScoredSample>& samples, SweepAxis axis);

// plot-ready emission: csv has one line per (bucket, metric)
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);
std::string sweep_json(SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace raylift
