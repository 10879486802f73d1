#include "raylift/metrics.hpp"

#include <map>

namespace raylift {

namespace {

void check_pair(const Pose3D& pred, const Pose3D& gt) {
  expect(pred.frame == gt.frame, ErrorCode::FrameMismatch,
         std::string("metric inputs in different frames: ") + frame_name(pred.frame) + " vs " +
             frame_name(gt.frame));
  expect(pred.joints() == gt.joints() && pred.root == gt.root, ErrorCode::JointSetMismatch,
         "metric inputs use different joint sets");
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_pair(pred, gt);
  Eigen::RowVector3d pr = pred.points.row(pred.root);
  Eigen::RowVector3d gr = gt.points.row(gt.root);
  double acc = 0;
  for (int j = 0; j < pred.joints(); ++j)
    acc += ((pred.points.row(j) - pr) - (gt.points.row(j) - gr)).norm();
  return acc / pred.joints() * 1000.0;
}

double abs_mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_pair(pred, gt);
  double acc = 0;
  for (int j = 0; j < pred.joints(); ++j) acc += (pred.points.row(j) - gt.points.row(j)).norm();
  return acc / pred.joints() * 1000.0;
}

double mrpe(const Eigen::Vector3d& pred_root, const Eigen::Vector3d& gt_root) {
  // scale to millimeters before the norm so millimeter-exact inputs stay exact
  return ((pred_root - gt_root) * 1000.0).norm();
}

SampleScore EvalReport::mean() const {
  expect(!samples.empty(), ErrorCode::InvalidArgument, "report has no samples");
  SampleScore m;
  for (const auto& s : samples) {
    m.mpjpe_mm += s.mpjpe_mm;
    m.abs_mpjpe_mm += s.abs_mpjpe_mm;
    m.mrpe_mm += s.mrpe_mm;
  }
  m.mpjpe_mm /= samples.size();
  m.abs_mpjpe_mm /= samples.size();
  m.mrpe_mm /= samples.size();
  return m;
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Focal: return "focal";
    case SweepAxis::Principal: return "principal";
    case SweepAxis::Rotation: return "rotation";
    case SweepAxis::Pitch: return "pitch";
    case SweepAxis::Translation: return "translation";
    case SweepAxis::Scale: return "scale";
    case SweepAxis::NoiseStd: return "noise_std";
  }
  throw Error(ErrorCode::UnknownAxis, "unhandled sweep axis");
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  for (SweepAxis ax : {SweepAxis::Focal, SweepAxis::Principal, SweepAxis::Rotation,
                       SweepAxis::Pitch, SweepAxis::Translation, SweepAxis::Scale,
                       SweepAxis::NoiseStd}) {
    if (name == sweep_axis_name(ax)) return ax;
  }
  throw Error(ErrorCode::UnknownAxis, "unknown sweep axis '" + name + "'");
}

std::vector<SweepRow> sweep_aggregate(const std::vector<ScoredSample>& samples, SweepAxis axis) {
  expect(!samples.empty(), ErrorCode::InvalidArgument, "no samples to aggregate");
  const std::string key = sweep_axis_name(axis);
  std::map<double, std::pair<SampleScore, int>> buckets;
  for (const auto& s : samples) {
    auto it = s.axes.find(key);
    expect(it != s.axes.end(), ErrorCode::UnknownAxis,
           "sample provenance lacks axis '" + key + "'");
    auto& [sum, n] = buckets[it->second];
    sum.mpjpe_mm += s.score.mpjpe_mm;
    sum.abs_mpjpe_mm += s.score.abs_mpjpe_mm;
    sum.mrpe_mm += s.score.mrpe_mm;
    ++n;
  }
  std::vector<SweepRow> rows;
  rows.reserve(buckets.size());
  for (const auto& [value, bucket] : buckets) {
    SweepRow r;
    r.axis_value = value;
    r.n = bucket.second;
    r.mean.mpjpe_mm = bucket.first.mpjpe_mm / bucket.second;
    r.mean.abs_mpjpe_mm = bucket.first.abs_mpjpe_mm / bucket.second;
    r.mean.mrpe_mm = bucket.first.mrpe_mm / bucket.second;
    rows.push_back(r);
  }
  return rows;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  const std::string name = sweep_axis_name(axis);
  std::string out = "axis,axis_value,metric,mean_mm,n\n";
  for (const auto& r : rows) {
    auto line = [&](const char* metric, double v) {
      out += name + "," + fmt_double(r.axis_value) + "," + metric + "," + fmt_double(v) + "," +
             std::to_string(r.n) + "\n";
    };
    line("mpjpe", r.mean.mpjpe_mm);
    line("abs_mpjpe", r.mean.abs_mpjpe_mm);
    line("mrpe", r.mean.mrpe_mm);
  }
  return out;
}

std::string sweep_json(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out = "{\"axis\":\"";
  out += sweep_axis_name(axis);
  out += "\",\"rows\":[";
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i) out += ',';
    const auto& r = rows[i];
    out += "{\"axis_value\":" + fmt_double(r.axis_value) +
           ",\"mpjpe_mm\":" + fmt_double(r.mean.mpjpe_mm) +
           ",\"abs_mpjpe_mm\":" + fmt_double(r.mean.abs_mpjpe_mm) +
           ",\"mrpe_mm\":" + fmt_double(r.mean.mrpe_mm) + ",\"n\":" + std::to_string(r.n) + "}";
  }
  out += "]}";
  return out;
}

}  // namespace raylift
