#include "raylift/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

namespace raylift {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown_keys(const json& obj, const char* where,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    expect(known, ErrorCode::InvalidArgument,
           "unknown key \"" + it.key() + "\" in " + where);
  }
}

GridSpec parse_grid(const json& j, const char* where) {
  reject_unknown_keys(j, where, {"lo", "hi", "step"});
  GridSpec g;
  g.lo = j.value("lo", g.lo);
  g.hi = j.value("hi", g.hi);
  g.step = j.value("step", g.step);
  return g;
}

IntrinsicMode intrinsic_mode_from_name(const std::string& name) {
  if (name == "use-base") return IntrinsicMode::UseBase;
  if (name == "round-robin") return IntrinsicMode::RoundRobin;
  if (name == "cross") return IntrinsicMode::Cross;
  throw Error(ErrorCode::InvalidArgument,
              "unknown intrinsic_mode \"" + name + "\" (use-base|round-robin|cross)");
}

void parse_cameras(AugmentationConfig& cfg, const json& j) {
  reject_unknown_keys(j, "synth.cameras",
                      {"base", "focal", "principal", "intrinsic_mode", "extrinsic_blocks"});
  if (j.contains("base")) {
    const json& b = j.at("base");
    reject_unknown_keys(b, "synth.cameras.base", {"fx", "fy", "cx", "cy", "width", "height"});
    cfg.base.fx = b.value("fx", cfg.base.fx);
    cfg.base.fy = b.value("fy", cfg.base.fy);
    cfg.base.cx = b.value("cx", cfg.base.cx);
    cfg.base.cy = b.value("cy", cfg.base.cy);
    cfg.base.width = b.value("width", cfg.base.width);
    cfg.base.height = b.value("height", cfg.base.height);
  }
  if (j.contains("focal")) cfg.focal = parse_grid(j.at("focal"), "synth.cameras.focal");
  if (j.contains("principal"))
    cfg.principal = parse_grid(j.at("principal"), "synth.cameras.principal");
  if (j.contains("intrinsic_mode"))
    cfg.intrinsic_mode = intrinsic_mode_from_name(j.at("intrinsic_mode").get<std::string>());
  if (j.contains("extrinsic_blocks")) {
    cfg.extrinsic_blocks.clear();
    for (const json& b : j.at("extrinsic_blocks")) {
      reject_unknown_keys(b, "synth.cameras.extrinsic_blocks[]",
                          {"rotation", "pitch", "translation"});
      ExtrinsicGrid g;
      if (b.contains("rotation")) g.rotation_deg = parse_grid(b.at("rotation"), "rotation");
      if (b.contains("pitch")) g.pitch_deg = parse_grid(b.at("pitch"), "pitch");
      if (b.contains("translation"))
        g.translation_m = parse_grid(b.at("translation"), "translation");
      cfg.extrinsic_blocks.push_back(g);
    }
  }
}

void parse_synth(BenchConfig& cfg, const json& j) {
  reject_unknown_keys(j, "synth",
                      {"name", "duration_s", "fps", "limb_total", "bone_scales", "k", "stride",
                       "pixel_noise_std", "cameras"});
  cfg.name = j.value("name", cfg.name);
  cfg.duration_s = j.value("duration_s", cfg.duration_s);
  cfg.fps = j.value("fps", cfg.fps);
  cfg.limb_total = j.value("limb_total", cfg.limb_total);
  if (j.contains("bone_scales")) cfg.bone_scales = j.at("bone_scales").get<std::vector<double>>();
  cfg.k = j.value("k", cfg.k);
  cfg.stride = j.value("stride", cfg.stride);
  cfg.pixel_noise_std = j.value("pixel_noise_std", cfg.pixel_noise_std);
  if (j.contains("cameras")) parse_cameras(cfg.cameras, j.at("cameras"));
}

void parse_model(ModelConfig& cfg, const json& j) {
  reject_unknown_keys(j, "model",
                      {"joints", "input_mode", "camera_embedding", "channels", "embed_dim",
                       "dropout"});
  if (j.contains("joints")) {
    const std::string name = j.at("joints").get<std::string>();
    if (name == JointSet::h36m17().name) cfg.joints = JointSet::h36m17();
    else if (name == JointSet::body14().name) cfg.joints = JointSet::body14();
    else throw Error(ErrorCode::InvalidArgument, "unknown joint set \"" + name + "\"");
  }
  if (j.contains("input_mode"))
    cfg.input_mode = input_mode_from_name(j.at("input_mode").get<std::string>());
  cfg.camera_embedding = j.value("camera_embedding", cfg.camera_embedding);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.dropout = j.value("dropout", cfg.dropout);
}

void parse_train(TrainConfig& cfg, const json& j) {
  reject_unknown_keys(j, "train",
                      {"epochs", "batch_size", "lr", "decay", "precision", "flip_augmentation",
                       "pose_loss_weight", "traj_loss_weight"});
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.decay = j.value("decay", cfg.decay);
  cfg.precision = j.value("precision", cfg.precision);
  cfg.flip_augmentation = j.value("flip_augmentation", cfg.flip_augmentation);
  cfg.pose_loss_weight = j.value("pose_loss_weight", cfg.pose_loss_weight);
  cfg.traj_loss_weight = j.value("traj_loss_weight", cfg.traj_loss_weight);
}

// the run seed is the only seed: generation, weight init and the training
// schedule all derive from it, so one number reproduces a whole run
BenchConfig effective_synth(const RunConfig& rc) {
  BenchConfig c = rc.synth;
  c.seed = rc.seed;
  c.jobs = rc.jobs;
  return c;
}

ModelConfig effective_model(const RunConfig& rc) {
  ModelConfig m = rc.model;
  m.init_seed = rc.seed;
  return m;
}

TrainConfig effective_train(const RunConfig& rc) {
  TrainConfig t = rc.train;
  t.seed = rc.seed;
  return t;
}

std::string out_path(const RunConfig& rc, const std::string& name) {
  expect(!rc.out.empty(), ErrorCode::InvalidArgument,
         rc.subcommand + " needs an output directory (--out)");
  fs::create_directories(rc.out);
  return rc.out + "/" + name;
}

Dataset load_required_dataset(const std::string& path, const char* what) {
  expect(!path.empty(), ErrorCode::InvalidArgument,
         std::string(what) + " dataset path is required");
  return load_dataset_jsonl(path);
}

std::string config_line(const RunConfig& rc) { return "# config=" + rc.hash() + "\n"; }

constexpr const char* kAxisKeys[] = {"rotation",  "pitch",     "translation", "focal",
                                     "principal", "noise_std", "scale"};

std::string axes_csv_header() {
  std::string h = "index";
  for (const char* k : kAxisKeys) h += std::string(",") + k;
  return h;
}

std::string axes_csv_fields(size_t index, const std::map<std::string, double>& axes) {
  std::string row = std::to_string(index);
  for (const char* k : kAxisKeys) {
    auto it = axes.find(k);
    row += "," + fmt_double(it == axes.end() ? 0.0 : it->second);
  }
  return row;
}

// per-sample scores for a fixed prediction list, same axes scheme the model
// evaluation uses: camera provenance plus the subject bone scale
std::vector<ScoredSample> score_predictions(const std::vector<Pose3D>& preds, const Dataset& ds) {
  expect(preds.size() == ds.records.size(), ErrorCode::InvalidArgument,
         "prediction count " + std::to_string(preds.size()) + " does not match the " +
             std::to_string(ds.records.size()) + " dataset records");
  std::vector<ScoredSample> out;
  out.reserve(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    const SampleRecord& rec = ds.records[i];
    ScoredSample s;
    s.score.mpjpe_mm = mpjpe(preds[i], rec.gt_wcs);
    s.score.abs_mpjpe_mm = abs_mpjpe(preds[i], rec.gt_wcs);
    s.score.mrpe_mm = mrpe(preds[i].points.row(ds.joints.root),
                           rec.gt_wcs.points.row(ds.joints.root));
    s.axes = ds.camera_by_id(rec.camera_id).axes;
    s.axes["scale"] = rec.bone_scale;
    out.push_back(std::move(s));
  }
  return out;
}

SampleScore mean_score(const std::vector<ScoredSample>& samples) {
  SampleScore m;
  for (const auto& s : samples) {
    m.mpjpe_mm += s.score.mpjpe_mm;
    m.abs_mpjpe_mm += s.score.abs_mpjpe_mm;
    m.mrpe_mm += s.score.mrpe_mm;
  }
  if (!samples.empty()) {
    m.mpjpe_mm /= double(samples.size());
    m.abs_mpjpe_mm /= double(samples.size());
    m.mrpe_mm /= double(samples.size());
  }
  return m;
}

}  // namespace

void RunConfig::validate() const {
  expect(jobs >= 1, ErrorCode::InvalidArgument, "jobs must be at least 1");
  expect(std::isfinite(rfrh_height) && rfrh_height > 0, ErrorCode::InvalidArgument,
         "rfrh_height must be positive");
  expect(!axis.empty(), ErrorCode::InvalidArgument, "axis must not be empty");
}

std::string RunConfig::canonical_string() const {
  std::ostringstream os;
  os << "subcommand=" << subcommand << "\nseed=" << seed << "\ndataset=" << dataset
     << "\ntrain_dataset=" << train_dataset << "\neval_dataset=" << eval_dataset
     << "\ncheckpoint=" << checkpoint << "\nresume=" << resume
     << "\npredictions=" << predictions << "\naxis=" << axis << "\nbench=" << bench
     << "\ntta=" << (tta ? 1 : 0) << "\nrfrh_height=" << fmt_double(rfrh_height) << "\n";
  BenchConfig s = synth;
  s.seed = seed;
  os << "[synth]\n" << s.canonical_string();
  os << "[model]\njoints=" << model.joints.name
     << "\ninput_mode=" << input_mode_name(model.input_mode)
     << "\ncamera_embedding=" << (model.camera_embedding ? 1 : 0)
     << "\nchannels=" << model.channels << "\nembed_dim=" << model.embed_dim
     << "\ndropout=" << fmt_double(model.dropout) << "\n";
  os << "[train]\nepochs=" << train.epochs << "\nbatch_size=" << train.batch_size
     << "\nlr=" << fmt_double(train.lr) << "\ndecay=" << fmt_double(train.decay)
     << "\nprecision=" << train.precision
     << "\nflip_augmentation=" << (train.flip_augmentation ? 1 : 0)
     << "\npose_loss_weight=" << fmt_double(train.pose_loss_weight)
     << "\ntraj_loss_weight=" << fmt_double(train.traj_loss_weight) << "\n";
  return os.str();
}

std::string RunConfig::hash() const { return hex64(fnv1a64(canonical_string())); }

RunConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    expect(j.is_object(), ErrorCode::InvalidArgument, "config root must be a JSON object");
    reject_unknown_keys(j, "config",
                        {"seed", "out", "dataset", "train_dataset", "eval_dataset", "checkpoint",
                         "resume", "predictions", "axis", "bench", "jobs", "tta", "rfrh_height",
                         "synth", "model", "train"});
    RunConfig rc;
    rc.seed = j.value("seed", rc.seed);
    rc.out = j.value("out", rc.out);
    rc.dataset = j.value("dataset", rc.dataset);
    rc.train_dataset = j.value("train_dataset", rc.train_dataset);
    rc.eval_dataset = j.value("eval_dataset", rc.eval_dataset);
    rc.checkpoint = j.value("checkpoint", rc.checkpoint);
    rc.resume = j.value("resume", rc.resume);
    rc.predictions = j.value("predictions", rc.predictions);
    rc.axis = j.value("axis", rc.axis);
    rc.jobs = j.value("jobs", rc.jobs);
    rc.tta = j.value("tta", rc.tta);
    rc.rfrh_height = j.value("rfrh_height", rc.rfrh_height);
    if (j.contains("bench")) {
      rc.bench = j.at("bench").get<std::string>();
      rc.synth = bench_preset(rc.bench, rc.seed);
    }
    if (j.contains("synth")) parse_synth(rc.synth, j.at("synth"));
    if (j.contains("model")) parse_model(rc.model, j.at("model"));
    if (j.contains("train")) parse_train(rc.train, j.at("train"));
    return rc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
}

BenchConfig bench_preset(const std::string& name, std::uint64_t seed) {
  if (name == "full-train") return full_train_bench(seed);
  if (name == "full-ext-test") return full_extrinsic_bench(seed);
  if (name == "full-intr-test") return full_intrinsic_bench(seed);
  if (name == "desk-train") return desk_train_bench(seed);
  if (name == "desk-holdout") return desk_holdout_bench(seed);
  if (name == "desk-focal-sweep") return desk_focal_sweep_bench(seed);
  throw Error(ErrorCode::InvalidArgument,
              "unknown bench preset \"" + name + "\"; known: full-train, full-ext-test, "
              "full-intr-test, desk-train, desk-holdout, desk-focal-sweep");
}

std::vector<std::string> bench_preset_names() {
  return {"full-train",  "full-ext-test", "full-intr-test",
          "desk-train", "desk-holdout",  "desk-focal-sweep"};
}

void save_predictions_jsonl(const std::vector<Pose3D>& preds, const std::string& path) {
  std::string out;
  for (size_t i = 0; i < preds.size(); ++i) {
    expect(preds[i].frame == Frame::WCS, ErrorCode::FrameMismatch,
           "predictions must be world-frame poses");
    out += "{\"index\":" + std::to_string(i) + ",\"frame\":\"wcs\",\"joints\":[";
    for (int r = 0; r < preds[i].joints(); ++r) {
      if (r) out += ',';
      out += "[" + fmt_double(preds[i].points(r, 0)) + "," + fmt_double(preds[i].points(r, 1)) +
             "," + fmt_double(preds[i].points(r, 2)) + "]";
    }
    out += "]}\n";
  }
  write_text_file(path, out);
}

std::vector<Pose3D> load_predictions_jsonl(const std::string& path, int joints) {
  std::istringstream in(read_text_file(path));
  std::vector<Pose3D> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError,
                  path + " line " + std::to_string(out.size() + 1) + ": " + e.what());
    }
    expect(j.value("index", -1) == int(out.size()), ErrorCode::IoError,
           path + ": prediction lines must be in dataset order");
    expect(j.value("frame", "") == "wcs", ErrorCode::FrameMismatch,
           path + ": predictions must be world-frame poses");
    const json& pts = j.at("joints");
    expect(int(pts.size()) == joints, ErrorCode::JointSetMismatch,
           path + ": expected " + std::to_string(joints) + " joints, got " +
               std::to_string(pts.size()));
    Pose3D p;
    p.frame = Frame::WCS;
    p.points.resize(joints, 3);
    for (int r = 0; r < joints; ++r)
      for (int c = 0; c < 3; ++c) p.points(r, c) = pts[size_t(r)][size_t(c)].get<double>();
    out.push_back(std::move(p));
  }
  return out;
}

CommandResult cmd_synth(const RunConfig& rc) {
  BenchConfig bc = effective_synth(rc);
  bc.validate();
  Dataset ds = build_dataset(bc);

  CommandResult res;
  const std::string data_path = out_path(rc, "dataset.jsonl");
  save_dataset_jsonl(ds, data_path);
  res.written.push_back(data_path);

  json man;
  man["config"] = rc.hash();
  man["dataset_config"] = ds.config_hash;
  man["seed"] = rc.seed;
  man["bench"] = bc.name;
  man["joints"] = ds.joints.name;
  man["fps"] = ds.fps;
  man["k"] = ds.k;
  man["stride"] = ds.stride;
  man["cameras"] = int(ds.cameras.size());
  man["records"] = int(ds.records.size());
  man["skipped"] = ds.skipped;
  json axes;
  for (const char* key : {"rotation", "pitch", "translation", "focal", "principal", "noise_std"}) {
    std::set<double> vals;
    for (const auto& c : ds.cameras) vals.insert(c.axes.at(key));
    axes[key] = std::vector<double>(vals.begin(), vals.end());
  }
  std::set<double> scales(bc.bone_scales.begin(), bc.bone_scales.end());
  axes["scale"] = std::vector<double>(scales.begin(), scales.end());
  man["axes"] = axes;

  const std::string man_path = out_path(rc, "manifest.json");
  write_text_file(man_path, man.dump(2) + "\n");
  res.written.push_back(man_path);
  res.summary = "synth: " + std::to_string(ds.cameras.size()) + " cameras, " +
                std::to_string(ds.records.size()) + " records (" + std::to_string(ds.skipped) +
                " windows skipped) -> " + rc.out;
  return res;
}

CommandResult cmd_train(const RunConfig& rc) {
  Dataset train = load_required_dataset(rc.dataset, "training");
  Dataset val;
  const Dataset* valp = nullptr;
  if (!rc.eval_dataset.empty()) {
    val = load_dataset_jsonl(rc.eval_dataset);
    valp = &val;
  }

  TrainConfig tc = effective_train(rc);
  LiftModel m;
  int start_epoch = 0;
  if (!rc.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(rc.resume);
    m = std::move(ck.model);
    start_epoch = ck.meta.value("epochs_done", 0);
    expect(start_epoch < tc.epochs, ErrorCode::InvalidArgument,
           "checkpoint already covers " + std::to_string(start_epoch) +
               " epochs; raise train.epochs past it");
  } else {
    m = create_model(effective_model(rc));
  }

  TrainLog log = train_model(m, train, valp, tc, start_epoch);

  CommandResult res;
  json extra;
  extra["config"] = rc.hash();
  extra["seed"] = rc.seed;
  extra["epochs_done"] = tc.epochs;
  const std::string ck_path = out_path(rc, "checkpoint.json");
  save_checkpoint(m, ck_path, extra);
  res.written.push_back(ck_path);

  const std::string log_path = out_path(rc, "train_log.csv");
  write_text_file(log_path, config_line(rc) + log.csv());
  res.written.push_back(log_path);

  res.summary = "train: " + std::to_string(tc.epochs - start_epoch) + " epochs on " +
                std::to_string(train.records.size()) + " samples -> " + ck_path;
  return res;
}

CommandResult cmd_eval(const RunConfig& rc) {
  Dataset ds = load_required_dataset(rc.dataset, "evaluation");

  std::vector<Pose3D> preds;
  std::string source;
  if (!rc.predictions.empty()) {
    source = "predictions";
    preds = load_predictions_jsonl(rc.predictions, ds.joints.joints());
  } else {
    source = "model";
    expect(!rc.checkpoint.empty(), ErrorCode::InvalidArgument,
           "eval needs a checkpoint or a predictions file");
    LoadedCheckpoint ck = load_checkpoint(rc.checkpoint);
    expect(ck.model.config.joints == ds.joints, ErrorCode::JointSetMismatch,
           "checkpoint joint set " + ck.model.config.joints.name +
               " cannot score a " + ds.joints.name + " dataset");
    preds.reserve(ds.records.size());
    for (const auto& rec : ds.records)
      preds.push_back(predict_from_record(ck.model, rec, ds, rc.tta));
  }
  std::vector<ScoredSample> samples = score_predictions(preds, ds);
  SampleScore mean = mean_score(samples);

  CommandResult res;
  std::string csv = config_line(rc) + axes_csv_header() + ",mpjpe_mm,abs_mpjpe_mm,mrpe_mm\n";
  for (size_t i = 0; i < samples.size(); ++i)
    csv += axes_csv_fields(i, samples[i].axes) + "," + fmt_double(samples[i].score.mpjpe_mm) +
           "," + fmt_double(samples[i].score.abs_mpjpe_mm) + "," +
           fmt_double(samples[i].score.mrpe_mm) + "\n";
  const std::string csv_path = out_path(rc, "eval.csv");
  write_text_file(csv_path, csv);
  res.written.push_back(csv_path);

  json rep;
  rep["config"] = rc.hash();
  rep["seed"] = rc.seed;
  rep["source"] = source;
  rep["tta"] = rc.tta;
  rep["n"] = int(samples.size());
  rep["mean"] = {{"mpjpe_mm", mean.mpjpe_mm},
                 {"abs_mpjpe_mm", mean.abs_mpjpe_mm},
                 {"mrpe_mm", mean.mrpe_mm}};
  const std::string json_path = out_path(rc, "eval.json");
  write_text_file(json_path, rep.dump(2) + "\n");
  res.written.push_back(json_path);

  const std::string pred_path = out_path(rc, "predictions.jsonl");
  save_predictions_jsonl(preds, pred_path);
  res.written.push_back(pred_path);

  res.summary = "eval(" + source + "): n=" + std::to_string(samples.size()) +
                " mpjpe=" + fmt_double(mean.mpjpe_mm) + "mm mrpe=" + fmt_double(mean.mrpe_mm) +
                "mm";
  return res;
}

CommandResult cmd_sweep(const RunConfig& rc) {
  const SweepAxis axis = sweep_axis_from_name(rc.axis);
  Dataset ds = load_required_dataset(rc.dataset, "sweep");
  expect(!rc.checkpoint.empty(), ErrorCode::InvalidArgument, "sweep needs a checkpoint");
  LoadedCheckpoint ck = load_checkpoint(rc.checkpoint);

  EvalSummary es = evaluate_model(ck.model, ds, rc.tta);
  std::vector<SweepRow> rows = sweep_aggregate(es.samples, axis);

  CommandResult res;
  const std::string base = std::string("sweep_") + sweep_axis_name(axis);
  const std::string csv_path = out_path(rc, base + ".csv");
  write_text_file(csv_path, config_line(rc) + sweep_csv(axis, rows));
  res.written.push_back(csv_path);

  json j = json::parse(sweep_json(axis, rows));
  j["config"] = rc.hash();
  j["seed"] = rc.seed;
  const std::string json_path = out_path(rc, base + ".json");
  write_text_file(json_path, j.dump(2) + "\n");
  res.written.push_back(json_path);

  res.summary = "sweep over " + rc.axis + ": " + std::to_string(rows.size()) + " buckets, " +
                std::to_string(es.samples.size()) + " samples";
  return res;
}

CommandResult cmd_baseline_rfrh(const RunConfig& rc) {
  Dataset ds = load_required_dataset(rc.dataset, "baseline");
  const int root = ds.joints.root;

  std::vector<ScoredSample> samples;
  samples.reserve(ds.records.size());
  for (const auto& rec : ds.records) {
    const RayPose& rays = rec.rays_ncs[size_t(ds.k)];
    Eigen::Vector3d hat = rfrh_localize(rays, root, rc.rfrh_height);
    ScoredSample s;
    s.score.mrpe_mm = mrpe(hat, rec.gt_ncs.points.row(root));
    s.axes = ds.camera_by_id(rec.camera_id).axes;
    s.axes["scale"] = rec.bone_scale;
    samples.push_back(std::move(s));
  }
  SampleScore mean = mean_score(samples);

  CommandResult res;
  std::string csv = config_line(rc) + axes_csv_header() + ",mrpe_mm\n";
  for (size_t i = 0; i < samples.size(); ++i)
    csv += axes_csv_fields(i, samples[i].axes) + "," + fmt_double(samples[i].score.mrpe_mm) + "\n";
  const std::string csv_path = out_path(rc, "rfrh.csv");
  write_text_file(csv_path, csv);
  res.written.push_back(csv_path);

  json rep;
  rep["config"] = rc.hash();
  rep["seed"] = rc.seed;
  rep["n"] = int(samples.size());
  rep["assumed_height_m"] = rc.rfrh_height;
  rep["mean_mrpe_mm"] = mean.mrpe_mm;
  const std::string json_path = out_path(rc, "rfrh.json");
  write_text_file(json_path, rep.dump(2) + "\n");
  res.written.push_back(json_path);

  res.summary = "baseline-rfrh: mean mrpe " + fmt_double(mean.mrpe_mm) + "mm over " +
                std::to_string(samples.size()) + " samples";
  return res;
}

CommandResult cmd_ablate(const RunConfig& rc) {
  Dataset train = load_required_dataset(rc.train_dataset, "ablation training");
  Dataset held = load_required_dataset(rc.eval_dataset, "ablation evaluation");

  struct Variant {
    const char* name;
    InputMode mode;
    bool ce;
  };
  // ordered easiest-to-hardest encoding: raw pixels, camera rays, level-frame
  // rays, level-frame rays with camera conditioning
  const Variant variants[] = {{"pixel", InputMode::Pixel, false},
                              {"ray-ccs", InputMode::RayCCS, false},
                              {"ray-ncs", InputMode::RayNCS, false},
                              {"ray-ncs+ce", InputMode::RayNCS, true}};

  json rows = json::array();
  std::string csv = config_line(rc) +
                    "variant,rays,normalized,camera_embedding,mpjpe_mm,abs_mpjpe_mm,mrpe_mm\n";
  std::string brief;
  for (const Variant& v : variants) {
    ModelConfig mc = effective_model(rc);
    mc.input_mode = v.mode;
    mc.camera_embedding = v.ce;
    LiftModel m = create_model(mc);
    train_model(m, train, nullptr, effective_train(rc));
    EvalSummary es = evaluate_model(m, held, rc.tta);

    const bool rays = v.mode != InputMode::Pixel;
    const bool normalized = v.mode == InputMode::RayNCS;
    rows.push_back({{"variant", v.name},
                    {"input_mode", input_mode_name(v.mode)},
                    {"rays", rays},
                    {"normalized", normalized},
                    {"camera_embedding", v.ce},
                    {"mpjpe_mm", es.mpjpe_mm},
                    {"abs_mpjpe_mm", es.abs_mpjpe_mm},
                    {"mrpe_mm", es.mrpe_mm}});
    csv += std::string(v.name) + "," + (rays ? "1" : "0") + "," + (normalized ? "1" : "0") + "," +
           (v.ce ? "1" : "0") + "," + fmt_double(es.mpjpe_mm) + "," + fmt_double(es.abs_mpjpe_mm) +
           "," + fmt_double(es.mrpe_mm) + "\n";
    if (!brief.empty()) brief += ", ";
    brief += std::string(v.name) + "=" + fmt_double(es.mrpe_mm);
  }

  CommandResult res;
  const std::string csv_path = out_path(rc, "ablate.csv");
  write_text_file(csv_path, csv);
  res.written.push_back(csv_path);
  json rep;
  rep["config"] = rc.hash();
  rep["seed"] = rc.seed;
  rep["rows"] = rows;
  const std::string json_path = out_path(rc, "ablate.json");
  write_text_file(json_path, rep.dump(2) + "\n");
  res.written.push_back(json_path);

  res.summary = "ablate mrpe_mm: " + brief;
  return res;
}

int run_command(const RunConfig& rc, std::string* err, CommandResult* result) {
  if (err) err->clear();
  try {
    rc.validate();
    CommandResult res;
    if (rc.subcommand == "synth") res = cmd_synth(rc);
    else if (rc.subcommand == "train") res = cmd_train(rc);
    else if (rc.subcommand == "eval") res = cmd_eval(rc);
    else if (rc.subcommand == "sweep") res = cmd_sweep(rc);
    else if (rc.subcommand == "baseline-rfrh") res = cmd_baseline_rfrh(rc);
    else if (rc.subcommand == "ablate") res = cmd_ablate(rc);
    else
      throw Error(ErrorCode::InvalidArgument,
                  "unknown subcommand \"" + rc.subcommand +
                      "\"; expected synth, train, eval, sweep, baseline-rfrh or ablate");
    if (result) *result = std::move(res);
    return 0;
  } catch (const Error& e) {
    const ErrorCode c = e.code();
    const bool user = c == ErrorCode::InvalidArgument || c == ErrorCode::IoError ||
                      c == ErrorCode::UnknownAxis;
    if (err) {
      std::string msg = e.what();
      const std::string prefix = std::string(error_code_name(c)) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
      *err = "error code=" + std::string(error_code_name(c)) + " msg=" + msg;
    }
    return user ? 1 : 2;
  } catch (const std::exception& e) {
    if (err) *err = std::string("error code=Internal msg=") + e.what();
    return 2;
  }
}

}  // namespace raylift
