#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "raylift/runner.hpp"

using namespace raylift;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// fresh scratch directory per test case
std::string scratch(const std::string& name) {
  std::string dir = "runner_tmp/" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

// 3 rigs x 3 focal lengths, 4 s walker: small but multi-valued on every axis
// the sweep tests bucket over
const char* kCrossConfig = R"({
  "seed": 11,
  "synth": {
    "duration_s": 4,
    "stride": 2,
    "cameras": {
      "base": {"fx": 1000, "fy": 1000, "cx": 500, "cy": 500, "width": 1000, "height": 1000},
      "focal": {"lo": 900, "hi": 1100, "step": 100},
      "principal": {"lo": 500, "hi": 500, "step": 1},
      "intrinsic_mode": "cross",
      "extrinsic_blocks": [
        {"rotation": {"lo": 0, "hi": 240, "step": 120},
         "pitch": {"lo": 14, "hi": 14, "step": 1},
         "translation": {"lo": 8, "hi": 8, "step": 1}}
      ]
    }
  }
})";

// one-camera bench for fast training round trips
RunConfig tiny_train_config(const std::string& out) {
  RunConfig rc;
  rc.seed = 5;
  rc.out = out;
  rc.synth.duration_s = 6;
  rc.synth.stride = 2;
  rc.synth.cameras.base = h36m_like_intrinsics();
  rc.synth.cameras.extrinsic_blocks = {{{45, 45, 1}, {14, 14, 1}, {8, 8, 1}}};
  rc.model.channels = 8;
  rc.model.embed_dim = 8;
  rc.model.dropout = 0.0;
  rc.train.epochs = 3;
  rc.train.batch_size = 8;
  return rc;
}

std::string synth_tiny(const std::string& dir) {
  RunConfig rc = tiny_train_config(dir);
  rc.subcommand = "synth";
  cmd_synth(rc);
  return dir + "/dataset.jsonl";
}

}  // namespace

TEST_CASE("bench presets cover the published camera protocols") {
  auto names = bench_preset_names();
  REQUIRE(names.size() == 6);
  for (const auto& n : names) {
    BenchConfig c = bench_preset(n, 9);
    CHECK(c.name == n);
    CHECK(c.seed == 9);
    CHECK_NOTHROW(c.validate());
  }
  CHECK(bench_preset("full-train", 1).cameras.intrinsic_mode == IntrinsicMode::RoundRobin);
  CHECK(bench_preset("desk-focal-sweep", 1).cameras.intrinsic_mode == IntrinsicMode::Cross);
  CHECK(grid_values(bench_preset("desk-focal-sweep", 1).cameras.focal).size() == 9);
  CHECK(bench_preset("desk-train", 1).pixel_noise_std == 0);
  CHECK_THROWS_AS(bench_preset("nope", 1), Error);
}

TEST_CASE("config json: defaults, preset layering, strictness") {
  RunConfig def = config_from_json("{}");
  CHECK(def.seed == 1);
  CHECK(def.axis == "focal");
  CHECK(def.tta == true);
  CHECK(def.model.channels == 64);
  CHECK(def.train.epochs == 10);

  RunConfig rc = config_from_json(R"({
    "seed": 42, "out": "o", "dataset": "d.jsonl", "axis": "pitch", "tta": false,
    "bench": "desk-train",
    "synth": {"pixel_noise_std": 1.5},
    "model": {"joints": "body14", "input_mode": "pixel", "camera_embedding": true,
              "channels": 32, "embed_dim": 16, "dropout": 0.1},
    "train": {"epochs": 4, "batch_size": 16, "lr": 0.002, "decay": 0.95,
              "flip_augmentation": false, "pose_loss_weight": 2.0, "traj_loss_weight": 0.5}
  })");
  CHECK(rc.seed == 42);
  CHECK(rc.axis == "pitch");
  CHECK(rc.tta == false);
  // preset applied, then the explicit synth key layered on top
  CHECK(rc.synth.name == "desk-train");
  CHECK(rc.synth.pixel_noise_std == 1.5);
  CHECK(rc.synth.cameras.extrinsic_blocks.size() == bench_preset("desk-train", 1).cameras.extrinsic_blocks.size());
  CHECK(rc.model.joints.joints() == 14);
  CHECK(rc.model.input_mode == InputMode::Pixel);
  CHECK(rc.model.camera_embedding);
  CHECK(rc.train.epochs == 4);
  CHECK(rc.train.flip_augmentation == false);

  CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"model": {"chans": 8}})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"train": {"seed": 3}})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"synth": {"seed": 3}})"), Error);
  CHECK_THROWS_AS(config_from_json("not json"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"bench": "nope"})"), Error);
  try {
    config_from_json(R"({"model": {"chans": 8}})");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("chans") != std::string::npos);
  }
}

TEST_CASE("run config hash tracks semantics, not placement") {
  RunConfig a = config_from_json(kCrossConfig);
  RunConfig b = config_from_json(kCrossConfig);
  CHECK(a.hash() == b.hash());

  b.seed = 12;
  CHECK(a.hash() != b.hash());
  b = config_from_json(kCrossConfig);
  b.axis = "pitch";
  CHECK(a.hash() != b.hash());
  b = config_from_json(kCrossConfig);
  b.synth.pixel_noise_std = 2.0;
  CHECK(a.hash() != b.hash());

  // where results land and how many workers ran is not part of the identity
  b = config_from_json(kCrossConfig);
  b.out = "elsewhere";
  b.jobs = 4;
  CHECK(a.hash() == b.hash());
}

TEST_CASE("synth writes a reproducible dataset with a grid manifest") {
  RunConfig rc = config_from_json(kCrossConfig);
  rc.subcommand = "synth";
  rc.out = scratch("synth_a");
  CommandResult res = cmd_synth(rc);
  REQUIRE(res.written.size() == 2);

  Dataset ds = load_dataset_jsonl(rc.out + "/dataset.jsonl");
  json man = json::parse(read_text_file(rc.out + "/manifest.json"));
  CHECK(man.at("config").get<std::string>() == rc.hash());
  CHECK(man.at("seed").get<std::uint64_t>() == 11);
  CHECK(man.at("cameras").get<int>() == int(ds.cameras.size()));
  CHECK(man.at("records").get<int>() == int(ds.records.size()));
  CHECK(ds.cameras.size() == 9);  // 3 rigs x 3 focals, nothing clipped at 8 m
  CHECK(ds.records.size() > 0);
  CHECK(man.at("axes").at("focal").get<std::vector<double>>() ==
        std::vector<double>{900, 1000, 1100});
  CHECK(man.at("axes").at("rotation").get<std::vector<double>>() ==
        std::vector<double>{0, 120, 240});
  CHECK(man.at("axes").at("scale").get<std::vector<double>>() == std::vector<double>{1.0});

  // same config, different placement and worker count: identical bytes
  RunConfig rc2 = config_from_json(kCrossConfig);
  rc2.subcommand = "synth";
  rc2.out = scratch("synth_b");
  rc2.jobs = 2;
  cmd_synth(rc2);
  CHECK(read_text_file(rc.out + "/dataset.jsonl") == read_text_file(rc2.out + "/dataset.jsonl"));
  CHECK(read_text_file(rc.out + "/manifest.json") == read_text_file(rc2.out + "/manifest.json"));
}

TEST_CASE("train command produces a resumable checkpoint and a tagged log") {
  std::string dir = scratch("train");
  std::string data = synth_tiny(dir + "/data");

  RunConfig rc = tiny_train_config(dir + "/run_a");
  rc.subcommand = "train";
  rc.dataset = data;
  CommandResult res = cmd_train(rc);
  REQUIRE(res.written.size() == 2);

  std::string log = read_text_file(dir + "/run_a/train_log.csv");
  CHECK(log.rfind("# config=" + rc.hash(), 0) == 0);
  CHECK(log.find("epoch,lr,train_loss,val_mpjpe_mm,val_mrpe_mm") != std::string::npos);

  LoadedCheckpoint full = load_checkpoint(dir + "/run_a/checkpoint.json");
  CHECK(full.meta.at("epochs_done").get<int>() == 3);
  CHECK(full.meta.at("config").get<std::string>() == rc.hash());
  CHECK(full.meta.at("seed").get<std::uint64_t>() == 5);

  // rerun elsewhere: byte-identical artifacts
  RunConfig rc2 = rc;
  rc2.out = dir + "/run_b";
  cmd_train(rc2);
  CHECK(read_text_file(dir + "/run_a/checkpoint.json") ==
        read_text_file(dir + "/run_b/checkpoint.json"));
  CHECK(read_text_file(dir + "/run_a/train_log.csv") ==
        read_text_file(dir + "/run_b/train_log.csv"));

  // 3 epochs + 2 resumed epochs lands exactly where 5 straight epochs does
  RunConfig rcr = rc;
  rcr.out = dir + "/run_resume";
  rcr.resume = dir + "/run_a/checkpoint.json";
  rcr.train.epochs = 5;
  cmd_train(rcr);
  LoadedCheckpoint resumed = load_checkpoint(dir + "/run_resume/checkpoint.json");
  CHECK(resumed.meta.at("epochs_done").get<int>() == 5);

  RunConfig rc5 = rc;
  rc5.out = dir + "/run_straight";
  rc5.train.epochs = 5;
  cmd_train(rc5);
  LoadedCheckpoint straight = load_checkpoint(dir + "/run_straight/checkpoint.json");
  REQUIRE(resumed.model.params.size() == straight.model.params.size());
  for (size_t i = 0; i < straight.model.params.size(); ++i)
    CHECK(bits_equal(resumed.model.params[i].value, straight.model.params[i].value));
  for (size_t i = 0; i < straight.model.buffers.size(); ++i)
    CHECK(bits_equal(resumed.model.buffers[i].value, straight.model.buffers[i].value));

  // resuming past the requested horizon is a user error
  RunConfig bad = rcr;
  bad.resume = dir + "/run_straight/checkpoint.json";
  CHECK_THROWS_AS(cmd_train(bad), Error);
}

TEST_CASE("eval scores a checkpoint and a ground-truth prediction file") {
  std::string dir = scratch("eval");
  std::string data = synth_tiny(dir + "/data");
  Dataset ds = load_dataset_jsonl(data);

  RunConfig tr = tiny_train_config(dir + "/model");
  tr.subcommand = "train";
  tr.dataset = data;
  tr.train.epochs = 1;
  cmd_train(tr);

  RunConfig ev = tr;
  ev.subcommand = "eval";
  ev.out = dir + "/eval_model";
  ev.checkpoint = dir + "/model/checkpoint.json";
  CommandResult res = cmd_eval(ev);
  REQUIRE(res.written.size() == 3);

  json rep = json::parse(read_text_file(ev.out + "/eval.json"));
  CHECK(rep.at("config").get<std::string>() == ev.hash());
  CHECK(rep.at("n").get<int>() == int(ds.records.size()));
  CHECK(rep.at("source") == "model");
  CHECK(rep.at("mean").at("mpjpe_mm").get<double>() > 0);
  CHECK(std::isfinite(rep.at("mean").at("mrpe_mm").get<double>()));

  auto preds = load_predictions_jsonl(ev.out + "/predictions.jsonl", ds.joints.joints());
  CHECK(preds.size() == ds.records.size());
  CHECK(preds[0].frame == Frame::WCS);

  std::string csv = read_text_file(ev.out + "/eval.csv");
  CHECK(csv.rfind("# config=", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == long(ds.records.size()) + 2);

  // a prediction file equal to ground truth scores exactly zero everywhere
  std::vector<Pose3D> gt;
  for (const auto& r : ds.records) gt.push_back(r.gt_wcs);
  save_predictions_jsonl(gt, dir + "/gt_preds.jsonl");
  RunConfig pv = ev;
  pv.out = dir + "/eval_gt";
  pv.checkpoint.clear();
  pv.predictions = dir + "/gt_preds.jsonl";
  cmd_eval(pv);
  json perfect = json::parse(read_text_file(pv.out + "/eval.json"));
  CHECK(perfect.at("source") == "predictions");
  CHECK(perfect.at("mean").at("mpjpe_mm").get<double>() == 0.0);
  CHECK(perfect.at("mean").at("abs_mpjpe_mm").get<double>() == 0.0);
  CHECK(perfect.at("mean").at("mrpe_mm").get<double>() == 0.0);

  // truncated prediction files are rejected
  gt.pop_back();
  save_predictions_jsonl(gt, dir + "/short.jsonl");
  pv.predictions = dir + "/short.jsonl";
  CHECK_THROWS_AS(cmd_eval(pv), Error);
}

TEST_CASE("sweep buckets follow the generator grid") {
  std::string dir = scratch("sweep");
  RunConfig sy = config_from_json(kCrossConfig);
  sy.subcommand = "synth";
  sy.out = dir + "/data";
  cmd_synth(sy);

  RunConfig tr = config_from_json(kCrossConfig);
  tr.subcommand = "train";
  tr.dataset = dir + "/data/dataset.jsonl";
  tr.out = dir + "/model";
  tr.model.channels = 8;
  tr.model.embed_dim = 8;
  tr.train.epochs = 1;
  tr.train.batch_size = 8;
  cmd_train(tr);

  RunConfig sw = tr;
  sw.subcommand = "sweep";
  sw.checkpoint = dir + "/model/checkpoint.json";
  sw.out = dir + "/sweep";
  sw.axis = "focal";
  CommandResult res = cmd_sweep(sw);
  REQUIRE(res.written.size() == 2);

  json man = json::parse(read_text_file(dir + "/data/manifest.json"));
  json swj = json::parse(read_text_file(dir + "/sweep/sweep_focal.json"));
  CHECK(swj.at("config").get<std::string>() == sw.hash());
  CHECK(swj.at("axis") == "focal");
  std::vector<double> bucket_values;
  for (const auto& row : swj.at("rows"))
    bucket_values.push_back(row.at("axis_value").get<double>());
  CHECK(bucket_values == man.at("axes").at("focal").get<std::vector<double>>());

  std::string csv = read_text_file(dir + "/sweep/sweep_focal.csv");
  CHECK(csv.rfind("# config=", 0) == 0);

  sw.axis = "rotation";
  cmd_sweep(sw);
  json rot = json::parse(read_text_file(dir + "/sweep/sweep_rotation.json"));
  CHECK(rot.at("rows").size() == 3);

  sw.axis = "bogus";
  std::string err;
  CHECK(run_command(sw, &err) == 1);
  CHECK(err.find("error code=UnknownAxis") != std::string::npos);
}

TEST_CASE("fixed-height baseline reports root error per camera") {
  std::string dir = scratch("rfrh");
  std::string data = synth_tiny(dir + "/data");
  Dataset ds = load_dataset_jsonl(data);

  RunConfig rc;
  rc.subcommand = "baseline-rfrh";
  rc.dataset = data;
  rc.out = dir + "/report";
  CommandResult res = cmd_baseline_rfrh(rc);
  REQUIRE(res.written.size() == 2);

  json rep = json::parse(read_text_file(dir + "/report/rfrh.json"));
  CHECK(rep.at("config").get<std::string>() == rc.hash());
  CHECK(rep.at("n").get<int>() == int(ds.records.size()));
  CHECK(rep.at("assumed_height_m").get<double>() == 0.9395);
  double mean = rep.at("mean_mrpe_mm").get<double>();
  CHECK(std::isfinite(mean));
  CHECK(mean >= 0);

  std::string csv = read_text_file(dir + "/report/rfrh.csv");
  CHECK(csv.rfind("# config=", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == long(ds.records.size()) + 2);
}

TEST_CASE("ablation table trains every input encoding") {
  std::string dir = scratch("ablate");
  std::string data = synth_tiny(dir + "/data");

  RunConfig rc = tiny_train_config(dir + "/report");
  rc.subcommand = "ablate";
  rc.train_dataset = data;
  rc.eval_dataset = data;
  rc.train.epochs = 1;
  CommandResult res = cmd_ablate(rc);
  REQUIRE(res.written.size() == 2);

  json rep = json::parse(read_text_file(dir + "/report/ablate.json"));
  REQUIRE(rep.at("rows").size() == 4);
  const char* variants[] = {"pixel", "ray-ccs", "ray-ncs", "ray-ncs+ce"};
  for (int i = 0; i < 4; ++i) {
    const auto& row = rep.at("rows")[i];
    CHECK(row.at("variant") == variants[i]);
    CHECK(std::isfinite(row.at("mpjpe_mm").get<double>()));
    CHECK(std::isfinite(row.at("mrpe_mm").get<double>()));
    CHECK(row.at("camera_embedding").get<bool>() == (i == 3));
    CHECK(row.at("rays").get<bool>() == (i > 0));
    CHECK(row.at("normalized").get<bool>() == (i > 1));
  }
  std::string csv = read_text_file(dir + "/report/ablate.csv");
  CHECK(csv.rfind("# config=", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(csv.find("ray-ncs+ce") != std::string::npos);
}

TEST_CASE("run_command splits user errors from internal ones") {
  std::string err;

  RunConfig bad;
  bad.subcommand = "explode";
  CHECK(run_command(bad, &err) == 1);
  CHECK(err.rfind("error code=InvalidArgument", 0) == 0);

  RunConfig noset;
  noset.subcommand = "eval";
  noset.out = scratch("errs") + "/x";
  CHECK(run_command(noset, &err) == 1);
  CHECK(err.rfind("error code=InvalidArgument", 0) == 0);

  RunConfig gone;
  gone.subcommand = "eval";
  gone.dataset = "runner_tmp/does_not_exist.jsonl";
  gone.checkpoint = "runner_tmp/neither.json";
  gone.out = scratch("errs2");
  CHECK(run_command(gone, &err) == 1);
  CHECK(err.rfind("error code=IoError", 0) == 0);

  // a model whose joint set cannot score the dataset is an internal fault
  std::string dir = scratch("errs3");
  std::string data = synth_tiny(dir + "/data");
  ModelConfig mc;
  mc.joints = JointSet::body14();
  mc.channels = 8;
  mc.embed_dim = 8;
  LiftModel m = create_model(mc);
  save_checkpoint(m, dir + "/b14.json");
  RunConfig ev;
  ev.subcommand = "eval";
  ev.dataset = data;
  ev.checkpoint = dir + "/b14.json";
  ev.out = dir + "/eval";
  CHECK(run_command(ev, &err) == 2);
  CHECK(err.rfind("error code=JointSetMismatch", 0) == 0);

  RunConfig ok = config_from_json(kCrossConfig);
  ok.subcommand = "synth";
  ok.out = scratch("errs_ok");
  err = "sentinel";
  CHECK(run_command(ok, &err) == 0);
  CHECK(err.empty());
}
