#pragma once

// Experiment plumbing: one RunConfig describes one command invocation, built
// from defaults, then a JSON config file, then command-line flags, in that
// precedence order. Every file a command writes embeds the run-config hash so
// results stay traceable, and reruns with the same config are byte-identical.

#include <cstdint>
#include <string>
#include <vector>

#include "raylift/liftnet.hpp"
#include "raylift/synthbench.hpp"

namespace raylift {

struct RunConfig {
  std::string subcommand;     // synth | train | eval | sweep | baseline-rfrh | ablate
  std::string dataset;        // synth output / single-dataset commands input
  std::string train_dataset;  // ablate: training split
  std::string eval_dataset;   // train: validation split; ablate: held-out split
  std::string checkpoint;     // model manifest to evaluate
  std::string resume;         // checkpoint to continue training from
  std::string predictions;    // eval: score this file instead of a model
  std::string out;            // output directory, created on demand
  std::string axis = "focal";
  std::string bench;          // generator preset name, see bench_preset_names()
  std::uint64_t seed = 1;     // the run seed: feeds generation, init and training
  int jobs = 1;               // worker threads; never changes output bytes
  bool tta = true;            // flip-averaged evaluation
  double rfrh_height = 0.9395;
  BenchConfig synth;
  ModelConfig model;
  TrainConfig train;

  void validate() const;
  // every field that shapes command output (jobs excluded); hash input
  std::string canonical_string() const;
  std::string hash() const;
};

// strict parse: unknown keys anywhere are an InvalidArgument naming the key.
// "bench" applies a preset before explicit "synth" keys override it; nested
// seeds are rejected because the run seed is the only seed.
RunConfig config_from_json(const std::string& json_text);

BenchConfig bench_preset(const std::string& name, std::uint64_t seed);
std::vector<std::string> bench_preset_names();

// world-frame poses, one JSON line per sample in dataset order
void save_predictions_jsonl(const std::vector<Pose3D>& preds, const std::string& path);
std::vector<Pose3D> load_predictions_jsonl(const std::string& path, int joints);

struct CommandResult {
  std::vector<std::string> written;  // paths in write order
  std::string summary;               // one line for the console
};

// dataset.jsonl + manifest.json (counts, config hash, per-axis grid values)
CommandResult cmd_synth(const RunConfig& rc);
// checkpoint.json + train_log.csv; resumes when rc.resume is set
CommandResult cmd_train(const RunConfig& rc);
// eval.csv / eval.json / predictions.jsonl; scores rc.predictions against the
// dataset ground truth when set, otherwise runs the checkpointed model
CommandResult cmd_eval(const RunConfig& rc);
// per-bucket error curve over rc.axis: sweep_<axis>.csv / .json
CommandResult cmd_sweep(const RunConfig& rc);
// root localization from the root ray at a fixed assumed height, no learning:
// rfrh.csv / rfrh.json
CommandResult cmd_baseline_rfrh(const RunConfig& rc);
// one row per input encoding {pixel, ray-ccs, ray-ncs, ray-ncs + embedding},
// each trained from scratch and scored on the held-out split: ablate.csv/.json
CommandResult cmd_ablate(const RunConfig& rc);

// dispatch by rc.subcommand. Returns the process exit code: 0 ok, 1 user
// error (bad config, unreadable path), 2 internal error; on failure *err gets
// one machine-readable line "error code=<name> msg=<text>".
int run_command(const RunConfig& rc, std::string* err, CommandResult* result = nullptr);

}  // namespace raylift
