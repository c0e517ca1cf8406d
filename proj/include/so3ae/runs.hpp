#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace so3ae {

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

// Provenance record every command writes next to its outputs: what ran, on
// which inputs (with content hashes), under which seed and toolkit version.
// Directory-producing commands write `<dir>/manifest.json` (exactly one per
// output directory); file-producing commands attach `<file>.manifest.json`
// to the artifact itself.
struct RunManifest {
  std::string command;
  std::string config_path;        // empty when the command takes no config
  std::uint64_t config_hash = 0;  // FNV-1a 64 of the config file bytes
  std::vector<std::pair<std::string, std::uint64_t>> inputs;
  std::uint64_t seed = 0;
  std::string toolkit_version;
  std::string wall_clock;  // ISO-8601 UTC; the only non-reproducible field
  std::vector<std::string> outputs;

  std::string to_json() const;
};

// FNV-1a 64 hash of a file's bytes; io error when unreadable.
std::uint64_t hash_file(const std::string& path);

// ---------------------------------------------------------------------------
// Commands. Each is a pure function of (inputs, config, seed) to bytes on
// disk -- byte-identical on repetition except the manifest timestamp -- and
// reports failure through the structured error type.
// ---------------------------------------------------------------------------

// Encode raw inputs into a tensor dataset.
//   mode "zft": config is a ZftConfig JSON document
//                 {"L": int, "N": int, "r_max": num, "labels": [str, ...]};
//               inputs are point-cloud text files.
//   mode "sft": config is {"L": int}; inputs are "SSIG" grid files.
// The input path is either a single raw file (item id = file stem) or a
// batch list (extension ".list") of lines "id path", paths resolved
// relative to the list file. `workers` parallelizes per-item transforms;
// results are committed in item order so the output is identical for any
// worker count.
struct TransformOptions {
  std::string mode;  // "zft" | "sft"
  std::string config_path;
  std::string input_path;
  std::string output_path;  // tensor dataset file
  int workers = 1;
};
void cmd_transform(const TransformOptions& opt);

// Train a model. Writes best.ckpt, last.ckpt, history.csv, manifest.json
// into the output directory. The dataset normalizer is fitted on the
// training set and its scale travels inside the checkpoints. On resume the
// checkpoint must carry the same canonical config as --config, training
// restarts at the epoch after the checkpoint's, and the stored scale is
// reused so the trajectory matches the uninterrupted run.
struct TrainOptions {
  std::string config_path;
  std::string train_path;
  std::string val_path;
  std::string output_dir;
  std::string resume_path;  // empty = fresh start
};
void cmd_train(const TrainOptions& opt);

// Evaluate a checkpoint on a dataset. Writes report.json, embeddings.csv,
// reconstructions (a tensor dataset in data units), manifest.json. Labels
// switch on the classification and clustering metrics; requesting them with
// an unreadable label file is an explicit error, as is a labeled dataset id
// with no label row. `audit` adds the equivariance audit to the report.
struct EvaluateOptions {
  std::string ckpt_path;
  std::string data_path;
  std::string labels_path;  // empty = reconstruction metrics only
  bool audit = false;
  std::string output_dir;
  std::uint64_t seed = 0;
  int audit_trials = 20;
  double audit_tolerance = 1e-5;
};
void cmd_evaluate(const EvaluateOptions& opt);

// Draw prior samples from a variational checkpoint (a non-variational one is
// a mode error). Writes samples.stds (n may be 0: an empty dataset is still
// a success) plus optional rasterizations, and manifest.json.
// Rasterization: grid_bw > 0 synthesizes each sample onto a bandwidth-bw
// sphere grid ("SSIG" file, uniform-channel signatures only);
// grid_config_path names a ZftConfig JSON and writes per-sample density
// tables "x,y,z,<label>..." on a deterministic ball grid.
struct SampleOptions {
  std::string ckpt_path;
  int n = 0;
  std::uint64_t seed = 0;
  std::string output_dir;
  int grid_bw = 0;
  std::string grid_config_path;
};
void cmd_sample(const SampleOptions& opt);

// Interpolate between two dataset items along the straight latent path,
// decoding every step in the canonical frame. Writes interpolation.stds
// holding steps+2 tensors "step-0" .. "step-<steps+1>" in data units -- the
// endpoints are the canonical-frame decodes of the two items' latent codes
// -- plus optional rasterizations as in cmd_sample, and manifest.json.
struct InterpolateOptions {
  std::string ckpt_path;
  std::string data_path;
  std::string id_a;
  std::string id_b;
  int steps = 0;
  std::string output_dir;
  int grid_bw = 0;
  std::string grid_config_path;
};
void cmd_interpolate(const InterpolateOptions& opt);

}  // namespace so3ae
