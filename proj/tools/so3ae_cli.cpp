// Command-line front end. Links only the C interface; all behavior lives in
// the shared library. Exit codes: 0 success, 1 flag/usage errors, 2 parse
// errors, 3 invalid arguments or configuration, 4 numeric failures, 5 IO.
#include <cinttypes>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "so3ae/so3ae_c.h"

namespace {

int finish(so3ae_status status) {
  if (status != SO3AE_OK)
    std::fprintf(stderr, "error: %s\n", so3ae_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-equivariant autoencoder toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", so3ae_version());
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print output paths on success")
      ->envname("SO3AE_VERBOSE");

  // transform
  auto* transform = app.add_subcommand(
      "transform", "Encode point clouds or spherical grids into tensors");
  std::string t_mode, t_config, t_in, t_out;
  int t_workers = 1;
  transform->add_option("--mode", t_mode, "zft (point clouds) or sft (grids)")
      ->required();
  transform->add_option("--config", t_config, "Transform config JSON")
      ->required();
  transform->add_option("--in", t_in, "Input record file or .list batch")
      ->required();
  transform->add_option("--out", t_out, "Output tensor dataset")->required();
  transform->add_option("--workers", t_workers,
                        "Parallel workers (default 1; results are identical "
                        "for any count)");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_train, tr_val, tr_out, tr_resume;
  train->add_option("--config", tr_config, "Model config JSON")->required();
  train->add_option("--train", tr_train, "Training tensor dataset")
      ->required();
  train->add_option("--val", tr_val, "Validation tensor dataset")->required();
  train->add_option("--out", tr_out, "Output directory")->required();
  train->add_option("--resume", tr_resume,
                    "Continue from a checkpoint written under the identical "
                    "configuration");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Reconstruction metrics, embeddings, latent scores");
  std::string ev_ckpt, ev_data, ev_labels, ev_out;
  bool ev_audit = false;
  std::uint64_t ev_seed = 0;
  evaluate->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  evaluate->add_option("--data", ev_data, "Tensor dataset")->required();
  evaluate->add_option("--labels", ev_labels,
                       "id,label file enabling latent classification and "
                       "clustering scores");
  evaluate->add_flag("--audit", ev_audit,
                     "Include the rotation-consistency audit");
  evaluate->add_option("--seed", ev_seed, "Seed for fold splits and audit");
  evaluate->add_option("--out", ev_out, "Output directory")->required();

  // sample
  auto* sample =
      app.add_subcommand("sample", "Decode prior draws (variational models)");
  std::string sa_ckpt, sa_out, sa_grid_config;
  int sa_n = 0, sa_grid_bw = 0;
  std::uint64_t sa_seed = 0;
  sample->add_option("--ckpt", sa_ckpt, "Checkpoint file")->required();
  sample->add_option("-n", sa_n, "Number of samples")->required();
  sample->add_option("--seed", sa_seed, "Random seed");
  sample->add_option("--out", sa_out, "Output directory")->required();
  sample->add_option("--grid-bw", sa_grid_bw,
                     "Also rasterize each sample onto a spherical grid of "
                     "this bandwidth");
  sample->add_option("--grid-config", sa_grid_config,
                     "Ball-transform config for density tables");

  // interpolate
  auto* interpolate = app.add_subcommand(
      "interpolate", "Decode the straight latent path between two items");
  std::string ip_ckpt, ip_data, ip_a, ip_b, ip_out, ip_grid_config;
  int ip_steps = 0, ip_grid_bw = 0;
  interpolate->add_option("--ckpt", ip_ckpt, "Checkpoint file")->required();
  interpolate->add_option("--data", ip_data,
                          "Tensor dataset holding both endpoint ids")
      ->required();
  interpolate->add_option("--a", ip_a, "First endpoint id")->required();
  interpolate->add_option("--b", ip_b, "Second endpoint id")->required();
  interpolate->add_option("--steps", ip_steps, "Interior interpolation steps")
      ->required();
  interpolate->add_option("--out", ip_out, "Output directory")->required();
  interpolate->add_option("--grid-bw", ip_grid_bw,
                          "Also rasterize each step onto a spherical grid");
  interpolate->add_option("--grid-config", ip_grid_config,
                          "Ball-transform config for density tables");

  // config
  auto* config =
      app.add_subcommand("config", "Inspect a model configuration");
  std::string cf_config;
  config->add_option("--config", cf_config, "Model config JSON")->required();

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  so3ae_status status = SO3AE_OK;
  std::string success_note;
  if (*transform) {
    status = so3ae_run_transform(t_mode.c_str(), t_config.c_str(),
                                 t_in.c_str(), t_out.c_str(), t_workers);
    success_note = t_out;
  } else if (*train) {
    status = so3ae_run_train(tr_config.c_str(), tr_train.c_str(),
                             tr_val.c_str(), tr_out.c_str(),
                             tr_resume.c_str());
    success_note = tr_out;
  } else if (*evaluate) {
    status = so3ae_run_evaluate(ev_ckpt.c_str(), ev_data.c_str(),
                                ev_labels.c_str(), ev_audit ? 1 : 0,
                                ev_out.c_str(), ev_seed, 0, 0.0);
    success_note = ev_out;
  } else if (*sample) {
    status = so3ae_run_sample(sa_ckpt.c_str(), sa_n, sa_seed, sa_out.c_str(),
                              sa_grid_bw, sa_grid_config.c_str());
    success_note = sa_out;
  } else if (*interpolate) {
    status = so3ae_run_interpolate(ip_ckpt.c_str(), ip_data.c_str(),
                                   ip_a.c_str(), ip_b.c_str(), ip_steps,
                                   ip_out.c_str(), ip_grid_bw,
                                   ip_grid_config.c_str());
    success_note = ip_out;
  } else if (*config) {
    std::uint64_t count = 0;
    status = so3ae_config_param_count(cf_config.c_str(), &count);
    if (status == SO3AE_OK)
      std::printf("trainable parameters: %" PRIu64 "\n", count);
    return finish(status);
  }

  if (status == SO3AE_OK && verbose)
    std::printf("wrote %s\n", success_note.c_str());
  return finish(status);
}
