#include "so3ae/runs.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "so3ae/errors.hpp"
#include "so3ae/fourier.hpp"
#include "so3ae/metrics.hpp"
#include "so3ae/model.hpp"
#include "so3ae/optim.hpp"
#include "so3ae/steerable.hpp"
#include "so3ae/tensor_io.hpp"
#include "so3ae/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace so3ae {
namespace {

// ---------------------------------------------------------------------------
// Small file / formatting helpers
// ---------------------------------------------------------------------------

std::string read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  if (is.bad()) fail(ErrorKind::Io, "read failed: " + path);
  return ss.str();
}

std::string iso_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    fail(ErrorKind::Io, "cannot create output directory: " + dir);
}

std::string path_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

bool has_extension(const std::string& path, const char* ext) {
  return fs::path(path).extension() == ext;
}

// Resolve `rel` against the directory containing `anchor` unless absolute.
std::string resolve_near(const std::string& anchor, const std::string& rel) {
  const fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(anchor).parent_path() / p).string();
}

void write_manifest_file(const RunManifest& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write manifest: " + path);
  os << m.to_json();
  if (!os) fail(ErrorKind::Io, "manifest write failed: " + path);
}

RunManifest base_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.toolkit_version = kVersion;
  m.wall_clock = iso_utc_now();
  return m;
}

// Scale tensors back to data units (the normalizer's apply divides).
SteerableTensor to_data_units(const SteerableTensor& x, double scale) {
  SteerableTensor out = x;
  for (std::size_t p = 0; p < out.num_blocks(); ++p) out.block(p) *= scale;
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic parallel map: run f(0..n-1) on `workers` threads, then
// rethrow the lowest-index failure so the outcome is worker-count invariant.
// ---------------------------------------------------------------------------

template <typename F>
void parallel_for(int n, int workers, F&& f) {
  if (workers < 1)
    fail(ErrorKind::InvalidArgument, "worker count must be positive");
  workers = std::min(workers, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          f(i);
        } catch (...) {
          errors[std::size_t(i)] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (int i = 0; i < n; ++i)
    if (errors[std::size_t(i)]) std::rethrow_exception(errors[std::size_t(i)]);
}

// ---------------------------------------------------------------------------
// Transform configs
// ---------------------------------------------------------------------------

json parse_json_file(const std::string& path, const char* what) {
  const std::string text = read_file_bytes(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse,
         std::string(what) + ": invalid JSON in " + path + ": " + e.what());
  }
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> ok,
                         const char* what) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool known = false;
    for (const char* k : ok) known |= key == k;
    if (!known)
      fail(ErrorKind::Config,
           std::string(what) + ": unknown field \"" + key + "\"");
  }
}

ZftConfig parse_zft_config(const std::string& path) {
  const json j = parse_json_file(path, "zft config");
  if (!j.is_object())
    fail(ErrorKind::Config, "zft config: expected a JSON object");
  reject_unknown_keys(j, {"L", "N", "r_max", "labels"}, "zft config");
  ZftConfig cfg;
  try {
    cfg.L = j.at("L").get<int>();
    cfg.N = j.at("N").get<int>();
    cfg.r_max = j.at("r_max").get<double>();
    cfg.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("zft config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

int parse_sft_config(const std::string& path) {
  const json j = parse_json_file(path, "sft config");
  if (!j.is_object())
    fail(ErrorKind::Config, "sft config: expected a JSON object");
  reject_unknown_keys(j, {"L"}, "sft config");
  int L = 0;
  try {
    L = j.at("L").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("sft config: ") + e.what());
  }
  if (L < 0) fail(ErrorKind::Config, "sft config: L must be nonnegative");
  return L;
}

// Batch list: lines "id path", '#' comments and blank lines ignored; paths
// resolve relative to the list file.
struct BatchEntry {
  std::string id;
  std::string path;
};

std::vector<BatchEntry> read_batch_list(const std::string& list_path) {
  std::ifstream is(list_path);
  if (!is) fail(ErrorKind::Io, "cannot open: " + list_path);
  std::vector<BatchEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string id, path, extra;
    if (!(ls >> id)) continue;  // blank
    if (!(ls >> path))
      fail(ErrorKind::Parse, list_path + ":" + std::to_string(lineno) +
                                 ": expected \"id path\", got only \"" + id +
                                 "\"");
    if (ls >> extra)
      fail(ErrorKind::Parse, list_path + ":" + std::to_string(lineno) +
                                 ": trailing token \"" + extra + "\"");
    entries.push_back({id, resolve_near(list_path, path)});
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Rasterization (optional plot-ready grids)
// ---------------------------------------------------------------------------

// Deterministic ball grid for density tables: bandwidth-6 sphere directions
// crossed with four radial shells.
std::vector<Eigen::Vector3d> density_grid_points(double r_max) {
  const int bw = 6;
  const std::vector<double> thetas = dh_thetas(bw);
  const std::vector<double> phis = dh_phis(bw);
  const double radii[] = {0.25, 0.5, 0.75, 1.0};
  std::vector<Eigen::Vector3d> pts;
  for (double f : radii) {
    const double r = f * r_max;
    for (double th : thetas)
      for (double ph : phis)
        pts.emplace_back(r * std::sin(th) * std::cos(ph),
                         r * std::sin(th) * std::sin(ph), r * std::cos(th));
  }
  return pts;
}

void write_density_csv(const SteerableTensor& t, const ZftConfig& cfg,
                       const std::string& path) {
  for (const std::string& label : cfg.labels)
    if (label.find_first_of(",\n\r") != std::string::npos)
      fail(ErrorKind::InvalidArgument,
           "density table: label contains a comma or newline: " + label);
  const std::vector<Eigen::Vector3d> pts = density_grid_points(cfg.r_max);
  const Eigen::MatrixXd rho = inverse_zft(t, pts, cfg);
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write density table: " + path);
  os << "x,y,z";
  for (const std::string& label : cfg.labels) os << ',' << label;
  os << "\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    os << fmt17(pts[i].x()) << ',' << fmt17(pts[i].y()) << ','
       << fmt17(pts[i].z());
    for (Eigen::Index c = 0; c < rho.cols(); ++c)
      os << ',' << fmt17(rho(Eigen::Index(i), c));
    os << "\n";
  }
  if (!os) fail(ErrorKind::Io, "density table write failed: " + path);
}

// Shared by sample/interpolate: write optional grid files for each tensor.
void rasterize_outputs(const std::vector<SteerableTensor>& tensors,
                       const std::vector<std::string>& ids, int grid_bw,
                       const std::string& grid_config_path,
                       const std::string& out_dir,
                       std::vector<std::string>& outputs) {
  if (grid_bw > 0) {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::string p = (fs::path(out_dir) / (ids[i] + ".ssig")).string();
      write_spherical_signal(inverse_sft(tensors[i], grid_bw), p);
      outputs.push_back(p);
    }
  }
  if (!grid_config_path.empty()) {
    const ZftConfig cfg = parse_zft_config(grid_config_path);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::string p =
          (fs::path(out_dir) / (ids[i] + ".density.csv")).string();
      write_density_csv(tensors[i], cfg, p);
      outputs.push_back(p);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint/model loading shared by evaluate/sample/interpolate
// ---------------------------------------------------------------------------

struct LoadedModel {
  Checkpoint ckpt;
  Model model;
};

LoadedModel load_model(const std::string& ckpt_path) {
  Checkpoint c = load_checkpoint(ckpt_path);
  Model m(c.config);
  return {std::move(c), std::move(m)};
}

void check_dataset_signature(const TensorDataset& ds, const Model& model,
                             const std::string& path) {
  if (!(ds.signature == model.input_signature()))
    fail(ErrorKind::Shape,
         "dataset " + path + " has signature " + ds.signature.to_string() +
             " but the model expects " + model.input_signature().to_string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::uint64_t hash_file(const std::string& path) {
  return fnv1a64(read_file_bytes(path));
}

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  if (config_path.empty()) {
    j["config"] = nullptr;
  } else {
    j["config"] = {{"path", config_path}, {"fnv1a64", hex64(config_hash)}};
  }
  json ins = json::array();
  for (const auto& [path, hash] : inputs)
    ins.push_back({{"path", path}, {"fnv1a64", hex64(hash)}});
  j["inputs"] = ins;
  j["seed"] = seed;
  j["toolkit_version"] = toolkit_version;
  j["wall_clock_utc"] = wall_clock;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// cmd_transform
// ---------------------------------------------------------------------------

void cmd_transform(const TransformOptions& opt) {
  if (opt.mode != "zft" && opt.mode != "sft")
    fail(ErrorKind::InvalidArgument,
         "transform: mode must be \"zft\" or \"sft\", got \"" + opt.mode +
             "\"");

  RunManifest manifest = base_manifest("transform");
  manifest.config_path = opt.config_path;
  manifest.config_hash = hash_file(opt.config_path);
  manifest.inputs.emplace_back(opt.input_path, hash_file(opt.input_path));

  std::vector<BatchEntry> entries;
  if (has_extension(opt.input_path, ".list")) {
    entries = read_batch_list(opt.input_path);
    if (entries.empty())
      fail(ErrorKind::InvalidArgument,
           "transform: empty input list: " + opt.input_path);
    for (const BatchEntry& e : entries) {
      try {
        manifest.inputs.emplace_back(e.path, hash_file(e.path));
      } catch (const Error& err) {
        fail(err.kind(), "item " + e.id + ": " + std::string(err.what()));
      }
    }
  } else {
    entries.push_back({path_stem(opt.input_path), opt.input_path});
  }

  TensorDataset ds;
  ds.items.resize(entries.size());
  for (const BatchEntry& e : entries) ds.ids.push_back(e.id);

  if (opt.mode == "zft") {
    const ZftConfig cfg = parse_zft_config(opt.config_path);
    ds.signature = zft_signature(cfg);
    const bool single = !has_extension(opt.input_path, ".list");
    parallel_for(int(entries.size()), opt.workers, [&](int i) {
      const BatchEntry& e = entries[std::size_t(i)];
      try {
        const PointCloud cloud = read_point_cloud(e.path);
        if (single && cloud.points.empty())
          fail(ErrorKind::InvalidArgument,
               "transform: empty input file: " + e.path);
        ds.items[std::size_t(i)] = zft_point_cloud(cloud, cfg);
      } catch (const Error& err) {
        fail(err.kind(),
             "item " + e.id + ": " + std::string(err.what()));
      }
    });
  } else {
    const int L = parse_sft_config(opt.config_path);
    parallel_for(int(entries.size()), opt.workers, [&](int i) {
      const BatchEntry& e = entries[std::size_t(i)];
      try {
        ds.items[std::size_t(i)] = sft_grid(read_spherical_signal(e.path), L);
      } catch (const Error& err) {
        fail(err.kind(),
             "item " + e.id + ": " + std::string(err.what()));
      }
    });
    if (!ds.items.empty()) ds.signature = ds.items.front().signature();
    for (const SteerableTensor& t : ds.items)
      if (!(t.signature() == ds.signature))
        fail(ErrorKind::Shape,
             "transform: input grids disagree on channel count, so the "
             "items have different signatures");
  }

  ds.validate();
  write_tensor_dataset(ds, opt.output_path);
  manifest.outputs.push_back(opt.output_path);
  write_manifest_file(manifest, opt.output_path + ".manifest.json");
}

// ---------------------------------------------------------------------------
// cmd_train
// ---------------------------------------------------------------------------

void cmd_train(const TrainOptions& opt) {
  const ModelConfig cfg = ModelConfig::from_json_file(opt.config_path);
  const Model model(cfg);  // rejects unreachable configs before any data IO
  const std::string canonical = cfg.to_json();

  TensorDataset train_set = read_tensor_dataset(opt.train_path);
  TensorDataset val_set = read_tensor_dataset(opt.val_path);
  train_set.validate();
  val_set.validate();
  check_dataset_signature(train_set, model, opt.train_path);
  check_dataset_signature(val_set, model, opt.val_path);
  if (train_set.items.empty())
    fail(ErrorKind::InvalidArgument,
         "train: empty training dataset: " + opt.train_path);

  ModelParams params = model.make_params();
  AdamState adam;
  int start_epoch = 0;
  double prev_best = std::numeric_limits<double>::infinity();
  int prev_best_epoch = -1;

  if (!opt.resume_path.empty()) {
    Checkpoint ck = load_checkpoint(opt.resume_path);
    if (ck.config_json != canonical)
      fail(ErrorKind::Config,
           "resume: checkpoint " + opt.resume_path +
               " was written under a different configuration (config hash " +
               hex64(fnv1a64(ck.config_json)) + " != " +
               hex64(fnv1a64(canonical)) + ")");
    params = std::move(ck.params);
    adam = ck.adam ? *ck.adam : AdamState{};
    start_epoch = ck.epoch + 1;
    prev_best = ck.best_val;
    prev_best_epoch = ck.best_epoch;
  } else {
    std::mt19937_64 rng(cfg.seed);
    model.init_params(params, rng);
    params.data_scale = DatasetNormalizer::fit(train_set.items).scale();
  }

  const DatasetNormalizer norm(params.data_scale);
  norm.apply_in_place(train_set.items);
  norm.apply_in_place(val_set.items);

  ensure_dir(opt.output_dir);
  const std::string best_path =
      (fs::path(opt.output_dir) / "best.ckpt").string();
  const std::string last_path =
      (fs::path(opt.output_dir) / "last.ckpt").string();
  const std::string history_path =
      (fs::path(opt.output_dir) / "history.csv").string();

  std::vector<EpochStats> history;
  bool wrote_best = false;
  const auto on_epoch = [&](const EpochStats& s, const ModelParams& p,
                            const AdamState& a, bool is_best) {
    history.push_back(s);
    if (is_best) {
      Checkpoint c;
      c.config_json = canonical;
      c.config = cfg;
      c.params = p;
      c.adam = a;
      c.epoch = s.epoch;
      c.best_epoch = s.epoch;
      c.val_loss = s.val_total;
      c.best_val = s.val_total;
      save_checkpoint(c, best_path);
      wrote_best = true;
    }
  };

  const TrainResult result = model.train(train_set, val_set, params, adam,
                                         start_epoch, on_epoch, prev_best,
                                         prev_best_epoch);

  Checkpoint last;
  last.config_json = canonical;
  last.config = cfg;
  last.params = params;
  last.adam = adam;
  last.epoch = history.empty() ? start_epoch - 1 : history.back().epoch;
  last.best_epoch = result.best_epoch;
  last.val_loss =
      history.empty() ? std::numeric_limits<double>::quiet_NaN()
                      : history.back().val_total;
  last.best_val = result.best_val;
  save_checkpoint(last, last_path);
  // No epoch was eligible for selection (e.g. the warmup consumed the whole
  // run): fall back to the final state so best.ckpt always exists.
  if (!wrote_best) save_checkpoint(last, best_path);

  std::ofstream hist(history_path);
  if (!hist) fail(ErrorKind::Io, "cannot write history: " + history_path);
  hist << "epoch,lr,beta,train_total,train_mse,train_kl,val_total,val_mse,"
          "val_kl,val_cosine,best\n";
  for (const EpochStats& s : history)
    hist << s.epoch << ',' << fmt17(s.lr) << ',' << fmt17(s.beta) << ','
         << fmt17(s.train_total) << ',' << fmt17(s.train_mse) << ','
         << fmt17(s.train_kl) << ',' << fmt17(s.val_total) << ','
         << fmt17(s.val_mse) << ',' << fmt17(s.val_kl) << ','
         << fmt17(s.val_cosine) << ','
         << (s.epoch == result.best_epoch ? 1 : 0) << "\n";
  if (!hist) fail(ErrorKind::Io, "history write failed: " + history_path);
  hist.close();

  RunManifest manifest = base_manifest("train");
  manifest.config_path = opt.config_path;
  manifest.config_hash = hash_file(opt.config_path);
  manifest.seed = std::uint64_t(cfg.seed);
  manifest.inputs.emplace_back(opt.train_path, hash_file(opt.train_path));
  manifest.inputs.emplace_back(opt.val_path, hash_file(opt.val_path));
  if (!opt.resume_path.empty())
    manifest.inputs.emplace_back(opt.resume_path, hash_file(opt.resume_path));
  manifest.outputs = {best_path, last_path, history_path};
  write_manifest_file(manifest,
                      (fs::path(opt.output_dir) / "manifest.json").string());
}

// ---------------------------------------------------------------------------
// cmd_evaluate
// ---------------------------------------------------------------------------

void cmd_evaluate(const EvaluateOptions& opt) {
  LoadedModel lm = load_model(opt.ckpt_path);
  TensorDataset ds = read_tensor_dataset(opt.data_path);
  ds.validate();
  check_dataset_signature(ds, lm.model, opt.data_path);
  if (ds.items.empty())
    fail(ErrorKind::InvalidArgument,
         "evaluate: empty dataset: " + opt.data_path);

  const DatasetNormalizer norm(lm.ckpt.params.data_scale);

  const int n = int(ds.items.size());
  Eigen::MatrixXd embeddings(n, lm.ckpt.config.z);
  TensorDataset recon;
  recon.signature = ds.signature;
  recon.ids = ds.ids;
  recon.items.resize(ds.items.size());
  for (int i = 0; i < n; ++i) {
    const SteerableTensor scaled = norm.apply(ds.items[std::size_t(i)]);
    embeddings.row(i) =
        lm.model.encode(scaled, lm.ckpt.params).invariants.transpose();
    recon.items[std::size_t(i)] = to_data_units(
        lm.model.reconstruct(scaled, lm.ckpt.params), norm.scale());
  }

  EvalReport report;
  report.recon = recon_stats(ds.items, recon.items);

  std::vector<std::string> label_names;
  if (!opt.labels_path.empty()) {
    const LabelMap labels = read_labels(opt.labels_path);
    const std::vector<std::string> classes = labels.classes();
    std::vector<int> y;
    for (const std::string& id : ds.ids) {
      const auto label = labels.label_of(id);
      if (!label)
        fail(ErrorKind::InvalidArgument,
             "evaluate: no label for dataset id \"" + id + "\" in " +
                 opt.labels_path);
      label_names.push_back(*label);
      y.push_back(int(std::lower_bound(classes.begin(), classes.end(),
                                       *label) -
                      classes.begin()));
    }
    report.has_labels = true;
    report.accuracy = cv_latent_accuracy(embeddings, ds.ids, y,
                                         int(classes.size()), 5, opt.seed);
    report.clustering =
        cluster_scores(embeddings, y, int(classes.size()), opt.seed);
  }

  if (opt.audit) {
    report.has_audit = true;
    report.audit = equivariance_audit(lm.model, lm.ckpt.params,
                                      opt.audit_trials, opt.audit_tolerance,
                                      opt.seed);
  }

  ensure_dir(opt.output_dir);
  const std::string report_path =
      (fs::path(opt.output_dir) / "report.json").string();
  const std::string emb_path =
      (fs::path(opt.output_dir) / "embeddings.csv").string();
  const std::string recon_path =
      (fs::path(opt.output_dir) / "reconstructions.stds").string();
  write_eval_report(report, report_path);
  write_embeddings_csv(ds.ids, embeddings,
                       report.has_labels ? &label_names : nullptr, emb_path);
  write_tensor_dataset(recon, recon_path);

  RunManifest manifest = base_manifest("evaluate");
  manifest.seed = opt.seed;
  manifest.inputs.emplace_back(opt.ckpt_path, hash_file(opt.ckpt_path));
  manifest.inputs.emplace_back(opt.data_path, hash_file(opt.data_path));
  if (!opt.labels_path.empty())
    manifest.inputs.emplace_back(opt.labels_path, hash_file(opt.labels_path));
  manifest.outputs = {report_path, emb_path, recon_path};
  write_manifest_file(manifest,
                      (fs::path(opt.output_dir) / "manifest.json").string());
}

// ---------------------------------------------------------------------------
// cmd_sample
// ---------------------------------------------------------------------------

void cmd_sample(const SampleOptions& opt) {
  if (opt.n < 0)
    fail(ErrorKind::InvalidArgument, "sample: negative sample count");
  LoadedModel lm = load_model(opt.ckpt_path);
  if (!lm.ckpt.config.variational)
    fail(ErrorKind::Config,
         "sample: checkpoint " + opt.ckpt_path +
             " holds a plain autoencoder; prior sampling requires a "
             "variational model");

  std::vector<SteerableTensor> raw =
      lm.model.sample_prior(opt.n, lm.ckpt.params, opt.seed);
  TensorDataset ds;
  ds.signature = lm.model.input_signature();
  for (int i = 0; i < opt.n; ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "sample-%04d", i);
    ds.ids.push_back(id);
    ds.items.push_back(
        to_data_units(raw[std::size_t(i)], lm.ckpt.params.data_scale));
  }

  ensure_dir(opt.output_dir);
  const std::string out_path =
      (fs::path(opt.output_dir) / "samples.stds").string();
  write_tensor_dataset(ds, out_path);

  RunManifest manifest = base_manifest("sample");
  manifest.seed = opt.seed;
  manifest.inputs.emplace_back(opt.ckpt_path, hash_file(opt.ckpt_path));
  manifest.outputs = {out_path};
  rasterize_outputs(ds.items, ds.ids, opt.grid_bw, opt.grid_config_path,
                    opt.output_dir, manifest.outputs);
  if (!opt.grid_config_path.empty())
    manifest.inputs.emplace_back(opt.grid_config_path,
                                 hash_file(opt.grid_config_path));
  write_manifest_file(manifest,
                      (fs::path(opt.output_dir) / "manifest.json").string());
}

// ---------------------------------------------------------------------------
// cmd_interpolate
// ---------------------------------------------------------------------------

void cmd_interpolate(const InterpolateOptions& opt) {
  if (opt.steps < 0)
    fail(ErrorKind::InvalidArgument, "interpolate: negative step count");
  LoadedModel lm = load_model(opt.ckpt_path);
  TensorDataset ds = read_tensor_dataset(opt.data_path);
  ds.validate();
  check_dataset_signature(ds, lm.model, opt.data_path);
  const int ia = ds.index_of(opt.id_a);
  const int ib = ds.index_of(opt.id_b);
  if (ia < 0)
    fail(ErrorKind::InvalidArgument, "interpolate: id \"" + opt.id_a +
                                         "\" not found in " + opt.data_path);
  if (ib < 0)
    fail(ErrorKind::InvalidArgument, "interpolate: id \"" + opt.id_b +
                                         "\" not found in " + opt.data_path);

  const DatasetNormalizer norm(lm.ckpt.params.data_scale);
  const std::vector<SteerableTensor> path = lm.model.interpolate(
      norm.apply(ds.items[std::size_t(ia)]),
      norm.apply(ds.items[std::size_t(ib)]), opt.steps, lm.ckpt.params);

  TensorDataset out;
  out.signature = lm.model.input_signature();
  for (std::size_t i = 0; i < path.size(); ++i) {
    out.ids.push_back("step-" + std::to_string(i));
    out.items.push_back(to_data_units(path[i], norm.scale()));
  }

  ensure_dir(opt.output_dir);
  const std::string out_path =
      (fs::path(opt.output_dir) / "interpolation.stds").string();
  write_tensor_dataset(out, out_path);

  RunManifest manifest = base_manifest("interpolate");
  manifest.inputs.emplace_back(opt.ckpt_path, hash_file(opt.ckpt_path));
  manifest.inputs.emplace_back(opt.data_path, hash_file(opt.data_path));
  manifest.outputs = {out_path};
  rasterize_outputs(out.items, out.ids, opt.grid_bw, opt.grid_config_path,
                    opt.output_dir, manifest.outputs);
  if (!opt.grid_config_path.empty())
    manifest.inputs.emplace_back(opt.grid_config_path,
                                 hash_file(opt.grid_config_path));
  write_manifest_file(manifest,
                      (fs::path(opt.output_dir) / "manifest.json").string());
}

}  // namespace so3ae
