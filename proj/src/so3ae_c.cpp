#include "so3ae/so3ae_c.h"

#include <algorithm>
#include <string>

#include "so3ae/errors.hpp"
#include "so3ae/model.hpp"
#include "so3ae/runs.hpp"
#include "so3ae/steerable.hpp"
#include "so3ae/tensor_io.hpp"
#include "so3ae/version.hpp"

using namespace so3ae;

struct so3ae_model {
  Checkpoint ckpt;
  Model model;
  std::string config_json;
};

struct so3ae_tensor {
  SteerableTensor t;
};

namespace {

thread_local std::string tl_error;

so3ae_status map_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse:
      return SO3AE_ERR_PARSE;
    case ErrorKind::InvalidArgument:
    case ErrorKind::Shape:
    case ErrorKind::Config:
    case ErrorKind::SelectionRule:
    case ErrorKind::Domain:
    case ErrorKind::DataBounds:
      return SO3AE_ERR_INVALID;
    case ErrorKind::DegenerateFrame:
    case ErrorKind::DegenerateScale:
    case ErrorKind::Numeric:
      return SO3AE_ERR_NUMERIC;
    case ErrorKind::Io:
      return SO3AE_ERR_IO;
  }
  return SO3AE_ERR_NUMERIC;
}

template <typename Fn>
so3ae_status guarded(Fn&& fn) {
  tl_error.clear();
  try {
    fn();
    return SO3AE_OK;
  } catch (const Error& e) {
    tl_error = e.what();
    return map_kind(e.kind());
  } catch (const std::exception& e) {
    tl_error = e.what();
    return SO3AE_ERR_NUMERIC;
  } catch (...) {
    tl_error = "unknown failure";
    return SO3AE_ERR_NUMERIC;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr)
    fail(ErrorKind::InvalidArgument, std::string("null argument: ") + name);
}

std::string opt_str(const char* s) { return s == nullptr ? "" : s; }

}  // namespace

extern "C" {

const char* so3ae_version(void) { return kVersion; }

const char* so3ae_last_error(void) { return tl_error.c_str(); }

so3ae_status so3ae_run_transform(const char* mode, const char* config_path,
                                 const char* input_path,
                                 const char* output_path, int workers) {
  return guarded([&] {
    require(mode, "mode");
    require(config_path, "config_path");
    require(input_path, "input_path");
    require(output_path, "output_path");
    TransformOptions opt;
    opt.mode = mode;
    opt.config_path = config_path;
    opt.input_path = input_path;
    opt.output_path = output_path;
    opt.workers = workers <= 0 ? 1 : workers;
    cmd_transform(opt);
  });
}

so3ae_status so3ae_run_train(const char* config_path, const char* train_path,
                             const char* val_path, const char* output_dir,
                             const char* resume_path) {
  return guarded([&] {
    require(config_path, "config_path");
    require(train_path, "train_path");
    require(val_path, "val_path");
    require(output_dir, "output_dir");
    TrainOptions opt;
    opt.config_path = config_path;
    opt.train_path = train_path;
    opt.val_path = val_path;
    opt.output_dir = output_dir;
    opt.resume_path = opt_str(resume_path);
    cmd_train(opt);
  });
}

so3ae_status so3ae_run_evaluate(const char* ckpt_path, const char* data_path,
                                const char* labels_path, int audit,
                                const char* output_dir, uint64_t seed,
                                int audit_trials, double audit_tolerance) {
  return guarded([&] {
    require(ckpt_path, "ckpt_path");
    require(data_path, "data_path");
    require(output_dir, "output_dir");
    EvaluateOptions opt;
    opt.ckpt_path = ckpt_path;
    opt.data_path = data_path;
    opt.labels_path = opt_str(labels_path);
    opt.audit = audit != 0;
    opt.output_dir = output_dir;
    opt.seed = seed;
    if (audit_trials > 0) opt.audit_trials = audit_trials;
    if (audit_tolerance > 0.0) opt.audit_tolerance = audit_tolerance;
    cmd_evaluate(opt);
  });
}

so3ae_status so3ae_run_sample(const char* ckpt_path, int n, uint64_t seed,
                              const char* output_dir, int grid_bw,
                              const char* grid_config_path) {
  return guarded([&] {
    require(ckpt_path, "ckpt_path");
    require(output_dir, "output_dir");
    SampleOptions opt;
    opt.ckpt_path = ckpt_path;
    opt.n = n;
    opt.seed = seed;
    opt.output_dir = output_dir;
    opt.grid_bw = grid_bw;
    opt.grid_config_path = opt_str(grid_config_path);
    cmd_sample(opt);
  });
}

so3ae_status so3ae_run_interpolate(const char* ckpt_path,
                                   const char* data_path, const char* id_a,
                                   const char* id_b, int steps,
                                   const char* output_dir, int grid_bw,
                                   const char* grid_config_path) {
  return guarded([&] {
    require(ckpt_path, "ckpt_path");
    require(data_path, "data_path");
    require(id_a, "id_a");
    require(id_b, "id_b");
    require(output_dir, "output_dir");
    InterpolateOptions opt;
    opt.ckpt_path = ckpt_path;
    opt.data_path = data_path;
    opt.id_a = id_a;
    opt.id_b = id_b;
    opt.steps = steps;
    opt.output_dir = output_dir;
    opt.grid_bw = grid_bw;
    opt.grid_config_path = opt_str(grid_config_path);
    cmd_interpolate(opt);
  });
}

so3ae_status so3ae_config_param_count(const char* config_path,
                                      uint64_t* count) {
  return guarded([&] {
    require(config_path, "config_path");
    require(count, "count");
    const ModelConfig cfg = ModelConfig::from_json_file(config_path);
    const Model model(cfg);
    *count = model.make_params().store.size();
  });
}

so3ae_status so3ae_model_load(const char* ckpt_path, so3ae_model** out) {
  return guarded([&] {
    require(ckpt_path, "ckpt_path");
    require(out, "out");
    Checkpoint ck = load_checkpoint(ckpt_path);
    Model model(ck.config);
    std::string canonical = ck.config_json;
    *out = new so3ae_model{std::move(ck), std::move(model),
                           std::move(canonical)};
  });
}

void so3ae_model_free(so3ae_model* m) { delete m; }

const char* so3ae_model_config_json(const so3ae_model* m) {
  return m == nullptr ? "" : m->config_json.c_str();
}

so3ae_status so3ae_model_latent_size(const so3ae_model* m, int* z) {
  return guarded([&] {
    require(m, "model");
    require(z, "z");
    *z = m->ckpt.config.z;
  });
}

so3ae_status so3ae_model_encode(const so3ae_model* m, const so3ae_tensor* x,
                                double* invariants, double* frame) {
  return guarded([&] {
    require(m, "model");
    require(x, "tensor");
    require(invariants, "invariants");
    const DatasetNormalizer norm(m->ckpt.params.data_scale);
    const LatentCode code = m->model.encode(norm.apply(x->t), m->ckpt.params);
    std::copy_n(code.invariants.data(), code.invariants.size(), invariants);
    if (frame != nullptr) {
      for (int r = 0; r < 3; ++r) {
        frame[r] = code.frame.e1[r];
        frame[3 + r] = code.frame.e2[r];
        frame[6 + r] = code.frame.e3[r];
      }
    }
  });
}

so3ae_status so3ae_model_decode(const so3ae_model* m,
                                const double* invariants, const double* frame,
                                so3ae_tensor** out) {
  return guarded([&] {
    require(m, "model");
    require(invariants, "invariants");
    require(out, "out");
    LatentCode code;
    code.invariants = Eigen::Map<const Eigen::VectorXd>(
        invariants, m->ckpt.config.z);
    if (frame != nullptr) {
      code.frame.e1 = Eigen::Vector3d(frame[0], frame[1], frame[2]);
      code.frame.e2 = Eigen::Vector3d(frame[3], frame[4], frame[5]);
      code.frame.e3 = Eigen::Vector3d(frame[6], frame[7], frame[8]);
    }
    SteerableTensor t = m->model.decode(code, m->ckpt.params);
    for (std::size_t p = 0; p < t.num_blocks(); ++p)
      t.block(p) *= m->ckpt.params.data_scale;
    *out = new so3ae_tensor{std::move(t)};
  });
}

so3ae_status so3ae_tensor_read_json(const char* path, so3ae_tensor** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new so3ae_tensor{read_tensor_json(path)};
  });
}

so3ae_status so3ae_tensor_write_json(const so3ae_tensor* t,
                                     const char* path) {
  return guarded([&] {
    require(t, "tensor");
    require(path, "path");
    write_tensor_json(t->t, path);
  });
}

so3ae_status so3ae_tensor_coeff_count(const so3ae_tensor* t, size_t* n) {
  return guarded([&] {
    require(t, "tensor");
    require(n, "n");
    *n = t->t.coeff_count();
  });
}

so3ae_status so3ae_tensor_coeffs(const so3ae_tensor* t, double* buf,
                                 size_t buf_size) {
  return guarded([&] {
    require(t, "tensor");
    require(buf, "buf");
    if (buf_size != t->t.coeff_count())
      fail(ErrorKind::Shape,
           "coefficient buffer holds " + std::to_string(buf_size) +
               " values but the tensor has " +
               std::to_string(t->t.coeff_count()));
    const std::vector<double> flat = t->t.to_flat();
    std::copy(flat.begin(), flat.end(), buf);
  });
}

void so3ae_tensor_free(so3ae_tensor* t) { delete t; }

}  // extern "C"
