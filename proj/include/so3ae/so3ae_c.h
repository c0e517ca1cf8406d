/* C interface to the rotation-equivariant autoencoder toolkit.
 *
 * Every entry point returns a status code; 0 is success. On failure the
 * thread-local message from so3ae_last_error() describes what went wrong.
 * Handles returned through out-parameters are owned by the caller and must
 * be released with the matching *_free function. All paths are UTF-8.
 */
#ifndef SO3AE_C_H
#define SO3AE_C_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes (stable; the command-line tool exits with these values).
 * 1 is reserved for command-line usage errors and is never returned by the
 * library itself. */
typedef enum so3ae_status {
  SO3AE_OK = 0,
  SO3AE_ERR_USAGE = 1,   /* reserved for CLI flag parsing */
  SO3AE_ERR_PARSE = 2,   /* malformed file or JSON content */
  SO3AE_ERR_INVALID = 3, /* invalid arguments, shapes, or configuration */
  SO3AE_ERR_NUMERIC = 4, /* degenerate or non-finite numeric conditions */
  SO3AE_ERR_IO = 5,      /* filesystem failures */
} so3ae_status;

/* Library version string, e.g. "0.1.0". Static storage; do not free. */
const char* so3ae_version(void);

/* Message of the most recent failure in this thread ("" when the last call
 * succeeded). The pointer stays valid until the next library call in the
 * same thread. */
const char* so3ae_last_error(void);

/* ------------------------------------------------------------------------
 * Run-level entry points. Each mirrors one command of the command-line
 * tool: it reads/writes the documented artifact files and a run manifest.
 * Optional string arguments accept NULL or "" to mean "not given".
 * ------------------------------------------------------------------------ */

/* Encode raw geometry into steerable-tensor datasets. mode is "zft" (point
 * clouds in a ball) or "sft" (spherical grids); input_path is a single
 * record file or a .list batch; workers <= 0 means 1. */
so3ae_status so3ae_run_transform(const char* mode, const char* config_path,
                                 const char* input_path,
                                 const char* output_path, int workers);

/* Train a model; writes best.ckpt, last.ckpt, history.csv, manifest.json
 * into output_dir. resume_path continues from a checkpoint written under
 * the identical configuration. */
so3ae_status so3ae_run_train(const char* config_path, const char* train_path,
                             const char* val_path, const char* output_dir,
                             const char* resume_path);

/* Reconstruction metrics, embeddings, and (with labels_path) latent
 * classification/clustering scores; audit != 0 adds the rotation-
 * consistency audit. audit_trials <= 0 and audit_tolerance <= 0 select the
 * defaults (20 trials, 1e-5). */
so3ae_status so3ae_run_evaluate(const char* ckpt_path, const char* data_path,
                                const char* labels_path, int audit,
                                const char* output_dir, uint64_t seed,
                                int audit_trials, double audit_tolerance);

/* Decode n prior draws from a variational checkpoint into samples.stds.
 * grid_bw > 0 additionally rasterizes each sample onto a spherical grid;
 * grid_config_path names a ball-transform config for density tables. */
so3ae_status so3ae_run_sample(const char* ckpt_path, int n, uint64_t seed,
                              const char* output_dir, int grid_bw,
                              const char* grid_config_path);

/* Decode the straight latent path between two dataset items (steps interior
 * points) into interpolation.stds. */
so3ae_status so3ae_run_interpolate(const char* ckpt_path,
                                   const char* data_path, const char* id_a,
                                   const char* id_b, int steps,
                                   const char* output_dir, int grid_bw,
                                   const char* grid_config_path);

/* Trainable-parameter count of a model configuration file. */
so3ae_status so3ae_config_param_count(const char* config_path,
                                      uint64_t* count);

/* ------------------------------------------------------------------------
 * Handle-level access: load a checkpointed model and run single tensors
 * through it. Tensors at this boundary are in data units; the handles
 * apply the checkpoint's stored normalization internally.
 * ------------------------------------------------------------------------ */

typedef struct so3ae_model so3ae_model;
typedef struct so3ae_tensor so3ae_tensor;

so3ae_status so3ae_model_load(const char* ckpt_path, so3ae_model** out);
void so3ae_model_free(so3ae_model* m);

/* Canonical configuration JSON of the loaded model. Owned by the handle;
 * valid until so3ae_model_free. */
const char* so3ae_model_config_json(const so3ae_model* m);

/* Invariant latent dimension z. */
so3ae_status so3ae_model_latent_size(const so3ae_model* m, int* z);

/* Encode one tensor: writes z doubles into invariants, and, when frame is
 * non-NULL, the learned orthonormal frame as 9 doubles in column-major
 * order (the three frame vectors are the columns). */
so3ae_status so3ae_model_encode(const so3ae_model* m, const so3ae_tensor* x,
                                double* invariants, double* frame);

/* Decode a latent code. invariants holds z doubles; frame is either NULL
 * (canonical frame) or 9 column-major doubles forming a right-handed
 * orthonormal basis, as produced by so3ae_model_encode. */
so3ae_status so3ae_model_decode(const so3ae_model* m,
                                const double* invariants, const double* frame,
                                so3ae_tensor** out);

/* Tensor JSON files carry the signature plus the flat coefficient vector
 * in the canonical layout: degrees in signature order, channels within a
 * degree, m from -l to +l. */
so3ae_status so3ae_tensor_read_json(const char* path, so3ae_tensor** out);
so3ae_status so3ae_tensor_write_json(const so3ae_tensor* t, const char* path);

/* Flat coefficient access in the canonical layout. so3ae_tensor_coeffs
 * fails unless buf_size equals the exact coefficient count. */
so3ae_status so3ae_tensor_coeff_count(const so3ae_tensor* t, size_t* n);
so3ae_status so3ae_tensor_coeffs(const so3ae_tensor* t, double* buf,
                                 size_t buf_size);
void so3ae_tensor_free(so3ae_tensor* t);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SO3AE_C_H */
