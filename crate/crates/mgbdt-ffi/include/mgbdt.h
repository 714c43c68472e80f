/* C interface for the mgbdt library. Generated by cbindgen; do not edit. */

#ifndef MGBDT_H
#define MGBDT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Training objective of a model.
 */
typedef enum MgbdtMode {
  MGBDT_MODE_CLASSIFY = 0,
  MGBDT_MODE_REGRESS = 1,
  MGBDT_MODE_AUTOENCODE = 2,
} MgbdtMode;

/**
 * Result of every fallible call.
 */
typedef enum MgbdtStatus {
  MGBDT_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  MGBDT_STATUS_NULL_ARGUMENT = 1,
  /**
   * A parameter value was rejected (bad shape argument, wrong mode for
   * the call, undersized output buffer, layer index out of range).
   */
  MGBDT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data and model shapes disagree, or data was empty/non-finite.
   */
  MGBDT_STATUS_DIMENSION = 3,
  /**
   * File system failure.
   */
  MGBDT_STATUS_IO = 4,
  /**
   * The model file could not be parsed or has an unsupported version.
   */
  MGBDT_STATUS_PARSE = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  MGBDT_STATUS_PANIC = 6,
} MgbdtStatus;

/**
 * Opaque trained model.
 */
typedef struct MgbdtModel MgbdtModel;

/**
 * Training hyper-parameters. Get defaults from
 * `mgbdt_train_options_default` and override fields as needed. `alpha` may
 * be NaN to request the per-mode default (0.1 for classification, 1.0
 * otherwise).
 */
typedef struct MgbdtTrainOptions {
  size_t epochs;
  /**
   * Top pseudo-label step size; NaN selects the per-mode default.
   */
  double alpha;
  /**
   * Boosting shrinkage in (0, 1].
   */
  double shrinkage;
  /**
   * Boosting rounds per epoch for inverse mappings.
   */
  size_t k1;
  /**
   * Boosting rounds per epoch for forward mappings.
   */
  size_t k2;
  /**
   * Noise std injected into inverse-mapping training data.
   */
  double noise_std;
  /**
   * Maximum depth of forward/inverse trees.
   */
  size_t max_depth;
  size_t min_samples_leaf;
  /**
   * Std of the Gaussian targets used to initialize the stack.
   */
  double init_noise_std;
  /**
   * Gradient-descent steps per epoch for the linear top layer.
   */
  size_t linear_steps;
  double linear_step_size;
  uint64_t seed;
} MgbdtTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static UTF-8 string.
 */
const char *mgbdt_version(void);

/**
 * Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *mgbdt_last_error_message(void);

/**
 * Defaults for the given mode (alpha resolved, not NaN).
 */
struct MgbdtTrainOptions mgbdt_train_options_default(enum MgbdtMode mode);

/**
 * Train a classifier (GBDT hidden layers, linear softmax top layer).
 * `dims` runs input width -> hidden widths -> class count; `labels` holds
 * one class index per row. `options` may be null for defaults.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum MgbdtStatus mgbdt_train_classify(const struct MgbdtTrainOptions *options,
                                      const size_t *dims,
                                      size_t dims_len,
                                      const double *features,
                                      size_t rows,
                                      size_t cols,
                                      const size_t *labels,
                                      struct MgbdtModel **out);

/**
 * Train a regressor (GBDT layers throughout, squared loss). `targets` is a
 * row-major `rows x target_cols` buffer and `target_cols` must equal the
 * last entry of `dims`.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum MgbdtStatus mgbdt_train_regress(const struct MgbdtTrainOptions *options,
                                     const size_t *dims,
                                     size_t dims_len,
                                     const double *features,
                                     size_t rows,
                                     size_t cols,
                                     const double *targets,
                                     size_t target_cols,
                                     struct MgbdtModel **out);

/**
 * Train an autoencoder: the input is its own target and the first and last
 * entries of `dims` must match `cols`.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum MgbdtStatus mgbdt_train_autoencode(const struct MgbdtTrainOptions *options,
                                        const size_t *dims,
                                        size_t dims_len,
                                        const double *features,
                                        size_t rows,
                                        size_t cols,
                                        struct MgbdtModel **out);

/**
 * Load a model file written by `mgbdt_model_save` or the `mgbdt` CLI.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be a valid pointer.
 */
enum MgbdtStatus mgbdt_model_load(const char *path, struct MgbdtModel **out);

/**
 * Write the model (with its training config and, if present, its column
 * schema) to a model file.
 *
 * # Safety
 * `model` must be a live handle; `path` must be a valid C string.
 */
enum MgbdtStatus mgbdt_model_save(const struct MgbdtModel *model, const char *path);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a handle not freed before.
 */
void mgbdt_model_free(struct MgbdtModel *model);

/**
 * Number of trained layers (M). Zero if `model` is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mgbdt_model_num_layers(const struct MgbdtModel *model);

/**
 * Length of the dimension signature (M + 1). Zero if `model` is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mgbdt_model_num_dims(const struct MgbdtModel *model);

/**
 * Copy the dimension signature d_0..d_M into `out`, which holds `len`
 * entries; `len` must equal `mgbdt_model_num_dims`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `len` entries.
 */
enum MgbdtStatus mgbdt_model_dims(const struct MgbdtModel *model, size_t *out, size_t len);

/**
 * Training mode of the model.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum MgbdtStatus mgbdt_model_mode(const struct MgbdtModel *model, enum MgbdtMode *out);

/**
 * Full forward pass. `features` is row-major `rows x cols` with `cols`
 * equal to d_0; `out` must hold `out_len == rows * d_M` doubles and is
 * filled row-major (logits in classify mode).
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum MgbdtStatus mgbdt_model_predict(const struct MgbdtModel *model,
                                     const double *features,
                                     size_t rows,
                                     size_t cols,
                                     double *out,
                                     size_t out_len);

/**
 * Predicted class index per row (classification models only). `out` must
 * hold `out_len == rows` entries.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum MgbdtStatus mgbdt_model_predict_classes(const struct MgbdtModel *model,
                                             const double *features,
                                             size_t rows,
                                             size_t cols,
                                             size_t *out,
                                             size_t out_len);

/**
 * Representation at layer `layer` (0 = input, M = final output). `out`
 * must hold `out_len == rows * d_layer` doubles, filled row-major.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum MgbdtStatus mgbdt_model_encode(const struct MgbdtModel *model,
                                    const double *features,
                                    size_t rows,
                                    size_t cols,
                                    size_t layer,
                                    double *out,
                                    size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MGBDT_H */
