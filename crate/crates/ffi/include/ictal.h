#ifndef ICTAL_H
#define ICTAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IctalStatus {
  ICTAL_STATUS_OK = 0,
  ICTAL_STATUS_NULL_POINTER = 1,
  ICTAL_STATUS_INVALID_ARGUMENT = 2,
  ICTAL_STATUS_DEGENERATE_EVIDENCE = 3,
  ICTAL_STATUS_IO = 4,
  ICTAL_STATUS_FORMAT = 5,
  ICTAL_STATUS_UNDEFINED_METRIC = 6,
  ICTAL_STATUS_PANIC = 7,
} IctalStatus;

/**
 * Two-state chain parameters.
 */
typedef struct IctalChain IctalChain;

/**
 * CNN loaded from a weight file.
 */
typedef struct IctalModel IctalModel;

/**
 * Online fixed-lag smoother.
 */
typedef struct IctalSmoother IctalSmoother;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid
 * until the next failing call on the same thread.
 */
const char *ictal_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ictal_version(void);

/**
 * Chain with transition probabilities `p01`, `p10` and first-block
 * distribution `(pi0, pi1)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum IctalStatus ictal_chain_new(double p01,
                                 double p10,
                                 double pi0,
                                 double pi1,
                                 struct IctalChain **out);

/**
 * Chain started from its stationary distribution.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum IctalStatus ictal_chain_new_stationary(double p01, double p10, struct IctalChain **out);

/**
 * Chain with the default transition probabilities, stationary start.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum IctalStatus ictal_chain_new_default(struct IctalChain **out);

/**
 * # Safety
 * `chain` must be null or a handle from an `ictal_chain_new*` call, not yet freed.
 */
void ictal_chain_free(struct IctalChain *chain);

/**
 * Smoothed seizure marginals of `n` block probabilities.
 *
 * # Safety
 * `probabilities` and `marginals_out` must be valid for `n` elements.
 */
enum IctalStatus ictal_smooth(const struct IctalChain *chain,
                              const double *probabilities,
                              size_t n,
                              double *marginals_out);

/**
 * `detected_out[i] = marginals[i] > threshold`.
 *
 * # Safety
 * `marginals` and `detected_out` must be valid for `n` elements.
 */
enum IctalStatus ictal_detect(const double *marginals,
                              size_t n,
                              double threshold,
                              uint8_t *detected_out);

/**
 * FLOPs of smoothing `n` blocks.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum IctalStatus ictal_fg_flop_count(uint64_t n, uint64_t *out);

/**
 * Online smoother releasing each block `lag` blocks after it arrives.
 *
 * # Safety
 * `chain` must be a live chain handle and `out` valid for one write.
 */
enum IctalStatus ictal_smoother_new(const struct IctalChain *chain,
                                    size_t lag,
                                    struct IctalSmoother **out);

/**
 * Adds one block probability. When a block becomes final, `*ready_out` is
 * set to 1 and its index and marginal are written; otherwise `*ready_out`
 * is 0.
 *
 * # Safety
 * `smoother` must be a live handle; the out pointers valid for one write.
 */
enum IctalStatus ictal_smoother_push(struct IctalSmoother *smoother,
                                     double probability,
                                     uint8_t *ready_out,
                                     size_t *index_out,
                                     double *marginal_out);

/**
 * Releases every pending block. At most `capacity` entries are written;
 * `*count_out` receives the number of pending blocks, and the call fails
 * with `ICTAL_STATUS_INVALID_ARGUMENT` (releasing nothing) if that exceeds
 * `capacity`. `lag + 1` entries always suffice.
 *
 * # Safety
 * `smoother` must be a live handle; the arrays valid for `capacity` writes.
 */
enum IctalStatus ictal_smoother_flush(struct IctalSmoother *smoother,
                                      size_t *indices_out,
                                      double *marginals_out,
                                      size_t capacity,
                                      size_t *count_out);

/**
 * # Safety
 * `smoother` must be null or a live handle.
 */
void ictal_smoother_free(struct IctalSmoother *smoother);

/**
 * Loads a weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for one write.
 */
enum IctalStatus ictal_model_load(const char *path, struct IctalModel **out);

/**
 * Number of input values per block: `input_len * input_channels`.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for one write.
 */
enum IctalStatus ictal_model_input_size(const struct IctalModel *model, size_t *out);

/**
 * Seizure probability of one block given time-major samples
 * (`samples[t * channels + c]`).
 *
 * # Safety
 * `samples` must be valid for `len` reads; `out` for one write.
 */
enum IctalStatus ictal_model_forward(const struct IctalModel *model,
                                     const float *samples,
                                     size_t len,
                                     float *out);

/**
 * FLOPs of one forward pass.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for one write.
 */
enum IctalStatus ictal_model_flops(const struct IctalModel *model, uint64_t *out);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
void ictal_model_free(struct IctalModel *model);

/**
 * Area under the ROC curve of `scores` against binary `truth`.
 *
 * # Safety
 * `scores` and `truth` must be valid for `n` reads; `out` for one write.
 */
enum IctalStatus ictal_auc_roc(const double *scores, const uint8_t *truth, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICTAL_H */
