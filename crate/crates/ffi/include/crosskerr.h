#ifndef CROSSKERR_H
#define CROSSKERR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ck_status {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_INVALID_UTF8 = 2,
  CK_STATUS_BUFFER_TOO_SMALL = 3,
  CK_STATUS_NOT_FOUND = 4,
  CK_STATUS_INVALID_ARGUMENT = 5,
  CK_STATUS_CONFIG = 6,
  CK_STATUS_NUMERICAL = 7,
  CK_STATUS_IO = 8,
  CK_STATUS_PANIC = 9,
} ck_status;

/**
 * Parsed and validated scenario configuration.
 */
typedef struct ck_config ck_config;

/**
 * Finished run: tables and Wigner fields held in memory.
 */
typedef struct ck_run_t ck_run_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *ck_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *ck_last_error(void);

/**
 * Parse a JSON config and apply `n_overrides` `dotted.key=value` strings.
 *
 * # Safety
 * `json` must be a valid C string; `overrides` must point to
 * `n_overrides` valid C strings (it may be NULL when `n_overrides` is 0);
 * `out` must be writable.
 */
enum ck_status ck_config_new(const char *json,
                             const char *const *overrides,
                             size_t n_overrides,
                             struct ck_config **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle from [`ck_config_new`] not yet freed.
 */
void ck_config_free(struct ck_config *cfg);

/**
 * Canonical JSON of the resolved config (presets and defaults applied).
 *
 * # Safety
 * `cfg` must be a live handle; `buf` must hold `cap` bytes.
 */
enum ck_status ck_config_json(const struct ck_config *cfg, char *buf, size_t cap, size_t *needed);

/**
 * Content hash of the resolved config, as written into every output.
 *
 * # Safety
 * As for [`ck_config_json`].
 */
enum ck_status ck_config_hash(const struct ck_config *cfg, char *buf, size_t cap, size_t *needed);

/**
 * Run the scenario. `jobs` = 0 uses one worker per core.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum ck_status ck_run(const struct ck_config *cfg, size_t jobs, struct ck_run_t **out);

/**
 * # Safety
 * `run` must be NULL or a handle from [`ck_run`] not yet freed.
 */
void ck_run_free(struct ck_run_t *run);

/**
 * 0 when clean, 2 when some rows were flagged (the CLI exit code).
 *
 * # Safety
 * `run` must be a live handle.
 */
int32_t ck_run_exit_code(const struct ck_run_t *run);

/**
 * Number of tables followed by number of Wigner fields.
 *
 * # Safety
 * `run` must be a live handle; the out pointers may be NULL.
 */
enum ck_status ck_run_counts(const struct ck_run_t *run, size_t *n_tables, size_t *n_wigners);

/**
 * Name of output `index`: tables first, then Wigner fields.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `cap` bytes.
 */
enum ck_status ck_run_output_name(const struct ck_run_t *run,
                                  size_t index,
                                  char *buf,
                                  size_t cap,
                                  size_t *needed);

/**
 * CSV text of a table or Wigner field, byte-identical to the file the CLI writes.
 *
 * # Safety
 * `run` must be a live handle, `name` a valid C string; `buf` must hold `cap` bytes.
 */
enum ck_status ck_run_csv(const struct ck_run_t *run,
                          const char *name,
                          char *buf,
                          size_t cap,
                          size_t *needed);

/**
 * Write every output and `manifest.json` into `dir`.
 *
 * # Safety
 * `run` must be a live handle and `dir` a valid C string.
 */
enum ck_status ck_run_write(const struct ck_run_t *run, const char *dir);

/**
 * Closed-form overlap `F(t)` of the full and approximate evolutions from `|m⟩_a|0⟩_b`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ck_status ck_fidelity_closed_form(uint32_t m,
                                       double chi,
                                       double beta_ss_mag,
                                       double delta_b,
                                       double t,
                                       double *out);

/**
 * Branch probabilities of the `|±⟩_a` measurement for displacement `η` and phase `ϑ`.
 *
 * # Safety
 * `p_plus` and `p_minus` must be writable.
 */
enum ck_status ck_plus_minus_probabilities(double eta_re,
                                           double eta_im,
                                           double vartheta,
                                           double *p_plus,
                                           double *p_minus);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSSKERR_H */
