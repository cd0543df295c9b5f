#ifndef BANSIM_H
#define BANSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

#define BANSIM_SCHEME_SPR 1

#define BANSIM_SCHEME_CMR 2

#define BANSIM_FAMILY_MASK_LOGNORMAL 1

#define BANSIM_FAMILY_MASK_INVERSE_GAUSSIAN 2

#define BANSIM_FAMILY_MASK_BURR 4

/**
 * Status codes. Zero is success.
 */
typedef enum BansimStatus {
  BANSIM_STATUS_OK = 0,
  BANSIM_STATUS_NULL_POINTER = 1,
  BANSIM_STATUS_INVALID_ARGUMENT = 2,
  BANSIM_STATUS_CONFIG_ERROR = 3,
  BANSIM_STATUS_TRACE_ERROR = 4,
  BANSIM_STATUS_INVARIANT_VIOLATION = 5,
  BANSIM_STATUS_FIT_ERROR = 6,
  BANSIM_STATUS_BUFFER_TOO_SMALL = 7,
  BANSIM_STATUS_PANIC = 8,
} BansimStatus;

typedef enum BansimFamily {
  BANSIM_FAMILY_LOGNORMAL = 0,
  BANSIM_FAMILY_INVERSE_GAUSSIAN = 1,
  BANSIM_FAMILY_BURR = 2,
} BansimFamily;

/**
 * Opaque scenario configuration.
 */
typedef struct BansimConfig BansimConfig;

/**
 * Opaque results of a run.
 */
typedef struct BansimResults BansimResults;

/**
 * A fitted model. Unused trailing parameters are zero.
 */
typedef struct BansimFit {
  enum BansimFamily family;
  /**
   * Lognormal: mu, sigma. Inverse Gaussian: mu, lambda. Burr: alpha, c, k.
   */
  double params[3];
  double log_likelihood;
  double ks_statistic;
  size_t n_samples;
} BansimFit;

/**
 * Summary of one scheme at one duty cycle.
 */
typedef struct BansimEntry {
  /**
   * `BANSIM_SCHEME_SPR` or `BANSIM_SCHEME_CMR`.
   */
  uint32_t scheme;
  double duty_cycle_percent;
  /**
   * NaN when the outage curve never reaches 10%.
   */
  double sinr_at_10pct_outage_db;
  bool has_fit;
  struct BansimFit best_fit;
} BansimEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL;
 * 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t bansim_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bansim_version(void);

/**
 * New handle holding the default scenario.
 */
struct BansimConfig *bansim_config_default(void);

/**
 * Parses a JSON config. On success `*out` receives a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum BansimStatus bansim_config_from_json(const char *json, struct BansimConfig **out);

/**
 * Writes the config as JSON into `buf`. `*written` receives the length
 * without the NUL; when it does not fit, the status is `BufferTooSmall`.
 *
 * # Safety
 * `config` must be a live handle; `buf` must hold `len` bytes or be null;
 * `written` must be writable.
 */
enum BansimStatus bansim_config_to_json(const struct BansimConfig *config,
                                        char *buf,
                                        size_t len,
                                        size_t *written);

/**
 * Validates the config; a violation list lands in the last error.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum BansimStatus bansim_config_validate(const struct BansimConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum BansimStatus bansim_config_set_seed(struct BansimConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum BansimStatus bansim_config_set_trials(struct BansimConfig *config, uint32_t trials);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum BansimStatus bansim_config_set_total_time_ms(struct BansimConfig *config, double total_ms);

/**
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void bansim_config_free(struct BansimConfig *config);

/**
 * Runs the experiment. `schemes` is a mask of `BANSIM_SCHEME_*`; zero
 * means both. `workers` of zero uses all cores.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum BansimStatus bansim_run(const struct BansimConfig *config,
                             uint32_t schemes,
                             uint32_t workers,
                             struct BansimResults **out);

/**
 * Number of (duty cycle, scheme) entries.
 *
 * # Safety
 * `results` must be null or a live handle.
 */
size_t bansim_results_len(const struct BansimResults *results);

/**
 * # Safety
 * `results` must be a live handle; `out` must be writable.
 */
enum BansimStatus bansim_results_entry(const struct BansimResults *results,
                                       size_t index,
                                       struct BansimEntry *out);

/**
 * Copies an entry's outage curve. `*len` receives the point count; the
 * arrays must hold `capacity` values each.
 *
 * # Safety
 * `results` must be a live handle; the arrays must be writable for
 * `capacity` values; `len` must be writable.
 */
enum BansimStatus bansim_results_outage(const struct BansimResults *results,
                                        size_t index,
                                        double *gamma_th_db,
                                        double *p_out,
                                        size_t capacity,
                                        size_t *len);

/**
 * Copies an entry's PDR curve, like [`bansim_results_outage`].
 *
 * # Safety
 * As for [`bansim_results_outage`].
 */
enum BansimStatus bansim_results_pdr(const struct BansimResults *results,
                                     size_t index,
                                     double *sensitivity_dbm,
                                     double *pdr,
                                     size_t capacity,
                                     size_t *len);

/**
 * Writes the manifest and result CSVs into `out_dir`.
 *
 * # Safety
 * `results` must be a live handle; `out_dir` a NUL-terminated path.
 */
enum BansimStatus bansim_results_write(struct BansimResults *results, const char *out_dir);

/**
 * # Safety
 * `results` must be null or a handle not yet freed.
 */
void bansim_results_free(struct BansimResults *results);

/**
 * SINR in dB of a link with `n` simultaneous interferers.
 *
 * # Safety
 * `interferer_gains_db` must hold `n` values (may be null when `n` is 0);
 * `out` must be writable.
 */
enum BansimStatus bansim_link_sinr(double tx_power_dbm,
                                   double desired_gain_db,
                                   const double *interferer_gains_db,
                                   size_t n,
                                   double noise_power_dbm,
                                   double *out);

/**
 * Expected transmission count `1 / (1 - outage)`; infinite at outage 1.
 *
 * # Safety
 * `out` must be writable.
 */
enum BansimStatus bansim_etx(double outage, double *out);

/**
 * CDF of a model at `x`. Parameters follow [`BansimFit::params`].
 *
 * # Safety
 * `out` must be writable.
 */
enum BansimStatus bansim_cdf(enum BansimFamily family,
                             double p1,
                             double p2,
                             double p3,
                             double x,
                             double *out);

/**
 * Maximum-likelihood fit of one family.
 *
 * # Safety
 * `samples` must hold `n` values; `out` must be writable.
 */
enum BansimStatus bansim_fit(enum BansimFamily family,
                             const double *samples,
                             size_t n,
                             struct BansimFit *out);

/**
 * Fits every family in `family_mask` (`BANSIM_FAMILY_MASK_*`, zero for all)
 * and returns the one with the smallest KS statistic.
 *
 * # Safety
 * `samples` must hold `n` values; `out` must be writable.
 */
enum BansimStatus bansim_best_fit(const double *samples,
                                  size_t n,
                                  uint32_t family_mask,
                                  struct BansimFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANSIM_H */
