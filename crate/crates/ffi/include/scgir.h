#ifndef SCGIR_H
#define SCGIR_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScgirChannel {
  SCGIR_CHANNEL_AWGN = 0,
  SCGIR_CHANNEL_RAYLEIGH = 1,
} ScgirChannel;

/**
 * Status codes. Values 1 to 5 match the CLI exit codes.
 */
typedef enum ScgirStatus {
  SCGIR_STATUS_OK = 0,
  SCGIR_STATUS_ERROR = 1,
  SCGIR_STATUS_CONFIG = 2,
  SCGIR_STATUS_DATA = 3,
  SCGIR_STATUS_DIVERGENCE = 4,
  SCGIR_STATUS_IO = 5,
  SCGIR_STATUS_NULL_POINTER = 6,
  SCGIR_STATUS_INVALID_ARGUMENT = 7,
  SCGIR_STATUS_PANIC = 8,
} ScgirStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct ScgirConfig ScgirConfig;

/**
 * Opaque random stream.
 */
typedef struct ScgirRng ScgirRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *scgir_version(void);

/**
 * Writes the last error message of this thread into `buf` and returns the
 * buffer size it needs (0 when there is no error). Nothing is written when
 * `len` is too small.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t scgir_last_error_message(char *buf, size_t len);

/**
 * Default configuration. Never null.
 */
struct ScgirConfig *scgir_config_new(void);

/**
 * Parses a config file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ScgirStatus scgir_config_load(const char *path, struct ScgirConfig **out);

/**
 * Sets one `key = value` entry, with the same keys as the config file.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum ScgirStatus scgir_config_set(struct ScgirConfig *cfg, const char *key, const char *value);

/**
 * Writes the 64-hex-digit config digest plus NUL; `len` must be at least 65.
 *
 * # Safety
 * `cfg` must come from this library; `buf` valid for `len` bytes.
 */
enum ScgirStatus scgir_config_digest(const struct ScgirConfig *cfg, char *buf, size_t len);

/**
 * # Safety
 * `cfg` must be null or come from this library, and not be used afterwards.
 */
void scgir_config_free(struct ScgirConfig *cfg);

/**
 * Full run into the configured output directory.
 *
 * # Safety
 * `cfg` must come from this library.
 */
enum ScgirStatus scgir_run_pipeline(const struct ScgirConfig *cfg);

struct ScgirRng *scgir_rng_new(uint64_t seed);

/**
 * # Safety
 * `rng` must be null or come from this library, and not be used afterwards.
 */
void scgir_rng_free(struct ScgirRng *rng);

double scgir_solarize(double x);

double scgir_noise_var_from_snr_db(double snr_db);

/**
 * Loss of a row-major `d × d` cross-correlation matrix.
 *
 * # Safety
 * `c` must hold `d * d` doubles; `out` must be valid.
 */
enum ScgirStatus scgir_loss_value(const double *c, size_t d, double lambda, double *out);

/**
 * Sends `n` reals over one channel draw at compression ratio `ratio`,
 * with MMSE equalization, and writes the `n` received reals to `out`.
 *
 * # Safety
 * `rng` must come from this library; `z` and `out` must hold `n` doubles.
 */
enum ScgirStatus scgir_simulate_link(struct ScgirRng *rng,
                                     const double *z,
                                     size_t n,
                                     double ratio,
                                     enum ScgirChannel model,
                                     double snr_db,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCGIR_H */
