#ifndef QNDLAB_H
#define QNDLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QndStatus {
  QND_STATUS_OK = 0,
  QND_STATUS_NULL_POINTER = 1,
  QND_STATUS_INVALID_ARGUMENT = 2,
  QND_STATUS_CONFIG = 3,
  QND_STATUS_IO = 4,
  QND_STATUS_FORMAT = 5,
  QND_STATUS_MODEL = 6,
  QND_STATUS_PIPELINE = 7,
  QND_STATUS_FIT = 8,
  QND_STATUS_PANIC = 9,
} QndStatus;

typedef struct QndDataset QndDataset;

typedef struct QndReport QndReport;

// Physical parameters together with the synthesis and pipeline settings
// of a run configuration.
typedef struct QndSystem QndSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
size_t qnd_last_error(char *buf, size_t len);

// Reference-device parameters and default settings.
enum QndStatus qnd_system_new_default(struct QndSystem **out);

// Parameters from the text of a TOML run configuration.
enum QndStatus qnd_system_from_toml(const char *toml, struct QndSystem **out);

// Switch off the drive and all classical noise, keeping the detection chain.
enum QndStatus qnd_system_set_vacuum_only(struct QndSystem *sys);

void qnd_system_free(struct QndSystem *sys);

// Full-model spectra at `n` frequencies (Hz). Any output pointer may be
// null to skip that quantity.
enum QndStatus qnd_system_spectra(const struct QndSystem *sys,
                                  const double *frequencies_hz,
                                  size_t n,
                                  double *s_xx,
                                  double *s_yy,
                                  double *msc,
                                  double *residual);

// Synthesize a dataset with the system's synthesis settings. `n_segments`
// of 0 keeps the configured count.
enum QndStatus qnd_dataset_synthesize(const struct QndSystem *sys,
                                      uint64_t seed,
                                      size_t n_segments,
                                      struct QndDataset **out);

enum QndStatus qnd_dataset_read(const char *path, struct QndDataset **out);

enum QndStatus qnd_dataset_write(const struct QndDataset *ds, const char *path);

// Number of segments, or 0 for a null handle.
size_t qnd_dataset_n_segments(const struct QndDataset *ds);

void qnd_dataset_free(struct QndDataset *ds);

// Run the estimation pipeline with the system's estimator settings.
enum QndStatus qnd_pipeline_run(const struct QndSystem *sys,
                                const struct QndDataset *ds,
                                struct QndReport **out);

// Fraction of segments kept by the selection, or NaN for a null handle.
double qnd_report_kept_fraction(const struct QndReport *rep);

// Raw-unit shot-noise reference, or NaN for a null handle.
double qnd_report_sql_reference(const struct QndReport *rep);

// Number of frequency bins of the residual, or 0 for a null handle.
size_t qnd_report_n_bins(const struct QndReport *rep);

// Copy the normalized residual into arrays of length `len`, which must be
// at least `qnd_report_n_bins`.
enum QndStatus qnd_report_residual(const struct QndReport *rep,
                                   double *frequencies_hz,
                                   double *values,
                                   double *stderr,
                                   size_t len);

// Banded residual minimum for one of the configured band widths.
enum QndStatus qnd_report_band_minimum(const struct QndReport *rep,
                                       double width_hz,
                                       double *frequency_hz,
                                       double *value,
                                       double *stderr);

// Copy the plain-text summary into `buf`; returns the full length
// excluding the NUL, or 0 for a null handle.
size_t qnd_report_summary(const struct QndReport *rep, char *buf, size_t len);

void qnd_report_free(struct QndReport *rep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QNDLAB_H */
