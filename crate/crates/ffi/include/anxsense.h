#ifndef ANXSENSE_H
#define ANXSENSE_H

#include <stddef.h>
#include <stdint.h>

/*
 Number of HRV indices in [`AnxHrv`].
 */
#define ANX_HRV_FEATURES 32

typedef enum AnxStatus {
  ANX_STATUS_OK = 0,
  ANX_STATUS_NULL_POINTER = 1,
  ANX_STATUS_INVALID_ARGUMENT = 2,
  ANX_STATUS_INSUFFICIENT_DATA = 3,
  ANX_STATUS_IO = 4,
  ANX_STATUS_COMPUTATION = 5,
  ANX_STATUS_BUFFER_TOO_SMALL = 6,
  ANX_STATUS_PANIC = 7,
} AnxStatus;

typedef enum AnxWindow {
  ANX_WINDOW_AVERAGED = 0,
  ANX_WINDOW_WHOLE = 1,
} AnxWindow;

/*
 Dataset directory handle with its validated manifest.
 */
typedef struct AnxDataset AnxDataset;

/*
 Periodogram handle.
 */
typedef struct AnxPsd AnxPsd;

/*
 HRV indices in catalogue order (see [`anx_hrv_feature_name`]); NaN marks
 an index that is undefined for the input.
 */
typedef struct AnxHrv {
  double values[ANX_HRV_FEATURES];
} AnxHrv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *anx_version(void);

/*
 Message of the last failed call on this thread, or NULL after a
 successful call. Valid until the next call on the same thread.
 */
const char *anx_last_error(void);

/*
 Name of HRV index `i` (static string), or NULL when out of range.
 */
const char *anx_hrv_feature_name(size_t i);

/*
 Zero-phase 0.5-8 Hz Butterworth cleaning of a BVP signal; writes `n`
 samples to `out`.

 # Safety
 `bvp` must point to `n` readable and `out` to `n` writable doubles.
 */
enum AnxStatus anx_bvp_clean(const double *bvp, size_t n, double rate, double *out);

/*
 HRV indices of a series of `n` NN intervals (ms). Frequency indices use
 the 100 Hz NN track of the series.

 # Safety
 `nn_ms` must point to `n` readable doubles.
 */
enum AnxStatus anx_hrv_from_intervals(const double *nn_ms, size_t n, struct AnxHrv *out);

/*
 Clean a BVP recording, detect beats and compute HRV over all of it.

 # Safety
 `bvp` must point to `n` readable doubles.
 */
enum AnxStatus anx_hrv_from_bvp(const double *bvp, size_t n, double rate, struct AnxHrv *out);

/*
 Lomb–Scargle periodogram on the default 500-point grid over
 [0.01, 0.5] Hz. Release with [`anx_psd_free`].

 # Safety
 `times` and `values` must each point to `n` readable doubles.
 */
enum AnxStatus anx_psd_compute(const double *times,
                               const double *values,
                               size_t n,
                               struct AnxPsd **out);

/*
 Number of frequency bins, 0 for a NULL handle.

 # Safety
 `psd` must be NULL or a live handle.
 */
size_t anx_psd_len(const struct AnxPsd *psd);

/*
 Copy frequencies (Hz) and power into buffers of `capacity` doubles;
 either buffer may be NULL to skip it.

 # Safety
 `psd` must be a live handle; non-NULL buffers must hold `capacity`
 writable doubles.
 */
enum AnxStatus anx_psd_copy(const struct AnxPsd *psd,
                            double *freqs,
                            double *power,
                            size_t capacity);

/*
 Integrated power over `[lo, hi)`, or `[lo, hi]` when `inclusive_hi` is
 non-zero.

 # Safety
 `psd` must be a live handle.
 */
enum AnxStatus anx_psd_band_power(const struct AnxPsd *psd,
                                  double lo,
                                  double hi,
                                  int inclusive_hi,
                                  double *out);

/*
 Release a periodogram handle; NULL is ignored.

 # Safety
 `psd` must be NULL or a handle not yet freed.
 */
void anx_psd_free(struct AnxPsd *psd);

/*
 Open a dataset directory and validate its manifest. Release with
 [`anx_dataset_free`].

 # Safety
 `dir` must be a NUL-terminated string.
 */
enum AnxStatus anx_dataset_open(const char *dir, struct AnxDataset **out);

/*
 Number of participants in the manifest, 0 for a NULL handle.

 # Safety
 `ds` must be NULL or a live handle.
 */
size_t anx_dataset_participants(const struct AnxDataset *ds);

/*
 Extract the feature table and write it as CSV to `csv_path`.

 # Safety
 `ds` must be a live handle and `csv_path` a NUL-terminated string.
 */
enum AnxStatus anx_dataset_write_features(const struct AnxDataset *ds,
                                          enum AnxWindow window,
                                          const char *csv_path);

/*
 Release a dataset handle; NULL is ignored.

 # Safety
 `ds` must be NULL or a handle not yet freed.
 */
void anx_dataset_free(struct AnxDataset *ds);

/*
 Write a synthetic cohort of `n` participants with effect profile
 `profile` ("null", "moderate" or "strong") to `dir`.

 # Safety
 `dir` and `profile` must be NUL-terminated strings.
 */
enum AnxStatus anx_synth_write(const char *dir, size_t n, uint64_t seed, const char *profile);

/*
 Run the command-line interface with `argc` arguments (`argv[0]` is the
 program name) and return its exit code: 0 success, 1 invalid input,
 2 runtime failure.

 # Safety
 `argv` must point to `argc` NUL-terminated strings.
 */
int anx_cli_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANXSENSE_H */
