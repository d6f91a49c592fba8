/* C ABI for the fluxrecon force-reconstruction library.
 *
 * All functions return an fx_status error code; FX_OK (0) means success.
 * Handles are opaque and must be released with the matching *_free call.
 * Column pointers returned by fx_series_column stay valid until the owning
 * series handle is freed. The last error message is kept per thread.
 *
 * This header is maintained by hand and mirrors crates/fluxrecon-ffi/src/lib.rs.
 */

#ifndef FLUXRECON_H
#define FLUXRECON_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int fx_status;

#define FX_OK 0
#define FX_ERR_CONFIG 1     /* invalid configuration */
#define FX_ERR_INFEASIBLE 2 /* parameter conditions infeasible */
#define FX_ERR_BLOWUP 3     /* time integration blew up */
#define FX_ERR_TIMESTEP 4   /* time-step stability bound violated */
#define FX_ERR_FORMAT 5     /* malformed data */
#define FX_ERR_IO 6         /* I/O failure */
#define FX_ERR_GRID 7       /* invalid or mismatched grid */
#define FX_ERR_NULL 8       /* required pointer was null */
#define FX_ERR_PANIC 9      /* internal panic caught at the boundary */

/* Opaque handles. */
typedef struct FxExperiment FxExperiment;
typedef struct FxSeries FxSeries;

/* Copies the current thread's last error message (NUL-terminated, truncated
 * to len bytes) into buf; returns the full message length. buf may be NULL
 * with len 0 to query the length. */
size_t fx_last_error_message(char *buf, size_t len);

/* Parses a TOML experiment definition into a new handle. */
fx_status fx_experiment_parse(const char *toml_text, FxExperiment **out);

/* Releases an experiment handle (NULL is a no-op). */
void fx_experiment_free(FxExperiment *exp);

/* Overrides the RNG seed. */
fx_status fx_experiment_set_seed(FxExperiment *exp, uint64_t seed);

/* Sets (or replaces) the output directory. */
fx_status fx_experiment_set_output_dir(FxExperiment *exp, const char *dir);

/* Sets a numeric config field by dotted name, e.g. "params.mu1". */
fx_status fx_experiment_set_axis(FxExperiment *exp, const char *axis, double value);

/* Evaluates the parameter feasibility conditions; *out_feasible is set to 1
 * when feasible, 0 otherwise. The summary text is placed in the last-error
 * slot. */
fx_status fx_check(const FxExperiment *exp, int *out_feasible);

/* Generates the truth trajectory and writes its observation archive to the
 * configured output directory. */
fx_status fx_simulate(const FxExperiment *exp);

/* Runs the twin experiment; the resulting series must be freed with
 * fx_series_free. */
fx_status fx_run_twin(const FxExperiment *exp, FxSeries **out);

/* Releases a series handle (NULL is a no-op). */
void fx_series_free(FxSeries *series);

/* Number of sample rows (0 for NULL). */
size_t fx_series_len(const FxSeries *series);

/* Borrows a column ("t", "sync_err_L2", "sync_err_H1", "model_err_Hm1",
 * "model_err_L2", "aux_energy"); *out_len receives the value count. */
fx_status fx_series_column(const FxSeries *series, const char *column,
                           const double **out_data, size_t *out_len);

/* Fits an exponential decay rate to a column over [t_from, t_to]; out_rate
 * and out_residual may be NULL to skip. */
fx_status fx_series_fit(const FxSeries *series, const char *column, double t_from,
                        double t_to, double *out_rate, double *out_residual);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FLUXRECON_H */
