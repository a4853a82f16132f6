#ifndef CTRLKIT_H
#define CTRLKIT_H

#include <stddef.h>

#if defined(_WIN32)
#define CTRL_API __declspec(dllexport)
#else
#define CTRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Input and numerical codes double as CLI exit codes. */
typedef enum {
  CTRL_OK = 0,
  CTRL_ERR_ARGUMENT = 1, /* null handle, bad buffer size */
  CTRL_ERR_INPUT = 2,
  CTRL_ERR_NUMERICAL = 3,
  CTRL_ERR_INTERNAL = 4
} ctrl_status;

typedef struct ctrl_job ctrl_job;

CTRL_API const char* ctrl_version(void);

/* Message of the last failure on the calling thread; empty after success. */
CTRL_API const char* ctrl_last_error(void);

/* Matrices are row-major. */

/* out = exp(M), M is n x n. */
CTRL_API int ctrl_expm(const double* M, int n, double* out);

/* rank of [B, AB, ..., A^{n-1} B]; A is n x n, B is n x m. */
CTRL_API int ctrl_kalman_rank(const double* A, const double* B, int n, int m, double tol, int* rank);

/* Controllability Gramian on [0, T], Simpson with `steps` (even) intervals. */
CTRL_API int ctrl_gramian(const double* A, const double* B, int n, int m, double T, int steps, double* G);

/* Places the spectrum of A + BK at the real or complex roots (re[i], im[i]); K is m x n. */
CTRL_API int ctrl_pole_place(const double* A, const double* B, int n, int m, const double* re, const double* im,
                             double* K);

/* Routh verdict for p[0] s^deg + ... + p[deg]. */
CTRL_API int ctrl_routh(const double* p, int deg, int* hurwitz, int* sign_changes, int* complete);

/* Solves A^T P + P A = -I. */
CTRL_API int ctrl_lyapunov(const double* A, int n, double* P);

/* Text of a shipped spec, or NULL. names: newline-separated list. */
CTRL_API const char* ctrl_builtin_spec(const char* name);
CTRL_API const char* ctrl_builtin_names(void);

/* Batch jobs. spec may be NULL or empty only for stabilize with the routh option. */
CTRL_API int ctrl_job_create(const char* command, const char* spec, const char* source, ctrl_job** out);
CTRL_API int ctrl_job_set_option(ctrl_job* job, const char* key, const char* value);
CTRL_API int ctrl_job_run(ctrl_job* job);
/* Valid after a successful run until the job is destroyed or rerun. */
CTRL_API const char* ctrl_job_report(const ctrl_job* job);
CTRL_API const char* ctrl_job_csv(const ctrl_job* job);
/* Message of the last failure on this job. */
CTRL_API const char* ctrl_job_error(const ctrl_job* job);
CTRL_API void ctrl_job_destroy(ctrl_job* job);

#ifdef __cplusplus
}
#endif

#endif
