/*
 * nlpme - numerical laboratory for the porous medium equation with
 * nonlocal pressure, u_t = div(G'(u) grad (-Delta)^{-s} u).
 *
 * C interface: opaque handles, status codes, thread-local error messages.
 * All functions returning nlpme_status set *out parameters only on
 * NLPME_OK unless documented otherwise.
 */
#ifndef NLPME_H
#define NLPME_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nlpme_status {
  NLPME_OK = 0,
  NLPME_ERR_INVALID_ARGUMENT = 1,
  NLPME_ERR_CONFIG = 2,
  NLPME_ERR_NUMERICAL = 3,
  NLPME_ERR_QUADRATURE = 4,
  NLPME_ERR_IO = 5,
  NLPME_ERR_INTERNAL = 6
} nlpme_status;

const char* nlpme_version(void);

/* Message describing the most recent failure on this thread. */
const char* nlpme_last_error(void);

/* ------------------------------------------------------------------ */
/* Grids and fields.                                                   */
/* ------------------------------------------------------------------ */

typedef struct nlpme_grid nlpme_grid;
typedef struct nlpme_field nlpme_field;

/* Periodic box [-L, L)^dim; dim in {1,2}; n a power of two >= 8. */
nlpme_status nlpme_grid_create(int dim, double half_length, int points_per_axis,
                               nlpme_grid** out);
void nlpme_grid_destroy(nlpme_grid* grid);
int nlpme_grid_dim(const nlpme_grid* grid);
int nlpme_grid_points_per_axis(const nlpme_grid* grid);
double nlpme_grid_half_length(const nlpme_grid* grid);
double nlpme_grid_dx(const nlpme_grid* grid);
size_t nlpme_grid_node_count(const nlpme_grid* grid);

/* values NULL gives the zero field; otherwise count must equal the node
 * count, row-major. */
nlpme_status nlpme_field_create(const nlpme_grid* grid, const double* values, size_t count,
                                nlpme_field** out);
void nlpme_field_destroy(nlpme_field* field);
size_t nlpme_field_size(const nlpme_field* field);
nlpme_status nlpme_field_copy_values(const nlpme_field* field, double* out, size_t count);

/* Initial-data factory; discrete mass is renormalized to `mass` exactly.
 * center may be NULL for the origin. */
nlpme_status nlpme_field_init_gaussian(const nlpme_grid* grid, double mass, double sigma,
                                       const double* center, nlpme_field** out);
nlpme_status nlpme_field_init_box(const nlpme_grid* grid, double mass, double half_width,
                                  const double* center, nlpme_field** out);
nlpme_status nlpme_field_init_mollified_dirac(const nlpme_grid* grid, double mass,
                                              double mollifier_width, const double* center,
                                              nlpme_field** out);

/* Snapshot pair <base>.f64 + <base>.json (+ optional <base>.csv). */
nlpme_status nlpme_field_write_snapshot(const nlpme_field* field, const char* path_base,
                                        double time, int with_csv);
nlpme_status nlpme_field_read_snapshot(const char* path_base, nlpme_field** out,
                                       double* time_out);

/* ------------------------------------------------------------------ */
/* Operators.                                                          */
/* ------------------------------------------------------------------ */

typedef enum nlpme_operator {
  NLPME_OP_FRAC_LAPLACIAN = 0,         /* (-Delta)^s                     */
  NLPME_OP_INVERSE_FRAC_LAPLACIAN = 1, /* (-Delta)^{-s}                  */
  NLPME_OP_NONLOCAL_GRADIENT = 2,      /* component `axis`               */
  NLPME_OP_HALF_POSITIVE = 3,          /* (-Delta)^{s/2}                 */
  NLPME_OP_HALF_NEGATIVE = 4,          /* (-Delta)^{-s/2}                */
  NLPME_OP_HALF_ONE_MINUS_S = 5,       /* (-Delta)^{(1-s)/2}             */
  NLPME_OP_REGULARIZED = 6,            /* L^s_eps, epsilon > 0           */
  NLPME_OP_REGULARIZED_SQRT = 7        /* (L^s_eps)^{1/2}                */
} nlpme_operator;

nlpme_status nlpme_apply_operator(const nlpme_field* in, nlpme_operator op, double s,
                                  double epsilon, int axis, nlpme_field** out);

/* e^{delta t Laplacian}. */
nlpme_status nlpme_heat_semigroup(const nlpme_field* in, double delta, double t,
                                  nlpme_field** out);

/* Quadrature value of the regularized symbol S_{L^s_eps}(|xi|). */
nlpme_status nlpme_regularized_symbol(double xi_mag, double s, double epsilon, int dim,
                                      double* value);

/* ------------------------------------------------------------------ */
/* Diagnostics.                                                        */
/* ------------------------------------------------------------------ */

nlpme_status nlpme_mass(const nlpme_field* field, double* out);
/* p >= 1; pass INFINITY (or any non-finite value) for the sup norm. */
nlpme_status nlpme_lp_norm(const nlpme_field* field, double p, double* out);
nlpme_status nlpme_support_radius(const nlpme_field* field, double threshold, double* out);
nlpme_status nlpme_tail_min(const nlpme_field* field, double r0, double* out);
/* Stroock-Varopoulos slack; epsilon = 0 selects the classical operator. */
nlpme_status nlpme_stroock_varopoulos_slack(const nlpme_field* field, double q, double s,
                                            double epsilon, double* out);

/* ------------------------------------------------------------------ */
/* High-level drivers (the CLI surface).                               */
/*                                                                     */
/* These return NLPME_OK whenever the protocol ran to completion and   */
/* place the process exit code (0 pass, 1 check fail, 2 config error,  */
/* 3 numerical abort) in *exit_status. Hard failures return an error   */
/* status instead.                                                     */
/* ------------------------------------------------------------------ */

/* overrides: newline-separated "section.key=value" assignments, or NULL. */
nlpme_status nlpme_run_scenario(const char* config_path, const char* overrides,
                                int* exit_status);
nlpme_status nlpme_sweep(const char* spec_path, int jobs, int* exit_status);
/* report_path NULL writes checkops_report.json under the output root. */
nlpme_status nlpme_check_ops(const char* report_path, int* exit_status);
nlpme_status nlpme_report(const char* artifact_dir, const char* out_base, int* exit_status);

#ifdef __cplusplus
}
#endif

#endif /* NLPME_H */
