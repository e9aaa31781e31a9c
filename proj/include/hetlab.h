#ifndef HETLAB_H
#define HETLAB_H

/* C interface to the heteroclinic-cycle laboratory.
 *
 * All functions returning int use the shared status convention:
 *   0  success
 *   1  domain failure (hypothesis violated, no connection, degenerate data)
 *   2  parse or argument error
 * On failure hl_last_error_name() carries the originating error name (e.g.
 * "ConfigError", "NoHomoclinicity") and hl_last_error() the full message.
 *
 * Strings returned through char** are heap-allocated; release them with
 * hl_string_free. Handles are opaque; release with the matching _free.
 */

#ifdef __cplusplus
extern "C" {
#endif

#define HL_OK 0
#define HL_ERR_DOMAIN 1
#define HL_ERR_PARSE 2

typedef struct hl_model hl_model;
typedef struct hl_planar hl_planar;

const char* hl_version(void);
/* Thread-local; empty string when the last call succeeded. */
const char* hl_last_error(void);
const char* hl_last_error_name(void);
void hl_string_free(char* s);

/* ---- model configuration ---- */

int hl_model_load(const char* path, hl_model** out);
int hl_model_parse(const char* text, hl_model** out);
void hl_model_free(hl_model* m);

/* Hypothesis checks; JSON has per-check {id, pass, witness} plus "ok". */
int hl_model_validate_json(const hl_model* m, char** json_out);
/* K_F, K_G, delta1, delta2, delta, xi, plus the invariant-curve regime
 * margin 1 - omega*K_F*sup|phi1'/phi1| when phi1 is positive. */
int hl_model_constants_json(const hl_model* m, char** json_out);
int hl_model_to_json(const hl_model* m, char** json_out);
/* Semantic hash over every field that affects results, as a hex string. */
int hl_model_hash(const hl_model* m, char** hex_out);

/* ---- return maps ---- */

/* which is 'F' or 'G'. out3 = {y, theta, flight_time}; status_out is the
 * map status (0 ok, 1 stable-manifold hit, 2 out-of-section, 3 singular,
 * 4 domain error); a nonzero status is reported data, not a call failure. */
int hl_map_eval(const hl_model* m, char which, double y, double theta,
                double out3[3], int* status_out);
/* Row-major d(y',theta')/d(y,theta). */
int hl_map_jacobian(const hl_model* m, char which, double y, double theta,
                    double out4[4]);
/* CSV with header n,y,theta,flight_time. */
int hl_orbit_csv(const hl_model* m, char which, double y0, double theta0,
                 int burn_in, int n, char** csv_out);

/* ---- singular-limit circle map ---- */

/* Analysis of the family-`which` singular limit at phase a: derivative
 * bounds, rotation number, Lyapunov exponent, critical set, and the
 * monotonicity-interval transition graph. */
int hl_singular_json(const hl_model* m, char which, double a, char** json_out);
/* CSV with header a,lyapunov,classification,singular_hits over a uniform
 * a-grid of the singular limit. */
int hl_scan_a_csv(const hl_model* m, char which, int cells, int burn_in,
                  int n, char** csv_out);
/* Superstable sinks of the F singular limit near a_hat, with the mu lattice
 * conversion per record. */
int hl_sinks_json(const hl_model* m, double a_hat, double radius,
                  int period_cap, char** json_out);

/* ---- forced planar system (Melnikov) ---- */

int hl_planar_load(const char* path, hl_planar** out);
void hl_planar_free(hl_planar* p);
int hl_planar_validate_json(const hl_planar* p, char** json_out);
/* CSV with header theta,W1,W2; the connecting orbits are shot on first use
 * and cached on the handle. */
int hl_melnikov_table_csv(hl_planar* p, int grid, char** csv_out);
/* Table 1 classification with per-function sign reports. */
int hl_melnikov_classify_json(hl_planar* p, int grid, char** json_out);

/* ---- tangle geometry ---- */

/* Image spiral of the segment y = M sin^2(theta), CSV s,y,theta_lift. */
int hl_tangle_spiral_csv(const hl_model* m, double M, int n_samples,
                         char** csv_out);
/* Tangency sequence against the stable graph while mu2 sweeps down. */
int hl_tangle_tangencies_json(const hl_model* m, double M, double mu2_hi,
                              double mu2_lo, int count, char** json_out);
/* Homoclinicity curve mu2(mu1) on a geometric grid, with the ln-ln fit. */
int hl_hom_json(const hl_model* m, double mu1_lo, double mu1_hi, int points,
                char** json_out);

/* ---- parameter sweeps ---- */

/* Attractor class of the configured (mu1, mu2) cell under family `which`. */
int hl_classify_json(const hl_model* m, char which, int seeds, int burn_in,
                     int iterates, unsigned long long seed, char** json_out);
/* Full bifurcation diagram on linear grids [0, mu1_max] x [0, mu2_max] of
 * n1 x n2 cells. csv_out gets the cell table; dat_out and svg_out (each
 * optional, pass NULL to skip) get the gnuplot blocks and the heatmap. */
int hl_sweep(const hl_model* m, int n1, int n2, double mu1_max,
             double mu2_max, int seeds, int burn_in, int iterates,
             unsigned long long seed, int threads, char** csv_out,
             char** dat_out, char** svg_out);

#ifdef __cplusplus
}
#endif

#endif /* HETLAB_H */
