/* C API for the iscat inverse-scattering library.
 *
 * Complex arrays cross this boundary as interleaved doubles (re, im),
 * column-major with one column per transmitter. Pixel index is ix + nx*iy.
 * Every function returns an iscat_status; on failure iscat_last_error()
 * gives a thread-local message. Status values double as process exit codes.
 */
#ifndef ISCAT_CAPI_H
#define ISCAT_CAPI_H

#include <stdint.h>

#if defined(_WIN32)
#define ISCAT_API __declspec(dllexport)
#else
#define ISCAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iscat_status {
    ISCAT_OK = 0,
    ISCAT_ERROR_CONFIG = 2,
    ISCAT_ERROR_NUMERIC = 3,
    ISCAT_ERROR_IO = 4
} iscat_status;

ISCAT_API const char* iscat_version(void);
ISCAT_API const char* iscat_last_error(void);

/* ---- scene handle ---------------------------------------------------- */

/* Opaque scene: grid + transceiver geometry + precomputed Green operators. */
typedef struct iscat_scene iscat_scene;

/* scene_json uses the "scene" block of the experiment config, e.g.
 * {"nx":32,"ny":32,"side_x_lambda0":2.0,"side_y_lambda0":2.0,
 *  "lambda0_m":0.075,"n_tx":16,"n_rx":16,"ring_radius_lambda0":4.0} */
ISCAT_API iscat_status iscat_scene_create(const char* scene_json, iscat_scene** out_scene);
ISCAT_API void iscat_scene_destroy(iscat_scene* scene);

ISCAT_API int iscat_scene_pixels(const iscat_scene* scene);
ISCAT_API int iscat_scene_num_tx(const iscat_scene* scene);
ISCAT_API int iscat_scene_num_rx(const iscat_scene* scene);

/* ---- forward physics -------------------------------------------------- */

/* chi: n_pix complex. Outputs (any may be NULL): etot/jind n_pix*n_tx,
 * esca_rx n_rx*n_tx. */
ISCAT_API iscat_status iscat_forward_solve(iscat_scene* scene, const double* chi, double* etot,
                                           double* jind, double* esca_rx);

/* esca_rx: n_rx*n_tx complex measurements -> chi_bp: n_pix complex. */
ISCAT_API iscat_status iscat_back_projection(iscat_scene* scene, const double* esca_rx,
                                             double* chi_bp);

/* Analytic cylinder series for a centered homogeneous disk. */
ISCAT_API iscat_status iscat_mie_scattered(iscat_scene* scene, double eps_r, double radius_m,
                                           double* esca_rx);

/* In-place exact-power AWGN on n complex values. */
ISCAT_API iscat_status iscat_add_noise(double* values, int n, double snr_db, uint64_t seed);

/* ---- losses and metrics ----------------------------------------------- */

/* kind: "contrast" | "current" | "field". chi_hat/chi_true: n_pix complex.
 * jtrue/etot/esca_doi: n_pix*n_tx complex (may be NULL when unused by the
 * kind). grad_re/grad_im: n_pix reals. */
ISCAT_API iscat_status iscat_loss_eval(iscat_scene* scene, const char* kind,
                                       const double* chi_hat, const double* chi_true,
                                       const double* jtrue, const double* etot,
                                       const double* esca_doi, double beta, double* value,
                                       double* grad_re, double* grad_im);

ISCAT_API iscat_status iscat_mse(const double* a, const double* b, int n_complex, double* out);

/* Real images, row-major height x width. */
ISCAT_API iscat_status iscat_ssim(const double* a, const double* b, int width, int height,
                                  double dynamic_range, double* out);

/* ---- experiment commands (what the CLI calls) ------------------------- */

/* seed_override < 0 keeps the seed from the config file. threads <= 0 keeps
 * the ISCAT_THREADS environment default. */
ISCAT_API iscat_status iscat_run_gen(const char* config_path, const char* out_dir,
                                     int64_t seed_override, int threads);
ISCAT_API iscat_status iscat_run_train(const char* config_path, const char* dataset_dir,
                                       const char* out_dir, int64_t seed_override,
                                       const char* resume_checkpoint, int threads);
ISCAT_API iscat_status iscat_run_eval(const char* config_path, const char* checkpoint_path,
                                      const char* dataset_dir, const char* out_dir, int threads);
ISCAT_API iscat_status iscat_run_bp(const char* config_path, const char* dataset_dir,
                                    const char* out_dir, int threads);
ISCAT_API iscat_status iscat_run_bim(const char* config_path, const char* dataset_dir,
                                     const char* out_dir, int threads);
ISCAT_API iscat_status iscat_run_report(const char* config_path, const char* out_dir,
                                        int64_t seed_override, int threads);
/* config_path may be NULL for the built-in validation scene. */
ISCAT_API iscat_status iscat_run_mie_check(const char* config_path, const char* out_dir);
ISCAT_API iscat_status iscat_run_selfcheck(const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* ISCAT_CAPI_H */
