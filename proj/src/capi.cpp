#include "iscat/capi.h"

#include <cstring>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "iscat/classic.hpp"
#include "iscat/experiment.hpp"
#include "iscat/metrics.hpp"
#include "iscat/parallel.hpp"

struct iscat_scene {
    iscat::Scene scene;
    iscat::GreensOperators ops;
    iscat::FieldSet einc;

    explicit iscat_scene(const iscat::Scene& s)
        : scene(s), ops(s), einc(iscat::incident_field(s)) {}
};

namespace {

thread_local std::string g_last_error;

iscat_status to_status(const std::exception& e) {
    g_last_error = e.what();
    if (dynamic_cast<const iscat::IoError*>(&e)) return ISCAT_ERROR_IO;
    if (dynamic_cast<const iscat::NumericError*>(&e)) return ISCAT_ERROR_NUMERIC;
    return ISCAT_ERROR_CONFIG;  // ConfigError, invalid/domain argument, parse
}

template <class F>
iscat_status guarded(F&& f) {
    try {
        f();
        return ISCAT_OK;
    } catch (const std::exception& e) {
        return to_status(e);
    } catch (...) {
        g_last_error = "unknown error";
        return ISCAT_ERROR_NUMERIC;
    }
}

Eigen::MatrixXcd matrix_from_interleaved(const double* p, int rows, int cols) {
    Eigen::MatrixXcd m(rows, cols);
    std::memcpy(m.data(), p, sizeof(double) * 2 * static_cast<std::size_t>(rows) * cols);
    return m;
}

void matrix_to_interleaved(const Eigen::MatrixXcd& m, double* p) {
    std::memcpy(p, m.data(), sizeof(double) * 2 * static_cast<std::size_t>(m.size()));
}

void apply_threads(int threads) {
    if (threads > 0) iscat::set_thread_count(threads);
}

iscat::ExperimentConfig config_from_path(const char* path) {
    if (!path || !*path) throw iscat::ConfigError("config path is required");
    return iscat::load_config_file(path);
}

std::optional<std::uint64_t> seed_opt(int64_t seed_override) {
    if (seed_override < 0) return std::nullopt;
    return static_cast<std::uint64_t>(seed_override);
}

}  // namespace

extern "C" {

const char* iscat_version(void) { return iscat::kVersion; }

const char* iscat_last_error(void) { return g_last_error.c_str(); }

iscat_status iscat_scene_create(const char* scene_json, iscat_scene** out_scene) {
    return guarded([&] {
        if (!scene_json || !out_scene)
            throw iscat::ConfigError("iscat_scene_create: null argument");
        const std::string wrapped = std::string("{\"scene\":") + scene_json + "}";
        const iscat::ExperimentConfig cfg = iscat::parse_config_json(wrapped);
        *out_scene = new iscat_scene(iscat::scene_from_config(cfg.scene));
    });
}

void iscat_scene_destroy(iscat_scene* scene) { delete scene; }

int iscat_scene_pixels(const iscat_scene* scene) {
    return scene ? scene->scene.grid.pixel_count() : 0;
}

int iscat_scene_num_tx(const iscat_scene* scene) { return scene ? scene->scene.n_tx() : 0; }

int iscat_scene_num_rx(const iscat_scene* scene) { return scene ? scene->scene.n_rx() : 0; }

iscat_status iscat_forward_solve(iscat_scene* scene, const double* chi, double* etot,
                                 double* jind, double* esca_rx) {
    return guarded([&] {
        if (!scene || !chi) throw iscat::ConfigError("iscat_forward_solve: null argument");
        const int n = scene->scene.grid.pixel_count();
        iscat::ContrastMap map{scene->scene.grid, matrix_from_interleaved(chi, n, 1)};
        const iscat::SolveResult sol = iscat::solve_total_field(scene->ops, map, scene->einc);
        if (etot) matrix_to_interleaved(sol.etot.values, etot);
        if (jind) matrix_to_interleaved(sol.current.values, jind);
        if (esca_rx)
            matrix_to_interleaved(iscat::scattered_at_receivers(scene->ops, sol.current).values,
                                  esca_rx);
    });
}

iscat_status iscat_back_projection(iscat_scene* scene, const double* esca_rx, double* chi_bp) {
    return guarded([&] {
        if (!scene || !esca_rx || !chi_bp)
            throw iscat::ConfigError("iscat_back_projection: null argument");
        iscat::FieldSet mea{iscat::FieldRole::EscaMea,
                            matrix_from_interleaved(esca_rx, scene->scene.n_rx(),
                                                    scene->scene.n_tx())};
        const iscat::ContrastMap bp = iscat::back_projection(mea, scene->ops, scene->einc);
        matrix_to_interleaved(bp.chi, chi_bp);
    });
}

iscat_status iscat_mie_scattered(iscat_scene* scene, double eps_r, double radius_m,
                                 double* esca_rx) {
    return guarded([&] {
        if (!scene || !esca_rx) throw iscat::ConfigError("iscat_mie_scattered: null argument");
        matrix_to_interleaved(iscat::mie_reference(eps_r, radius_m, scene->scene).values,
                              esca_rx);
    });
}

iscat_status iscat_add_noise(double* values, int n, double snr_db, uint64_t seed) {
    return guarded([&] {
        if (!values || n < 1) throw iscat::ConfigError("iscat_add_noise: bad arguments");
        iscat::FieldSet f{iscat::FieldRole::EscaMea, matrix_from_interleaved(values, n, 1)};
        matrix_to_interleaved(iscat::add_awgn(f, snr_db, seed).values, values);
    });
}

iscat_status iscat_loss_eval(iscat_scene* scene, const char* kind, const double* chi_hat,
                             const double* chi_true, const double* jtrue, const double* etot,
                             const double* esca_doi, double beta, double* value, double* grad_re,
                             double* grad_im) {
    return guarded([&] {
        if (!scene || !kind || !chi_hat || !chi_true || !value)
            throw iscat::ConfigError("iscat_loss_eval: null argument");
        const int n = scene->scene.grid.pixel_count();
        const int n_tx = scene->scene.n_tx();
        const Eigen::VectorXcd hat = matrix_from_interleaved(chi_hat, n, 1);

        iscat::TrainingSample s;
        s.chi_true = iscat::ContrastMap{scene->scene.grid, matrix_from_interleaved(chi_true, n, 1)};
        if (jtrue) s.j_true = matrix_from_interleaved(jtrue, n, n_tx);
        if (etot) s.etot_true = matrix_from_interleaved(etot, n, n_tx);
        if (esca_doi) s.esca_doi_noisy = matrix_from_interleaved(esca_doi, n, n_tx);

        iscat::LossEval le;
        const std::string k = kind;
        if (k == "contrast")
            le = iscat::loss_contrast(hat, s.chi_true.chi);
        else if (k == "current")
            le = iscat::loss_current(hat, s, beta);
        else if (k == "field")
            le = iscat::loss_field(hat, s, scene->ops, beta);
        else
            throw iscat::ConfigError("iscat_loss_eval: unknown kind \"" + k + "\"");
        *value = le.value;
        if (grad_re) std::memcpy(grad_re, le.grad_re.data(), sizeof(double) * n);
        if (grad_im) std::memcpy(grad_im, le.grad_im.data(), sizeof(double) * n);
    });
}

iscat_status iscat_mse(const double* a, const double* b, int n_complex, double* out) {
    return guarded([&] {
        if (!a || !b || !out || n_complex < 1)
            throw iscat::ConfigError("iscat_mse: bad arguments");
        *out = iscat::mse(Eigen::VectorXcd(matrix_from_interleaved(a, n_complex, 1)),
                          Eigen::VectorXcd(matrix_from_interleaved(b, n_complex, 1)));
    });
}

iscat_status iscat_ssim(const double* a, const double* b, int width, int height,
                        double dynamic_range, double* out) {
    return guarded([&] {
        if (!a || !b || !out) throw iscat::ConfigError("iscat_ssim: null argument");
        const Eigen::Map<const Eigen::VectorXd> va(a, static_cast<Eigen::Index>(width) * height);
        const Eigen::Map<const Eigen::VectorXd> vb(b, static_cast<Eigen::Index>(width) * height);
        *out = iscat::ssim(va, vb, width, height, dynamic_range);
    });
}

iscat_status iscat_run_gen(const char* config_path, const char* out_dir, int64_t seed_override,
                           int threads) {
    return guarded([&] {
        apply_threads(threads);
        if (!out_dir || !*out_dir) throw iscat::ConfigError("gen: --out is required");
        iscat::cmd_gen(config_from_path(config_path), out_dir, seed_opt(seed_override));
    });
}

iscat_status iscat_run_train(const char* config_path, const char* dataset_dir,
                             const char* out_dir, int64_t seed_override,
                             const char* resume_checkpoint, int threads) {
    return guarded([&] {
        apply_threads(threads);
        if (!dataset_dir || !*dataset_dir)
            throw iscat::ConfigError("train: --dataset is required");
        if (!out_dir || !*out_dir) throw iscat::ConfigError("train: --out is required");
        iscat::cmd_train(config_from_path(config_path), dataset_dir, out_dir,
                         seed_opt(seed_override),
                         resume_checkpoint ? std::string(resume_checkpoint) : std::string{});
    });
}

iscat_status iscat_run_eval(const char* config_path, const char* checkpoint_path,
                            const char* dataset_dir, const char* out_dir, int threads) {
    return guarded([&] {
        apply_threads(threads);
        if (!checkpoint_path || !*checkpoint_path)
            throw iscat::ConfigError("eval: --checkpoint is required");
        if (!dataset_dir || !*dataset_dir) throw iscat::ConfigError("eval: --dataset is required");
        if (!out_dir || !*out_dir) throw iscat::ConfigError("eval: --out is required");
        iscat::cmd_eval(config_from_path(config_path), checkpoint_path, dataset_dir, out_dir);
    });
}

iscat_status iscat_run_bp(const char* config_path, const char* dataset_dir, const char* out_dir,
                          int threads) {
    return guarded([&] {
        apply_threads(threads);
        if (!dataset_dir || !*dataset_dir) throw iscat::ConfigError("bp: --dataset is required");
        if (!out_dir || !*out_dir) throw iscat::ConfigError("bp: --out is required");
        iscat::cmd_bp(config_from_path(config_path), dataset_dir, out_dir);
    });
}

iscat_status iscat_run_bim(const char* config_path, const char* dataset_dir, const char* out_dir,
                           int threads) {
    return guarded([&] {
        apply_threads(threads);
        if (!dataset_dir || !*dataset_dir) throw iscat::ConfigError("bim: --dataset is required");
        if (!out_dir || !*out_dir) throw iscat::ConfigError("bim: --out is required");
        iscat::cmd_bim(config_from_path(config_path), dataset_dir, out_dir);
    });
}

iscat_status iscat_run_report(const char* config_path, const char* out_dir, int64_t seed_override,
                              int threads) {
    return guarded([&] {
        apply_threads(threads);
        if (!out_dir || !*out_dir) throw iscat::ConfigError("report: --out is required");
        iscat::cmd_report(config_from_path(config_path), out_dir, seed_opt(seed_override));
    });
}

iscat_status iscat_run_mie_check(const char* config_path, const char* out_dir) {
    return guarded([&] {
        if (config_path && *config_path) {
            const iscat::ExperimentConfig cfg = iscat::load_config_file(config_path);
            iscat::cmd_mie_check(&cfg, out_dir ? out_dir : "", &std::cout);
        } else {
            iscat::cmd_mie_check(nullptr, out_dir ? out_dir : "", &std::cout);
        }
    });
}

iscat_status iscat_run_selfcheck(const char* out_dir) {
    return guarded([&] {
        if (!iscat::cmd_selfcheck(out_dir ? out_dir : "", std::cout))
            throw iscat::NumericError("selfcheck reported failures");
    });
}

}  // extern "C"
