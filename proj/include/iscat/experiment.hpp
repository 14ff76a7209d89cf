#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "iscat/forward.hpp"
#include "iscat/loss.hpp"
#include "iscat/net.hpp"

namespace iscat {

struct SceneConfig {
    int nx = 32, ny = 32;
    double side_x_lambda = 2.0, side_y_lambda = 2.0;
    double lambda0_m = 0.075;
    int n_tx = 16, n_rx = 16;
    double ring_radius_lambda = 4.0;
};

struct DatasetConfig {
    std::string kind = "digit";  // digit | polygon | austria | disk
    int count_train = 200;
    int count_test = 100;
    double eps_lo = 1.0, eps_hi = 5.0;
    std::uint64_t master_seed = 7;
    std::vector<double> snr_list = {20.0, 5.0};
    std::string idx_images;  // optional IDX ubyte file for the digit kind
    int min_polygons = 1, max_polygons = 3;
    double disk_eps = 2.0, disk_radius_lambda = 0.5;
    std::string solver = "krylov";  // krylov | dense
};

struct TrainBlockConfig {
    std::string loss = "contrast-clean";  // contrast-clean|contrast-noisy|current|field
    double lr0 = 1e-3;
    double momentum = 0.99;
    int epochs = 60;
    int lr_halving_period = 20;
    int batch_size = 8;
    double snr_train = 5.0;
    std::uint64_t seed = 1;
    double val_fraction = 0.1;
    int depth = 2;
    int base_channels = 8;
    bool use_batchnorm = true;
};

struct EvalBlockConfig {
    std::vector<double> snr_test = {20.0, 5.0};
    int panels = 5;
    bool include_bim = false;
    int bim_max_samples = 0;  // 0 = all
};

struct ReportBlockConfig {
    std::vector<double> train_snrs = {20.0, 5.0};
    std::vector<double> test_snrs = {20.0, 5.0};
    std::vector<std::string> losses = {"contrast-clean", "contrast-noisy", "current", "field"};
    bool austria_enabled = false;
    std::vector<double> austria_eps = {1.1, 1.2, 2.0, 3.0, 5.0};
    double austria_snr = 20.0;
};

struct ExperimentConfig {
    SceneConfig scene;
    DatasetConfig dataset;
    TrainBlockConfig train;
    EvalBlockConfig eval;
    ReportBlockConfig report;
};

// Schema-validated parse; unknown keys are rejected. "preset": "desk"|"paper"
// selects a base configuration that explicit keys then override.
ExperimentConfig parse_config_json(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);
std::string resolved_config_json(const ExperimentConfig& cfg);

Scene scene_from_config(const SceneConfig& cfg);
GridSpec grid_from_config(const SceneConfig& cfg);

// loss string -> (kind for the objective, whether the BP input is noisy)
struct LossVariant {
    LossKind kind = LossKind::contrast;
    bool noisy_input = false;
    std::string name;
};
LossVariant parse_loss_variant(const std::string& name);

std::string snr_label(double snr_db);  // "clean" for +inf, else trimmed decimal

// --- dataset on disk ---------------------------------------------------

// Simulates and persists count samples (records per noise variant plus a
// manifest). Returns the manifest path.
std::string generate_dataset(const ExperimentConfig& cfg, int count, std::uint64_t master_seed,
                             const std::string& out_dir);

struct DatasetOnDisk {
    std::string dir;
    Scene scene;
    int sample_count = 0;
    std::vector<std::string> variants;  // labels, "clean" first
    // file name per sample per variant, indexed [variant][sample]
    std::vector<std::vector<std::string>> files;
};

DatasetOnDisk open_dataset(const std::string& dir);

// Assembles training samples: BP input from input_variant, near-field noisy
// target from target_variant ("clean" allowed for both).
std::vector<TrainingSample> load_samples(const DatasetOnDisk& ds, const std::string& input_variant,
                                         const std::string& target_variant);

// --- commands (exit-code semantics applied by the C API / CLI) ----------

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir,
             std::optional<std::uint64_t> seed_override);
void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir, std::optional<std::uint64_t> seed_override,
               const std::string& resume_checkpoint = "");
void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
              const std::string& dataset_dir, const std::string& out_dir);
void cmd_bp(const ExperimentConfig& cfg, const std::string& dataset_dir,
            const std::string& out_dir);
void cmd_bim(const ExperimentConfig& cfg, const std::string& dataset_dir,
             const std::string& out_dir);
void cmd_report(const ExperimentConfig& cfg, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override);
// Compares the MoM solve against the analytic cylinder series on a disk
// scene; throws NumericError when above the 3% gate. Writes a small CSV when
// out_dir is nonempty.
double cmd_mie_check(const ExperimentConfig* cfg, const std::string& out_dir,
                     std::ostream* log = nullptr);
bool cmd_selfcheck(const std::string& out_dir, std::ostream& log);

}  // namespace iscat
