#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iscat/common.hpp"
#include "iscat/net.hpp"

namespace iscat {

// One sample at one noise variant, magic "ISCT". All numerics are
// little-endian f64 pairs (re, im); dims are little-endian u32.
struct SampleRecord {
    std::uint32_t nx = 0, ny = 0, n_tx = 0, n_rx = 0;
    double snr_db = 0.0;  // +inf marks the clean variant
    Eigen::VectorXcd chi_true;
    Eigen::VectorXcd chi_bp_clean;
    Eigen::VectorXcd chi_bp_noisy;
    Eigen::MatrixXcd j_true;          // (n_pix, n_tx)
    Eigen::MatrixXcd etot_true;       // (n_pix, n_tx)
    Eigen::MatrixXcd esca_doi_noisy;  // (n_pix, n_tx)
    Eigen::MatrixXcd esca_mea_clean;  // (n_rx, n_tx)
    Eigen::MatrixXcd esca_mea_noisy;  // (n_rx, n_tx)
};

void write_sample(const std::string& path, const SampleRecord& record);
SampleRecord read_sample(const std::string& path);

// Network checkpoint, magic "ISCK": config JSON blob + parameter and
// velocity tensors. Round trips are bitwise.
struct Checkpoint {
    NetConfig net_cfg;
    TrainConfig train_cfg;
    NetParams params;
    OptState opt;
    std::string extra_json;  // resolved experiment config, free-form
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// 8-bit binary PGM (P5) with linear clamp of [lo, hi] onto [0, 255];
// a JSON sidecar (path + ".json") records the range. Row 0 is the top
// of the image (largest y).
void export_image(const Eigen::VectorXd& map, int width, int height, const std::string& path,
                  double lo, double hi);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace iscat
