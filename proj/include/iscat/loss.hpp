#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iscat/forward.hpp"

namespace iscat {

// One supervised example: BP input image plus precomputed near-field targets.
struct TrainingSample {
    ContrastMap chi_true;
    ContrastMap chi_bp;              // network input (clean or noisy variant)
    Eigen::MatrixXcd j_true;         // (n_pix, n_tx)
    Eigen::MatrixXcd etot_true;      // (n_pix, n_tx)
    Eigen::MatrixXcd esca_doi_noisy; // (n_pix, n_tx)
    std::string scene_ref;
};

struct LossEval {
    double value = 0.0;
    Eigen::VectorXd grad_re;  // d value / d Re(chi_hat)
    Eigen::VectorXd grad_im;  // d value / d Im(chi_hat)
    double beta_used = 0.0;
};

enum class LossKind { contrast, current, field };

enum class BetaKind { current, field };

// beta = 2 * sum_batch ||Q||_F^2 / sum_batch ||chi||^2, Q = J or E_sca_DOI.
double batch_beta(BetaKind kind, std::span<const TrainingSample> batch);
double batch_beta(BetaKind kind, std::span<const TrainingSample* const> batch);

// ||chi_hat - chi||^2 over pixels (squared complex modulus).
LossEval loss_contrast(const Eigen::VectorXcd& chi_hat, const Eigen::VectorXcd& chi_true);

// (1/2) sum_v ||J_v - E_tot,v .* chi_hat||^2 + beta ||chi - chi_hat||^2
LossEval loss_current(const Eigen::VectorXcd& chi_hat, const TrainingSample& sample, double beta);

// (1/2) sum_v ||E_sca_DOI,v - GD (E_tot,v .* chi_hat)||^2 + beta ||chi - chi_hat||^2
LossEval loss_field(const Eigen::VectorXcd& chi_hat, const TrainingSample& sample,
                    const GreensOperators& ops, double beta, bool use_fft = true);

}  // namespace iscat
