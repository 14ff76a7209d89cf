#include "iscat/loss.hpp"

#include <cmath>

namespace iscat {

namespace {

double beta_from_sums(double q2, double chi2) {
    if (chi2 <= 0.0) throw std::invalid_argument("batch_beta: zero-contrast batch");
    return 2.0 * q2 / chi2;
}

double sample_q2(BetaKind kind, const TrainingSample& s) {
    return kind == BetaKind::current ? s.j_true.squaredNorm() : s.esca_doi_noisy.squaredNorm();
}

void check_shapes(const Eigen::VectorXcd& chi_hat, const TrainingSample& s) {
    if (chi_hat.size() != s.chi_true.chi.size())
        throw std::invalid_argument("loss: chi_hat shape mismatch");
    if (s.etot_true.rows() != chi_hat.size())
        throw std::invalid_argument("loss: field row count mismatch");
}

}  // namespace

double batch_beta(BetaKind kind, std::span<const TrainingSample> batch) {
    if (batch.empty()) throw std::invalid_argument("batch_beta: empty batch");
    double q2 = 0.0, chi2 = 0.0;
    for (const TrainingSample& s : batch) {
        q2 += sample_q2(kind, s);
        chi2 += s.chi_true.chi.squaredNorm();
    }
    return beta_from_sums(q2, chi2);
}

double batch_beta(BetaKind kind, std::span<const TrainingSample* const> batch) {
    if (batch.empty()) throw std::invalid_argument("batch_beta: empty batch");
    double q2 = 0.0, chi2 = 0.0;
    for (const TrainingSample* s : batch) {
        q2 += sample_q2(kind, *s);
        chi2 += s->chi_true.chi.squaredNorm();
    }
    return beta_from_sums(q2, chi2);
}

LossEval loss_contrast(const Eigen::VectorXcd& chi_hat, const Eigen::VectorXcd& chi_true) {
    if (chi_hat.size() != chi_true.size())
        throw std::invalid_argument("loss_contrast: shape mismatch");
    const Eigen::VectorXcd d = chi_hat - chi_true;
    LossEval out;
    out.value = d.squaredNorm();
    out.grad_re = 2.0 * d.real();
    out.grad_im = 2.0 * d.imag();
    return out;
}

LossEval loss_current(const Eigen::VectorXcd& chi_hat, const TrainingSample& sample, double beta) {
    if (beta < 0.0) throw std::invalid_argument("loss_current: beta must be >= 0");
    check_shapes(chi_hat, sample);
    if (sample.j_true.rows() != chi_hat.size() || sample.j_true.cols() != sample.etot_true.cols())
        throw std::invalid_argument("loss_current: J shape mismatch");

    LossEval out;
    out.beta_used = beta;
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(chi_hat.size());
    double value = 0.0;
    for (Eigen::Index v = 0; v < sample.etot_true.cols(); ++v) {
        const Eigen::ArrayXcd e = sample.etot_true.col(v).array();
        const Eigen::ArrayXcd r = sample.j_true.col(v).array() - e * chi_hat.array();
        value += 0.5 * r.abs2().sum();
        g.array() -= e.conjugate() * r;
    }
    const Eigen::VectorXcd d = chi_hat - sample.chi_true.chi;
    value += beta * d.squaredNorm();
    g += 2.0 * beta * d;

    out.value = value;
    out.grad_re = g.real();
    out.grad_im = g.imag();
    return out;
}

LossEval loss_field(const Eigen::VectorXcd& chi_hat, const TrainingSample& sample,
                    const GreensOperators& ops, double beta, bool use_fft) {
    if (beta < 0.0) throw std::invalid_argument("loss_field: beta must be >= 0");
    check_shapes(chi_hat, sample);
    if (sample.esca_doi_noisy.rows() != chi_hat.size() ||
        sample.esca_doi_noisy.cols() != sample.etot_true.cols())
        throw std::invalid_argument("loss_field: E_sca_DOI shape mismatch");
    if (ops.scene().grid.pixel_count() != chi_hat.size())
        throw std::invalid_argument("loss_field: operator/pixel mismatch");

    auto gd = [&](const Eigen::VectorXcd& x) {
        return use_fft ? ops.apply_gd(x) : ops.apply_gd_dense(x);
    };
    auto gd_h = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
        if (use_fft) return ops.apply_gd_adjoint(x);
        return ops.gd_dense().adjoint() * x;
    };

    LossEval out;
    out.beta_used = beta;
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(chi_hat.size());
    double value = 0.0;
    for (Eigen::Index v = 0; v < sample.etot_true.cols(); ++v) {
        const Eigen::ArrayXcd e = sample.etot_true.col(v).array();
        const Eigen::VectorXcd r =
            sample.esca_doi_noisy.col(v) - gd((e * chi_hat.array()).matrix());
        value += 0.5 * r.squaredNorm();
        g.array() -= e.conjugate() * gd_h(r).array();
    }
    const Eigen::VectorXcd d = chi_hat - sample.chi_true.chi;
    value += beta * d.squaredNorm();
    g += 2.0 * beta * d;

    out.value = value;
    out.grad_re = g.real();
    out.grad_im = g.imag();
    return out;
}

}  // namespace iscat
