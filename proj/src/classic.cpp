#include "iscat/classic.hpp"

#include <cmath>
#include <sstream>

namespace iscat {

LinearOperator LinearOperator::from_dense(const Eigen::MatrixXcd& m) {
    LinearOperator op;
    op.rows = m.rows();
    op.cols = m.cols();
    op.apply = [m](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return m * x; };
    op.apply_adjoint = [m](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
        return m.adjoint() * x;
    };
    return op;
}

double soft_threshold(double x, double theta) {
    if (theta < 0.0) throw std::invalid_argument("soft_threshold: theta must be >= 0");
    const double half = theta / 2.0;
    if (x <= -half) return x + half;
    if (x >= half) return x - half;
    return 0.0;
}

Complex soft_threshold(Complex x, double theta) {
    if (theta < 0.0) throw std::invalid_argument("soft_threshold: theta must be >= 0");
    const double mag = std::abs(x);
    const double half = theta / 2.0;
    if (mag <= half) return {0.0, 0.0};
    return x * ((mag - half) / mag);
}

double lipschitz_estimate(const LinearOperator& g, double safety, int max_iter, double tol) {
    if (!(safety > 0.0)) throw std::invalid_argument("lipschitz_estimate: safety must be > 0");
    Eigen::VectorXcd v = Eigen::VectorXcd::Constant(g.cols, Complex{1.0, 0.0});
    v /= v.norm();
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXcd w = g.apply_adjoint(g.apply(v));
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;  // zero operator
        const double change = std::abs(nw - lambda) / std::max(nw, 1e-300);
        lambda = nw;
        v = w / nw;
        if (change < tol && it > 0) break;
    }
    return safety * lambda;
}

IstaResult ista_solve(const LinearOperator& g, const Eigen::VectorXcd& y, const IstaConfig& cfg,
                      const Eigen::VectorXcd& chi0) {
    if (cfg.max_inner < 1) throw std::invalid_argument("ista_solve: max_inner must be >= 1");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("ista_solve: tol must be > 0");
    if (y.size() != g.rows || chi0.size() != g.cols)
        throw std::invalid_argument("ista_solve: dimension mismatch");

    const double L = lipschitz_estimate(g, cfg.lipschitz_safety);
    if (!(L > 0.0)) throw NumericError("ista_solve: operator has zero norm");

    const Eigen::VectorXcd gh_y = g.apply_adjoint(y);
    const double beta = cfg.beta_l1 >= 0.0 ? cfg.beta_l1 : 0.01 * gh_y.cwiseAbs().maxCoeff();
    const double theta = beta / L;

    auto objective = [&](const Eigen::VectorXcd& chi) {
        const double data = 0.5 * (y - g.apply(chi)).squaredNorm();
        return data + 0.5 * beta * chi.cwiseAbs().sum();
    };

    IstaResult res;
    res.beta_used = beta;
    res.lipschitz = L;
    Eigen::VectorXcd chi = chi0;
    res.objective.push_back(objective(chi));

    for (int q = 0; q < cfg.max_inner; ++q) {
        const Eigen::VectorXcd grad = g.apply_adjoint(g.apply(chi)) - gh_y;
        Eigen::VectorXcd z = chi - grad / L;
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = soft_threshold(z[i], theta);
        chi = std::move(z);

        const double f = objective(chi);
        if (!std::isfinite(f)) throw NumericError("ista_solve: objective diverged");
        res.objective.push_back(f);
        ++res.iterations;
        const double prev = res.objective[res.objective.size() - 2];
        if (std::abs(prev - f) <= cfg.tol * std::max(1.0, std::abs(prev))) break;
    }
    res.chi = std::move(chi);
    return res;
}

ContrastMap back_projection(const FieldSet& escamea, const GreensOperators& ops,
                            const FieldSet& einc) {
    const Scene& scene = ops.scene();
    const int n = scene.grid.pixel_count();
    const int n_tx = scene.n_tx();
    if (escamea.values.rows() != scene.n_rx() || escamea.values.cols() != n_tx)
        throw std::invalid_argument("back_projection: measurement shape mismatch");
    if (einc.values.rows() != n || einc.values.cols() != n_tx)
        throw std::invalid_argument("back_projection: incident field shape mismatch");
    if (escamea.values.norm() == 0.0)
        throw std::invalid_argument("back_projection: all-zero measurements");

    const Eigen::MatrixXcd& gm = ops.gm();
    Eigen::VectorXcd numer = Eigen::VectorXcd::Zero(n);
    Eigen::VectorXd denom = Eigen::VectorXd::Zero(n);
    for (int v = 0; v < n_tx; ++v) {
        const Eigen::VectorXcd e = escamea.values.col(v);
        const Eigen::VectorXcd u = gm.adjoint() * e;
        const Eigen::VectorXcd w = gm * u;
        const double wnorm2 = w.squaredNorm();
        if (wnorm2 == 0.0) throw std::invalid_argument("back_projection: degenerate measurement");
        const Complex gamma = w.dot(e) / wnorm2;  // w^H e / w^H w
        const Eigen::VectorXcd j = gamma * u;
        const Eigen::VectorXcd etot = einc.values.col(v) + ops.apply_gd(j);
        numer.array() += j.array() * etot.array().conjugate();
        denom.array() += etot.array().abs2();
    }
    ContrastMap chi_bp = zero_contrast(scene.grid);
    chi_bp.chi = numer.array() / denom.array();
    return chi_bp;
}

namespace {

// Stacked measurement operator G_(p): chi -> [gm (etot_v .* chi)]_v
LinearOperator stacked_operator(const GreensOperators& ops, const Eigen::MatrixXcd& etot) {
    const Eigen::MatrixXcd& gm = ops.gm();
    const Eigen::Index n_rx = gm.rows();
    const Eigen::Index n_pix = gm.cols();
    const Eigen::Index n_tx = etot.cols();

    LinearOperator op;
    op.rows = n_rx * n_tx;
    op.cols = n_pix;
    op.apply = [&gm, etot, n_rx](const Eigen::VectorXcd& chi) -> Eigen::VectorXcd {
        Eigen::VectorXcd out(gm.rows() * etot.cols());
        for (Eigen::Index v = 0; v < etot.cols(); ++v)
            out.segment(v * n_rx, n_rx) = gm * (etot.col(v).array() * chi.array()).matrix();
        return out;
    };
    op.apply_adjoint = [&gm, etot, n_rx](const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(gm.cols());
        for (Eigen::Index v = 0; v < etot.cols(); ++v)
            out.array() += etot.col(v).array().conjugate() *
                           (gm.adjoint() * y.segment(v * n_rx, n_rx)).array();
        return out;
    };
    return op;
}

Eigen::VectorXcd stack_columns(const Eigen::MatrixXcd& m) {
    return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

}  // namespace

BimResult bim_reconstruct(const FieldSet& escamea, const GreensOperators& ops,
                          const FieldSet& einc, const IstaConfig& cfg, int outer_max,
                          const SolveOptions& solve_opt) {
    if (outer_max < 1) throw std::invalid_argument("bim_reconstruct: outer_max must be >= 1");
    const Scene& scene = ops.scene();
    const int n = scene.grid.pixel_count();
    if (escamea.values.rows() != scene.n_rx() || escamea.values.cols() != scene.n_tx())
        throw std::invalid_argument("bim_reconstruct: measurement shape mismatch");

    const Eigen::VectorXcd y = stack_columns(escamea.values);
    BimResult res;
    res.residuals.push_back(y.norm());

    Eigen::MatrixXcd etot = einc.values;  // iteration-0 field is E_inc exactly
    Eigen::VectorXcd chi = Eigen::VectorXcd::Zero(n);

    for (int p = 1; p <= outer_max; ++p) {
        const LinearOperator g = stacked_operator(ops, etot);
        const IstaResult ista = ista_solve(g, y, cfg, chi);
        chi = ista.chi;

        const double residual = (y - g.apply(chi)).norm();
        res.residuals.push_back(residual);

        BimState state;
        state.p = p;
        state.chi_p = ContrastMap{scene.grid, chi};
        state.etot_p = FieldSet{FieldRole::EtotDoi, etot};
        state.data_residual = residual;
        res.history.push_back(std::move(state));

        if (p < outer_max) {
            const ContrastMap chi_map{scene.grid, chi};
            etot = solve_total_field(ops, chi_map, einc, solve_opt).etot.values;
        }
    }
    res.chi = ContrastMap{scene.grid, chi};
    return res;
}

}  // namespace iscat
