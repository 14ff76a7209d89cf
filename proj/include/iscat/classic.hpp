#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "iscat/forward.hpp"

namespace iscat {

// Matrix-free complex linear operator A: C^cols -> C^rows.
struct LinearOperator {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> apply;
    std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> apply_adjoint;

    static LinearOperator from_dense(const Eigen::MatrixXcd& m);
};

struct IstaConfig {
    double beta_l1 = -1.0;  // < 0: choose 0.01 * ||G^H y||_inf
    int max_inner = 200;
    double tol = 1e-6;  // relative objective change
    double lipschitz_safety = 1.05;
};

struct IstaResult {
    Eigen::VectorXcd chi;
    std::vector<double> objective;  // per iteration, starting at the initial point
    double beta_used = 0.0;
    double lipschitz = 0.0;
    int iterations = 0;
};

struct BimState {
    int p = 0;
    ContrastMap chi_p;
    FieldSet etot_p;
    double data_residual = 0.0;
};

struct BimResult {
    ContrastMap chi;
    // residuals[0] is ||E_sca_mea|| (chi = 0); residuals[p] after outer step p
    std::vector<double> residuals;
    std::vector<BimState> history;
};

// Soft-threshold operator: shrinks |x| by theta/2, dead zone |x| < theta/2.
double soft_threshold(double x, double theta);
// Complex extension: threshold the magnitude, preserve the phase.
Complex soft_threshold(Complex x, double theta);

// Power iteration on G^H G; returns safety * lambda_max.
double lipschitz_estimate(const LinearOperator& g, double safety = 1.05, int max_iter = 100,
                          double tol = 1e-6);

// ISTA for  min (1/2)||y - G chi||^2 + (beta/2)||chi||_1.
// The l1 weight is beta/2 because S_theta shrinks magnitudes by theta/2;
// the iteration is chi <- S_{beta/L}( (I - G^H G / L) chi + G^H y / L ).
// The recorded objective is non-increasing.
IstaResult ista_solve(const LinearOperator& g, const Eigen::VectorXcd& y, const IstaConfig& cfg,
                      const Eigen::VectorXcd& chi0);

// Back-projection initializer. Per transmitter v with measurement column E_v:
//   u_v = gm^H E_v,  w_v = gm u_v,  gamma_v = (w_v^H E_v)/(w_v^H w_v),
//   J_v = gamma_v u_v,  E_tot,v = E_inc,v + GD J_v,
//   chi_bp = sum_v J_v .* conj(E_tot,v) / sum_v |E_tot,v|^2   (per pixel).
ContrastMap back_projection(const FieldSet& escamea, const GreensOperators& ops,
                            const FieldSet& einc);

// Born iterative method: alternates a full forward solve for the field with
// an ISTA contrast update on the stacked per-transmitter linear system
// G_(p) = gm diag(E_tot,v).
BimResult bim_reconstruct(const FieldSet& escamea, const GreensOperators& ops,
                          const FieldSet& einc, const IstaConfig& cfg, int outer_max = 10,
                          const SolveOptions& solve_opt = {});

}  // namespace iscat
