#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "iscat/common.hpp"
#include "iscat/grid.hpp"

namespace iscat::oracle {

// Independent reference implementations used by the test suites and the
// `selfcheck` command. They deliberately share no code path with the
// implementations they check.

// Frozen high-precision references (mpmath, 40 digits): {order, kind(0=J,1=Y), x, value}.
struct BesselRef {
    int order;
    int kind;
    double x;
    double value;
};
const std::vector<BesselRef>& bessel_reference_table();

// k0^2 * integral of (i/4) H0^(1)(k0 r) over a centered cell_w x cell_h
// rectangle, observation at the center. Exact radial reduction, then a dense
// trapezoid rule in angle.
Complex quad_cell_self_term(double k0, double cell_w, double cell_h, int angular_points = 20000);

// Ray-casting point-in-polygon (counts edge crossings), independent of the
// half-plane test used by the rasterizer.
bool point_in_polygon_raycast(const std::vector<std::array<double, 2>>& poly, double x, double y);

// Direct per-window SSIM evaluation (no separable filtering).
double ssim_reference(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int width, int height,
                      double dynamic_range);

// Coordinate descent for min (1/2)||y - G x||^2 + w ||x||_1 over complex x,
// run to a tight tolerance; independent of ISTA.
Eigen::VectorXcd lasso_coordinate_descent(const Eigen::MatrixXcd& g, const Eigen::VectorXcd& y,
                                          double l1_weight, int max_sweeps = 20000,
                                          double tol = 1e-13);

// Central finite differences of a scalar function of n real variables.
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x0, double h = 1e-6);

// Two-pass mean/median/std recomputation used against metrics::summarize.
void two_pass_stats(const std::vector<double>& values, double& mean, double& median,
                    double& stddev);

}  // namespace iscat::oracle
