#pragma once

#include <vector>

#include <Eigen/Dense>

#include "iscat/common.hpp"

namespace iscat {

struct SummaryStats {
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;  // sample (n-1); 0 for a singleton
};

struct MetricReport {
    std::vector<double> mse;
    std::vector<double> ssim;
    SummaryStats mse_stats;
    SummaryStats ssim_stats;
};

// (1/N) sum |chi_hat - chi_true|^2
double mse(const Eigen::VectorXcd& chi_hat, const Eigen::VectorXcd& chi_true);
double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Standard single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, averaged over interior (valid) window placements. Row-major
// (height x width) real images.
double ssim(const Eigen::VectorXd& img_a, const Eigen::VectorXd& img_b, int width, int height,
            double dynamic_range);

SummaryStats summarize(const std::vector<double>& values);

MetricReport make_report(std::vector<double> mse_values, std::vector<double> ssim_values);

}  // namespace iscat
