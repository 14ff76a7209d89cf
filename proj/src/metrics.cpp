#include "iscat/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace iscat {

double mse(const Eigen::VectorXcd& chi_hat, const Eigen::VectorXcd& chi_true) {
    if (chi_hat.size() != chi_true.size() || chi_hat.size() == 0)
        throw std::invalid_argument("mse: shape mismatch");
    return (chi_hat - chi_true).squaredNorm() / static_cast<double>(chi_hat.size());
}

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() == 0) throw std::invalid_argument("mse: shape mismatch");
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - (kWindow - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

// separable valid-mode filter: (h x w) -> (h-10 x w-10)
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img) {
    static const std::array<double, kWindow> taps = gaussian_taps();
    const int h = static_cast<int>(img.rows());
    const int w = static_cast<int>(img.cols());
    Eigen::MatrixXd rows(h, w - kWindow + 1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c + kWindow <= w; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * img(r, c + k);
            rows(r, c) = acc;
        }
    Eigen::MatrixXd out(h - kWindow + 1, w - kWindow + 1);
    for (int c = 0; c < rows.cols(); ++c)
        for (int r = 0; r + kWindow <= h; ++r) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * rows(r + k, c);
            out(r, c) = acc;
        }
    return out;
}

}  // namespace

double ssim(const Eigen::VectorXd& img_a, const Eigen::VectorXd& img_b, int width, int height,
            double dynamic_range) {
    if (width < kWindow || height < kWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    if (img_a.size() != static_cast<Eigen::Index>(width) * height || img_a.size() != img_b.size())
        throw std::invalid_argument("ssim: shape mismatch");
    if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic_range must be > 0");

    const Eigen::MatrixXd a =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            img_a.data(), height, width);
    const Eigen::MatrixXd b =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            img_b.data(), height, width);

    const double c1 = (kK1 * dynamic_range) * (kK1 * dynamic_range);
    const double c2 = (kK2 * dynamic_range) * (kK2 * dynamic_range);

    const Eigen::MatrixXd mu_a = filter_valid(a);
    const Eigen::MatrixXd mu_b = filter_valid(b);
    const Eigen::MatrixXd s_aa = filter_valid(a.cwiseProduct(a)) - mu_a.cwiseProduct(mu_a);
    const Eigen::MatrixXd s_bb = filter_valid(b.cwiseProduct(b)) - mu_b.cwiseProduct(mu_b);
    const Eigen::MatrixXd s_ab = filter_valid(a.cwiseProduct(b)) - mu_a.cwiseProduct(mu_b);

    double acc = 0.0;
    for (Eigen::Index r = 0; r < mu_a.rows(); ++r)
        for (Eigen::Index c = 0; c < mu_a.cols(); ++c) {
            const double num = (2.0 * mu_a(r, c) * mu_b(r, c) + c1) * (2.0 * s_ab(r, c) + c2);
            const double den = (mu_a(r, c) * mu_a(r, c) + mu_b(r, c) * mu_b(r, c) + c1) *
                               (s_aa(r, c) + s_bb(r, c) + c2);
            acc += num / den;
        }
    return acc / static_cast<double>(mu_a.rows() * mu_a.cols());
}

SummaryStats summarize(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("summarize: empty input");
    SummaryStats s;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    s.median = sorted.size() % 2 == 1 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);

    if (values.size() == 1) {
        s.stddev = 0.0;
    } else {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(acc / (n - 1.0));
    }
    return s;
}

MetricReport make_report(std::vector<double> mse_values, std::vector<double> ssim_values) {
    MetricReport r;
    r.mse_stats = summarize(mse_values);
    r.ssim_stats = summarize(ssim_values);
    r.mse = std::move(mse_values);
    r.ssim = std::move(ssim_values);
    return r;
}

}  // namespace iscat
