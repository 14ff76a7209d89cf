#include "iscat/forward.hpp"

#include <cmath>
#include <sstream>

#include "iscat/parallel.hpp"
#include "iscat/rng.hpp"
#include "iscat/special.hpp"

namespace iscat {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
const Complex kI{0.0, 1.0};
}  // namespace

Scene make_scene(const GridSpec& grid, int n_tx, int n_rx, double ring_radius) {
    if (n_tx < 1 || n_rx < 1) throw std::invalid_argument("make_scene: need at least one tx/rx");
    if (ring_radius <= 0.0) throw std::invalid_argument("make_scene: ring radius must be positive");
    Scene s;
    s.grid = grid;
    s.k0 = 2.0 * kPi / grid.lambda0;
    s.tx_positions.resize(n_tx);
    s.rx_positions.resize(n_rx);
    for (int v = 0; v < n_tx; ++v) {
        const double a = 2.0 * kPi * v / n_tx;
        s.tx_positions[v] = {grid.center_x + ring_radius * std::cos(a),
                             grid.center_y + ring_radius * std::sin(a)};
    }
    for (int w = 0; w < n_rx; ++w) {
        const double a = 2.0 * kPi * w / n_rx;
        s.rx_positions[w] = {grid.center_x + ring_radius * std::cos(a),
                             grid.center_y + ring_radius * std::sin(a)};
    }
    validate_scene(s);
    return s;
}

void validate_scene(const Scene& s) {
    if (s.grid.nx < 4 || s.grid.ny < 4) throw std::invalid_argument("scene: invalid grid");
    if (s.k0 <= 0.0) throw std::invalid_argument("scene: invalid wavenumber");
    const double x_lo = s.grid.center_x - 0.5 * s.grid.side_x;
    const double x_hi = s.grid.center_x + 0.5 * s.grid.side_x;
    const double y_lo = s.grid.center_y - 0.5 * s.grid.side_y;
    const double y_hi = s.grid.center_y + 0.5 * s.grid.side_y;
    auto inside = [&](const std::array<double, 2>& p) {
        return p[0] >= x_lo && p[0] <= x_hi && p[1] >= y_lo && p[1] <= y_hi;
    };
    for (const auto& p : s.tx_positions)
        if (inside(p)) throw std::invalid_argument("scene: transmitter inside the DOI");
    for (const auto& p : s.rx_positions)
        if (inside(p)) throw std::invalid_argument("scene: receiver inside the DOI");
}

GreensOperators::GreensOperators(const Scene& scene) : scene_(scene) {
    validate_scene(scene_);
    const GridSpec& g = scene_.grid;
    const double k0 = scene_.k0;
    const double a_eq = std::sqrt(g.cell_area() / kPi);
    const double x = k0 * a_eq;

    self_ = kI * (kPi * x / 2.0) * hankel1(1, x) - 1.0;
    couple_coeff_ = kI * (kPi * x / 2.0) * bessel_j(1, x);

    // offset table over |di|, |dj| so every Hankel argument is evaluated once
    const int nx = g.nx, ny = g.ny;
    Eigen::MatrixXcd table(nx + 1, ny + 1);
    for (int dj = 0; dj <= ny; ++dj)
        for (int di = 0; di <= nx; ++di) {
            if (di == 0 && dj == 0) {
                table(0, 0) = self_;
                continue;
            }
            const double d = std::hypot(di * g.dx(), dj * g.dy());
            table(di, dj) = couple_coeff_ * hankel1(0, k0 * d);
        }
    conv_ = std::make_unique<FftConvolver>(
        nx, ny, [&table](int di, int dj) { return table(std::abs(di), std::abs(dj)); });

    gm_.resize(scene_.n_rx(), g.pixel_count());
    for (int w = 0; w < scene_.n_rx(); ++w) {
        const auto& rp = scene_.rx_positions[w];
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const double d = std::hypot(g.pixel_x(ix) - rp[0], g.pixel_y(iy) - rp[1]);
                gm_(w, g.index(ix, iy)) = couple_coeff_ * hankel1(0, k0 * d);
            }
    }
}

Complex GreensOperators::coupling(double dist) const {
    if (dist <= 0.0) throw std::invalid_argument("coupling: distance must be positive");
    return couple_coeff_ * hankel1(0, scene_.k0 * dist);
}

const Eigen::MatrixXcd& GreensOperators::gd_dense() const {
    std::lock_guard<std::mutex> lock(gd_mutex_);
    if (!gd_) {
        const GridSpec& g = scene_.grid;
        const int nx = g.nx, ny = g.ny, n = g.pixel_count();
        Eigen::MatrixXcd table(nx + 1, ny + 1);
        table(0, 0) = self_;
        for (int dj = 0; dj <= ny; ++dj)
            for (int di = 0; di <= nx; ++di) {
                if (di == 0 && dj == 0) continue;
                const double d = std::hypot(di * g.dx(), dj * g.dy());
                table(di, dj) = couple_coeff_ * hankel1(0, scene_.k0 * d);
            }
        auto m = std::make_unique<Eigen::MatrixXcd>(n, n);
        for (int q = 0; q < n; ++q) {
            const int qx = q % nx, qy = q / nx;
            for (int p = 0; p < n; ++p) {
                const int px = p % nx, py = p / nx;
                (*m)(p, q) = table(std::abs(px - qx), std::abs(py - qy));
            }
        }
        gd_ = std::move(m);
    }
    return *gd_;
}

Eigen::VectorXcd GreensOperators::apply_gd(const Eigen::VectorXcd& x) const {
    return conv_->apply(x);
}

Eigen::MatrixXcd GreensOperators::apply_gd(const Eigen::MatrixXcd& x) const {
    Eigen::MatrixXcd y(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) y.col(c) = conv_->apply(x.col(c));
    return y;
}

Eigen::VectorXcd GreensOperators::apply_gd_adjoint(const Eigen::VectorXcd& x) const {
    return conv_->apply(x.conjugate()).conjugate();
}

Eigen::MatrixXcd GreensOperators::apply_gd_adjoint(const Eigen::MatrixXcd& x) const {
    Eigen::MatrixXcd y(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) y.col(c) = apply_gd_adjoint(x.col(c).eval());
    return y;
}

Eigen::VectorXcd GreensOperators::apply_gd_dense(const Eigen::VectorXcd& x) const {
    return gd_dense() * x;
}

GreensOperators build_greens(const Scene& scene) { return GreensOperators(scene); }

FieldSet incident_field(const Scene& scene) {
    const GridSpec& g = scene.grid;
    const double tiny = 1e-12 * g.lambda0;
    FieldSet f;
    f.role = FieldRole::EincDoi;
    f.values.resize(g.pixel_count(), scene.n_tx());
    for (int v = 0; v < scene.n_tx(); ++v) {
        const auto& tp = scene.tx_positions[v];
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const double d = std::hypot(g.pixel_x(ix) - tp[0], g.pixel_y(iy) - tp[1]);
                if (d < tiny)
                    throw NumericError("incident_field: transmitter coincides with a pixel center");
                f.values(g.index(ix, iy), v) = 0.25 * kI * hankel1(0, scene.k0 * d);
            }
    }
    return f;
}

namespace {

// BiCGStab with true-residual acceptance and restart on breakdown.
// Returns iterations used; throws NumericError on non-convergence.
int bicgstab(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
             const Eigen::VectorXcd& b, Eigen::VectorXcd& x, double tol, int max_iter) {
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        return 0;
    }
    Eigen::VectorXcd r = b - apply(x);
    if (r.norm() / bnorm <= tol) return 0;
    Eigen::VectorXcd rhat = r;
    Eigen::VectorXcd p = Eigen::VectorXcd::Zero(b.size());
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(b.size());
    Complex rho{1.0, 0.0}, alpha{1.0, 0.0}, omega{1.0, 0.0};
    const double breakdown = 1e-30;

    int it = 0;
    while (it < max_iter) {
        ++it;
        const Complex rho1 = rhat.dot(r);  // rhat^H r
        if (std::abs(rho1) < breakdown * bnorm * bnorm) {
            // restart with the current residual
            r = b - apply(x);
            rhat = r;
            p.setZero();
            v.setZero();
            rho = alpha = omega = Complex{1.0, 0.0};
            if (r.norm() / bnorm <= tol) return it;
            continue;
        }
        const Complex beta = (rho1 / rho) * (alpha / omega);
        p = r + beta * (p - omega * v);
        v = apply(p);
        const Complex denom = rhat.dot(v);
        if (std::abs(denom) < breakdown) {
            r = b - apply(x);
            rhat = r;
            p.setZero();
            v.setZero();
            rho = alpha = omega = Complex{1.0, 0.0};
            continue;
        }
        alpha = rho1 / denom;
        const Eigen::VectorXcd s = r - alpha * v;
        if (s.norm() / bnorm <= tol) {
            x += alpha * p;
            const double true_res = (b - apply(x)).norm() / bnorm;
            if (true_res <= tol) return it;
            r = b - apply(x);
            rhat = r;
            p.setZero();
            v.setZero();
            rho = alpha = omega = Complex{1.0, 0.0};
            continue;
        }
        const Eigen::VectorXcd t = apply(s);
        const double tt = t.squaredNorm();
        if (tt < breakdown) {
            r = b - apply(x);
            rhat = r;
            p.setZero();
            v.setZero();
            rho = alpha = omega = Complex{1.0, 0.0};
            continue;
        }
        omega = t.dot(s) / tt;
        x += alpha * p + omega * s;
        r = s - omega * t;
        rho = rho1;
        if (r.norm() / bnorm <= tol) {
            const double true_res = (b - apply(x)).norm() / bnorm;
            if (true_res <= tol) return it;
        }
    }
    std::ostringstream msg;
    msg << "bicgstab: no convergence in " << max_iter
        << " iterations (relative residual " << (b - apply(x)).norm() / bnorm << ")";
    throw NumericError(msg.str());
}

}  // namespace

SolveResult solve_total_field(const GreensOperators& ops, const ContrastMap& chi,
                              const FieldSet& einc, const SolveOptions& opt) {
    const GridSpec& g = ops.scene().grid;
    const int n = g.pixel_count();
    const int n_tx = ops.scene().n_tx();
    if (chi.grid != g) throw std::invalid_argument("solve_total_field: grid mismatch");
    if (einc.values.rows() != n || einc.values.cols() != n_tx)
        throw std::invalid_argument("solve_total_field: incident field shape mismatch");
    if (!chi.chi.allFinite()) throw std::invalid_argument("solve_total_field: non-finite contrast");

    SolveResult res;
    res.etot.role = FieldRole::EtotDoi;
    res.etot.values.resize(n, n_tx);

    const Eigen::VectorXcd& x = chi.chi;
    auto system_apply = [&](const Eigen::VectorXcd& e) -> Eigen::VectorXcd {
        return e - ops.apply_gd((x.array() * e.array()).matrix().eval());
    };

    if (opt.backend == SolveOptions::Backend::dense) {
        Eigen::MatrixXcd A = -ops.gd_dense() * x.asDiagonal();
        A.diagonal().array() += 1.0;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
        res.etot.values = lu.solve(einc.values);
    } else {
        std::vector<int> iters(n_tx, 0);
        std::vector<std::string> failures(n_tx);
        parallel_for(n_tx, [&](int v) {
            Eigen::VectorXcd e = einc.values.col(v);
            try {
                iters[v] = bicgstab(system_apply, einc.values.col(v), e, opt.tol, opt.max_iter);
                res.etot.values.col(v) = e;
            } catch (const NumericError& err) {
                failures[v] = err.what();
            }
        });
        for (int v = 0; v < n_tx; ++v) {
            if (!failures[v].empty()) {
                if (!opt.dense_fallback) throw NumericError(failures[v]);
                SolveOptions dense_opt = opt;
                dense_opt.backend = SolveOptions::Backend::dense;
                return solve_total_field(ops, chi, einc, dense_opt);
            }
            res.iterations += iters[v];
        }
    }

    double worst = 0.0;
    for (int v = 0; v < n_tx; ++v) {
        const Eigen::VectorXcd r =
            system_apply(res.etot.values.col(v).eval()) - einc.values.col(v);
        worst = std::max(worst, r.norm() / einc.values.col(v).norm());
    }
    res.residual = worst;
    const double accept = std::max(opt.tol * 50.0, 1e-10);
    if (!(worst <= accept)) {
        std::ostringstream msg;
        msg << "solve_total_field: residual " << worst << " exceeds tolerance " << accept;
        throw NumericError(msg.str());
    }

    res.current.role = FieldRole::Current;
    res.current.values = res.etot.values.array().colwise() * x.array();
    return res;
}

FieldSet scattered_at_receivers(const GreensOperators& ops, const FieldSet& current) {
    if (current.values.rows() != ops.scene().grid.pixel_count())
        throw std::invalid_argument("scattered_at_receivers: current shape mismatch");
    FieldSet f;
    f.role = FieldRole::EscaMea;
    f.values = ops.gm() * current.values;
    return f;
}

FieldSet scattered_in_doi(const FieldSet& etot, const FieldSet& einc) {
    if (etot.values.rows() != einc.values.rows() || etot.values.cols() != einc.values.cols())
        throw std::invalid_argument("scattered_in_doi: shape mismatch");
    FieldSet f;
    f.role = FieldRole::EscaDoi;
    f.values = etot.values - einc.values;
    return f;
}

FieldSet add_awgn(const FieldSet& fields, double snr_db, std::uint64_t rng_seed) {
    if (std::isinf(snr_db) && snr_db > 0.0) return fields;
    const double signal = fields.values.norm();
    if (signal == 0.0) throw std::invalid_argument("add_awgn: cannot define SNR for a zero field");

    Rng rng(rng_seed);
    Eigen::MatrixXcd noise(fields.values.rows(), fields.values.cols());
    for (Eigen::Index c = 0; c < noise.cols(); ++c)
        for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, c) = rng.cnormal();

    // exact-power scaling: realized SNR equals the target identically
    const double target_noise_norm = signal * std::pow(10.0, -snr_db / 20.0);
    noise *= target_noise_norm / noise.norm();

    FieldSet out;
    out.role = fields.role;
    out.values = fields.values + noise;
    return out;
}

FieldSet mie_reference(double eps_r, double radius, const Scene& scene) {
    if (eps_r < 1.0) throw std::invalid_argument("mie_reference: eps_r must be >= 1");
    if (radius <= 0.0) throw std::invalid_argument("mie_reference: radius must be positive");

    const double k0 = scene.k0;
    const double k1 = k0 * std::sqrt(eps_r);
    const double cx = scene.grid.center_x, cy = scene.grid.center_y;
    const int n_tx = scene.n_tx(), n_rx = scene.n_rx();

    FieldSet out;
    out.role = FieldRole::EscaMea;
    out.values = Eigen::MatrixXcd::Zero(n_rx, n_tx);
    if (eps_r == 1.0) return out;

    std::vector<double> rho_t(n_tx), phi_t(n_tx), rho_r(n_rx), phi_r(n_rx);
    for (int v = 0; v < n_tx; ++v) {
        const double x = scene.tx_positions[v][0] - cx, y = scene.tx_positions[v][1] - cy;
        rho_t[v] = std::hypot(x, y);
        phi_t[v] = std::atan2(y, x);
        if (rho_t[v] <= radius)
            throw std::invalid_argument("mie_reference: transmitter inside the cylinder");
    }
    for (int w = 0; w < n_rx; ++w) {
        const double x = scene.rx_positions[w][0] - cx, y = scene.rx_positions[w][1] - cy;
        rho_r[w] = std::hypot(x, y);
        phi_r[w] = std::atan2(y, x);
        if (rho_r[w] <= radius)
            throw std::invalid_argument("mie_reference: receiver inside the cylinder");
    }

    auto jn = [](int n, double x) { return bessel_j(n, x); };
    auto jn_d = [&](int n, double x) {
        return n == 0 ? -bessel_j(1, x) : 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x));
    };
    auto hn = [](int n, double x) { return hankel1(n, x); };
    auto hn_d = [&](int n, double x) -> Complex {
        if (n == 0) return -hankel1(1, x);
        return 0.5 * (hankel1(n - 1, x) - hankel1(n + 1, x));
    };

    // scattering coefficient of harmonic n for a penetrable TM cylinder
    auto coeff = [&](int n) -> Complex {
        const double x0 = k0 * radius, x1 = k1 * radius;
        const Complex num = k1 * jn_d(n, x1) * jn(n, x0) - k0 * jn(n, x1) * jn_d(n, x0);
        const Complex den = k1 * jn_d(n, x1) * hn(n, x0) - k0 * jn(n, x1) * hn_d(n, x0);
        return -num / den;
    };

    constexpr int kMaxOrder = 300;
    constexpr double kTol = 1e-12;
    const int min_order = static_cast<int>(std::ceil(k1 * radius)) + 4;

    // radii are shared (transceiver circles), so the radial factors per order
    // are scalars; angular structure only enters through cos(n dphi)
    const double rs = rho_t[0], rr = rho_r[0];
    for (int v = 1; v < n_tx; ++v)
        if (std::abs(rho_t[v] - rs) > 1e-9 * rs)
            throw std::invalid_argument("mie_reference: transmitters must share a circle");
    for (int w = 1; w < n_rx; ++w)
        if (std::abs(rho_r[w] - rr) > 1e-9 * rr)
            throw std::invalid_argument("mie_reference: receivers must share a circle");

    double max_partial = 0.0;
    bool converged = false;
    for (int n = 0; n <= kMaxOrder; ++n) {
        const Complex radial = coeff(n) * hn(n, k0 * rs) * hn(n, k0 * rr);
        const double scale = (n == 0 ? 1.0 : 2.0) * std::abs(radial);
        for (int v = 0; v < n_tx; ++v)
            for (int w = 0; w < n_rx; ++w) {
                const double dphi = phi_r[w] - phi_t[v];
                const Complex term = (n == 0 ? 1.0 : 2.0) * radial * std::cos(n * dphi);
                out.values(w, v) += 0.25 * kI * term;
            }
        max_partial = std::max(max_partial, out.values.cwiseAbs().maxCoeff());
        if (n >= min_order && max_partial > 0.0 && scale / (4.0 * max_partial) < kTol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericError("mie_reference: series did not converge");
    return out;
}

}  // namespace iscat
