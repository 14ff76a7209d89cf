#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "iscat/common.hpp"
#include "iscat/fftconv.hpp"
#include "iscat/grid.hpp"

namespace iscat {

// Measurement geometry: transmitters/receivers strictly outside the DOI.
struct Scene {
    GridSpec grid;
    double k0 = 0.0;  // rad/m, 2*pi/lambda0
    std::vector<std::array<double, 2>> tx_positions;
    std::vector<std::array<double, 2>> rx_positions;

    int n_tx() const { return static_cast<int>(tx_positions.size()); }
    int n_rx() const { return static_cast<int>(rx_positions.size()); }
};

// n_tx = n_rx transceivers uniformly spaced on a circle of the given radius
// around the DOI center.
Scene make_scene(const GridSpec& grid, int n_tx, int n_rx, double ring_radius);
void validate_scene(const Scene& scene);

enum class FieldRole { EincDoi, EtotDoi, Current, EscaDoi, EscaMea };

// One complex column per transmitter; rows are DOI pixels for the DOI roles
// and receivers for EscaMea.
struct FieldSet {
    FieldRole role = FieldRole::EincDoi;
    Eigen::MatrixXcd values;
};

// Discretized free-space Green's operators, pulse basis with equivalent-disk
// (Richmond) cell integration. Entries carry the full a*k0^2 scaling:
//   diag   = (i pi k0 a_eq / 2) H1^(1)(k0 a_eq) - 1,      a_eq = sqrt(a/pi)
//   offdiag= (i pi k0 a_eq / 2) J1(k0 a_eq) H0^(1)(k0 d)
// so the state equation reads (I - GD diag(chi)) E_tot = E_inc.
class GreensOperators {
  public:
    explicit GreensOperators(const Scene& scene);

    const Scene& scene() const { return scene_; }
    Complex self_term() const { return self_; }
    Complex coupling(double dist) const;

    // DOI -> receivers map, (n_rx x n_pixels), dense
    const Eigen::MatrixXcd& gm() const { return gm_; }

    // DOI -> DOI dense matrix; built on first use and cached
    const Eigen::MatrixXcd& gd_dense() const;

    // FFT-accelerated applications (one DOI image, or one column per tx)
    Eigen::VectorXcd apply_gd(const Eigen::VectorXcd& x) const;
    Eigen::MatrixXcd apply_gd(const Eigen::MatrixXcd& x) const;
    // GD is symmetric, so GD^H x = conj(GD conj(x))
    Eigen::VectorXcd apply_gd_adjoint(const Eigen::VectorXcd& x) const;
    Eigen::MatrixXcd apply_gd_adjoint(const Eigen::MatrixXcd& x) const;

    Eigen::VectorXcd apply_gd_dense(const Eigen::VectorXcd& x) const;

  private:
    Scene scene_;
    Complex self_;
    Complex couple_coeff_;  // (i pi k0 a_eq / 2) J1(k0 a_eq)
    Eigen::MatrixXcd gm_;
    std::unique_ptr<FftConvolver> conv_;
    mutable std::unique_ptr<Eigen::MatrixXcd> gd_;
    mutable std::mutex gd_mutex_;
};

GreensOperators build_greens(const Scene& scene);

// Unit-strength line sources: E_inc(r) = (i/4) H0^(1)(k0 |r - r_tx|),
// time convention exp(-i w t).
FieldSet incident_field(const Scene& scene);

struct SolveOptions {
    enum class Backend { dense, krylov };
    Backend backend = Backend::krylov;
    double tol = 1e-10;    // relative residual
    int max_iter = 2000;
    bool dense_fallback = false;  // krylov only: retry with LU on non-convergence
};

struct SolveResult {
    FieldSet etot;     // EtotDoi
    FieldSet current;  // J = chi .* E_tot
    double residual = 0.0;  // max over transmitters of ||A e - b|| / ||b||
    int iterations = 0;     // total Krylov iterations (0 for dense)
};

SolveResult solve_total_field(const GreensOperators& ops, const ContrastMap& chi,
                              const FieldSet& einc, const SolveOptions& opt = {});

FieldSet scattered_at_receivers(const GreensOperators& ops, const FieldSet& current);

FieldSet scattered_in_doi(const FieldSet& etot, const FieldSet& einc);

// Adds circular complex Gaussian noise scaled so the realized Frobenius SNR
// equals snr_db exactly. snr_db = +inf returns the input unchanged.
FieldSet add_awgn(const FieldSet& fields, double snr_db, std::uint64_t rng_seed);

// Analytic series solution for a homogeneous circular cylinder centered at
// the DOI center, line-source illumination; independent of the MoM path.
FieldSet mie_reference(double eps_r, double radius, const Scene& scene);

}  // namespace iscat
