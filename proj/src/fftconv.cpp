#include "iscat/fftconv.hpp"

#include <fftw3.h>

#include <cstring>
#include <stdexcept>

namespace iscat {

namespace {

struct FftwBuffer {
    fftw_complex* p = nullptr;
    explicit FftwBuffer(std::size_t n) {
        p = fftw_alloc_complex(n);
        if (!p) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace

struct FftConvolver::Impl {
    int nx, ny;    // image dims
    int px, py;    // padded dims (2nx, 2ny)
    std::size_t padded;
    std::vector<Complex> kernel_hat;  // FFT of the embedded stencil
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    ~Impl() {
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
};

FftConvolver::FftConvolver(int nx, int ny, const std::function<Complex(int, int)>& stencil)
    : impl_(std::make_unique<Impl>()) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("FftConvolver: bad dimensions");
    impl_->nx = nx;
    impl_->ny = ny;
    impl_->px = 2 * nx;
    impl_->py = 2 * ny;
    impl_->padded = static_cast<std::size_t>(impl_->px) * impl_->py;

    FftwBuffer a(impl_->padded), b(impl_->padded);
    // FFTW_ESTIMATE keeps plan selection (and therefore bit-level output)
    // independent of runtime measurements.
    impl_->fwd = fftw_plan_dft_2d(impl_->py, impl_->px, a.p, b.p, FFTW_FORWARD, FFTW_ESTIMATE);
    impl_->bwd = fftw_plan_dft_2d(impl_->py, impl_->px, a.p, b.p, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!impl_->fwd || !impl_->bwd) throw NumericError("FftConvolver: plan creation failed");

    // embed the stencil: index p maps to offset p (p <= n) or p - 2n (p > n)
    for (int q = 0; q < impl_->py; ++q) {
        const int dj = q <= ny ? q : q - impl_->py;
        for (int p = 0; p < impl_->px; ++p) {
            const int di = p <= nx ? p : p - impl_->px;
            const Complex v = stencil(di, dj);
            a.p[p + static_cast<std::size_t>(impl_->px) * q][0] = v.real();
            a.p[p + static_cast<std::size_t>(impl_->px) * q][1] = v.imag();
        }
    }
    fftw_execute_dft(impl_->fwd, a.p, b.p);
    impl_->kernel_hat.resize(impl_->padded);
    std::memcpy(impl_->kernel_hat.data(), b.p, impl_->padded * sizeof(Complex));
}

FftConvolver::~FftConvolver() = default;

int FftConvolver::nx() const { return impl_->nx; }
int FftConvolver::ny() const { return impl_->ny; }

Eigen::VectorXcd FftConvolver::apply(const Eigen::VectorXcd& x) const {
    const int nx = impl_->nx, ny = impl_->ny, px = impl_->px;
    if (x.size() != static_cast<Eigen::Index>(nx) * ny)
        throw std::invalid_argument("FftConvolver::apply: size mismatch");

    FftwBuffer in(impl_->padded), out(impl_->padded);
    std::memset(in.p, 0, impl_->padded * sizeof(fftw_complex));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Complex v = x[i + nx * j];
            in.p[i + static_cast<std::size_t>(px) * j][0] = v.real();
            in.p[i + static_cast<std::size_t>(px) * j][1] = v.imag();
        }

    fftw_execute_dft(impl_->fwd, in.p, out.p);
    const double scale = 1.0 / static_cast<double>(impl_->padded);
    for (std::size_t k = 0; k < impl_->padded; ++k) {
        const Complex v = Complex(out.p[k][0], out.p[k][1]) * impl_->kernel_hat[k] * scale;
        out.p[k][0] = v.real();
        out.p[k][1] = v.imag();
    }
    fftw_execute_dft(impl_->bwd, out.p, in.p);

    Eigen::VectorXcd y(static_cast<Eigen::Index>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const auto& c = in.p[i + static_cast<std::size_t>(px) * j];
            y[i + nx * j] = Complex(c[0], c[1]);
        }
    return y;
}

}  // namespace iscat
