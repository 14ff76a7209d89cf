#pragma once

#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "iscat/common.hpp"

namespace iscat {

// Applies a translation-invariant stencil to an (nx x ny) complex image by
// zero-padded cyclic convolution on the 2nx x 2ny torus. Offsets up to
// +-(n-1) stay uncontaminated by wrap-around, which makes the result equal to
// the dense block-Toeplitz product.
//
// apply() is const and safe to call from several threads at once; every call
// uses its own FFTW buffers against shared plans.
class FftConvolver {
  public:
    // stencil(di, dj) is the kernel tap for pixel offset (di, dj),
    // di in (-nx, nx], dj in (-ny, ny].
    FftConvolver(int nx, int ny, const std::function<Complex(int, int)>& stencil);
    ~FftConvolver();

    FftConvolver(const FftConvolver&) = delete;
    FftConvolver& operator=(const FftConvolver&) = delete;

    // y[i + nx*j] = sum_{m,n} stencil(i - m, j - n) * x[m + nx*n]
    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

    int nx() const;
    int ny() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace iscat
