#pragma once

#include "iscat/common.hpp"

namespace iscat {

enum class BesselKind { J, Y, H1 };

// Cylindrical Bessel functions of integer order n >= 0 for real arguments.
// J accepts x >= 0; Y and H1 require x > 0 (logarithmic singularity at 0).
double bessel_j(int order, double x);
double bessel_y(int order, double x);
Complex hankel1(int order, double x);  // J + iY, outgoing under exp(-i w t)

Complex cyl_bessel(int order, BesselKind kind, double x);

}  // namespace iscat
