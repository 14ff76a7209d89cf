#include "iscat/special.hpp"

#include <cmath>
#include <stdexcept>

namespace iscat {

namespace {
void check_order(int order) {
    if (order < 0) throw std::invalid_argument("bessel: order must be >= 0");
}
}  // namespace

double bessel_j(int order, double x) {
    check_order(order);
    if (x < 0.0) throw std::domain_error("bessel_j: x must be >= 0");
    return std::cyl_bessel_j(static_cast<double>(order), x);
}

double bessel_y(int order, double x) {
    check_order(order);
    if (x <= 0.0) throw std::domain_error("bessel_y: x must be > 0");
    return std::cyl_neumann(static_cast<double>(order), x);
}

Complex hankel1(int order, double x) {
    return {bessel_j(order, x), bessel_y(order, x)};
}

Complex cyl_bessel(int order, BesselKind kind, double x) {
    switch (kind) {
        case BesselKind::J:
            return {bessel_j(order, x), 0.0};
        case BesselKind::Y:
            return {bessel_y(order, x), 0.0};
        case BesselKind::H1:
            return hankel1(order, x);
    }
    throw std::invalid_argument("cyl_bessel: unknown kind");
}

}  // namespace iscat
