#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iscat/common.hpp"

namespace iscat {

// Uniform raster over the rectangular domain of interest (DOI).
// Pixel (ix, iy) has linear index ix + nx*iy; centers form a lattice
// symmetric about (center_x, center_y).
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double side_x = 0.0;  // meters
    double side_y = 0.0;  // meters
    double lambda0 = 0.0;  // free-space wavelength, meters
    double center_x = 0.0;
    double center_y = 0.0;

    int pixel_count() const { return nx * ny; }
    double dx() const { return side_x / nx; }
    double dy() const { return side_y / ny; }
    double cell_area() const { return dx() * dy(); }
    double pixel_x(int ix) const { return center_x + ((ix + 0.5) / nx - 0.5) * side_x; }
    double pixel_y(int iy) const { return center_y + ((iy + 0.5) / ny - 0.5) * side_y; }
    int index(int ix, int iy) const { return ix + nx * iy; }

    bool operator==(const GridSpec&) const = default;
};

GridSpec make_grid(int nx, int ny, double side_x, double side_y, double lambda0,
                   double center_x = 0.0, double center_y = 0.0);

// Complex contrast chi = eps_r - 1 per pixel. Generated phantoms are lossless
// (Im chi = 0) but the type carries complex values throughout.
struct ContrastMap {
    GridSpec grid;
    Eigen::VectorXcd chi;
};

ContrastMap zero_contrast(const GridSpec& grid);

// 8-bit grayscale raster, row-major, row 0 at the top (IDX convention).
struct GlyphRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[row * width + col]; }
};

struct PhantomRecipe {
    enum class Kind { digit, polygon, austria, disk };

    Kind kind = Kind::digit;
    double eps_lo = 1.0;
    double eps_hi = 5.0;
    std::uint64_t rng_seed = 0;

    // polygon
    int min_polygons = 1;
    int max_polygons = 3;
    double circumradius_lo_lambda = 0.1;
    double circumradius_hi_lambda = 1.6;

    // austria (fixed geometry, eps per region)
    double eps_disk_left = 2.0;
    double eps_disk_right = 2.0;
    double eps_ring = 2.0;

    // disk
    double disk_eps = 2.0;
    double disk_radius_lambda = 0.5;
    double disk_center_x_lambda = 0.0;
    double disk_center_y_lambda = 0.0;
};

// Thresholds the raster at max/3 (below -> air) and fills the support with a
// homogeneous contrast eps-1; nearest-neighbor resampling onto the grid.
ContrastMap digit_phantom(const GlyphRaster& raster, double eps, const GridSpec& grid);

// 1..3 regular polygons at random positions; circumradius in
// [0.1, 1.6] lambda0, 3..7 sides, eps uniform in [eps_lo, eps_hi].
// Later polygons overwrite earlier ones where they overlap.
ContrastMap polygon_phantom(const PhantomRecipe& recipe, const GridSpec& grid);

// Two disks (radius 0.56 lambda0 at (+-0.7, 1.4) lambda0) over an annulus
// (radii 0.7/1.4 lambda0 centered at (0, -0.7) lambda0); disks take precedence.
ContrastMap austria_phantom(double eps_disk_left, double eps_disk_right, double eps_ring,
                            const GridSpec& grid);

ContrastMap disk_phantom(double eps, double radius, double cx, double cy, const GridSpec& grid);

// Dispatch on recipe.kind; rng_seed fully determines the output.
ContrastMap generate_phantom(const PhantomRecipe& recipe, const GridSpec& grid);

// Convex regular polygon used by polygon_phantom; exposed for rasterization tests.
struct RegularPolygon {
    double cx = 0.0;
    double cy = 0.0;
    double circumradius = 0.0;
    double rotation = 0.0;
    int sides = 3;

    std::vector<std::array<double, 2>> vertices() const;
    bool contains(double x, double y) const;  // half-plane intersection
};

// IDX ubyte image file (big-endian magic 0x00000803).
std::vector<GlyphRaster> load_idx_images(const std::string& path, int max_count = 0);

// Procedural stroke-drawn digit glyph, 28x28, deterministic in (digit, seed).
GlyphRaster synth_digit_glyph(int digit, std::uint64_t seed);

}  // namespace iscat
