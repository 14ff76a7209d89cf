#include "iscat/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "iscat/rng.hpp"

namespace iscat {

GridSpec make_grid(int nx, int ny, double side_x, double side_y, double lambda0,
                   double center_x, double center_y) {
    if (nx < 4 || ny < 4) throw std::invalid_argument("make_grid: nx, ny must be >= 4");
    if (side_x <= 0.0 || side_y <= 0.0 || lambda0 <= 0.0)
        throw std::invalid_argument("make_grid: side lengths and lambda0 must be positive");
    return GridSpec{nx, ny, side_x, side_y, lambda0, center_x, center_y};
}

ContrastMap zero_contrast(const GridSpec& grid) {
    return ContrastMap{grid, Eigen::VectorXcd::Zero(grid.pixel_count())};
}

ContrastMap digit_phantom(const GlyphRaster& raster, double eps, const GridSpec& grid) {
    if (raster.width <= 0 || raster.height <= 0 || raster.pixels.empty())
        throw std::invalid_argument("digit_phantom: empty raster");
    if (eps < 1.0 || eps > 5.0) throw std::invalid_argument("digit_phantom: eps outside [1,5]");
    const std::uint8_t maxval = *std::max_element(raster.pixels.begin(), raster.pixels.end());
    if (maxval == 0) throw std::invalid_argument("digit_phantom: all-zero raster");
    const double threshold = maxval / 3.0;

    ContrastMap map = zero_contrast(grid);
    const Complex chi_val{eps - 1.0, 0.0};
    for (int iy = 0; iy < grid.ny; ++iy) {
        // grid row iy counts from the bottom; raster row 0 is the top
        const int row = static_cast<int>(((grid.ny - 1 - iy) + 0.5) * raster.height / grid.ny);
        for (int ix = 0; ix < grid.nx; ++ix) {
            const int col = static_cast<int>((ix + 0.5) * raster.width / grid.nx);
            if (raster.at(std::min(row, raster.height - 1), std::min(col, raster.width - 1)) >=
                threshold)
                map.chi[grid.index(ix, iy)] = chi_val;
        }
    }
    return map;
}

std::vector<std::array<double, 2>> RegularPolygon::vertices() const {
    std::vector<std::array<double, 2>> v(sides);
    for (int k = 0; k < sides; ++k) {
        const double a = rotation + 2.0 * M_PI * k / sides;
        v[k] = {cx + circumradius * std::cos(a), cy + circumradius * std::sin(a)};
    }
    return v;
}

bool RegularPolygon::contains(double x, double y) const {
    // counter-clockwise vertices: inside iff left of every edge
    const auto v = vertices();
    for (int k = 0; k < sides; ++k) {
        const auto& a = v[k];
        const auto& b = v[(k + 1) % sides];
        const double cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
        if (cross < 0.0) return false;
    }
    return true;
}

namespace {

// Paints pixels whose centers fall inside the polygon; returns painted count.
int paint_polygon(const RegularPolygon& poly, Complex chi_val, ContrastMap& map) {
    const GridSpec& g = map.grid;
    int painted = 0;
    for (int iy = 0; iy < g.ny; ++iy) {
        const double y = g.pixel_y(iy);
        for (int ix = 0; ix < g.nx; ++ix) {
            if (poly.contains(g.pixel_x(ix), y)) {
                map.chi[g.index(ix, iy)] = chi_val;
                ++painted;
            }
        }
    }
    return painted;
}

}  // namespace

ContrastMap polygon_phantom(const PhantomRecipe& recipe, const GridSpec& grid) {
    if (recipe.kind != PhantomRecipe::Kind::polygon)
        throw std::invalid_argument("polygon_phantom: recipe kind mismatch");
    if (recipe.eps_lo < 1.0 || recipe.eps_hi < recipe.eps_lo)
        throw std::invalid_argument("polygon_phantom: bad eps range");

    Rng rng(recipe.rng_seed);
    ContrastMap map = zero_contrast(grid);
    const double lam = grid.lambda0;
    const int count = rng.uniform_int(recipe.min_polygons, recipe.max_polygons);

    const double x_lo = grid.center_x - 0.5 * grid.side_x;
    const double y_lo = grid.center_y - 0.5 * grid.side_y;

    for (int p = 0; p < count; ++p) {
        constexpr int kMaxRetries = 100;
        bool placed = false;
        for (int attempt = 0; attempt < kMaxRetries && !placed; ++attempt) {
            RegularPolygon poly;
            poly.cx = x_lo + rng.uniform() * grid.side_x;
            poly.cy = y_lo + rng.uniform() * grid.side_y;
            poly.circumradius =
                rng.uniform(recipe.circumradius_lo_lambda * lam, recipe.circumradius_hi_lambda * lam);
            poly.sides = rng.uniform_int(3, 7);
            poly.rotation = rng.uniform(0.0, 2.0 * M_PI);
            const double eps = rng.uniform(recipe.eps_lo, recipe.eps_hi);
            ContrastMap trial = map;
            if (paint_polygon(poly, Complex{eps - 1.0, 0.0}, trial) > 0) {
                map = std::move(trial);
                placed = true;
            }
        }
        if (!placed)
            throw NumericError("polygon_phantom: could not place a polygon with nonempty support");
    }
    return map;
}

ContrastMap austria_phantom(double eps_disk_left, double eps_disk_right, double eps_ring,
                            const GridSpec& grid) {
    if (eps_disk_left < 1.0 || eps_disk_right < 1.0 || eps_ring < 1.0)
        throw std::invalid_argument("austria_phantom: eps must be >= 1");
    const double lam = grid.lambda0;
    const double disk_r = 0.56 * lam;
    const double ring_ri = 0.7 * lam;
    const double ring_ro = 1.4 * lam;
    const double lx = grid.center_x - 0.7 * lam, rx = grid.center_x + 0.7 * lam;
    const double dy = grid.center_y + 1.4 * lam;
    const double acx = grid.center_x, acy = grid.center_y - 0.7 * lam;

    ContrastMap map = zero_contrast(grid);
    for (int iy = 0; iy < grid.ny; ++iy) {
        const double y = grid.pixel_y(iy);
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double x = grid.pixel_x(ix);
            Complex v{0.0, 0.0};
            const double ra = std::hypot(x - acx, y - acy);
            if (ra >= ring_ri && ra <= ring_ro) v = Complex{eps_ring - 1.0, 0.0};
            if (std::hypot(x - lx, y - dy) <= disk_r) v = Complex{eps_disk_left - 1.0, 0.0};
            if (std::hypot(x - rx, y - dy) <= disk_r) v = Complex{eps_disk_right - 1.0, 0.0};
            map.chi[grid.index(ix, iy)] = v;
        }
    }
    return map;
}

ContrastMap disk_phantom(double eps, double radius, double cx, double cy, const GridSpec& grid) {
    if (eps < 1.0) throw std::invalid_argument("disk_phantom: eps must be >= 1");
    if (radius <= 0.0) throw std::invalid_argument("disk_phantom: radius must be positive");
    ContrastMap map = zero_contrast(grid);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix)
            if (std::hypot(grid.pixel_x(ix) - cx, grid.pixel_y(iy) - cy) <= radius)
                map.chi[grid.index(ix, iy)] = Complex{eps - 1.0, 0.0};
    return map;
}

ContrastMap generate_phantom(const PhantomRecipe& recipe, const GridSpec& grid) {
    switch (recipe.kind) {
        case PhantomRecipe::Kind::digit: {
            Rng rng(recipe.rng_seed);
            const int digit = rng.uniform_int(0, 9);
            const double eps = rng.uniform(recipe.eps_lo, recipe.eps_hi);
            const GlyphRaster glyph = synth_digit_glyph(digit, rng.next_u64());
            return digit_phantom(glyph, eps, grid);
        }
        case PhantomRecipe::Kind::polygon:
            return polygon_phantom(recipe, grid);
        case PhantomRecipe::Kind::austria:
            return austria_phantom(recipe.eps_disk_left, recipe.eps_disk_right, recipe.eps_ring,
                                   grid);
        case PhantomRecipe::Kind::disk:
            return disk_phantom(recipe.disk_eps, recipe.disk_radius_lambda * grid.lambda0,
                                grid.center_x + recipe.disk_center_x_lambda * grid.lambda0,
                                grid.center_y + recipe.disk_center_y_lambda * grid.lambda0, grid);
    }
    throw std::invalid_argument("generate_phantom: unknown kind");
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncationError(std::string("idx: truncated while reading ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

std::vector<GlyphRaster> load_idx_images(const std::string& path, int max_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("idx: cannot open " + path);
    const std::uint32_t magic = read_u32_be(in, "magic");
    if (magic != 0x00000803u) throw BadMagicError("idx: bad magic (expected 0x00000803)");
    const std::uint32_t count = read_u32_be(in, "count");
    const std::uint32_t rows = read_u32_be(in, "rows");
    const std::uint32_t cols = read_u32_be(in, "cols");
    if (rows == 0 || cols == 0) throw IoError("idx: zero image dimensions");

    const std::uint32_t take =
        max_count > 0 ? std::min<std::uint32_t>(count, static_cast<std::uint32_t>(max_count))
                      : count;
    std::vector<GlyphRaster> out(take);
    for (std::uint32_t i = 0; i < take; ++i) {
        GlyphRaster& g = out[i];
        g.width = static_cast<int>(cols);
        g.height = static_cast<int>(rows);
        g.pixels.resize(rows * cols);
        if (!in.read(reinterpret_cast<char*>(g.pixels.data()), rows * cols))
            throw TruncationError("idx: truncated image payload");
    }
    return out;
}

namespace {

struct Seg {
    double x0, y0, x1, y1;
};

double dist_to_seg(double px, double py, const Seg& s) {
    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (s.x0 + t * vx), py - (s.y0 + t * vy));
}

// Stroke skeletons on a unit box (x right, y up), per digit.
std::vector<Seg> digit_strokes(int digit) {
    const double L = 0.15, R = 0.85, T = 0.92, B = 0.08, M = 0.5;
    switch (digit) {
        case 0:
            return {{L, B, R, B}, {R, B, R, T}, {R, T, L, T}, {L, T, L, B}};
        case 1:
            return {{M, B, M, T}, {M, T, 0.3, 0.75}};
        case 2:
            return {{L, T, R, T}, {R, T, R, M}, {R, M, L, M}, {L, M, L, B}, {L, B, R, B}};
        case 3:
            return {{L, T, R, T}, {R, T, R, B}, {L, M, R, M}, {L, B, R, B}};
        case 4:
            return {{L, T, L, M}, {L, M, R, M}, {R, T, R, B}};
        case 5:
            return {{R, T, L, T}, {L, T, L, M}, {L, M, R, M}, {R, M, R, B}, {R, B, L, B}};
        case 6:
            return {{R, T, L, T}, {L, T, L, B}, {L, B, R, B}, {R, B, R, M}, {R, M, L, M}};
        case 7:
            return {{L, T, R, T}, {R, T, M, B}};
        case 8:
            return {{L, B, R, B}, {R, B, R, T}, {R, T, L, T}, {L, T, L, B}, {L, M, R, M}};
        case 9:
            return {{R, M, L, M}, {L, M, L, T}, {L, T, R, T}, {R, T, R, B}, {R, B, L, B}};
        default:
            throw std::invalid_argument("synth_digit_glyph: digit must be 0..9");
    }
}

}  // namespace

GlyphRaster synth_digit_glyph(int digit, std::uint64_t seed) {
    Rng rng(seed);
    const int n = 28;
    const double scale = rng.uniform(0.75, 1.05);
    const double ox = rng.uniform(-0.08, 0.08);
    const double oy = rng.uniform(-0.08, 0.08);
    const double half_width = rng.uniform(0.045, 0.075);  // stroke half-thickness, box units

    auto strokes = digit_strokes(digit);
    for (auto& s : strokes) {
        s.x0 = 0.5 + (s.x0 - 0.5) * scale + ox;
        s.x1 = 0.5 + (s.x1 - 0.5) * scale + ox;
        s.y0 = 0.5 + (s.y0 - 0.5) * scale + oy;
        s.y1 = 0.5 + (s.y1 - 0.5) * scale + oy;
    }

    GlyphRaster g;
    g.width = n;
    g.height = n;
    g.pixels.assign(n * n, 0);
    for (int row = 0; row < n; ++row) {
        const double y = 1.0 - (row + 0.5) / n;  // row 0 is the top
        for (int col = 0; col < n; ++col) {
            const double x = (col + 0.5) / n;
            for (const auto& s : strokes) {
                if (dist_to_seg(x, y, s) <= half_width) {
                    g.pixels[row * n + col] = 255;
                    break;
                }
            }
        }
    }
    return g;
}

}  // namespace iscat
