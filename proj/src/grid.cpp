#include "aronsson/grid.hpp"

#include <algorithm>
#include <cmath>

namespace aronsson {

Grid2D::Grid2D(int nx_, int ny_, double x0_, double y0_, double h_)
    : nx(nx_), ny(ny_), x0(x0_), y0(y0_), h(h_) {
    if (nx < 3 || ny < 3)
        throw std::invalid_argument("Grid2D: need nx >= 3 and ny >= 3, got " +
                                    std::to_string(nx) + "x" + std::to_string(ny));
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("Grid2D: spacing h must be positive and finite");
}

Grid2D Grid2D::over_rectangle(double ax, double ay, double bx, double by, int n) {
    if (n < 3) throw std::invalid_argument("Grid2D::over_rectangle: need n >= 3");
    if (!(bx > ax) || !(by > ay))
        throw std::invalid_argument("Grid2D::over_rectangle: empty rectangle");
    const double hx = (bx - ax) / (n - 1);
    const double hy = (by - ay) / (n - 1);
    if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
        throw std::invalid_argument(
            "Grid2D::over_rectangle: rectangle is not square; spacing is isotropic");
    return Grid2D(n, n, ax, ay, hx);
}

int Grid2D::layers_from_boundary(int i, int j) const {
    return std::min(std::min(i, nx - 1 - i), std::min(j, ny - 1 - j));
}

ScalarField::ScalarField(const Grid2D& g, std::vector<double> values)
    : grid(g), v(std::move(values)) {
    if (static_cast<int>(v.size()) != g.count())
        throw std::invalid_argument("ScalarField: value count " + std::to_string(v.size()) +
                                    " does not match grid size " + std::to_string(g.count()));
    check_finite("ScalarField");
}

namespace {
void check_all_finite(const std::vector<double>& v, const char* what) {
    for (size_t k = 0; k < v.size(); ++k)
        if (!std::isfinite(v[k]))
            throw std::invalid_argument(std::string(what) + ": non-finite value at flat index " +
                                        std::to_string(k));
}
}  // namespace

void ScalarField::check_finite(const char* what) const { check_all_finite(v, what); }

void VectorField::check_finite(const char* what) const {
    check_all_finite(vx, what);
    check_all_finite(vy, what);
}

void SymMatrixField::check_finite(const char* what) const {
    check_all_finite(a11, what);
    check_all_finite(a12, what);
    check_all_finite(a22, what);
}

double VectorField::norm_at(int k) const { return std::hypot(vx[k], vy[k]); }

namespace {

// One-dimensional first derivative along a line of values, index m in [0, n).
// Centered inside, one-sided 3-point at the ends; both second order.
inline double d1(const double* f, int m, int n, int stride, double h) {
    if (m == 0) return (-3.0 * f[0] + 4.0 * f[stride] - f[2 * stride]) / (2.0 * h);
    if (m == n - 1)
        return (3.0 * f[m * stride] - 4.0 * f[(m - 1) * stride] + f[(m - 2) * stride]) /
               (2.0 * h);
    return (f[(m + 1) * stride] - f[(m - 1) * stride]) / (2.0 * h);
}

}  // namespace

VectorField gradient(const ScalarField& f) {
    f.check_finite("gradient: input");
    const Grid2D& g = f.grid;
    VectorField out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.idx(i, j);
            out.vx[k] = d1(f.v.data() + j * g.nx, i, g.nx, 1, g.h);
            out.vy[k] = d1(f.v.data() + i, j, g.ny, g.nx, g.h);
        }
    }
    return out;
}

HessianField hessian(const ScalarField& f) {
    f.check_finite("hessian: input");
    const Grid2D& g = f.grid;
    HessianField out;
    out.grid = g;
    out.xx.assign(g.count(), 0.0);
    out.xy.assign(g.count(), 0.0);
    out.yy.assign(g.count(), 0.0);
    const double h2 = g.h * g.h;
    for (int j = 1; j < g.ny - 1; ++j) {
        for (int i = 1; i < g.nx - 1; ++i) {
            const int k = g.idx(i, j);
            out.xx[k] = (f.v[k + 1] - 2.0 * f.v[k] + f.v[k - 1]) / h2;
            out.yy[k] = (f.v[k + g.nx] - 2.0 * f.v[k] + f.v[k - g.nx]) / h2;
            out.xy[k] = (f.v[k + g.nx + 1] - f.v[k + g.nx - 1] - f.v[k - g.nx + 1] +
                         f.v[k - g.nx - 1]) /
                        (4.0 * h2);
        }
    }
    return out;
}

ScalarField divergence(const VectorField& F) {
    F.check_finite("divergence: input");
    const Grid2D& g = F.grid;
    ScalarField out(g);
    for (int j = 1; j < g.ny - 1; ++j) {
        for (int i = 1; i < g.nx - 1; ++i) {
            const int k = g.idx(i, j);
            out.v[k] = (F.vx[k + 1] - F.vx[k - 1]) / (2.0 * g.h) +
                       (F.vy[k + g.nx] - F.vy[k - g.nx]) / (2.0 * g.h);
        }
    }
    return out;
}

IndexSet ball_mask(const Grid2D& grid, std::array<double, 2> center, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("ball_mask: radius must be positive");
    IndexSet out;
    for (int k = 0; k < grid.count(); ++k) {
        const auto p = grid.point(k);
        if (std::hypot(p[0] - center[0], p[1] - center[1]) < radius) out.push_back(k);
    }
    if (out.empty())
        throw std::runtime_error("ball_mask: ball of radius " + std::to_string(radius) +
                                 " captures no grid node (smaller than spacing?)");
    return out;
}

IndexSet ball_mask(const Grid2D& grid, std::span<const double> dist, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("ball_mask: radius must be positive");
    if (static_cast<int>(dist.size()) != grid.count())
        throw std::invalid_argument("ball_mask: distance field size mismatch");
    IndexSet out;
    for (int k = 0; k < grid.count(); ++k)
        if (dist[k] < radius) out.push_back(k);
    if (out.empty()) throw std::runtime_error("ball_mask: intrinsic ball captures no grid node");
    return out;
}

}  // namespace aronsson
