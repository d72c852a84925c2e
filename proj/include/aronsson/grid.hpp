#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aronsson/sym2.hpp"

namespace aronsson {

/// Uniform 2D Cartesian grid with isotropic spacing h.
///
/// Indices run i = 0..nx-1 (x direction), j = 0..ny-1 (y direction);
/// flat index k = j*nx + i (row-major, x fastest). Every node is either
/// a boundary node (i or j on the edge) or an interior node.
struct Grid2D {
    int nx = 0;
    int ny = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double h = 0.0;

    Grid2D() = default;
    Grid2D(int nx_, int ny_, double x0_, double y0_, double h_);

    /// Grid over the rectangle [ax, bx] x [ay, by] with n points per side.
    static Grid2D over_rectangle(double ax, double ay, double bx, double by, int n);

    int count() const { return nx * ny; }
    int idx(int i, int j) const { return j * nx + i; }
    int ix(int k) const { return k % nx; }
    int iy(int k) const { return k / nx; }
    double x(int i) const { return x0 + h * i; }
    double y(int j) const { return y0 + h * j; }
    std::array<double, 2> point(int k) const { return {x(ix(k)), y(iy(k))}; }

    bool on_boundary(int i, int j) const {
        return i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
    }
    bool on_boundary(int k) const { return on_boundary(ix(k), iy(k)); }
    bool contains(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }

    /// Distance from node (i, j) to the nearest boundary node, in units of h.
    int layers_from_boundary(int i, int j) const;

    bool operator==(const Grid2D&) const = default;
};

/// One real value per grid node. Values are finite by construction.
struct ScalarField {
    Grid2D grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const Grid2D& g) : grid(g), v(g.count(), 0.0) {}
    ScalarField(const Grid2D& g, std::vector<double> values);

    double& at(int i, int j) { return v[grid.idx(i, j)]; }
    double at(int i, int j) const { return v[grid.idx(i, j)]; }
    double& operator[](int k) { return v[k]; }
    double operator[](int k) const { return v[k]; }

    void check_finite(const char* what) const;
};

/// Two real components per grid node.
struct VectorField {
    Grid2D grid;
    std::vector<double> vx;
    std::vector<double> vy;

    VectorField() = default;
    explicit VectorField(const Grid2D& g)
        : grid(g), vx(g.count(), 0.0), vy(g.count(), 0.0) {}

    std::array<double, 2> at(int i, int j) const {
        const int k = grid.idx(i, j);
        return {vx[k], vy[k]};
    }
    double norm_at(int k) const;

    void check_finite(const char* what) const;
};

/// Symmetric 2x2 matrix per grid node (entries a11, a12, a22).
struct SymMatrixField {
    Grid2D grid;
    std::vector<double> a11;
    std::vector<double> a12;
    std::vector<double> a22;

    SymMatrixField() = default;
    explicit SymMatrixField(const Grid2D& g)
        : grid(g), a11(g.count(), 1.0), a12(g.count(), 0.0), a22(g.count(), 1.0) {}

    Sym2 at(int k) const { return {a11[k], a12[k], a22[k]}; }
    Sym2 at(int i, int j) const { return at(grid.idx(i, j)); }
    void set(int k, const Sym2& m) { a11[k] = m.xx; a12[k] = m.xy; a22[k] = m.yy; }

    void check_finite(const char* what) const;
};

/// Per-node symmetric Hessian, defined at interior nodes only.
struct HessianField {
    Grid2D grid;
    std::vector<double> xx;
    std::vector<double> xy;
    std::vector<double> yy;

    Sym2 at(int i, int j) const {
        if (grid.on_boundary(i, j))
            throw std::domain_error("HessianField: evaluation at boundary node (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
        const int k = grid.idx(i, j);
        return {xx[k], xy[k], yy[k]};
    }
};

/// Set of flat node indices, ascending.
using IndexSet = std::vector<int>;

/// Centered second-order differences at interior nodes, one-sided
/// second-order at boundary nodes. Exact on affine fields everywhere
/// and on quadratics at interior nodes.
VectorField gradient(const ScalarField& f);

/// Standard 5-point second derivatives plus the 4-point cross difference.
/// Interior only; boundary entries of the returned field are unset and
/// guarded by HessianField::at.
HessianField hessian(const ScalarField& f);

/// Centered divergence at interior nodes; boundary entries are zero and
/// carry no meaning.
ScalarField divergence(const VectorField& F);

/// Nodes with Euclidean distance from `center` strictly below `radius`.
/// Throws if the ball captures no node.
IndexSet ball_mask(const Grid2D& grid, std::array<double, 2> center, double radius);

/// Nodes with dist[k] < radius for a precomputed distance field (one value
/// per node, e.g. an intrinsic distance). Throws if empty.
IndexSet ball_mask(const Grid2D& grid, std::span<const double> dist, double radius);

}  // namespace aronsson
