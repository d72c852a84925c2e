#include "aronsson/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace aronsson {

namespace {

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
    if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

ScalarField hamiltonian(const CoefficientField& a, const VectorField& p) {
    require_same_grid(a.grid(), p.grid, "hamiltonian");
    p.check_finite("hamiltonian: gradient field");
    ScalarField out(p.grid);
    for (int k = 0; k < p.grid.count(); ++k)
        out.v[k] = a.a.at(k).quad(p.vx[k], p.vy[k]);
    return out;
}

ScalarField aronsson_operator(const ScalarField& u, const CoefficientField& a) {
    require_same_grid(a.grid(), u.grid, "aronsson_operator");
    const Grid2D& g = u.grid;
    const VectorField du = gradient(u);
    const HessianField d2u = hessian(u);
    ScalarField out(g);
    for (int j = 1; j < g.ny - 1; ++j) {
        for (int i = 1; i < g.nx - 1; ++i) {
            const int k = g.idx(i, j);
            const double gx = du.vx[k], gy = du.vy[k];
            const auto q = a.a.at(k).apply(gx, gy);
            const double hqx = d2u.xx[k] * q[0] + d2u.xy[k] * q[1];
            const double hqy = d2u.xy[k] * q[0] + d2u.yy[k] * q[1];
            const double second_order = 4.0 * (q[0] * hqx + q[1] * hqy);
            // <dA_k Du, Du> for k = x, y with dA_k the entrywise derivative
            const double dax = a.da11.vx[k] * gx * gx + 2.0 * a.da12.vx[k] * gx * gy +
                               a.da22.vx[k] * gy * gy;
            const double day = a.da11.vy[k] * gx * gx + 2.0 * a.da12.vy[k] * gx * gy +
                               a.da22.vy[k] * gy * gy;
            out.v[k] = second_order + 2.0 * (dax * q[0] + day * q[1]);
        }
    }
    return out;
}

ScalarField regularized_residual(const ScalarField& u, const CoefficientField& a, double eps) {
    if (eps < 0.0) throw std::invalid_argument("regularized_residual: eps must be >= 0");
    const Grid2D& g = u.grid;
    const ScalarField op = aronsson_operator(u, a);
    const VectorField du = gradient(u);
    VectorField flux(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto q = a.a.at(k).apply(du.vx[k], du.vy[k]);
        flux.vx[k] = q[0];
        flux.vy[k] = q[1];
    }
    const ScalarField divf = divergence(flux);
    ScalarField out(g);
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            const int k = g.idx(i, j);
            out.v[k] = -op.v[k] - eps * divf.v[k];
        }
    return out;
}

double sup_energy(const ScalarField& u, const CoefficientField& a, const IndexSet& mask) {
    require_same_grid(a.grid(), u.grid, "sup_energy");
    if (mask.empty()) throw std::invalid_argument("sup_energy: empty mask");
    const VectorField du = gradient(u);
    double best = -1.0;
    bool any = false;
    for (int k : mask) {
        if (u.grid.on_boundary(k)) continue;
        any = true;
        best = std::max(best, a.a.at(k).quad(du.vx[k], du.vy[k]));
    }
    if (!any) throw std::invalid_argument("sup_energy: mask contains no interior node");
    return best;
}

OperatorSample sample_operator(const ScalarField& u, const CoefficientField& a, double eps,
                               int node) {
    if (u.grid.on_boundary(node))
        throw std::domain_error("sample_operator: boundary node requested");
    const ScalarField res = regularized_residual(u, a, eps);
    const ScalarField op = aronsson_operator(u, a);
    const ScalarField ham = hamiltonian(a, gradient(u));
    return {node, ham.v[node], op.v[node], res.v[node], eps};
}

}  // namespace aronsson
