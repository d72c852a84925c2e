#include "aronsson/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aronsson {

bool CoefficientField::below_2_pow_15() const { return ellipticity < std::pow(2.0, 0.2); }
bool CoefficientField::below_2_pow_14() const { return ellipticity < std::pow(2.0, 0.25); }

double ellipticity_constant(const SymMatrixField& a) {
    a.check_finite("ellipticity_constant");
    double worst = 1.0;
    for (int k = 0; k < a.grid.count(); ++k) {
        const auto ev = a.at(k).eigenvalues();
        if (!(ev[0] > 0.0)) {
            const auto p = a.grid.point(k);
            std::ostringstream msg;
            msg << "coefficient matrix not positive definite at node (" << a.grid.ix(k) << ","
                << a.grid.iy(k) << ") = (" << p[0] << "," << p[1]
                << "): min eigenvalue " << ev[0];
            throw std::domain_error(msg.str());
        }
        worst = std::max(worst, std::max(ev[1], 1.0 / ev[0]));
    }
    return worst;
}

std::pair<double, double> c11_seminorms(const SymMatrixField& a) {
    const Grid2D& g = a.grid;
    double lip = 0.0, hess = 0.0;
    for (const auto* entry : {&a.a11, &a.a12, &a.a22}) {
        ScalarField f(g, *entry);
        VectorField df = gradient(f);
        for (int k = 0; k < g.count(); ++k)
            lip = std::max(lip, std::max(std::abs(df.vx[k]), std::abs(df.vy[k])));
        HessianField d2f = hessian(f);
        for (int j = 1; j < g.ny - 1; ++j)
            for (int i = 1; i < g.nx - 1; ++i) {
                const int k = g.idx(i, j);
                hess = std::max(hess, std::abs(d2f.xx[k]));
                hess = std::max(hess, std::abs(d2f.xy[k]));
                hess = std::max(hess, std::abs(d2f.yy[k]));
            }
    }
    return {lip, hess};
}

CoefficientField make_coefficients(const SymMatrixField& a) {
    CoefficientField out;
    out.a = a;
    out.ellipticity = ellipticity_constant(a);
    auto [lip, hess] = c11_seminorms(a);
    out.lip_seminorm = lip;
    out.hess_seminorm = hess;
    out.da11 = gradient(ScalarField(a.grid, a.a11));
    out.da12 = gradient(ScalarField(a.grid, a.a12));
    out.da22 = gradient(ScalarField(a.grid, a.a22));
    return out;
}

namespace {

// 1D Gaussian kernel, truncated at 3 sigma, renormalized at the edges so
// constants are reproduced exactly.
std::vector<double> gauss_kernel(double sigma, double h) {
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma / h)));
    std::vector<double> w(2 * half + 1);
    double s = 0.0;
    for (int m = -half; m <= half; ++m) {
        w[m + half] = std::exp(-0.5 * (m * h) * (m * h) / (sigma * sigma));
        s += w[m + half];
    }
    for (auto& x : w) x /= s;
    return w;
}

std::vector<double> smooth_entry(const Grid2D& g, const std::vector<double>& f,
                                 const std::vector<double>& w) {
    const int half = (static_cast<int>(w.size()) - 1) / 2;
    std::vector<double> tmp(f.size()), out(f.size());
    // x pass
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double acc = 0.0, norm = 0.0;
            for (int m = -half; m <= half; ++m) {
                const int ii = i + m;
                if (ii < 0 || ii >= g.nx) continue;
                acc += w[m + half] * f[g.idx(ii, j)];
                norm += w[m + half];
            }
            tmp[g.idx(i, j)] = acc / norm;
        }
    // y pass
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double acc = 0.0, norm = 0.0;
            for (int m = -half; m <= half; ++m) {
                const int jj = j + m;
                if (jj < 0 || jj >= g.ny) continue;
                acc += w[m + half] * tmp[g.idx(i, jj)];
                norm += w[m + half];
            }
            out[g.idx(i, j)] = acc / norm;
        }
    return out;
}

}  // namespace

CoefficientField smooth_coefficients(const CoefficientField& a, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("smooth_coefficients: eps must be positive");
    const Grid2D& g = a.grid();
    const double sigma = eps;
    if (sigma < g.h) {
        CoefficientField out = a;
        out.smoothing_skipped = true;
        return out;
    }
    const auto w = gauss_kernel(sigma, g.h);
    SymMatrixField sm(g);
    sm.a11 = smooth_entry(g, a.a.a11, w);
    sm.a12 = smooth_entry(g, a.a.a12, w);
    sm.a22 = smooth_entry(g, a.a.a22, w);
    // Clamp eigenvalues to [1/(2L), 2L]; smoothing preserves positive
    // definiteness (convex combinations) so this is usually a no-op.
    const double lo = 1.0 / (2.0 * a.ellipticity);
    const double hi = 2.0 * a.ellipticity;
    for (int k = 0; k < g.count(); ++k) sm.set(k, sm.at(k).clamp_eigenvalues(lo, hi));
    return make_coefficients(sm);
}

double bilinear_sample(const ScalarField& u, double px, double py) {
    const Grid2D& g = u.grid;
    double fi = (px - g.x0) / g.h;
    double fj = (py - g.y0) / g.h;
    const double slack = 1e-9;
    if (fi < -slack || fj < -slack || fi > g.nx - 1 + slack || fj > g.ny - 1 + slack)
        throw std::out_of_range("bilinear_sample: point outside grid");
    fi = std::clamp(fi, 0.0, static_cast<double>(g.nx - 1));
    fj = std::clamp(fj, 0.0, static_cast<double>(g.ny - 1));
    int i = std::min(static_cast<int>(fi), g.nx - 2);
    int j = std::min(static_cast<int>(fj), g.ny - 2);
    const double s = fi - i, t = fj - j;
    return (1 - s) * (1 - t) * u.at(i, j) + s * (1 - t) * u.at(i + 1, j) +
           (1 - s) * t * u.at(i, j + 1) + s * t * u.at(i + 1, j + 1);
}

namespace {

void check_target_inside(const Grid2D& target, std::array<double, 2> x0, const Mat2& m,
                         const Grid2D& source, const char* what) {
    std::ostringstream bad;
    int nbad = 0;
    const double corners[4][2] = {{target.x(0), target.y(0)},
                                  {target.x(target.nx - 1), target.y(0)},
                                  {target.x(0), target.y(target.ny - 1)},
                                  {target.x(target.nx - 1), target.y(target.ny - 1)}};
    const double slack = 1e-9 * source.h;
    for (const auto& c : corners) {
        const auto p = m.apply(c[0], c[1]);
        const double sx = x0[0] + p[0], sy = x0[1] + p[1];
        if (sx < source.x0 - slack || sx > source.x(source.nx - 1) + slack ||
            sy < source.y0 - slack || sy > source.y(source.ny - 1) + slack) {
            bad << " (" << c[0] << "," << c[1] << ")->(" << sx << "," << sy << ")";
            ++nbad;
        }
    }
    if (nbad > 0)
        throw std::out_of_range(std::string(what) +
                                ": target grid escapes source domain at corners:" + bad.str());
}

}  // namespace

CoefficientField pullback(const CoefficientField& a, std::array<double, 2> x0, const Mat2& m,
                          const Grid2D& target) {
    if (m.det() == 0.0) throw std::invalid_argument("pullback: frame matrix is singular");
    check_target_inside(target, x0, m, a.grid(), "pullback");
    const ScalarField e11(a.grid(), a.a.a11), e12(a.grid(), a.a.a12), e22(a.grid(), a.a.a22);
    SymMatrixField out(target);
    for (int k = 0; k < target.count(); ++k) {
        const auto y = target.point(k);
        const auto p = m.apply(y[0], y[1]);
        const double sx = x0[0] + p[0], sy = x0[1] + p[1];
        out.a11[k] = bilinear_sample(e11, sx, sy);
        out.a12[k] = bilinear_sample(e12, sx, sy);
        out.a22[k] = bilinear_sample(e22, sx, sy);
    }
    return make_coefficients(out);
}

ScalarField rescale_solution(const ScalarField& u, std::array<double, 2> x0, double r,
                             const Grid2D& target) {
    if (r == 0.0) throw std::invalid_argument("rescale_solution: r must be nonzero");
    const Mat2 scale{r, 0.0, 0.0, r};
    check_target_inside(target, x0, scale, u.grid, "rescale_solution");
    const double u0 = bilinear_sample(u, x0[0], x0[1]);
    ScalarField out(target);
    for (int k = 0; k < target.count(); ++k) {
        const auto y = target.point(k);
        out.v[k] = (bilinear_sample(u, x0[0] + r * y[0], x0[1] + r * y[1]) - u0) / r;
    }
    return out;
}

CoefficientField preset_identity(const Grid2D& grid) {
    return make_coefficients(SymMatrixField(grid));
}

CoefficientField preset_constant(const Grid2D& grid, double a11, double a12, double a22) {
    SymMatrixField a(grid);
    const Sym2 m{a11, a12, a22};
    if (!(m.det() > 0.0) || !(a11 > 0.0)) {
        std::ostringstream msg;
        msg << "preset constant(" << a11 << "," << a12 << "," << a22
            << ") is not positive definite";
        throw std::invalid_argument(msg.str());
    }
    std::fill(a.a11.begin(), a.a11.end(), a11);
    std::fill(a.a12.begin(), a.a12.end(), a12);
    std::fill(a.a22.begin(), a.a22.end(), a22);
    return make_coefficients(a);
}

CoefficientField preset_smooth(const Grid2D& grid, double lambda) {
    if (!(lambda > 0.0) || !(lambda < 1.0))
        throw std::invalid_argument("preset smooth(lambda): need 0 < lambda < 1");
    // a11 = 1 + s sin(x) sin(y), a22 = 1 - s sin(x) sin(y),
    // a12 = 0.5 s sin(x) sin(y). All entries vanish at the origin and every
    // entry derivative up to second order is bounded by s, so
    // lipA + hessA <= 2s. s = 0.45 lambda leaves 10% headroom.
    const double s = 0.45 * lambda;
    SymMatrixField a(grid);
    for (int k = 0; k < grid.count(); ++k) {
        const auto p = grid.point(k);
        const double b = s * std::sin(p[0]) * std::sin(p[1]);
        a.a11[k] = 1.0 + b;
        a.a12[k] = 0.5 * b;
        a.a22[k] = 1.0 - b;
    }
    CoefficientField out = make_coefficients(a);
    if (out.lip_seminorm + out.hess_seminorm > lambda)
        throw std::logic_error("preset smooth: measured seminorms exceed lambda");
    return out;
}

CoefficientField make_preset(const Grid2D& grid, const std::string& name,
                             const std::vector<double>& params) {
    if (name == "identity") {
        if (!params.empty())
            throw std::invalid_argument("preset identity takes no parameters");
        return preset_identity(grid);
    }
    if (name == "constant") {
        if (params.size() != 3)
            throw std::invalid_argument("preset constant needs parameters (a11, a12, a22)");
        return preset_constant(grid, params[0], params[1], params[2]);
    }
    if (name == "smooth") {
        if (params.size() != 1)
            throw std::invalid_argument("preset smooth needs one parameter (lambda)");
        return preset_smooth(grid, params[0]);
    }
    throw std::invalid_argument("unknown coefficient preset '" + name + "'");
}

}  // namespace aronsson
