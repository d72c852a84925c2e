#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <quadmath.h>

#include <cmath>
#include <random>

#include "aronsson/coefficients.hpp"
#include "aronsson/operators.hpp"
#include "aronsson/solver.hpp"
#include "doctest.h"

using namespace aronsson;

namespace {

ScalarField random_field(const Grid2D& g, std::uint64_t seed, double amp) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> val(-amp, amp);
    ScalarField f(g);
    for (auto& v : f.v) v = val(rng);
    return f;
}

ScalarField affine_field(const Grid2D& g, double bx, double by, double c) {
    ScalarField f(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        f.v[k] = bx * p[0] + by * p[1] + c;
    }
    return f;
}

// Direct quadruple-precision evaluation of the raw energy integral.
__float128 quad_energy(const ScalarField& u, const CoefficientField& a, double eps) {
    const Grid2D& g = u.grid;
    const __float128 inv2h = __float128(0.5) / __float128(g.h);
    const __float128 h2 = __float128(g.h) * __float128(g.h);
    __float128 total = 0;
    for (int cj = 0; cj < g.ny - 1; ++cj)
        for (int ci = 0; ci < g.nx - 1; ++ci) {
            const int k00 = g.idx(ci, cj);
            const __float128 u00 = u.v[k00], u10 = u.v[k00 + 1], u01 = u.v[k00 + g.nx],
                             u11 = u.v[k00 + g.nx + 1];
            const __float128 px = ((u10 - u00) + (u11 - u01)) * inv2h;
            const __float128 py = ((u01 - u00) + (u11 - u10)) * inv2h;
            const Sym2 m{0.25 * (a.a.a11[k00] + a.a.a11[k00 + 1] + a.a.a11[k00 + g.nx] +
                                 a.a.a11[k00 + g.nx + 1]),
                         0.25 * (a.a.a12[k00] + a.a.a12[k00 + 1] + a.a.a12[k00 + g.nx] +
                                 a.a.a12[k00 + g.nx + 1]),
                         0.25 * (a.a.a22[k00] + a.a.a22[k00 + 1] + a.a.a22[k00 + g.nx] +
                                 a.a.a22[k00 + g.nx + 1])};
            const __float128 hc = __float128(m.xx) * px * px +
                                  __float128(2.0 * m.xy) * px * py +
                                  __float128(m.yy) * py * py;
            total += h2 * expq(hc / __float128(eps));
        }
    return total;
}

}  // namespace

TEST_CASE("energy of a zero field is the cell-covered area at scale zero") {
    Grid2D g(17, 17, 0.0, 0.0, 1.0 / 16.0);
    const CoefficientField a = preset_constant(g, 1.4, 0.2, 0.8);
    const ScaledEnergy e = energy(ScalarField(g), a, 0.37);
    CHECK(e.scale == 0.0);
    CHECK(e.mantissa == doctest::Approx(1.0).epsilon(1e-13));  // 16x16 cells of (1/16)^2
}

TEST_CASE("energy of an affine field: constant integrand at scale |b|^2/eps") {
    Grid2D g(33, 33, -1.0, 0.0, 1.0 / 32.0);
    const CoefficientField id = preset_identity(g);
    const double eps = 0.05;
    const ScaledEnergy e = energy(affine_field(g, 3.0, -4.0, 0.7), id, eps);
    CHECK(e.scale == doctest::Approx(25.0 / eps).epsilon(1e-12));
    CHECK(e.mantissa == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS(energy(ScalarField(g), id, 0.0));
    CHECK_THROWS(energy(ScalarField(g), id, -0.1));
}

TEST_CASE("energy matches a quadruple-precision summation oracle") {
    Grid2D g(21, 21, 0.0, 0.0, 0.05);
    const CoefficientField a = preset_smooth(g, 0.3);
    for (std::uint64_t seed : {1ull, 2ull}) {
        const ScalarField u = random_field(g, seed, 0.2);
        const double eps = 0.8;
        const ScaledEnergy e = energy(u, a, eps);
        const __float128 oracle = quad_energy(u, a, eps);
        const double log_oracle = static_cast<double>(logq(oracle));
        CHECK(std::abs(e.log_value() - log_oracle) <=
              1e-12 * std::max(1.0, std::abs(log_oracle)));
    }
}

TEST_CASE("energy gradient matches central finite differences of the stabilized energy") {
    Grid2D g(17, 17, 0.0, 0.0, 1.0 / 16.0);
    const CoefficientField a = preset_constant(g, 1.3, 0.25, 0.85);
    const double eps = 0.4;
    const ScalarField u = random_field(g, 11, 0.3);
    const ScalarField grad = energy_gradient(u, a, eps);
    double unorm = 0.0;
    for (double v : u.v) unorm = std::max(unorm, std::abs(v));
    const double step = 1e-6 * unorm;
    double gnorm = 0.0;
    for (double v : grad.v) gnorm = std::max(gnorm, std::abs(v));
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            const int k = g.idx(i, j);
            ScalarField up = u, dn = u;
            up.v[k] += step;
            dn.v[k] -= step;
            const double fd =
                (energy(up, a, eps).log_value() - energy(dn, a, eps).log_value()) / (2.0 * step);
            CHECK(std::abs(grad.v[k] - fd) <= 1e-5 * gnorm);
        }
    // boundary entries are zero by constraint
    for (int k = 0; k < g.count(); ++k)
        if (g.on_boundary(k)) CHECK(grad.v[k] == 0.0);
}

TEST_CASE("mirror-symmetric data produces a bitwise mirror-symmetric gradient") {
    Grid2D g(21, 21, -1.0, -1.0, 0.1);
    const CoefficientField id = preset_identity(g);
    ScalarField u(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        u.v[k] = std::cos(1.3 * p[0]) * (0.5 + p[1] * p[1]);  // even in x
    }
    // enforce exact x symmetry of the data bits
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx / 2; ++i) u.at(g.nx - 1 - i, j) = u.at(i, j);
    const ScalarField grad = energy_gradient(u, id, 0.7);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            CHECK(grad.at(i, j) == grad.at(g.nx - 1 - i, j));
}

TEST_CASE("discrete energy is midpoint convex") {
    Grid2D g(17, 17, 0.0, 0.0, 1.0 / 16.0);
    const CoefficientField a = preset_smooth(g, 0.2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> val(-0.3, 0.3);
    for (int trial = 0; trial < 20; ++trial) {
        ScalarField u(g), v(g);
        for (int k = 0; k < g.count(); ++k) {
            u.v[k] = val(rng);
            v.v[k] = val(rng);
        }
        const double eu = std::exp(energy(u, a, 1.0).log_value());
        const double ev = std::exp(energy(v, a, 1.0).log_value());
        for (double t : {0.25, 0.5, 0.75}) {
            ScalarField mid(g);
            for (int k = 0; k < g.count(); ++k) mid.v[k] = t * u.v[k] + (1.0 - t) * v.v[k];
            const double em = std::exp(energy(mid, a, 1.0).log_value());
            CHECK(em <= t * eu + (1.0 - t) * ev + 1e-12);
        }
    }
}

TEST_CASE("minimize: affine data with constant coefficients returns the affine function") {
    Grid2D g(33, 33, 0.0, 0.0, 1.0 / 32.0);
    const CoefficientField a = preset_constant(g, 1.5, 0.3, 0.9);
    const ScalarField gdata = affine_field(g, 2.0, -1.0, 0.5);
    SolveConfig cfg;
    cfg.eps = 1e-2;
    cfg.grad_tol = 1e-12;
    const RegularizedSolution sol = minimize(gdata, a, cfg);
    double sup = 0.0;
    for (int k = 0; k < g.count(); ++k) sup = std::max(sup, std::abs(sol.u.v[k] - gdata.v[k]));
    CHECK(sup <= 1e-10);
    CHECK(sol.grad_norm <= cfg.grad_tol);
    // boundary rows are held bitwise
    for (int k = 0; k < g.count(); ++k)
        if (g.on_boundary(k)) CHECK(sol.u.v[k] == gdata.v[k]);
}

TEST_CASE("minimize: constant data returns the constant") {
    Grid2D g(17, 17, 0.0, 0.0, 1.0 / 16.0);
    const CoefficientField a = preset_smooth(g, 0.2);
    SolveConfig cfg;
    cfg.eps = 0.1;
    ScalarField cdata(g);
    std::fill(cdata.v.begin(), cdata.v.end(), 2.5);
    const RegularizedSolution sol = minimize(cdata, a, cfg);
    for (int k = 0; k < g.count(); ++k) CHECK(sol.u.v[k] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("newton history decreases strictly and the max principle holds at the solution") {
    Grid2D g(33, 33, 1.0, 1.0, 1.0 / 32.0);
    const CoefficientField id = preset_identity(g);
    ScalarField gdata(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        gdata.v[k] = std::pow(p[0], 4.0 / 3.0) - std::pow(p[1], 4.0 / 3.0);
    }
    SolveConfig cfg;
    cfg.eps = 1e-2;
    cfg.grad_tol = 1e-9;
    cfg.max_newton_iters = 300;
    const RegularizedSolution sol = minimize(gdata, id, cfg);
    REQUIRE(sol.log_energy_history.size() >= 2);
    // non-increasing throughout; the Newton phase decreases strictly, the
    // defect-polish phase can sit below double resolution
    bool strict_somewhere = false;
    for (size_t s = 0; s + 1 < sol.log_energy_history.size(); ++s) {
        CHECK(sol.log_energy_history[s + 1] <= sol.log_energy_history[s]);
        strict_somewhere |= sol.log_energy_history[s + 1] < sol.log_energy_history[s];
    }
    CHECK(strict_somewhere);

    double gmin = std::numeric_limits<double>::infinity(), gmax = -gmin;
    for (int k = 0; k < g.count(); ++k)
        if (g.on_boundary(k)) {
            gmin = std::min(gmin, gdata.v[k]);
            gmax = std::max(gmax, gdata.v[k]);
        }
    const double scale = std::max(std::abs(gmin), std::abs(gmax));
    for (int k = 0; k < g.count(); ++k) {
        CHECK(sol.u.v[k] >= gmin - 1e-8 * scale);
        CHECK(sol.u.v[k] <= gmax + 1e-8 * scale);
    }
    // the independent residual check is reported
    CHECK(sol.residual_sup > 0.0);
    CHECK(std::isfinite(sol.residual_sup));
}

TEST_CASE("minimize failure carries the best iterate") {
    Grid2D g(17, 17, 1.0, 1.0, 1.0 / 16.0);
    const CoefficientField id = preset_identity(g);
    ScalarField gdata(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        gdata.v[k] = std::pow(p[0], 4.0 / 3.0) - std::pow(p[1], 4.0 / 3.0);
    }
    SolveConfig cfg;
    cfg.eps = 1e-3;
    cfg.grad_tol = 1e-14;
    cfg.max_newton_iters = 1;
    try {
        minimize(gdata, id, cfg);
        FAIL("expected SolveFailure");
    } catch (const SolveFailure& f) {
        CHECK(f.best.grid == g);
        CHECK(f.grad_norm > 1e-14);
    }
}

TEST_CASE("continuation: affine data gives identical stages; warnings are reported") {
    Grid2D g(17, 17, 0.0, 0.0, 1.0 / 16.0);
    const CoefficientField a = preset_constant(g, 1.1, 0.0, 0.95);
    const ScalarField gdata = affine_field(g, 1.0, 1.0, 0.0);
    SolveConfig cfg;
    cfg.grad_tol = 1e-11;
    cfg.schedule = {1e-1, 0.5, 4};
    const ContinuationReport rep = continuation(gdata, a, cfg);
    REQUIRE(rep.solutions.size() == 4);
    REQUIRE(rep.interior_diffs.size() == 3);
    for (double d : rep.interior_diffs) CHECK(d <= 1e-10);
    CHECK_FALSE(rep.resolution_warning);
    CHECK_FALSE(rep.ellipticity_warning);

    SolveConfig warn = cfg;
    warn.schedule = {1e-2, 0.1, 3};  // bottoms out at 1e-4 < h^2
    const ContinuationReport wrep = continuation(gdata, a, warn);
    CHECK(wrep.resolution_warning);
}

TEST_CASE("residual of the regularized equation decreases when eps and h are halved") {
    // convergence-study oracle on the exact infinity harmonic function,
    // measured away from the corner layers
    auto run = [](int n, double eps) {
        Grid2D g(n, n, 1.0, 1.0, 1.0 / (n - 1));
        const CoefficientField id = preset_identity(g);
        ScalarField gdata(g);
        for (int k = 0; k < g.count(); ++k) {
            const auto p = g.point(k);
            gdata.v[k] = std::pow(p[0], 4.0 / 3.0) - std::pow(p[1], 4.0 / 3.0);
        }
        SolveConfig cfg;
        cfg.eps = eps;
        cfg.grad_tol = 1e-9;
        cfg.max_newton_iters = 400;
        const RegularizedSolution sol = minimize(gdata, id, cfg);
        const ScalarField r = regularized_residual(sol.u, id, eps);
        const int m = std::max(2, (n + 9) / 10);
        double sup = 0.0;
        for (int j = m; j < g.ny - m; ++j)
            for (int i = m; i < g.nx - m; ++i) sup = std::max(sup, std::abs(r.at(i, j)));
        return sup;
    };
    const double coarse = run(17, 4e-2);
    const double fine = run(33, 2e-2);
    CHECK(fine < coarse);
}
