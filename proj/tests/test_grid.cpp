#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "aronsson/field_io.hpp"
#include "aronsson/grid.hpp"
#include "doctest.h"

using namespace aronsson;

namespace {

ScalarField sample(const Grid2D& g, double (*f)(double, double)) {
    ScalarField out(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        out.v[k] = f(p[0], p[1]);
    }
    return out;
}

}  // namespace

TEST_CASE("grid construction and classification") {
    CHECK_THROWS(Grid2D(2, 5, 0, 0, 0.1));
    CHECK_THROWS(Grid2D(5, 5, 0, 0, -0.1));
    Grid2D g(5, 4, 1.0, 2.0, 0.5);
    CHECK(g.count() == 20);
    CHECK(g.x(2) == doctest::Approx(2.0));
    int interior = 0, boundary = 0;
    for (int k = 0; k < g.count(); ++k) (g.on_boundary(k) ? boundary : interior)++;
    CHECK(interior == 3 * 2);
    CHECK(interior + boundary == g.count());
}

TEST_CASE("gradient of constants and affine fields is exact everywhere") {
    Grid2D g(17, 13, -1.0, 0.5, 0.25);
    const VectorField dc = gradient(sample(g, [](double, double) { return 4.25; }));
    for (int k = 0; k < g.count(); ++k) {
        CHECK(dc.vx[k] == 0.0);
        CHECK(dc.vy[k] == 0.0);
    }

    const VectorField da = gradient(sample(g, [](double x, double y) { return 3.0 * x - 2.0 * y; }));
    for (int k = 0; k < g.count(); ++k) {
        CHECK(da.vx[k] == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(da.vy[k] == doctest::Approx(-2.0).epsilon(1e-14));
    }

    // random affine, including boundary nodes
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double bx = coef(rng), by = coef(rng), c = coef(rng);
        ScalarField f(g);
        for (int k = 0; k < g.count(); ++k) {
            const auto p = g.point(k);
            f.v[k] = bx * p[0] + by * p[1] + c;
        }
        const VectorField df = gradient(f);
        for (int k = 0; k < g.count(); ++k) {
            CHECK(df.vx[k] == doctest::Approx(bx).epsilon(1e-12));
            CHECK(df.vy[k] == doctest::Approx(by).epsilon(1e-12));
        }
    }
}

TEST_CASE("gradient is exact on quadratics at interior nodes") {
    Grid2D g(21, 21, 0.0, 0.0, 0.1);
    const VectorField d = gradient(sample(g, [](double x, double) { return x * x; }));
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            const int k = g.idx(i, j);
            CHECK(d.vx[k] == doctest::Approx(2.0 * g.x(i)).epsilon(1e-12));
            CHECK(d.vy[k] == doctest::Approx(0.0).epsilon(1e-12));
        }
}

TEST_CASE("gradient rejects non-finite input") {
    Grid2D g(5, 5, 0, 0, 1.0);
    ScalarField f(g);
    f.v[7] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gradient(f), std::invalid_argument);
}

TEST_CASE("hessian exactness and boundary guard") {
    Grid2D g(15, 15, -0.5, -0.5, 0.1);
    const HessianField ha = hessian(sample(g, [](double x, double y) { return 1.0 + x - y; }));
    const HessianField hx = hessian(sample(g, [](double x, double) { return x * x; }));
    const HessianField hxy = hessian(sample(g, [](double x, double y) { return x * y; }));
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            CHECK(ha.at(i, j).xx == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(hx.at(i, j).xx == doctest::Approx(2.0).epsilon(1e-11));
            CHECK(hx.at(i, j).yy == doctest::Approx(0.0).epsilon(1e-11));
            CHECK(hx.at(i, j).xy == doctest::Approx(0.0).epsilon(1e-11));
            CHECK(hxy.at(i, j).xy == doctest::Approx(1.0).epsilon(1e-11));
        }
    CHECK_THROWS_AS(hx.at(0, 3), std::domain_error);
    CHECK_THROWS_AS(hx.at(3, g.ny - 1), std::domain_error);
}

TEST_CASE("divergence on canonical fields") {
    Grid2D g(12, 12, 0.0, 0.0, 0.2);
    VectorField constant(g), linear(g), solenoidal(g);
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        constant.vx[k] = 1.5;
        constant.vy[k] = -0.5;
        linear.vx[k] = p[0];
        linear.vy[k] = p[1];
        solenoidal.vx[k] = p[1];
        solenoidal.vy[k] = -p[0];
    }
    const ScalarField dc = divergence(constant), dl = divergence(linear),
                      ds = divergence(solenoidal);
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            CHECK(dc.at(i, j) == doctest::Approx(0.0).epsilon(1e-13));
            CHECK(dl.at(i, j) == doctest::Approx(2.0).epsilon(1e-13));
            CHECK(ds.at(i, j) == doctest::Approx(0.0).epsilon(1e-13));
        }
}

TEST_CASE("divergence of gradient matches the widened 5-point Laplacian inside") {
    Grid2D g(17, 17, 0.0, 0.0, 1.0 / 16.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    ScalarField f(g);
    for (auto& v : f.v) v = val(rng);
    const ScalarField lap = divergence(gradient(f));
    const double h2 = g.h * g.h;
    for (int j = 2; j < g.ny - 2; ++j)
        for (int i = 2; i < g.nx - 2; ++i) {
            const int k = g.idx(i, j);
            const double five =
                (f.v[k + 2] + f.v[k - 2] + f.v[k + 2 * g.nx] + f.v[k - 2 * g.nx] - 4.0 * f.v[k]) /
                (4.0 * h2);
            CHECK(lap.v[k] == doctest::Approx(five).epsilon(1e-12));
        }
}

TEST_CASE("stencil order: gradient error is O(h^2) on a C^4 function") {
    double errs[3];
    int n = 17;
    for (int lvl = 0; lvl < 3; ++lvl) {
        Grid2D g(n, n, 0.0, 0.0, 1.0 / (n - 1));
        const ScalarField f =
            sample(g, [](double x, double y) { return std::sin(x) * std::cos(y); });
        const VectorField d = gradient(f);
        double err = 0.0;
        for (int k = 0; k < g.count(); ++k) {
            const auto p = g.point(k);
            err = std::max(err, std::abs(d.vx[k] - std::cos(p[0]) * std::cos(p[1])));
            err = std::max(err, std::abs(d.vy[k] + std::sin(p[0]) * std::sin(p[1])));
        }
        errs[lvl] = err;
        n = 2 * (n - 1) + 1;
    }
    CHECK(std::log2(errs[0] / errs[1]) >= 1.9);
    CHECK(std::log2(errs[1] / errs[2]) >= 1.9);
}

TEST_CASE("ball_mask: whole domain, 1.5h neighborhood, empty, precomputed-distance variant") {
    Grid2D g(9, 9, 0.0, 0.0, 0.1);
    CHECK(static_cast<int>(ball_mask(g, {0.4, 0.4}, 10.0).size()) == g.count());

    // Euclidean radius 1.5h around an interior node: 4-neighborhood plus
    // diagonals (sqrt(2) h < 1.5 h < 2 h), nine nodes total
    const IndexSet near = ball_mask(g, {g.x(4), g.y(4)}, 1.5 * g.h);
    std::set<int> expected;
    for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) expected.insert(g.idx(4 + di, 4 + dj));
    CHECK(std::set<int>(near.begin(), near.end()) == expected);

    CHECK_THROWS(ball_mask(g, {0.45 + 1e-6, 0.45}, 1e-8));

    std::vector<double> dist(g.count());
    for (int k = 0; k < g.count(); ++k) {
        const auto p = g.point(k);
        dist[k] = std::hypot(p[0] - g.x(4), p[1] - g.y(4));
    }
    CHECK(ball_mask(g, std::span<const double>(dist), 1.5 * g.h) == near);
}

TEST_CASE("csv round trip is lossless for scalar and vector fields") {
    Grid2D g(7, 5, -0.3, 0.7, 0.125);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> val(-10.0, 10.0);
    ScalarField f(g);
    for (auto& v : f.v) v = val(rng);
    f.v[3] = 1.0 / 3.0;  // non-terminating binary fraction

    const auto dir = std::filesystem::temp_directory_path();
    const std::string spath = (dir / "aronsson_test_scalar.csv").string();
    write_csv(f, spath);
    const ScalarField f2 = read_scalar_csv(spath);
    REQUIRE(f2.grid == g);
    for (int k = 0; k < g.count(); ++k) CHECK(f2.v[k] == f.v[k]);

    VectorField w(g);
    for (int k = 0; k < g.count(); ++k) {
        w.vx[k] = val(rng);
        w.vy[k] = val(rng);
    }
    const std::string vpath = (dir / "aronsson_test_vector.csv").string();
    write_csv(w, vpath);
    const VectorField w2 = read_vector_csv(vpath);
    REQUIRE(w2.grid == g);
    for (int k = 0; k < g.count(); ++k) {
        CHECK(w2.vx[k] == w.vx[k]);
        CHECK(w2.vy[k] == w.vy[k]);
    }

    CHECK_THROWS(read_vector_csv(spath));  // wrong header
    std::filesystem::remove(spath);
    std::filesystem::remove(vpath);
}
