#include "aronsson/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace aronsson {

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct Table {
    std::vector<std::vector<double>> cols;
    int rows = 0;
};

Table read_table(const std::string& path, int ncols, const std::string& header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (line != header)
        throw std::runtime_error(path + ": expected header '" + header + "', got '" + line + "'");
    Table t;
    t.cols.resize(ncols);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        for (int c = 0; c < ncols; ++c) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected " + std::to_string(ncols) + " columns");
            t.cols[c].push_back(std::stod(cell));
        }
        ++t.rows;
    }
    return t;
}

// Recover the grid from x/y columns written row-major (x fastest).
Grid2D grid_from_coords(const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::string& path) {
    const int n = static_cast<int>(xs.size());
    int nx = 1;
    while (nx < n && xs[nx] > xs[nx - 1]) ++nx;
    if (nx < 3 || n % nx != 0)
        throw std::runtime_error(path + ": coordinates do not form a row-major grid");
    const int ny = n / nx;
    const double h = xs[1] - xs[0];
    Grid2D g(nx, ny, xs[0], ys[0], h);
    for (int k = 0; k < n; ++k) {
        const auto p = g.point(k);
        if (std::abs(p[0] - xs[k]) > 1e-9 * (1.0 + std::abs(p[0])) ||
            std::abs(p[1] - ys[k]) > 1e-9 * (1.0 + std::abs(p[1])))
            throw std::runtime_error(path + ": coordinates are not a uniform grid near row " +
                                     std::to_string(k + 2));
    }
    return g;
}

}  // namespace

void write_csv(const ScalarField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x,y,value\n";
    for (int k = 0; k < f.grid.count(); ++k) {
        const auto p = f.grid.point(k);
        out << fmt17(p[0]) << ',' << fmt17(p[1]) << ',' << fmt17(f.v[k]) << '\n';
    }
}

void write_csv(const VectorField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x,y,v1,v2\n";
    for (int k = 0; k < f.grid.count(); ++k) {
        const auto p = f.grid.point(k);
        out << fmt17(p[0]) << ',' << fmt17(p[1]) << ',' << fmt17(f.vx[k]) << ','
            << fmt17(f.vy[k]) << '\n';
    }
}

ScalarField read_scalar_csv(const std::string& path) {
    Table t = read_table(path, 3, "x,y,value");
    Grid2D g = grid_from_coords(t.cols[0], t.cols[1], path);
    return ScalarField(g, std::move(t.cols[2]));
}

VectorField read_vector_csv(const std::string& path) {
    Table t = read_table(path, 4, "x,y,v1,v2");
    Grid2D g = grid_from_coords(t.cols[0], t.cols[1], path);
    VectorField f(g);
    f.vx = std::move(t.cols[2]);
    f.vy = std::move(t.cols[3]);
    f.check_finite("read_vector_csv");
    return f;
}

}  // namespace aronsson
