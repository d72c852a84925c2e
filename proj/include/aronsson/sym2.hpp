#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace aronsson {

/// Symmetric 2x2 matrix, the pointwise value type of a coefficient field.
struct Sym2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    static Sym2 identity() { return {1.0, 0.0, 1.0}; }

    std::array<double, 2> apply(double vx, double vy) const {
        return {xx * vx + xy * vy, xy * vx + yy * vy};
    }

    double quad(double vx, double vy) const {
        return xx * vx * vx + 2.0 * xy * vx * vy + yy * vy * vy;
    }

    double trace() const { return xx + yy; }
    double det() const { return xx * yy - xy * xy; }

    // eigenvalues, ascending
    std::array<double, 2> eigenvalues() const {
        const double m = 0.5 * trace();
        const double d = std::sqrt(std::max(0.0, m * m - det()));
        return {m - d, m + d};
    }

    double spectral_norm() const {
        auto ev = eigenvalues();
        return std::max(std::abs(ev[0]), std::abs(ev[1]));
    }

    Sym2 inverse() const {
        const double d = det();
        if (d == 0.0) throw std::domain_error("Sym2::inverse: singular matrix");
        return {yy / d, -xy / d, xx / d};
    }

    /// Principal square root; requires positive definiteness.
    Sym2 sqrt() const {
        auto ev = eigenvalues();
        if (ev[0] <= 0.0) throw std::domain_error("Sym2::sqrt: matrix not positive definite");
        const double s = std::sqrt(ev[0]) + std::sqrt(ev[1]);
        // sqrt(M) = (M + sqrt(det) I) / (sqrt(l1) + sqrt(l2))
        const double q = std::sqrt(ev[0] * ev[1]);
        return {(xx + q) / s, xy / s, (yy + q) / s};
    }

    /// Replace eigenvalues by their clamp to [lo, hi], keeping eigenvectors.
    Sym2 clamp_eigenvalues(double lo, double hi) const;
};

/// General 2x2 matrix, used for pullback frames.
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // [[a, b], [c, d]]

    static Mat2 identity() { return {}; }
    static Mat2 rotation(double theta) {
        const double co = std::cos(theta), si = std::sin(theta);
        return {co, -si, si, co};
    }
    static Mat2 from_sym(const Sym2& s) { return {s.xx, s.xy, s.xy, s.yy}; }

    double det() const { return a * d - b * c; }

    std::array<double, 2> apply(double vx, double vy) const {
        return {a * vx + b * vy, c * vx + d * vy};
    }

    Mat2 inverse() const {
        const double dd = det();
        if (dd == 0.0) throw std::domain_error("Mat2::inverse: singular matrix");
        return {d / dd, -b / dd, -c / dd, a / dd};
    }
};

inline Sym2 Sym2::clamp_eigenvalues(double lo, double hi) const {
    auto ev = eigenvalues();
    const double l0 = std::min(std::max(ev[0], lo), hi);
    const double l1 = std::min(std::max(ev[1], lo), hi);
    if (l0 == ev[0] && l1 == ev[1]) return *this;
    // Eigenvector for ev[1]; handle the near-isotropic case directly.
    const double axy = std::abs(xy);
    if (axy < 1e-300 * (std::abs(xx) + std::abs(yy) + 1.0)) {
        Sym2 r = *this;
        if (xx <= yy) { r.xx = l0; r.yy = l1; } else { r.xx = l1; r.yy = l0; }
        r.xy = 0.0;
        return r;
    }
    double vx = ev[1] - yy, vy = xy;
    double n = std::hypot(vx, vy);
    vx /= n; vy /= n;
    // M = l1 v v^T + l0 (I - v v^T)
    return {l0 + (l1 - l0) * vx * vx, (l1 - l0) * vx * vy, l0 + (l1 - l0) * vy * vy};
}

}  // namespace aronsson
