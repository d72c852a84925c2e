#pragma once

#include <array>
#include <string>
#include <utility>

#include "aronsson/grid.hpp"

namespace aronsson {

/// Coefficient matrix field A(x) together with its ellipticity constant and
/// discrete C^{1,1} seminorms. Entry derivative fields are precomputed so
/// that operator evaluations never difference A as a composite.
struct CoefficientField {
    SymMatrixField a;
    VectorField da11;  // (d/dx, d/dy) of entry a11, likewise below
    VectorField da12;
    VectorField da22;

    double ellipticity = 1.0;    // L: smallest L with 1/L |p|^2 <= <Ap,p> <= L |p|^2
    double lip_seminorm = 0.0;   // sup over nodes/entries of |D a^{ij}|
    double hess_seminorm = 0.0;  // same for second differences (interior)

    bool smoothing_skipped = false;  // set when smooth_coefficients left A unchanged

    const Grid2D& grid() const { return a.grid; }

    bool below_2_pow_15() const;  // L < 2^{1/5}
    bool below_2_pow_14() const;  // L < 2^{1/4}
};

/// Validates positive definiteness per node and assembles the derivative
/// fields and seminorms.
CoefficientField make_coefficients(const SymMatrixField& a);

/// L = max over nodes of max(lambda_max, 1/lambda_min). Throws, naming the
/// offending node, if any lambda_min <= 0.
double ellipticity_constant(const SymMatrixField& a);

/// (lipA, hessA): max over nodes and entries of first / second entry
/// differences. First differences use the full grid, second differences the
/// interior.
std::pair<double, double> c11_seminorms(const SymMatrixField& a);

/// Discrete Gaussian smoothing of each entry with kernel width sigma = eps,
/// then eigenvalue clamping to [1/(2L), 2L]. If the kernel width falls below
/// the grid spacing the input is returned unchanged with smoothing_skipped
/// set.
CoefficientField smooth_coefficients(const CoefficientField& a, double eps);

/// A(x0 + M y) sampled on `target` by bilinear interpolation. Values are
/// resampled, not conjugated. Throws if the target grid escapes the source
/// domain, listing the offending corners.
CoefficientField pullback(const CoefficientField& a, std::array<double, 2> x0, const Mat2& m,
                          const Grid2D& target);

/// (u(x0 + r y) - u(x0)) / r sampled on `target` by bilinear interpolation.
ScalarField rescale_solution(const ScalarField& u, std::array<double, 2> x0, double r,
                             const Grid2D& target);

/// Bilinear sample of a scalar grid function at an arbitrary point.
double bilinear_sample(const ScalarField& u, double px, double py);

// Presets.
CoefficientField preset_identity(const Grid2D& grid);
CoefficientField preset_constant(const Grid2D& grid, double a11, double a12, double a22);

/// A(x) = I + perturbation vanishing at the origin, with
/// lipA + hessA <= lambda by construction; measured seminorms are reported
/// by the returned field.
CoefficientField preset_smooth(const Grid2D& grid, double lambda);

/// Preset lookup by name: "identity", "constant" (3 params), "smooth" (1 param).
CoefficientField make_preset(const Grid2D& grid, const std::string& name,
                             const std::vector<double>& params);

}  // namespace aronsson
