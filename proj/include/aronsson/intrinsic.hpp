#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aronsson/coefficients.hpp"
#include "aronsson/grid.hpp"

namespace aronsson {

/// Shortest-path distance from a source node with edge cost
/// sqrt(<A^{-1}(midpoint) dx, dx>), the path metric dual to the gradient
/// constraint <A grad w, grad w> <= 1.
struct DistanceField {
    Grid2D grid;
    int source = -1;
    std::vector<double> d;
    int stencil_radius = 0;  // Chebyshev radius of the primitive offsets used

    double at(int k) const { return d[k]; }
};

/// Discrete sphere half-width used when sampling level sets of a distance
/// field; the exact level set is not grid-representable.
inline double shell_halfwidth(double h) { return 0.5 * (1.0 + std::sqrt(2.0)) * h; }

/// Label-setting (Dijkstra) over all primitive offsets with Chebyshev radius
/// at most 6, ties broken toward the lowest node index.
DistanceField intrinsic_distance(const CoefficientField& a, int source);

/// S^+_r u(x): max of (u(z) - u(x)) / r over the discrete sphere
/// { z : |d(z) - r| <= shell half-width }. Throws when the shell is empty.
double slope(const ScalarField& u, int x, double r, const DistanceField& dist);

struct LipEstimate {
    double value = 0.0;
    double shell_radius = 0.0;  // the shell that attained the estimate
};

/// Pointwise Lipschitz constant in the intrinsic metric, estimated on the
/// smallest resolvable shells r in {2h, 3h, 4h}.
LipEstimate lip_at(const ScalarField& u, int x, const DistanceField& dist);

struct BlowupTrace {
    int center = -1;
    std::vector<double> radii;                    // strictly decreasing
    std::vector<std::array<double, 2>> slopes;    // least-squares slope per radius
    std::vector<double> excess;                   // sup |u(x+y)-u(x)-<e,y>| / r
    std::vector<std::vector<double>> slope_dist;  // pairwise |e_i - e_j|

    std::string to_csv() const;  // header r,e1,e2,excess
};

/// Least-squares affine fit of u over B(x, r) for each radius of the ladder.
BlowupTrace blowup_trace(const ScalarField& u, int center, const std::vector<double>& ladder);

struct GradientNearReport {
    bool hypothesis_ok = false;  // max over the ball of |v - v(c) - <b, x-c>| <= eta
    double hypothesis_deviation = 0.0;
    int node = -1;          // argmin of |Dv - b| over interior ball nodes
    double distance = 0.0;  // min |Dv - b|
    double bound = 0.0;     // 4 eta + 10 h / radius
    bool within_bound = false;
};

/// Searches B(center, radius) for a point where Dv is 4 eta close to b.
GradientNearReport gradient_near(const ScalarField& v, std::array<double, 2> center,
                                 double radius, std::array<double, 2> b, double eta);

/// Mean over the intrinsic ball B_d(x0, r) of |Du - a|^2. When `a` is not
/// supplied it is taken from the blow-up trace at the matching radius.
/// Requires at least 10 ball nodes.
double lebesgue_deviation(const ScalarField& u, int x0, double r, const DistanceField& dist,
                          std::optional<std::array<double, 2>> a = std::nullopt);

struct MinimizerProbe {
    double f_u = 0.0;
    double f_v = 0.0;
    bool pass = false;
};

/// Compares sup energies of u and a competitor v that shares u's values on
/// the discrete boundary of the mask.
MinimizerProbe absolute_minimizer_probe(const ScalarField& u, const CoefficientField& a,
                                        const IndexSet& subdomain, const ScalarField& v);

}  // namespace aronsson
