#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "aronsson/coefficients.hpp"
#include "aronsson/grid.hpp"

namespace aronsson {

/// Energy value as a scaled pair: value = exp(scale) * mantissa.
/// The raw integral exp(H/eps) overflows for moderate |Du|^2/eps, so the
/// energy is carried as (max cell exponent, shifted sum) and all
/// comparisons go through log_value().
struct ScaledEnergy {
    double scale = 0.0;     // max over quadrature cells of H/eps
    double mantissa = 0.0;  // sum of h^2 exp(H/eps - scale)

    double log_value() const { return scale + std::log(mantissa); }
};

struct EpsSchedule {
    double eps0 = 1e-1;
    double ratio = 0.5;
    int count = 1;

    void validate() const;
    double eps_at(int j) const { return eps0 * std::pow(ratio, j); }
};

struct SolveConfig {
    double eps = 1e-2;
    double grad_tol = 1e-8;
    int max_newton_iters = 100;
    double armijo_slope_frac = 1e-4;  // accepted decrease fraction of the predicted slope
    double armijo_backtrack = 0.5;
    EpsSchedule schedule{};

    void validate() const;
};

struct RegularizedSolution {
    ScalarField u;                // boundary values equal the data exactly
    double eps = 0.0;
    ScaledEnergy energy{};
    double grad_norm = 0.0;       // sup-norm of the log-energy gradient at termination
    double balance_defect = 0.0;  // locally rescaled stationarity defect at termination
    int iterations = 0;
    double residual_sup = 0.0;    // independent check from the operator module
    double wall_time_s = 0.0;
    std::vector<double> log_energy_history;  // per accepted Newton step, non-increasing

    std::string report_json() const;
};

/// Newton failure; carries the best iterate seen and its gradient norm.
class SolveFailure : public std::runtime_error {
  public:
    SolveFailure(const std::string& msg, ScalarField best_iterate, double grad_norm)
        : std::runtime_error(msg), best(std::move(best_iterate)), grad_norm(grad_norm) {}

    ScalarField best;
    double grad_norm;
};

/// Discrete exponential-growth energy: sum over cells of
/// h^2 exp(H(center, bilinear cell gradient)/eps), returned as a scaled
/// pair. Cell-centered quadrature keeps the functional convex in the nodal
/// values. eps must be positive.
ScaledEnergy energy(const ScalarField& u, const CoefficientField& a, double eps);

/// Exact gradient of the log of the discrete energy (the softmax-weighted
/// average of per-cell gradients). Zero at boundary nodes; same zero set as
/// the raw energy gradient.
ScalarField energy_gradient(const ScalarField& u, const CoefficientField& a, double eps);

/// Minimizes the energy at cfg.eps with the boundary values of
/// `boundary_data` held fixed. Newton with Armijo backtracking on the
/// log-energy; the initial iterate solves div(A grad u) = 0. Throws
/// SolveFailure on non-convergence.
RegularizedSolution minimize(const ScalarField& boundary_data, const CoefficientField& a,
                             const SolveConfig& cfg);

/// Same, warm-started from a previous solution's interior values.
RegularizedSolution minimize(const ScalarField& boundary_data, const CoefficientField& a,
                             const SolveConfig& cfg, const ScalarField& warm_start);

struct ContinuationReport {
    std::vector<RegularizedSolution> solutions;
    /// sup |u_{j+1} - u_j| over the fixed interior subdomain (nodes at least
    /// 10% of the short grid side away from the boundary)
    std::vector<double> interior_diffs;
    bool resolution_warning = false;   // some eps in the schedule is below h^2
    bool ellipticity_warning = false;  // L >= 2^{1/5}
    double lip_seminorm = 0.0;

    std::string report_json() const;
};

/// Solves down cfg.schedule with warm starts.
ContinuationReport continuation(const ScalarField& boundary_data, const CoefficientField& a,
                                const SolveConfig& cfg);

/// Interior subdomain used for continuation diffs.
IndexSet continuation_inset_mask(const Grid2D& grid);

}  // namespace aronsson
