#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aronsson/coefficients.hpp"
#include "aronsson/grid.hpp"
#include "aronsson/solver.hpp"

namespace aronsson {

/// Barrier w(x) = amplitude * |x - vertex|^exponent and the constants
/// derived from it. The supersolution property needs gamma_tilde > 0, which
/// requires L < 2^{1/4} and exponent < 2 - L^4.
struct BarrierSpec {
    std::array<double, 2> vertex{0.0, 0.0};
    double amplitude = 1.5;  // > 1
    double exponent = 0.5;   // gamma in (0, 1)

    void validate() const;

    double gamma_tilde(double ellipticity) const {
        const double l2 = ellipticity * ellipticity;
        return (2.0 - exponent) / l2 - l2;
    }

    /// min over grid nodes of (gamma_tilde / (2 |x - vertex|)) / sup|A|.
    double delta0(const CoefficientField& a) const;

    /// Coefficient 2 lambda^3 gamma^3 gamma_tilde of the barrier
    /// computation's leading lower bound, in the proof's normalization
    /// (half of this module's operator convention).
    double proof_main_coefficient(double ellipticity) const;

    /// w sampled on the grid.
    ScalarField barrier_field(const Grid2D& grid) const;

    /// Closed-form -aronsson_operator(w) - eps div(A grad w) for spatially
    /// constant A, split into (second-order term, entry-derivative term = 0,
    /// eps term). Used as the symbolic oracle against the stencil route.
    std::array<double, 3> symbolic_terms(std::array<double, 2> x, const Sym2& a,
                                         double eps) const;
};

struct CheckReport {
    std::string name;
    std::map<std::string, bool> hypothesis_flags;
    std::map<std::string, double> measured;
    double threshold = 0.0;
    enum class Status { Pass, Fail, Flagged } status = Status::Pass;

    bool passed() const { return status == Status::Pass; }
    bool flagged() const { return status == Status::Flagged; }
    std::string to_json() const;  // {name, hypothesis_flags, measured, threshold, pass}
};

struct FlatnessReport {
    double lambda = 0.0;
    bool domain_ok = false;        // grid covers B(0,3)
    bool coeff_hypothesis = false; // A(0) = I and lipA + hessA <= lambda
    bool flat_hypothesis = false;  // max over B(0,2) of |u - x_n| <= lambda
    double flat_deviation = 0.0;   // measured max over B(0,2) of |u - x_n|
    double sup_excess = 0.0;       // sup over B(0,1) of (|Du|^2 - d_n u)_+
    double ratio = 0.0;            // sup_excess / sqrt(lambda)
    double phi_max = 0.0;          // max over B(0,1) of ((|Du|^2 - d_n u)_+)^2

    bool flagged() const { return !(domain_ok && coeff_hypothesis && flat_hypothesis); }
    std::string to_json() const;
};

/// max over all nodes of |u| against max over boundary nodes of |g|;
/// passes when the excess is at most 1e-8 * scale.
CheckReport check_max_principle(const RegularizedSolution& sol, const ScalarField& g);

/// sup of |grad u| over V. Throws unless every node of V is at least two
/// layers from the boundary.
double interior_gradient_bound(const ScalarField& u, const IndexSet& v_mask);

/// Max over an eps schedule of the per-solution bound (the estimate's
/// constant is independent of eps).
double interior_gradient_bound(const std::vector<RegularizedSolution>& schedule,
                               const IndexSet& v_mask);

/// Sign check of the regularized operator applied to the barrier at all
/// interior nodes with |x - vertex| >= 2h. Throws if gamma_tilde <= 0;
/// reports Flagged instead of Pass/Fail when lipA exceeds delta0.
CheckReport barrier_supersolution_check(const BarrierSpec& spec, const CoefficientField& a,
                                        double eps);

/// Least C with |u_eps(x) - g(vertex)| <= C |x - vertex|^gamma, fitted per
/// eps; passes when max/min over the schedule is at most 2.
CheckReport boundary_holder_check(const std::vector<RegularizedSolution>& schedule,
                                  const ScalarField& g, const BarrierSpec& spec);

/// Flatness estimate report over B(0,1) after verifying the hypotheses on
/// B(0,2). x_n is the second coordinate.
FlatnessReport flatness_check(const RegularizedSolution& sol, double lambda,
                              const CoefficientField& a);

}  // namespace aronsson
