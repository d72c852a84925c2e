#pragma once

#include "aronsson/coefficients.hpp"
#include "aronsson/grid.hpp"

namespace aronsson {

/// Pointwise operator values at one node.
struct OperatorSample {
    int index = -1;
    double hamiltonian = 0.0;
    double aronsson = 0.0;
    double residual = 0.0;  // -aronsson - eps * div(A grad u) at the node
    double eps = 0.0;
};

/// <A(x) p(x), p(x)> per node. Grids must match.
ScalarField hamiltonian(const CoefficientField& a, const VectorField& p);

/// Full expansion of <D_x H(x, Du), D_p H(x, Du)> for H = <A p, p>:
///   4 <A Du, D^2u A Du> + 2 sum_k <dA_k Du, Du> (A Du)_k.
/// For A = I this is exactly 4 <Du, D^2u Du>, four times the infinity
/// Laplacian. Interior nodes only; boundary entries of the result are zero.
ScalarField aronsson_operator(const ScalarField& u, const CoefficientField& a);

/// Residual of the eps-regularized equation with the sign convention
///   residual = -aronsson_operator(u, A) - eps * div(A grad u).
/// Interior only, boundary entries zero. eps >= 0.
ScalarField regularized_residual(const ScalarField& u, const CoefficientField& a, double eps);

/// Max of hamiltonian(A, grad u) over the interior nodes of `mask`.
/// Throws if the mask contains no interior node.
double sup_energy(const ScalarField& u, const CoefficientField& a, const IndexSet& mask);

/// All pointwise values at one interior node.
OperatorSample sample_operator(const ScalarField& u, const CoefficientField& a, double eps,
                               int node);

}  // namespace aronsson
