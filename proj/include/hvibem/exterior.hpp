#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hvibem/hvi.hpp"

namespace hvibem {

/// Boundary data of the reconstructed exterior field: P1 trace, P0 normal
/// derivative, and the additive constant of the far-field behavior.
struct CauchyData {
    Eigen::VectorXd dirichlet;  // boundary P1 coefficients
    Eigen::VectorXd neumann;    // panel P0 coefficients, zero total flux
    double a = 0.0;

    /// Far-circle average of the assembled field minus a; analytically zero,
    /// reported as the closure residual of the radiation constant.
    double far_field_defect = 0.0;
};

/// Potential evaluation u2(x) = a + (double layer of trace) - (single layer
/// of density) by panelwise Gauss quadrature. Every point must lie outside
/// the boundary polygon with clearance min_dist.
Eigen::VectorXd evaluate_exterior(const BoundaryMesh& bm, const CauchyData& data,
                                  const std::vector<Vec2>& points, double min_dist);

CauchyData reconstruct_u2(const HviSolution& sol, const HviProblem& problem);

struct TransmissionReport {
    double dirichlet_jump = 0.0;      // trace mismatch on the non-contact part
    /// Flux balance p du1/dn - du2/dn - q integrated over a fixed partition
    /// of the boundary into arcs (RMS of the arc means, length weighted).
    /// The integrated form is the discrete stand-in for the weak-sense
    /// balance; raw panel values carry non-decaying singular layers at
    /// corners and part junctions.
    double neumann_residual = 0.0;
    double inclusion_residual = 0.0;  // length-weighted RMS of nodal interval distances
    double inclusion_max = 0.0;       // worst nodal interval distance
};

/// Three-way residual check of the transmission conditions using the
/// elementwise interior flux as an independent route.
TransmissionReport transmission_residuals(const HviSolution& sol, const HviProblem& problem,
                                          const ProblemData& data, int n_arcs = 12);

/// 5-point finite-difference Laplacian of the evaluated exterior field,
/// used as a harmonicity oracle.
double fd_laplacian(const BoundaryMesh& bm, const CauchyData& data, Vec2 center, double spacing,
                    double min_dist);

}  // namespace hvibem
