#pragma once

#include <Eigen/Dense>
#include <iosfwd>

#include "hvibem/geometry.hpp"

namespace hvibem {

/// Galerkin matrices of the 2D Laplace layer operators on a closed
/// polygonal boundary, kernel -(1/2pi) log|x-y|. Densities are piecewise
/// constant per panel (P0), traces continuous piecewise linear (P1).
struct BoundaryOperatorSet {
    BoundaryMesh bm;
    Eigen::MatrixXd V;        // P0 x P0 single layer
    Eigen::MatrixXd K;        // P0 x P1 double layer
    Eigen::MatrixXd W;        // P1 x P1 hypersingular (via arc-length parts)
    Eigen::MatrixXd M;        // P0 x P1 mass pairing
    Eigen::MatrixXd mass_p1;  // P1 x P1 boundary mass
    Eigen::VectorXd panel_len;

    int n_panels() const { return static_cast<int>(V.rows()); }
    int n_nodes() const { return static_cast<int>(W.rows()); }
};

/// Exterior Dirichlet-to-Neumann matrix on boundary P1 dofs. The 2D
/// radiation constant is eliminated through the zero-total-flux
/// constraint, which puts constants exactly in the kernel of S. The
/// factorized pieces stay around so the Neumann density and the radiation
/// constant of a given trace can be recovered.
struct SteklovOperator {
    Eigen::MatrixXd S;
    double asymmetry_defect = 0.0;  // norm of S - S^T before symmetrization
    double c_S_discrete = 0.0;      // filled by discrete_cS

    Eigen::MatrixXd B;         // (1/2) M - K
    Eigen::MatrixXd Vinv_B;    // V^{-1} B
    Eigen::VectorXd Vinv_b;    // V^{-1} panel_len
    double b_Vinv_b = 0.0;

    /// Radiation constant of the exterior field with trace v.
    double radiation_constant(const Eigen::VectorXd& v) const;
    /// P0 coefficients of the exterior normal derivative for trace v.
    Eigen::VectorXd neumann_density(const Eigen::VectorXd& v) const;
};

/// Requires diameter < 1 (capacity rescaling) so V stays positive definite.
BoundaryOperatorSet assemble_boundary_operators(const BoundaryMesh& bm);

SteklovOperator assemble_steklov(const BoundaryOperatorSet& ops);

/// Exterior circle eigenvalue |n|/R of the Dirichlet-to-Neumann map
/// (0 for the constant mode).
double circle_steklov_oracle(double radius, int mode);

/// Smallest generalized Rayleigh quotient of S against W + mass on the
/// complement of constants; positive for a sound assembly. Stores the
/// value on the operator and returns it.
double discrete_cS(SteklovOperator& st, const BoundaryOperatorSet& ops);

/// Row-major CSV dump with 17 significant digits, for cross-validation.
void dump_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);

}  // namespace hvibem
