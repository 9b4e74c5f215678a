#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "hvibem/bem.hpp"
#include "hvibem/fem.hpp"
#include "hvibem/friction.hpp"
#include "hvibem/geometry.hpp"

namespace hvibem {

/// Convex extended-real-valued perturbation: a linear functional plus an
/// optional bilateral box on the interior coefficients.
struct ExtendedF {
    Eigen::VectorXd linear_u;  // empty means zero
    Eigen::VectorXd linear_v;
    bool has_box = false;
    Eigen::VectorXd box_lo;
    Eigen::VectorXd box_hi;

    void validate(int n_u, int n_v) const;
};

struct SmallnessReport {
    double c_A_discrete = 0.0;   // coercivity of the coupled form on the gauge complement
    double gamma_norm_sq = 0.0;  // lumped-L2(contact) against the E-norm, v-block
    double c_J = 0.0;
    double margin = 0.0;         // c_A - c_J * gamma_norm_sq
    bool unique_certified = false;
};

struct HviSolution {
    Eigen::VectorXd u;
    Eigen::VectorXd v;
    int outer_iterations = 0;
    std::vector<double> contraction_factors;
    std::vector<double> step_norms;
    double residual = 0.0;  // worst violation over the test-direction bank
    bool converged = false;
    bool smallness_satisfied = false;
    double energy = 0.0;
    double inner_first_order_residual = 0.0;
    bool inner_energy_monotone = true;
};

struct SolveOptions {
    double outer_tol = 1e-9;    // times problem scale
    double inner_tol = 1e-11;
    int max_outer = 200;
    int max_inner = 120;
    int residual_bank = 200;
    double residual_tol = 1e-8;  // times problem scale; gates `converged`
    std::uint64_t seed = 1234;
    std::optional<Eigen::VectorXd> start;  // stacked [u; v]
    bool check_residual = true;
    bool certify = true;  // run the smallness eigenproblems (cached per problem)
};

/// Assembled discrete problem: interior operator, Steklov matrix, contact
/// friction functional, load functional, and the convex perturbation. The
/// coupled operator annihilates the constant interior function in 2D, so
/// unconstrained solves run in a mean-zero gauge and require the load to
/// be balanced against that direction.
class HviProblem {
  public:
    HviProblem(std::shared_ptr<const Mesh2D> mesh, DofMaps dofs, NonlinearityP nl, FrictionLaw law,
               const Eigen::VectorXd& lambda_u, const Eigen::VectorXd& lambda_v, ExtendedF F,
               bool friction_enabled);

    // sizes
    int n_u() const { return interior_.n_dofs(); }
    int n_v() const { return static_cast<int>(dofs_.gamma_s_dofs.size()); }
    int n_dofs() const { return n_u() + n_v(); }
    int n_boundary() const { return mesh_->n_boundary; }

    const Mesh2D& mesh() const { return *mesh_; }
    const DofMaps& dofs() const { return dofs_; }
    const InteriorOperator& interior() const { return interior_; }
    const BoundaryOperatorSet& boundary_ops() const { return ops_; }
    const SteklovOperator& steklov() const { return steklov_; }
    const BoundaryFunctionalJ& friction() const { return friction_; }
    const ExtendedF& extended_F() const { return F_; }
    void set_extended_F(ExtendedF F);
    void set_lambda(const Eigen::VectorXd& lambda_u, const Eigen::VectorXd& lambda_v);

    bool gauge_active() const { return !F_.has_box; }
    double scale() const { return scale_; }

    // stacked-vector helpers
    Eigen::VectorXd stack(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
    Eigen::VectorXd u_part(const Eigen::VectorXd& x) const { return x.head(n_u()); }
    Eigen::VectorXd v_part(const Eigen::VectorXd& x) const { return x.tail(n_v()); }
    /// Boundary trace u|_Gamma + v (extension of v by zero off the contact part).
    Eigen::VectorXd boundary_comb(const Eigen::VectorXd& x) const;

    double e_norm_sq(const Eigen::VectorXd& x) const;
    double e_norm(const Eigen::VectorXd& x) const;
    const Eigen::MatrixXd& e_matrix_u() const { return E_u_; }
    const Eigen::MatrixXd& e_matrix_v() const { return E_v_; }

    /// A(x)(y) = DG(u_x; u_y) + <S(trace x), trace y>.
    double apply_A(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    Eigen::VectorXd A_gradient(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd A_jacobian(const Eigen::VectorXd& x) const;

    /// Net linear functional lambda - F_linear as a stacked vector.
    const Eigen::VectorXd& lambda_net() const { return lambda_net_; }
    double lambda_defect_on_kernel() const;  // |lambda_net applied to (1, 0)|
    bool data_compatible() const;

    /// Full nonsmooth energy G + (1/2)<S t, t> + J_h(v) + F_lin x - lambda x.
    double energy(const Eigen::VectorXd& x) const;

    /// phi(x, w) = A(x)(w - x) + J0_h(v_x; v_w - v_x) - lambda_net(w - x).
    double bifunction_phi(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const;

    SmallnessReport smallness_check() const;

    HviSolution solve(const SolveOptions& opts = {}) const;

    /// One frozen-argument convex solve: anchor y fixes the Clarke data of
    /// the friction term. Exposed for the outer-loop tests.
    Eigen::VectorXd inner_convex_solve(const Eigen::VectorXd& anchor_v, const Eigen::VectorXd& start,
                                       const SolveOptions& opts, double* first_order_residual = nullptr,
                                       bool* energy_monotone = nullptr) const;

    /// Direct minimization of the full energy, which is strongly convex
    /// whenever the smallness margin is positive. Fallback path of solve().
    Eigen::VectorXd direct_energy_solve(const Eigen::VectorXd& start, const SolveOptions& opts,
                                        double* first_order_residual = nullptr) const;

    Eigen::VectorXd project_to_box(const Eigen::VectorXd& x) const;
    /// Mean-zero gauge representative along the constant interior direction.
    Eigen::VectorXd gauge_fix(const Eigen::VectorXd& x) const;

    /// KKT residual triple for the obstacle variant: the smooth residual at
    /// interior nodes split by the three complementarity cases.
    struct ComplementarityReport {
        double max_free_abs = 0.0;
        double min_lower = 0.0;  // most negative residual at lower-active nodes
        double max_upper = 0.0;  // most positive residual at upper-active nodes
        int n_lower_active = 0;
        int n_upper_active = 0;
    };
    ComplementarityReport complementarity_report(const HviSolution& sol, double active_tol = 1e-10) const;

  private:
    // Per-contact-node 1D nonsmooth model: either the frozen-argument
    // support function (linear branches around the anchor) or the actual
    // friction density (curved branches around zero).
    struct NodeModel {
        double kink = 0.0;
        double weight = 0.0;
        bool has_kink = false;
        bool frozen_linear = true;
        double mid = 0.0, rad = 0.0;          // frozen-argument data
        double mu1 = 0.0, mu2 = 0.0, alpha = 0.0;  // law data
    };
    std::vector<NodeModel> frozen_models(const Eigen::VectorXd& anchor_v) const;
    std::vector<NodeModel> true_models() const;
    Eigen::VectorXd nonsmooth_newton(const std::vector<NodeModel>& models, const Eigen::VectorXd& start,
                                     const SolveOptions& opts, double* first_order_residual,
                                     bool* energy_monotone) const;

    std::shared_ptr<const Mesh2D> mesh_;
    DofMaps dofs_;
    InteriorOperator interior_;
    BoundaryOperatorSet ops_;
    SteklovOperator steklov_;
    BoundaryFunctionalJ friction_;
    ExtendedF F_;
    Eigen::VectorXd lambda_u_, lambda_v_;
    Eigen::VectorXd lambda_net_;
    Eigen::MatrixXd E_u_, E_v_;
    Eigen::VectorXd gauge_weights_;  // lumped interior mass on the u block
    double scale_ = 1.0;
    mutable std::optional<SmallnessReport> smallness_cache_;  // load-independent

    void rebuild_lambda_net();
};

struct ProblemData {
    std::function<double(Vec2)> f;  // volume load
    std::function<double(Vec2)> q;  // boundary flux datum
};

HviProblem assemble_problem(std::shared_ptr<const Mesh2D> mesh, const DofMaps& dofs, NonlinearityP nl,
                            FrictionLaw law, const ProblemData& data, ExtendedF F,
                            bool friction_enabled = true);

/// Global minimizer of the nonsmooth energy by multi-start coordinate
/// search; refuses more than 6 total dofs. Under a positive smallness
/// margin this minimizer is the unique solution of the inequality. The
/// result is gauge-fixed whenever the problem is.
HviSolution brute_force_oracle(const HviProblem& problem, std::uint64_t seed = 99);

}  // namespace hvibem
