#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "hvibem/geometry.hpp"

namespace hvibem {

/// Radial coefficient p of the interior operator div(p(|grad u|) grad u).
/// Two families: constant, and p(t) = a + b/(1+t^2). The rational family
/// needs a > b/8 so that t -> t*p(t) stays strictly increasing.
class NonlinearityP {
  public:
    enum class Kind { Linear, Rational };

    static NonlinearityP linear(double p_const);
    static NonlinearityP rational(double a, double b);

    Kind kind() const { return kind_; }
    double a() const { return a_; }
    double b() const { return b_; }

    double p(double t) const;
    double dp(double t) const;           // p'(t)
    double g(double t) const;            // integral of s*p(s) over [0,t]
    double p0() const;                   // sup of p
    double monotonicity_constant() const;  // inf over t of min(p, (t p)')

  private:
    NonlinearityP(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}
    Kind kind_;
    double a_;  // p_const for Linear
    double b_;
};

/// P1 interior operator pieces on a fixed mesh: the energy, its gradient
/// form, the Newton matrix, and load assembly. The gradient of a P1
/// function is constant per triangle, so every integral here is exact.
class InteriorOperator {
  public:
    InteriorOperator(const Mesh2D& mesh, NonlinearityP nl);

    const Mesh2D& mesh() const { return *mesh_; }
    const NonlinearityP& nonlinearity() const { return nl_; }
    int n_dofs() const { return static_cast<int>(mesh_->nodes.size()); }
    double c_G() const { return c_G_; }

    double energy_G(const Eigen::VectorXd& u) const;
    /// DG(u; v), linear in v.
    double apply_DG(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
    /// Gradient vector r with r(i) = DG(u; e_i).
    Eigen::VectorXd dg_gradient(const Eigen::VectorXd& u) const;
    Eigen::MatrixXd dg_jacobian(const Eigen::VectorXd& u) const;

    Eigen::VectorXd load_form(const std::function<double(Vec2)>& f) const;
    Eigen::VectorXd load_form(const Eigen::VectorXd& f_nodal) const;

    const Eigen::MatrixXd& stiffness() const { return stiffness_; }  // p == 1
    const Eigen::MatrixXd& mass() const { return mass_; }
    Eigen::VectorXd lumped_mass() const { return mass_.rowwise().sum(); }

    /// Discrete H1 seminorm squared, |u|^2 = u' A1 u.
    double h1_seminorm_sq(const Eigen::VectorXd& u) const;

    /// Largest sampled ratio of the dual norm of DG(u;.) - DG(v;.) to the
    /// H1 distance of u and v. The operator is Lipschitz; no closed-form
    /// constant is asserted, this reports the observed one.
    double empirical_lipschitz(int samples, std::uint64_t seed) const;

  private:
    void check_size(const Eigen::VectorXd& u) const;

    const Mesh2D* mesh_;
    NonlinearityP nl_;
    double c_G_;
    // Per-triangle data: area and the three P1 basis gradients.
    struct TriData {
        std::array<int, 3> idx;
        double area;
        std::array<Vec2, 3> grad;
    };
    std::vector<TriData> tris_;
    Eigen::MatrixXd stiffness_;
    Eigen::MatrixXd mass_;
};

}  // namespace hvibem
