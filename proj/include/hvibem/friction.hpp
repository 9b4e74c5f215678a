#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hvibem/geometry.hpp"

namespace hvibem {

struct ClarkeInterval {
    double lo = 0.0;
    double hi = 0.0;
    double mid() const { return 0.5 * (lo + hi); }
    double rad() const { return 0.5 * (hi - lo); }
};

/// Nonmonotone slip-weakening friction density
///   j(xi) = mu2 |xi| + (mu1 - mu2)/alpha * (1 - exp(-alpha |xi|)),
/// whose single-valued branch mu2 + (mu1-mu2) exp(-alpha |xi|) decays from
/// mu1 to mu2 while the jump at 0 points upward.
class FrictionLaw {
  public:
    FrictionLaw(double mu1, double mu2, double alpha);

    double mu1() const { return mu1_; }
    double mu2() const { return mu2_; }
    double alpha() const { return alpha_; }

    double j(double xi) const;
    ClarkeInterval clarke_interval(double xi) const;
    /// Measurable selection: midpoint at 0, the derivative elsewhere.
    double selection(double xi) const;
    /// Generalized directional derivative, the support function of the
    /// Clarke interval: hi*z for z >= 0, lo*z otherwise.
    double j0(double xi, double z) const;
    /// j0 with the |z| kink replaced by its Moreau envelope of width eps;
    /// exact whenever the interval is a singleton.
    double smoothed_j0(double eps, double xi, double z) const;

    /// One-sided Lipschitz constant of J0: alpha*(mu1-mu2).
    double one_sided_lipschitz_cJ() const { return alpha_ * (mu1_ - mu2_); }

    struct GrowthConstants {
        double c_j1;  // |eta| <= c_j1 (1 + |xi|)
        double c_j2;  // eta*xi >= -c_j2 |xi|
        double d_J;   // dual-norm growth of the integral functional
    };
    GrowthConstants growth_constants(double gamma_s_length) const;

  private:
    double mu1_, mu2_, alpha_;
};

/// Lumped quadrature realization of the boundary friction functional on
/// the contact dofs: J_h(v) = sum_i w_i j(v_i). The nodal decoupling makes
/// the nonsmooth part separable.
class BoundaryFunctionalJ {
  public:
    /// Homogeneous law on every contact node.
    BoundaryFunctionalJ(const Mesh2D& mesh, const DofMaps& dofs, FrictionLaw law);
    /// Per-node laws, one per contact dof.
    BoundaryFunctionalJ(const Mesh2D& mesh, const DofMaps& dofs, std::vector<FrictionLaw> laws);

    const FrictionLaw& law() const { return laws_.front(); }
    const FrictionLaw& law_at(int i) const { return laws_[static_cast<std::size_t>(i)]; }
    const Eigen::VectorXd& weights() const { return weights_; }
    int n_dofs() const { return static_cast<int>(weights_.size()); }
    bool enabled() const { return enabled_; }
    void set_enabled(bool on) { enabled_ = on; }  // J == 0 switch

    double J_h(const Eigen::VectorXd& v) const;
    double J0_h(const Eigen::VectorXd& y, const Eigen::VectorXd& z) const;
    /// Lumped L2(contact) norm squared, the X-norm of the smallness theory.
    double lumped_norm_sq(const Eigen::VectorXd& v) const;
    /// Worst one-sided Lipschitz constant over the nodes.
    double one_sided_lipschitz_cJ() const;

  private:
    void init_weights(const Mesh2D& mesh, const DofMaps& dofs);
    std::vector<FrictionLaw> laws_;
    Eigen::VectorXd weights_;
    bool enabled_ = true;
};

}  // namespace hvibem
