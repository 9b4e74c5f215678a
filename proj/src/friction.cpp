#include "hvibem/friction.hpp"

#include <cmath>
#include <stdexcept>

namespace hvibem {

FrictionLaw::FrictionLaw(double mu1, double mu2, double alpha)
    : mu1_(mu1), mu2_(mu2), alpha_(alpha) {
    if (!(mu1 > mu2) || !(mu2 > 0.0) || !(alpha > 0.0))
        throw std::invalid_argument("FrictionLaw: need mu1 > mu2 > 0 and alpha > 0");
}

double FrictionLaw::j(double xi) const {
    const double a = std::abs(xi);
    return mu2_ * a + (mu1_ - mu2_) / alpha_ * (1.0 - std::exp(-alpha_ * a));
}

ClarkeInterval FrictionLaw::clarke_interval(double xi) const {
    if (xi == 0.0) return {-mu1_, mu1_};
    const double slope = mu2_ + (mu1_ - mu2_) * std::exp(-alpha_ * std::abs(xi));
    const double eta = xi > 0.0 ? slope : -slope;
    return {eta, eta};
}

double FrictionLaw::selection(double xi) const { return clarke_interval(xi).mid(); }

double FrictionLaw::j0(double xi, double z) const {
    const ClarkeInterval iv = clarke_interval(xi);
    return z >= 0.0 ? iv.hi * z : iv.lo * z;
}

double FrictionLaw::smoothed_j0(double eps, double xi, double z) const {
    if (!(eps > 0.0)) throw std::invalid_argument("smoothed_j0: eps must be positive");
    const ClarkeInterval iv = clarke_interval(xi);
    const double az = std::abs(z);
    const double huber = az <= eps ? 0.5 * z * z / eps : az - 0.5 * eps;
    return iv.mid() * z + iv.rad() * huber;
}

FrictionLaw::GrowthConstants FrictionLaw::growth_constants(double gamma_s_length) const {
    // Every interval endpoint is bounded by mu1, independent of xi, and
    // eta*xi >= mu2 |xi| >= 0 for xi != 0, so c_j2 = 0 works.
    GrowthConstants gc;
    gc.c_j1 = mu1_;
    gc.c_j2 = 0.0;
    gc.d_J = mu1_ * std::sqrt(std::max(gamma_s_length, 0.0));
    return gc;
}

void BoundaryFunctionalJ::init_weights(const Mesh2D& mesh, const DofMaps& dofs) {
    const int nb = mesh.n_boundary;
    const int ns = static_cast<int>(dofs.gamma_s_dofs.size());
    weights_.resize(ns);
    for (int i = 0; i < ns; ++i) {
        const int k = dofs.gamma_s_local[static_cast<std::size_t>(i)];
        const Vec2 prev = mesh.nodes[static_cast<std::size_t>((k + nb - 1) % nb)];
        const Vec2 here = mesh.nodes[static_cast<std::size_t>(k)];
        const Vec2 next = mesh.nodes[static_cast<std::size_t>((k + 1) % nb)];
        weights_(i) = 0.5 * (norm(here - prev) + norm(next - here));
        if (!(weights_(i) > 0.0)) throw std::runtime_error("BoundaryFunctionalJ: nonpositive weight");
    }
}

BoundaryFunctionalJ::BoundaryFunctionalJ(const Mesh2D& mesh, const DofMaps& dofs, FrictionLaw law)
    : laws_(dofs.gamma_s_dofs.size(), law) {
    init_weights(mesh, dofs);
}

BoundaryFunctionalJ::BoundaryFunctionalJ(const Mesh2D& mesh, const DofMaps& dofs,
                                         std::vector<FrictionLaw> laws)
    : laws_(std::move(laws)) {
    init_weights(mesh, dofs);
    if (laws_.size() != static_cast<std::size_t>(weights_.size()))
        throw std::invalid_argument("BoundaryFunctionalJ: one law per contact dof required");
}

double BoundaryFunctionalJ::one_sided_lipschitz_cJ() const {
    double c = 0.0;
    for (const FrictionLaw& l : laws_) c = std::max(c, l.one_sided_lipschitz_cJ());
    return c;
}

double BoundaryFunctionalJ::J_h(const Eigen::VectorXd& v) const {
    if (v.size() != weights_.size()) throw std::invalid_argument("J_h: size mismatch");
    if (!enabled_) return 0.0;
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i)
        s += weights_(i) * laws_[static_cast<std::size_t>(i)].j(v(i));
    return s;
}

double BoundaryFunctionalJ::J0_h(const Eigen::VectorXd& y, const Eigen::VectorXd& z) const {
    if (y.size() != weights_.size() || z.size() != weights_.size())
        throw std::invalid_argument("J0_h: size mismatch");
    if (!enabled_) return 0.0;
    double s = 0.0;
    for (int i = 0; i < y.size(); ++i)
        s += weights_(i) * laws_[static_cast<std::size_t>(i)].j0(y(i), z(i));
    return s;
}

double BoundaryFunctionalJ::lumped_norm_sq(const Eigen::VectorXd& v) const {
    if (v.size() != weights_.size()) throw std::invalid_argument("lumped_norm_sq: size mismatch");
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i) s += weights_(i) * v(i) * v(i);
    return s;
}

}  // namespace hvibem
