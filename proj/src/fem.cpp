#include "hvibem/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace hvibem {

NonlinearityP NonlinearityP::linear(double p_const) {
    if (!(p_const > 0.0)) throw std::invalid_argument("NonlinearityP: p_const must be positive");
    return NonlinearityP(Kind::Linear, p_const, 0.0);
}

NonlinearityP NonlinearityP::rational(double a, double b) {
    if (!(a > 0.0) || b < 0.0) throw std::invalid_argument("NonlinearityP: need a > 0 and b >= 0");
    if (!(a > b / 8.0))
        throw std::invalid_argument("NonlinearityP: a > b/8 required for strict monotonicity");
    return NonlinearityP(Kind::Rational, a, b);
}

double NonlinearityP::p(double t) const {
    if (kind_ == Kind::Linear) return a_;
    return a_ + b_ / (1.0 + t * t);
}

double NonlinearityP::dp(double t) const {
    if (kind_ == Kind::Linear) return 0.0;
    const double d = 1.0 + t * t;
    return -2.0 * b_ * t / (d * d);
}

double NonlinearityP::g(double t) const {
    if (kind_ == Kind::Linear) return 0.5 * a_ * t * t;
    return 0.5 * a_ * t * t + 0.5 * b_ * std::log1p(t * t);
}

double NonlinearityP::p0() const { return kind_ == Kind::Linear ? a_ : a_ + b_; }

double NonlinearityP::monotonicity_constant() const {
    // inf over t >= 0 of min(p(t), d/dt[t p(t)]). For the rational family
    // (t p)' = a + b (1-t^2)/(1+t^2)^2 attains its minimum a - b/8 at
    // t = sqrt(3), and inf p = a, so the closed form is a - b/8. A sampled
    // minimization keeps the routine honest for both kinds.
    auto slope = [this](double t) {
        const double d = 1.0 + t * t;
        return kind_ == Kind::Linear ? a_ : std::min(p(t), a_ + b_ * (1.0 - t * t) / (d * d));
    };
    double best = slope(0.0);
    for (int i = 1; i <= 4000; ++i) {
        const double t = 1e-3 * std::pow(10.0, 4.0 * i / 4000.0);  // up to 1e1... covers the dip
        best = std::min(best, slope(t));
    }
    if (kind_ == Kind::Rational) best = std::min(best, a_ - b_ / 8.0);
    return best;
}

InteriorOperator::InteriorOperator(const Mesh2D& mesh, NonlinearityP nl)
    : mesh_(&mesh), nl_(nl), c_G_(nl.monotonicity_constant()) {
    const int n = static_cast<int>(mesh.nodes.size());
    stiffness_ = Eigen::MatrixXd::Zero(n, n);
    mass_ = Eigen::MatrixXd::Zero(n, n);
    tris_.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        const Vec2 a = mesh.nodes[static_cast<std::size_t>(t[0])];
        const Vec2 b = mesh.nodes[static_cast<std::size_t>(t[1])];
        const Vec2 c = mesh.nodes[static_cast<std::size_t>(t[2])];
        const double twice_area = cross(b - a, c - a);
        TriData td;
        td.idx = t;
        td.area = 0.5 * twice_area;
        // grad of the barycentric basis: rotate the opposite edge.
        td.grad[0] = (1.0 / twice_area) * Vec2{b.y - c.y, c.x - b.x};
        td.grad[1] = (1.0 / twice_area) * Vec2{c.y - a.y, a.x - c.x};
        td.grad[2] = (1.0 / twice_area) * Vec2{a.y - b.y, b.x - a.x};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                stiffness_(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]) +=
                    td.area * dot(td.grad[static_cast<std::size_t>(i)], td.grad[static_cast<std::size_t>(j)]);
                mass_(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]) +=
                    td.area / (i == j ? 6.0 : 12.0);
            }
        tris_.push_back(td);
    }
}

void InteriorOperator::check_size(const Eigen::VectorXd& u) const {
    if (u.size() != n_dofs()) throw std::invalid_argument("InteriorOperator: coefficient size mismatch");
}

double InteriorOperator::energy_G(const Eigen::VectorXd& u) const {
    check_size(u);
    double e = 0.0;
    for (const TriData& td : tris_) {
        Vec2 g{0.0, 0.0};
        for (int i = 0; i < 3; ++i)
            g = g + u(td.idx[static_cast<std::size_t>(i)]) * td.grad[static_cast<std::size_t>(i)];
        e += td.area * nl_.g(norm(g));
    }
    return e;
}

double InteriorOperator::apply_DG(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    check_size(u);
    check_size(v);
    double s = 0.0;
    for (const TriData& td : tris_) {
        Vec2 gu{0.0, 0.0}, gv{0.0, 0.0};
        for (int i = 0; i < 3; ++i) {
            gu = gu + u(td.idx[static_cast<std::size_t>(i)]) * td.grad[static_cast<std::size_t>(i)];
            gv = gv + v(td.idx[static_cast<std::size_t>(i)]) * td.grad[static_cast<std::size_t>(i)];
        }
        s += td.area * nl_.p(norm(gu)) * dot(gu, gv);
    }
    return s;
}

Eigen::VectorXd InteriorOperator::dg_gradient(const Eigen::VectorXd& u) const {
    check_size(u);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_dofs());
    for (const TriData& td : tris_) {
        Vec2 gu{0.0, 0.0};
        for (int i = 0; i < 3; ++i)
            gu = gu + u(td.idx[static_cast<std::size_t>(i)]) * td.grad[static_cast<std::size_t>(i)];
        const double w = td.area * nl_.p(norm(gu));
        for (int i = 0; i < 3; ++i)
            r(td.idx[static_cast<std::size_t>(i)]) += w * dot(gu, td.grad[static_cast<std::size_t>(i)]);
    }
    return r;
}

Eigen::MatrixXd InteriorOperator::dg_jacobian(const Eigen::VectorXd& u) const {
    check_size(u);
    const int n = n_dofs();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (const TriData& td : tris_) {
        Vec2 gu{0.0, 0.0};
        for (int i = 0; i < 3; ++i)
            gu = gu + u(td.idx[static_cast<std::size_t>(i)]) * td.grad[static_cast<std::size_t>(i)];
        const double t = norm(gu);
        const double p = nl_.p(t);
        // d/dg [p(|g|) g] = p I + (p'(t)/t) g g^T; for the rational family
        // p'(t)/t extends continuously to t = 0.
        double q;  // p'(t)/t
        if (nl_.kind() == NonlinearityP::Kind::Linear) {
            q = 0.0;
        } else {
            const double d = 1.0 + t * t;
            q = -2.0 * nl_.b() / (d * d);
        }
        for (int i = 0; i < 3; ++i) {
            const Vec2 gi = td.grad[static_cast<std::size_t>(i)];
            for (int j = 0; j < 3; ++j) {
                const Vec2 gj = td.grad[static_cast<std::size_t>(j)];
                const double val = p * dot(gi, gj) + q * dot(gu, gi) * dot(gu, gj);
                J(td.idx[static_cast<std::size_t>(i)], td.idx[static_cast<std::size_t>(j)]) += td.area * val;
            }
        }
    }
    return J;
}

Eigen::VectorXd InteriorOperator::load_form(const std::function<double(Vec2)>& f) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_dofs());
    // Edge-midpoint rule, exact for quadratic integrands f*phi with f in P1.
    for (const TriData& td : tris_) {
        const Vec2 a = mesh_->nodes[static_cast<std::size_t>(td.idx[0])];
        const Vec2 b = mesh_->nodes[static_cast<std::size_t>(td.idx[1])];
        const Vec2 c = mesh_->nodes[static_cast<std::size_t>(td.idx[2])];
        const std::array<Vec2, 3> mid{0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)};
        const std::array<std::array<double, 3>, 3> phi{{{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}};
        for (int qp = 0; qp < 3; ++qp) {
            const double fv = f(mid[static_cast<std::size_t>(qp)]);
            for (int i = 0; i < 3; ++i)
                r(td.idx[static_cast<std::size_t>(i)]) +=
                    (td.area / 3.0) * fv * phi[static_cast<std::size_t>(qp)][static_cast<std::size_t>(i)];
        }
    }
    return r;
}

Eigen::VectorXd InteriorOperator::load_form(const Eigen::VectorXd& f_nodal) const {
    check_size(f_nodal);
    return mass_ * f_nodal;
}

double InteriorOperator::h1_seminorm_sq(const Eigen::VectorXd& u) const {
    check_size(u);
    return u.dot(stiffness_ * u);
}

double InteriorOperator::empirical_lipschitz(int samples, std::uint64_t seed) const {
    const int n = n_dofs();
    const Eigen::MatrixXd E = stiffness_ + mass_;
    Eigen::LLT<Eigen::MatrixXd> llt(E);
    std::uint64_t state = seed ? seed : 0x9E3779B97F4A7C15ull;
    auto uniform = [&state]() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return 2.0 * (static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
    };
    double worst = 0.0;
    for (int s2 = 0; s2 < samples; ++s2) {
        Eigen::VectorXd u(n), v(n);
        for (int i = 0; i < n; ++i) {
            u(i) = uniform();
            v(i) = uniform();
        }
        const Eigen::VectorXd r = dg_gradient(u) - dg_gradient(v);
        const double dual = std::sqrt(r.dot(llt.solve(r)));
        const double dist = std::sqrt((u - v).dot(E * (u - v)));
        if (dist > 1e-14) worst = std::max(worst, dual / dist);
    }
    return worst;
}

}  // namespace hvibem
