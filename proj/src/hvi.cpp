#include "hvibem/hvi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hvibem {

namespace {

// Deterministic portable RNG helpers (distribution code in the standard
// library is implementation-defined, which would break byte-stable output).
struct Rng {
    std::uint64_t s;
    explicit Rng(std::uint64_t seed) : s(seed ? seed : 0x9E3779B97F4A7C15ull) {}
    std::uint64_t next() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        return s;
    }
    double uniform() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

double huber(double z, double eps) {
    const double az = std::abs(z);
    return az <= eps ? 0.5 * z * z / eps : az - 0.5 * eps;
}

double huber_d1(double z, double eps) { return std::clamp(z / eps, -1.0, 1.0); }

double huber_d2(double z, double eps) { return std::abs(z) <= eps ? 1.0 / eps : 0.0; }

}  // namespace

void ExtendedF::validate(int n_u, int n_v) const {
    if (linear_u.size() != 0 && linear_u.size() != n_u)
        throw std::invalid_argument("ExtendedF: linear_u size mismatch");
    if (linear_v.size() != 0 && linear_v.size() != n_v)
        throw std::invalid_argument("ExtendedF: linear_v size mismatch");
    if (has_box) {
        if (box_lo.size() != n_u || box_hi.size() != n_u)
            throw std::invalid_argument("ExtendedF: box size mismatch");
        for (int i = 0; i < n_u; ++i)
            if (!(box_lo(i) <= box_hi(i)))
                throw std::invalid_argument("ExtendedF: box is infeasible (lo > hi)");
    }
}

HviProblem::HviProblem(std::shared_ptr<const Mesh2D> mesh, DofMaps dofs, NonlinearityP nl,
                       FrictionLaw law, const Eigen::VectorXd& lambda_u,
                       const Eigen::VectorXd& lambda_v, ExtendedF F, bool friction_enabled)
    : mesh_(std::move(mesh)),
      dofs_(std::move(dofs)),
      interior_(*mesh_, nl),
      ops_(assemble_boundary_operators(BoundaryMesh::from_mesh(*mesh_))),
      steklov_(assemble_steklov(ops_)),
      friction_(*mesh_, dofs_, law),
      F_(std::move(F)),
      lambda_u_(lambda_u),
      lambda_v_(lambda_v) {
    friction_.set_enabled(friction_enabled);
    F_.validate(n_u(), n_v());
    if (lambda_u_.size() != n_u() || lambda_v_.size() != n_v())
        throw std::invalid_argument("HviProblem: load vector size mismatch");

    E_u_ = interior_.stiffness() + interior_.mass();
    const Eigen::MatrixXd N = ops_.W + ops_.mass_p1;
    const int ns = n_v();
    E_v_.resize(ns, ns);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < ns; ++j)
            E_v_(i, j) = N(dofs_.gamma_s_local[static_cast<std::size_t>(i)],
                           dofs_.gamma_s_local[static_cast<std::size_t>(j)]);
    gauge_weights_ = interior_.lumped_mass();
    rebuild_lambda_net();
}

void HviProblem::rebuild_lambda_net() {
    lambda_net_.resize(n_dofs());
    lambda_net_.head(n_u()) = lambda_u_;
    lambda_net_.tail(n_v()) = lambda_v_;
    if (F_.linear_u.size()) lambda_net_.head(n_u()) -= F_.linear_u;
    if (F_.linear_v.size()) lambda_net_.tail(n_v()) -= F_.linear_v;
    scale_ = 1.0 + lambda_net_.lpNorm<Eigen::Infinity>();
}

void HviProblem::set_extended_F(ExtendedF F) {
    F.validate(n_u(), n_v());
    F_ = std::move(F);
    rebuild_lambda_net();
}

void HviProblem::set_lambda(const Eigen::VectorXd& lambda_u, const Eigen::VectorXd& lambda_v) {
    if (lambda_u.size() != n_u() || lambda_v.size() != n_v())
        throw std::invalid_argument("HviProblem: load vector size mismatch");
    lambda_u_ = lambda_u;
    lambda_v_ = lambda_v;
    rebuild_lambda_net();
}

Eigen::VectorXd HviProblem::stack(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    if (u.size() != n_u() || v.size() != n_v()) throw std::invalid_argument("stack: size mismatch");
    Eigen::VectorXd x(n_dofs());
    x.head(n_u()) = u;
    x.tail(n_v()) = v;
    return x;
}

Eigen::VectorXd HviProblem::boundary_comb(const Eigen::VectorXd& x) const {
    const int nb = n_boundary();
    Eigen::VectorXd t = x.head(nb);
    for (int i = 0; i < n_v(); ++i)
        t(dofs_.gamma_s_local[static_cast<std::size_t>(i)]) += x(n_u() + i);
    return t;
}

double HviProblem::e_norm_sq(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd u = x.head(n_u());
    const Eigen::VectorXd v = x.tail(n_v());
    return u.dot(E_u_ * u) + v.dot(E_v_ * v);
}

double HviProblem::e_norm(const Eigen::VectorXd& x) const { return std::sqrt(std::max(0.0, e_norm_sq(x))); }

double HviProblem::apply_A(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd tx = boundary_comb(x);
    const Eigen::VectorXd ty = boundary_comb(y);
    return interior_.apply_DG(x.head(n_u()), y.head(n_u())) + ty.dot(steklov_.S * tx);
}

Eigen::VectorXd HviProblem::A_gradient(const Eigen::VectorXd& x) const {
    const int nb = n_boundary();
    Eigen::VectorXd g(n_dofs());
    g.head(n_u()) = interior_.dg_gradient(x.head(n_u()));
    const Eigen::VectorXd st = steklov_.S * boundary_comb(x);
    g.head(nb) += st;
    for (int i = 0; i < n_v(); ++i)
        g(n_u() + i) = st(dofs_.gamma_s_local[static_cast<std::size_t>(i)]);
    return g;
}

Eigen::MatrixXd HviProblem::A_jacobian(const Eigen::VectorXd& x) const {
    const int n = n_u(), ns = n_v(), nb = n_boundary();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n + ns, n + ns);
    H.topLeftCorner(n, n) = interior_.dg_jacobian(x.head(n));
    const Eigen::MatrixXd& S = steklov_.S;
    H.topLeftCorner(nb, nb) += S;
    for (int i = 0; i < ns; ++i) {
        const int gi = dofs_.gamma_s_local[static_cast<std::size_t>(i)];
        H.block(0, n + i, nb, 1) += S.col(gi);
        H.block(n + i, 0, 1, nb) += S.row(gi);
        for (int j = 0; j < ns; ++j)
            H(n + i, n + j) += S(gi, dofs_.gamma_s_local[static_cast<std::size_t>(j)]);
    }
    return H;
}

double HviProblem::lambda_defect_on_kernel() const { return std::abs(lambda_net_.head(n_u()).sum()); }

bool HviProblem::data_compatible() const {
    return lambda_defect_on_kernel() <= 1e-8 * (1.0 + lambda_net_.lpNorm<1>());
}

double HviProblem::energy(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd t = boundary_comb(x);
    return interior_.energy_G(x.head(n_u())) + 0.5 * t.dot(steklov_.S * t) +
           friction_.J_h(x.tail(n_v())) - lambda_net_.dot(x);
}

double HviProblem::bifunction_phi(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
    const Eigen::VectorXd d = w - x;
    return apply_A(x, d) + friction_.J0_h(x.tail(n_v()), d.tail(n_v())) - lambda_net_.dot(d);
}

Eigen::VectorXd HviProblem::project_to_box(const Eigen::VectorXd& x) const {
    if (!F_.has_box) return x;
    Eigen::VectorXd y = x;
    for (int i = 0; i < n_u(); ++i) y(i) = std::clamp(y(i), F_.box_lo(i), F_.box_hi(i));
    return y;
}

Eigen::VectorXd HviProblem::gauge_fix(const Eigen::VectorXd& x) const {
    if (!gauge_active()) return x;
    Eigen::VectorXd y = x;
    const double c = gauge_weights_.dot(y.head(n_u())) / gauge_weights_.sum();
    y.head(n_u()).array() -= c;
    return y;
}

SmallnessReport HviProblem::smallness_check() const {
    if (smallness_cache_) return *smallness_cache_;
    const int n = n_u(), ns = n_v(), nb = n_boundary(), nd = n_dofs();
    SmallnessReport rep;
    rep.c_J = friction_.enabled() ? friction_.one_sided_lipschitz_cJ() : 0.0;

    // Monotonicity form of the coupled operator: the interior part is
    // bounded below by c_G times the stiffness form, the trace part is the
    // Steklov form itself.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nd, nd);
    A.topLeftCorner(n, n) = interior_.c_G() * interior_.stiffness();
    const Eigen::MatrixXd& S = steklov_.S;
    A.topLeftCorner(nb, nb) += S;
    for (int i = 0; i < ns; ++i) {
        const int gi = dofs_.gamma_s_local[static_cast<std::size_t>(i)];
        A.block(0, n + i, nb, 1) += S.col(gi);
        A.block(n + i, 0, 1, nb) += S.row(gi);
        for (int j = 0; j < ns; ++j)
            A(n + i, n + j) += S(gi, dofs_.gamma_s_local[static_cast<std::size_t>(j)]);
    }
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(nd, nd);
    E.topLeftCorner(n, n) = E_u_;
    E.bottomRightCorner(ns, ns) = E_v_;

    // Restrict to the gauge hyperplane; the constant interior direction is
    // the one direction the 2D coupled form cannot see.
    Eigen::VectorXd c0 = Eigen::VectorXd::Zero(nd);
    c0.head(n) = gauge_weights_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c0);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd C = Q.rightCols(nd - 1);

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (C.transpose() * A * C + (C.transpose() * A * C).transpose()).eval(),
        C.transpose() * E * C);
    if (es.info() != Eigen::Success) throw std::runtime_error("smallness_check: eigensolver failed");
    rep.c_A_discrete = es.eigenvalues().minCoeff();

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(ns, ns);
    L.diagonal() = friction_.weights();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eg(L, E_v_);
    if (eg.info() != Eigen::Success) throw std::runtime_error("smallness_check: eigensolver failed");
    rep.gamma_norm_sq = eg.eigenvalues().maxCoeff();

    rep.margin = rep.c_A_discrete - rep.c_J * rep.gamma_norm_sq;
    rep.unique_certified = rep.margin > 0.0;
    smallness_cache_ = rep;
    return rep;
}

namespace {

// 1D piecewise model helpers. z is the offset from the kink.

double law_branch_slope(double mu1, double mu2, double alpha, double v) {
    const double s = mu2 + (mu1 - mu2) * std::exp(-alpha * std::abs(v));
    return v >= 0.0 ? s : -s;
}

double law_value(double mu1, double mu2, double alpha, double v) {
    const double a = std::abs(v);
    return mu2 * a + (mu1 - mu2) / alpha * (1.0 - std::exp(-alpha * a));
}

}  // namespace

std::vector<HviProblem::NodeModel> HviProblem::frozen_models(const Eigen::VectorXd& anchor_v) const {
    std::vector<NodeModel> models(static_cast<std::size_t>(n_v()));
    for (int i = 0; i < n_v(); ++i) {
        NodeModel& m = models[static_cast<std::size_t>(i)];
        m.weight = friction_.weights()(i);
        m.frozen_linear = true;
        if (!friction_.enabled()) continue;
        const ClarkeInterval iv = friction_.law_at(i).clarke_interval(anchor_v(i));
        m.kink = anchor_v(i);
        m.mid = iv.mid();
        m.rad = iv.rad();
        m.has_kink = m.rad > 1e-300;
    }
    return models;
}

std::vector<HviProblem::NodeModel> HviProblem::true_models() const {
    std::vector<NodeModel> models(static_cast<std::size_t>(n_v()));
    for (int i = 0; i < n_v(); ++i) {
        NodeModel& m = models[static_cast<std::size_t>(i)];
        m.weight = friction_.weights()(i);
        m.frozen_linear = false;
        if (!friction_.enabled()) continue;
        m.kink = 0.0;
        m.mu1 = friction_.law_at(i).mu1();
        m.mu2 = friction_.law_at(i).mu2();
        m.alpha = friction_.law_at(i).alpha();
        m.has_kink = true;
    }
    return models;
}

namespace {

struct NodeEval {
    double val;
    double d1;
    double d2;
};

}  // namespace

// Shared Newton engine for both the frozen-argument inner problem and the
// direct energy minimization. eps > 0 smooths the kink by its Moreau
// envelope; eps == 0 evaluates the chosen branch exactly.
Eigen::VectorXd HviProblem::nonsmooth_newton(const std::vector<NodeModel>& models,
                                             const Eigen::VectorXd& start, const SolveOptions& opts,
                                             double* first_order_residual,
                                             bool* energy_monotone) const {
    const int n = n_u(), ns = n_v(), nd = n_dofs();
    if (start.size() != nd) throw std::invalid_argument("nonsmooth_newton: start size mismatch");

    auto node_smooth = [&](const NodeModel& m, double v, double eps) -> NodeEval {
        if (!m.has_kink && m.frozen_linear && m.mid == 0.0) return {0.0, 0.0, 0.0};
        const double z = v - m.kink;
        if (m.frozen_linear) {
            if (!m.has_kink) return {m.weight * m.mid * z, m.weight * m.mid, 0.0};
            const double h = huber(z, eps);
            return {m.weight * (m.mid * z + m.rad * h), m.weight * (m.mid + m.rad * huber_d1(z, eps)),
                    m.weight * m.rad * huber_d2(z, eps)};
        }
        const double H = huber(z, eps);
        const double H1 = huber_d1(z, eps);
        const double H2 = huber_d2(z, eps);
        const double decay = std::exp(-m.alpha * H);
        const double slope = m.mu2 + (m.mu1 - m.mu2) * decay;
        return {m.weight * (m.mu2 * H + (m.mu1 - m.mu2) / m.alpha * (1.0 - decay)),
                m.weight * slope * H1,
                m.weight * (-m.alpha * (m.mu1 - m.mu2) * decay * H1 * H1 + slope * H2)};
    };

    // Exact branch data; branch codes: 0 stick, +1/-1 signed side, 2 smooth.
    auto node_branch = [&](const NodeModel& m, double v, int b) -> NodeEval {
        if (!m.has_kink && m.frozen_linear && m.mid == 0.0) return {0.0, 0.0, 0.0};
        const double z = v - m.kink;
        if (m.frozen_linear) {
            if (!m.has_kink || b == 2) return {m.weight * m.mid * z, m.weight * m.mid, 0.0};
            const double s = m.mid + (b >= 0 ? m.rad : -m.rad);
            return {m.weight * s * z, m.weight * s, 0.0};
        }
        const double slope = law_branch_slope(m.mu1, m.mu2, m.alpha, b >= 0 ? std::max(z, 0.0) : z);
        const double curv = -m.alpha * (m.mu1 - m.mu2) * std::exp(-m.alpha * std::abs(z));
        return {m.weight * law_value(m.mu1, m.mu2, m.alpha, z), m.weight * slope, m.weight * curv};
    };

    auto node_exact_value = [&](const NodeModel& m, double v) {
        const double z = v - m.kink;
        if (m.frozen_linear) return m.weight * (m.mid * z + (m.has_kink ? m.rad * std::abs(z) : 0.0));
        if (!m.has_kink) return 0.0;
        return m.weight * law_value(m.mu1, m.mu2, m.alpha, z);
    };

    // kink subdifferential endpoints (left and right slope)
    auto kink_slopes = [&](const NodeModel& m) {
        if (m.frozen_linear) return std::pair<double, double>{m.weight * (m.mid - m.rad),
                                                              m.weight * (m.mid + m.rad)};
        return std::pair<double, double>{-m.weight * m.mu1, m.weight * m.mu1};
    };

    auto smooth_grad = [&](const Eigen::VectorXd& xx) {
        Eigen::VectorXd g = A_gradient(xx) - lambda_net_;
        if (gauge_active()) {
            const double mu = gauge_weights_.dot(xx.head(n));
            g.head(n) += (mu / gauge_weights_.sum()) * gauge_weights_;
        }
        return g;
    };

    auto base_energy = [&](const Eigen::VectorXd& xx) {
        const Eigen::VectorXd t = boundary_comb(xx);
        double e = interior_.energy_G(xx.head(n)) + 0.5 * t.dot(steklov_.S * t) - lambda_net_.dot(xx);
        if (gauge_active()) {
            const double mu = gauge_weights_.dot(xx.head(n));
            e += 0.5 * mu * mu / gauge_weights_.sum();
        }
        return e;
    };

    auto total_energy_eps = [&](const Eigen::VectorXd& xx, double eps) {
        double e = base_energy(xx);
        for (int i = 0; i < ns; ++i)
            e += eps > 0.0 ? node_smooth(models[static_cast<std::size_t>(i)], xx(n + i), eps).val
                           : node_exact_value(models[static_cast<std::size_t>(i)], xx(n + i));
        return e;
    };

    bool monotone = true;
    Eigen::VectorXd x = project_to_box(start);

    auto box_frozen = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& g, std::vector<bool>& frozen) {
        if (!F_.has_box) return;
        for (int i = 0; i < n; ++i) {
            const double span = std::max(1.0, F_.box_hi(i) - F_.box_lo(i));
            const double atol = 1e-12 * span;
            if ((xx(i) <= F_.box_lo(i) + atol && g(i) > 0.0) ||
                (xx(i) >= F_.box_hi(i) - atol && g(i) < 0.0))
                frozen[static_cast<std::size_t>(i)] = true;
        }
    };

    // Stage 1: damped Newton with Moreau smoothing and continuation.
    auto newton_smoothed = [&](double eps, double tol, int max_it) {
        for (int it = 0; it < max_it; ++it) {
            Eigen::VectorXd g = smooth_grad(x);
            Eigen::VectorXd d2diag = Eigen::VectorXd::Zero(ns);
            for (int i = 0; i < ns; ++i) {
                const NodeEval ne = node_smooth(models[static_cast<std::size_t>(i)], x(n + i), eps);
                g(n + i) += ne.d1;
                d2diag(i) = ne.d2;
            }
            std::vector<bool> frozen(static_cast<std::size_t>(nd), false);
            box_frozen(x, g, frozen);
            double res = 0.0;
            for (int i = 0; i < nd; ++i)
                if (!frozen[static_cast<std::size_t>(i)]) res = std::max(res, std::abs(g(i)));
            if (res <= tol) return;

            Eigen::MatrixXd H = A_jacobian(x);
            // the coupled operator annihilates the constant direction; the
            // gauge term (or, with a box, a proximal term that leaves fixed
            // points untouched) keeps the Newton system definite
            H.topLeftCorner(n, n) += gauge_weights_ * gauge_weights_.transpose() / gauge_weights_.sum();
            for (int i = 0; i < ns; ++i) H(n + i, n + i) += d2diag(i);
            for (int i = 0; i < nd; ++i) {
                if (!frozen[static_cast<std::size_t>(i)]) continue;
                H.row(i).setZero();
                H.col(i).setZero();
                H(i, i) = 1.0;
                g(i) = 0.0;
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
            Eigen::VectorXd d = -ldlt.solve(g);
            if (!d.allFinite()) {
                H.diagonal().array() += 1e-10 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
                d = -Eigen::LDLT<Eigen::MatrixXd>(H).solve(g);
                if (!d.allFinite()) return;
            }

            const double e0 = total_energy_eps(x, eps);
            const double slope = g.dot(d);
            double t = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 50; ++ls) {
                Eigen::VectorXd xt = project_to_box(x + t * d);
                if (total_energy_eps(xt, eps) <= e0 + 1e-4 * t * slope + 1e-15 * std::abs(e0)) {
                    x = xt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) {
                monotone = false;
                return;
            }
        }
    };

    const double eps_final = 1e-8;

    // Stage 2: exact polish. Classify each contact node as stick or a
    // signed branch, pin the sticks, run exact Newton, verify the
    // subdifferential conditions, repeat on misclassification. Returns the
    // exact first-order residual.
    std::vector<int> branch(static_cast<std::size_t>(ns), 2);
    const double stick_width = 4.0 * eps_final;
    auto run_polish = [&]() -> double {
    for (int round = 0; round < 12; ++round) {
        for (int i = 0; i < ns; ++i) {
            const NodeModel& m = models[static_cast<std::size_t>(i)];
            if (!m.has_kink) {
                branch[static_cast<std::size_t>(i)] = 2;
                continue;
            }
            const double z = x(n + i) - m.kink;
            if (branch[static_cast<std::size_t>(i)] == 0 || std::abs(z) <= stick_width)
                branch[static_cast<std::size_t>(i)] = std::abs(z) <= stick_width ? 0 : (z > 0.0 ? 1 : -1);
            else
                branch[static_cast<std::size_t>(i)] = z > 0.0 ? 1 : -1;
            if (branch[static_cast<std::size_t>(i)] == 0) x(n + i) = m.kink;
        }

        for (int it = 0; it < opts.max_inner; ++it) {
            Eigen::VectorXd g = smooth_grad(x);
            Eigen::VectorXd d2diag = Eigen::VectorXd::Zero(ns);
            for (int i = 0; i < ns; ++i) {
                const NodeEval ne = node_branch(models[static_cast<std::size_t>(i)], x(n + i),
                                                branch[static_cast<std::size_t>(i)]);
                g(n + i) += ne.d1;
                d2diag(i) = ne.d2;
            }
            std::vector<bool> frozen(static_cast<std::size_t>(nd), false);
            for (int i = 0; i < ns; ++i)
                if (branch[static_cast<std::size_t>(i)] == 0) frozen[static_cast<std::size_t>(n + i)] = true;
            box_frozen(x, g, frozen);
            double res = 0.0;
            for (int i = 0; i < nd; ++i)
                if (!frozen[static_cast<std::size_t>(i)]) res = std::max(res, std::abs(g(i)));
            if (res <= opts.inner_tol * scale_) break;

            Eigen::MatrixXd H = A_jacobian(x);
            H.topLeftCorner(n, n) += gauge_weights_ * gauge_weights_.transpose() / gauge_weights_.sum();
            for (int i = 0; i < ns; ++i) H(n + i, n + i) += d2diag(i);
            for (int i = 0; i < nd; ++i) {
                if (!frozen[static_cast<std::size_t>(i)]) continue;
                H.row(i).setZero();
                H.col(i).setZero();
                H(i, i) = 1.0;
                g(i) = 0.0;
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
            Eigen::VectorXd d = -ldlt.solve(g);
            if (!d.allFinite()) break;

            const double e0 = total_energy_eps(x, 0.0);
            const double slope = g.dot(d);
            double t = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 50; ++ls) {
                Eigen::VectorXd xt = x + t * d;
                for (int i = 0; i < ns; ++i) {
                    const NodeModel& m = models[static_cast<std::size_t>(i)];
                    const int b = branch[static_cast<std::size_t>(i)];
                    if (b == 1) xt(n + i) = std::max(xt(n + i), m.kink);
                    if (b == -1) xt(n + i) = std::min(xt(n + i), m.kink);
                }
                xt = project_to_box(xt);
                if (total_energy_eps(xt, 0.0) <= e0 + 1e-4 * t * slope + 1e-15 * std::abs(e0)) {
                    x = xt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
        }

        bool consistent = true;
        Eigen::VectorXd gs = smooth_grad(x);
        for (int i = 0; i < ns; ++i) {
            const NodeModel& m = models[static_cast<std::size_t>(i)];
            if (!m.has_kink) continue;
            const double z = x(n + i) - m.kink;
            const int b = branch[static_cast<std::size_t>(i)];
            if (b == 0) {
                const auto [lo_s, hi_s] = kink_slopes(m);
                if (gs(n + i) + lo_s > opts.inner_tol * scale_) {
                    branch[static_cast<std::size_t>(i)] = -1;
                    x(n + i) = m.kink - 2.0 * stick_width;
                    consistent = false;
                } else if (gs(n + i) + hi_s < -opts.inner_tol * scale_) {
                    branch[static_cast<std::size_t>(i)] = 1;
                    x(n + i) = m.kink + 2.0 * stick_width;
                    consistent = false;
                }
            } else if (std::abs(z) <= stick_width * 0.5) {
                branch[static_cast<std::size_t>(i)] = 0;
                x(n + i) = m.kink;
                consistent = false;
            }
        }
        if (consistent) break;
    }

    {
        Eigen::VectorXd gs = smooth_grad(x);
        double res = 0.0;
        for (int i = 0; i < n; ++i) {
            if (F_.has_box) {
                const double span = std::max(1.0, F_.box_hi(i) - F_.box_lo(i));
                const double atol = 1e-10 * span;
                if (x(i) <= F_.box_lo(i) + atol)
                    res = std::max(res, std::max(0.0, -gs(i)));
                else if (x(i) >= F_.box_hi(i) - atol)
                    res = std::max(res, std::max(0.0, gs(i)));
                else
                    res = std::max(res, std::abs(gs(i)));
            } else {
                res = std::max(res, std::abs(gs(i)));
            }
        }
        for (int i = 0; i < ns; ++i) {
            const NodeModel& m = models[static_cast<std::size_t>(i)];
            const double z = x(n + i) - m.kink;
            if (m.has_kink && std::abs(z) <= stick_width) {
                const auto [lo_s, hi_s] = kink_slopes(m);
                res = std::max(res, std::max(0.0, gs(n + i) + lo_s));
                res = std::max(res, std::max(0.0, -(gs(n + i) + hi_s)));
            } else {
                const NodeEval ne = node_branch(m, x(n + i), m.has_kink ? (z > 0.0 ? 1 : -1) : 2);
                res = std::max(res, std::abs(gs(n + i) + ne.d1));
            }
        }
        return res;
    }
    };

    // Exact Newton straight from the start point covers warm starts; the
    // Moreau continuation is the safety net for cold or far starts.
    double res = run_polish();
    if (res > 100.0 * opts.inner_tol * scale_) {
        x = project_to_box(start);
        std::fill(branch.begin(), branch.end(), 2);
        double eps = 1e-2 * scale_;
        while (true) {
            newton_smoothed(eps, std::max(opts.inner_tol * scale_, 1e-3 * eps), opts.max_inner);
            if (eps <= eps_final) break;
            eps = std::max(eps_final, 0.01 * eps);
        }
        res = run_polish();
    }

    if (first_order_residual) *first_order_residual = res;
    if (energy_monotone) *energy_monotone = monotone;
    return x;
}

Eigen::VectorXd HviProblem::inner_convex_solve(const Eigen::VectorXd& anchor_v,
                                               const Eigen::VectorXd& start, const SolveOptions& opts,
                                               double* first_order_residual,
                                               bool* energy_monotone) const {
    if (anchor_v.size() != n_v()) throw std::invalid_argument("inner_convex_solve: anchor size mismatch");
    return nonsmooth_newton(frozen_models(anchor_v), start, opts, first_order_residual, energy_monotone);
}

Eigen::VectorXd HviProblem::direct_energy_solve(const Eigen::VectorXd& start, const SolveOptions& opts,
                                                double* first_order_residual) const {
    return nonsmooth_newton(true_models(), start, opts, first_order_residual, nullptr);
}

HviSolution HviProblem::solve(const SolveOptions& opts) const {
    if (gauge_active() && !data_compatible())
        throw std::runtime_error(
            "HviProblem::solve: load is unbalanced against the constant direction "
            "(2D exterior flux balance) and no box constraint bounds it");
    if (F_.has_box && !data_compatible()) {
        // energy decreases along the constant direction; a box only helps
        // if it blocks that ray
        const double defect = lambda_net_.head(n_u()).sum();
        if ((defect > 0.0 && !(F_.box_hi.minCoeff() < std::numeric_limits<double>::infinity())) ||
            (defect < 0.0 && !(F_.box_lo.maxCoeff() > -std::numeric_limits<double>::infinity())))
            throw std::runtime_error(
                "HviProblem::solve: unbalanced load with a box that does not bound "
                "the constant direction");
    }

    HviSolution sol;
    if (opts.certify) sol.smallness_satisfied = smallness_check().unique_certified;

    Eigen::VectorXd x = opts.start ? *opts.start : Eigen::VectorXd::Zero(n_dofs());
    if (x.size() != n_dofs()) throw std::invalid_argument("solve: start size mismatch");
    x = gauge_fix(project_to_box(x));

    const int ns = n_v();
    Eigen::VectorXd anchor = x.tail(ns);
    double prev_step = -1.0;
    double inner_res = 0.0;
    bool mono_all = true;
    const int phase_a_cap = std::max(8, opts.max_outer / 2);

    for (int k = 0; k < opts.max_outer; ++k) {
        double res = 0.0;
        bool mono = true;
        Eigen::VectorXd x_new = inner_convex_solve(anchor, x, opts, &res, &mono);
        x_new = gauge_fix(x_new);
        inner_res = std::max(inner_res, res);
        mono_all = mono_all && mono;

        const double step = e_norm(x_new - x);
        sol.step_norms.push_back(step);
        if (prev_step > 0.0) sol.contraction_factors.push_back(step / prev_step);
        sol.outer_iterations = k + 1;

        // Next anchor. A sign flip across the friction kink combined with a
        // non-contracting step means the iteration started to oscillate
        // around a stick state; snapping those anchors onto the kink makes
        // the inner problem see the kink exactly.
        Eigen::VectorXd next_anchor = x_new.tail(ns);
        if (prev_step > 0.0 && step > 0.7 * prev_step && friction_.enabled()) {
            for (int i = 0; i < ns; ++i)
                if (x_new(n_u() + i) * x(n_u() + i) < 0.0) next_anchor(i) = 0.0;
        }

        prev_step = step;
        x = x_new;
        anchor = next_anchor;
        if (step <= opts.outer_tol * scale_) {
            sol.converged = true;
            break;
        }
        if (k + 1 >= phase_a_cap) break;
    }

    // Fallback: the full energy is strongly convex under the smallness
    // margin, so minimize it directly and confirm with one more frozen step.
    if (!sol.converged) {
        double res = 0.0;
        Eigen::VectorXd x_direct = gauge_fix(direct_energy_solve(x, opts, &res));
        inner_res = std::max(inner_res, res);
        Eigen::VectorXd x_conf = gauge_fix(inner_convex_solve(x_direct.tail(ns), x_direct, opts, &res, nullptr));
        const double step = e_norm(x_conf - x_direct);
        sol.step_norms.push_back(step);
        sol.outer_iterations += 1;
        x = x_conf;
        sol.converged = step <= 10.0 * opts.outer_tol * scale_;
    }

    // With a box and balanced data the solution family may still contain a
    // segment of constant shifts; return its minimal-norm representative.
    if (F_.has_box && data_compatible()) {
        double c_lo = -std::numeric_limits<double>::infinity();
        double c_hi = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_u(); ++i) {
            c_lo = std::max(c_lo, F_.box_lo(i) - x(i));
            c_hi = std::min(c_hi, F_.box_hi(i) - x(i));
        }
        const double c_free = -gauge_weights_.dot(x.head(n_u())) / gauge_weights_.sum();
        x.head(n_u()).array() += std::clamp(c_free, c_lo, c_hi);
    }

    sol.u = x.head(n_u());
    sol.v = x.tail(ns);
    sol.energy = energy(x);
    sol.inner_first_order_residual = inner_res;
    sol.inner_energy_monotone = mono_all;

    if (opts.check_residual) {
        Rng rng(opts.seed);
        double worst = 0.0;
        for (int b = 0; b < opts.residual_bank; ++b) {
            Eigen::VectorXd d(n_dofs());
            if (F_.has_box) {
                for (int i = 0; i < n_u(); ++i) {
                    const double lo = std::max(F_.box_lo(i), x(i) - scale_);
                    const double hi = std::min(F_.box_hi(i), x(i) + scale_);
                    d(i) = rng.uniform(lo, hi) - x(i);
                }
                for (int i = 0; i < ns; ++i) d(n_u() + i) = rng.normal() * scale_;
                const double nn = e_norm(d);
                if (nn > 1.0) d *= 1.0 / nn;  // shrinking keeps feasibility
            } else {
                for (int i = 0; i < n_dofs(); ++i) d(i) = rng.normal();
                const double nn = e_norm(d);
                if (nn > 0.0) d *= 1.0 / nn;
            }
            const double viol =
                apply_A(x, d) + friction_.J0_h(x.tail(ns), d.tail(ns)) - lambda_net_.dot(d);
            worst = std::min(worst, viol);
        }
        sol.residual = -worst;
        sol.converged = sol.converged && sol.residual <= opts.residual_tol * scale_;
    }
    return sol;
}

HviProblem::ComplementarityReport HviProblem::complementarity_report(const HviSolution& sol,
                                                                     double active_tol) const {
    if (!F_.has_box) throw std::runtime_error("complementarity_report: problem has no box");
    ComplementarityReport rep;
    const Eigen::VectorXd x = stack(sol.u, sol.v);
    const Eigen::VectorXd g = A_gradient(x) - lambda_net_;
    for (int i = 0; i < n_u(); ++i) {
        const double span = std::max(1.0, F_.box_hi(i) - F_.box_lo(i));
        const double atol = active_tol * span;
        if (sol.u(i) <= F_.box_lo(i) + atol && F_.box_hi(i) - F_.box_lo(i) > atol) {
            rep.n_lower_active++;
            rep.min_lower = std::min(rep.min_lower, g(i));
        } else if (sol.u(i) >= F_.box_hi(i) - atol) {
            rep.n_upper_active++;
            rep.max_upper = std::max(rep.max_upper, g(i));
        } else {
            rep.max_free_abs = std::max(rep.max_free_abs, std::abs(g(i)));
        }
    }
    return rep;
}

HviProblem assemble_problem(std::shared_ptr<const Mesh2D> mesh, const DofMaps& dofs, NonlinearityP nl,
                            FrictionLaw law, const ProblemData& data, ExtendedF F,
                            bool friction_enabled) {
    InteriorOperator tmp(*mesh, nl);  // loads need the mass structure
    Eigen::VectorXd lambda_u = Eigen::VectorXd::Zero(tmp.n_dofs());
    if (data.f) lambda_u = tmp.load_form(data.f);

    const int nb = mesh->n_boundary;
    const int ns = static_cast<int>(dofs.gamma_s_dofs.size());
    Eigen::VectorXd lambda_v = Eigen::VectorXd::Zero(ns);
    if (data.q) {
        Eigen::VectorXd qb(nb);
        for (int k = 0; k < nb; ++k) qb(k) = data.q(mesh->nodes[static_cast<std::size_t>(k)]);
        // boundary P1 mass applied to the interpolated datum
        Eigen::VectorXd mq = Eigen::VectorXd::Zero(nb);
        for (int k = 0; k < nb; ++k) {
            const int k1 = (k + 1) % nb;
            const double len = norm(mesh->nodes[static_cast<std::size_t>(k1)] -
                                    mesh->nodes[static_cast<std::size_t>(k)]);
            mq(k) += len * (qb(k) / 3.0 + qb(k1) / 6.0);
            mq(k1) += len * (qb(k1) / 3.0 + qb(k) / 6.0);
        }
        lambda_u.head(nb) += mq;
        for (int i = 0; i < ns; ++i) lambda_v(i) = mq(dofs.gamma_s_local[static_cast<std::size_t>(i)]);
    }
    return HviProblem(std::move(mesh), dofs, nl, law, lambda_u, lambda_v, std::move(F),
                      friction_enabled);
}

HviSolution brute_force_oracle(const HviProblem& problem, std::uint64_t seed) {
    const int nd = problem.n_dofs();
    if (nd > 6) throw std::invalid_argument("brute_force_oracle: more than 6 dofs");
    const int n = problem.n_u();
    const ExtendedF& F = problem.extended_F();

    auto objective = [&](const Eigen::VectorXd& x) { return problem.energy(x); };

    auto clamp_coord = [&](int i, double val) {
        if (F.has_box && i < n) return std::clamp(val, F.box_lo(i), F.box_hi(i));
        return val;
    };

    Rng rng(seed);
    const double r0 = 4.0 * problem.scale();
    Eigen::VectorXd best;
    double best_val = std::numeric_limits<double>::infinity();

    for (int s = 0; s < 14; ++s) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(nd);
        if (s > 0)
            for (int i = 0; i < nd; ++i) x(i) = clamp_coord(i, rng.uniform(-0.5 * r0, 0.5 * r0));
        x = problem.project_to_box(x);

        double r = r0;
        while (r > 1e-11 * problem.scale()) {
            bool improved = false;
            for (int i = 0; i < nd; ++i) {
                double lo = x(i) - r, hi = x(i) + r;
                if (F.has_box && i < n) {
                    lo = std::max(lo, F.box_lo(i));
                    hi = std::min(hi, F.box_hi(i));
                }
                if (!(hi > lo)) continue;
                // zoomed grid search; the kink of the friction density sits
                // at coordinate zero, so keep 0 among the candidates.
                double cur_lo = lo, cur_hi = hi;
                double best_s = x(i);
                Eigen::VectorXd probe = x;
                probe(i) = best_s;
                double best_f = objective(probe);
                for (int round = 0; round < 5; ++round) {
                    const int np = 25;
                    for (int p = 0; p <= np; ++p) {
                        double cand = cur_lo + (cur_hi - cur_lo) * p / np;
                        probe(i) = cand;
                        const double f = objective(probe);
                        if (f < best_f) {
                            best_f = f;
                            best_s = cand;
                        }
                    }
                    if (i >= n && 0.0 >= cur_lo && 0.0 <= cur_hi) {
                        probe(i) = 0.0;
                        const double f = objective(probe);
                        if (f < best_f) {
                            best_f = f;
                            best_s = 0.0;
                        }
                    }
                    const double width = 0.12 * (cur_hi - cur_lo);
                    cur_lo = std::max(lo, best_s - width);
                    cur_hi = std::min(hi, best_s + width);
                }
                probe(i) = x(i);
                if (best_f < objective(x) - 0.0) {
                    x(i) = best_s;
                    improved = true;
                }
            }
            if (!improved) r *= 0.3;
        }
        const double val = objective(x);
        if (val < best_val) {
            best_val = val;
            best = x;
        }
    }

    best = problem.gauge_fix(best);
    HviSolution sol;
    sol.u = best.head(n);
    sol.v = best.tail(problem.n_v());
    sol.energy = problem.energy(best);
    sol.converged = true;
    return sol;
}

}  // namespace hvibem
