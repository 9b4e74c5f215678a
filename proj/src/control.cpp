#include "hvibem/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hvibem {

namespace {

int patch_of(Vec2 p, Vec2 lo, Vec2 hi, int nx, int ny) {
    int ix = static_cast<int>((p.x - lo.x) / (hi.x - lo.x) * nx);
    int iy = static_cast<int>((p.y - lo.y) / (hi.y - lo.y) * ny);
    ix = std::clamp(ix, 0, nx - 1);
    iy = std::clamp(iy, 0, ny - 1);
    return iy * nx + ix;
}

}  // namespace

ControlDriver::ControlDriver(const HviProblem& base, ControlSpec spec)
    : base_(&base), spec_(std::move(spec)) {
    const Mesh2D& mesh = base.mesh();
    const int n = base.n_u();
    const int nb = base.n_boundary();
    const int np = spec_.grid.nx * spec_.grid.ny;

    Vec2 lo = mesh.nodes[0], hi = mesh.nodes[0];
    for (const Vec2& p : mesh.nodes) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }

    Eigen::MatrixXd indicator = Eigen::MatrixXd::Zero(n, np);
    for (int i = 0; i < n; ++i)
        indicator(i, patch_of(mesh.nodes[static_cast<std::size_t>(i)], lo, hi, spec_.grid.nx,
                              spec_.grid.ny)) = 1.0;
    Pobs_ = indicator;

    // Balanced volume basis: shift each indicator by a constant so its load
    // functional pairs to zero with the constant direction.
    const Eigen::VectorXd m = base.interior().lumped_mass();
    Pf_ = indicator;
    for (int p = 0; p < np; ++p) {
        const double c = m.dot(Pf_.col(p)) / m.sum();
        Pf_.col(p).array() -= c;
    }

    // Boundary segments by arc length, balanced against the boundary mass.
    const int nseg = spec_.grid.n_boundary_segments;
    Pq_ = Eigen::MatrixXd::Zero(nb, nseg);
    {
        std::vector<double> cum(static_cast<std::size_t>(nb + 1), 0.0);
        for (int k = 0; k < nb; ++k)
            cum[static_cast<std::size_t>(k + 1)] =
                cum[static_cast<std::size_t>(k)] +
                norm(mesh.nodes[static_cast<std::size_t>((k + 1) % nb)] -
                     mesh.nodes[static_cast<std::size_t>(k)]);
        const double total = cum[static_cast<std::size_t>(nb)];
        for (int k = 0; k < nb; ++k) {
            int seg = static_cast<int>(cum[static_cast<std::size_t>(k)] / total * nseg);
            seg = std::clamp(seg, 0, nseg - 1);
            Pq_(k, seg) = 1.0;
        }
        const Eigen::VectorXd mb = base.boundary_ops().mass_p1 * Eigen::VectorXd::Ones(nb);
        for (int p = 0; p < nseg; ++p) {
            const double c = mb.dot(Pq_.col(p)) / mb.sum();
            Pq_.col(p).array() -= c;
        }
    }

    base_lambda_u_ = base.lambda_net().head(n) +
                     (base.extended_F().linear_u.size() ? base.extended_F().linear_u
                                                        : Eigen::VectorXd::Zero(n));
    base_lambda_v_ = base.lambda_net().tail(base.n_v()) +
                     (base.extended_F().linear_v.size() ? base.extended_F().linear_v
                                                        : Eigen::VectorXd::Zero(base.n_v()));

    // Discrete H2 surrogate metric: L2 + H1 seminorm + lumped Laplacian.
    const Eigen::MatrixXd& A1 = base.interior().stiffness();
    const Eigen::MatrixXd& M = base.interior().mass();
    Eigen::VectorXd dinv = base.interior().lumped_mass().cwiseInverse();
    h2_metric_ = M + A1 + A1 * dinv.asDiagonal() * A1;

    if (spec_.target_u.size() != n || spec_.target_v.size() != base.n_v())
        throw std::invalid_argument("ControlDriver: target size mismatch");
}

int ControlDriver::control_dim() const {
    const int np = spec_.grid.nx * spec_.grid.ny;
    switch (spec_.kind) {
        case ControlKind::Distributed: return np;
        case ControlKind::Boundary: return spec_.grid.n_boundary_segments;
        case ControlKind::DistributedBoundary: return np + spec_.grid.n_boundary_segments;
        case ControlKind::Obstacle: return 2 * np;
    }
    return 0;
}

Eigen::VectorXd ControlDriver::prolong_f(const Eigen::VectorXd& c) const { return Pf_ * c; }

Eigen::VectorXd ControlDriver::prolong_q(const Eigen::VectorXd& c) const { return Pq_ * c; }

void ControlDriver::split_obstacle(const Eigen::VectorXd& c, Eigen::VectorXd& lo_nodal,
                                   Eigen::VectorXd& hi_nodal) const {
    const int np = spec_.grid.nx * spec_.grid.ny;
    lo_nodal = Pobs_ * c.head(np);
    hi_nodal = Pobs_ * c.tail(np);
}

Eigen::VectorXd ControlDriver::project_admissible(const Eigen::VectorXd& c) const {
    if (spec_.kind != ControlKind::Obstacle) return c;
    const int np = spec_.grid.nx * spec_.grid.ny;
    Eigen::VectorXd out = c;
    for (int p = 0; p < np; ++p) out(p) = std::min(out(p), out(np + p));
    return out;
}

void ControlDriver::apply_control(HviProblem& work, const Eigen::VectorXd& c) const {
    const int n = work.n_u();
    const int nb = work.n_boundary();
    const int np = spec_.grid.nx * spec_.grid.ny;
    Eigen::VectorXd lu = base_lambda_u_;
    Eigen::VectorXd lv = base_lambda_v_;

    auto add_q = [&](const Eigen::VectorXd& q_nodal) {
        const Eigen::VectorXd mq = base_->boundary_ops().mass_p1 * q_nodal;
        lu.head(nb) += mq;
        for (int i = 0; i < work.n_v(); ++i)
            lv(i) += mq(work.dofs().gamma_s_local[static_cast<std::size_t>(i)]);
    };

    switch (spec_.kind) {
        case ControlKind::Distributed:
            lu += base_->interior().mass() * prolong_f(c);
            break;
        case ControlKind::Boundary:
            add_q(prolong_q(c));
            break;
        case ControlKind::DistributedBoundary:
            lu += base_->interior().mass() * prolong_f(c.head(np));
            add_q(prolong_q(c.tail(spec_.grid.n_boundary_segments)));
            break;
        case ControlKind::Obstacle: {
            Eigen::VectorXd blo(n), bhi(n);
            split_obstacle(project_admissible(c), blo, bhi);
            ExtendedF F = base_->extended_F();
            F.has_box = true;
            F.box_lo = blo;
            F.box_hi = bhi;
            work.set_extended_F(F);
            break;
        }
    }
    if (spec_.kind != ControlKind::Obstacle) work.set_lambda(lu, lv);
}

HviSolution ControlDriver::control_to_state(const Eigen::VectorXd& c, const SolveOptions& opts) const {
    if (c.size() != control_dim()) throw std::invalid_argument("control_to_state: size mismatch");
    HviProblem work = *base_;
    apply_control(work, c);
    return work.solve(opts);
}

double ControlDriver::control_norm_sq(const Eigen::VectorXd& c) const {
    const int np = spec_.grid.nx * spec_.grid.ny;
    switch (spec_.kind) {
        case ControlKind::Distributed: {
            const Eigen::VectorXd f = prolong_f(c);
            return f.dot(base_->interior().mass() * f);
        }
        case ControlKind::Boundary: {
            const Eigen::VectorXd q = prolong_q(c);
            return q.dot(base_->boundary_ops().mass_p1 * q);
        }
        case ControlKind::DistributedBoundary: {
            const Eigen::VectorXd f = prolong_f(c.head(np));
            const Eigen::VectorXd q = prolong_q(c.tail(spec_.grid.n_boundary_segments));
            return f.dot(base_->interior().mass() * f) + q.dot(base_->boundary_ops().mass_p1 * q);
        }
        case ControlKind::Obstacle: {
            Eigen::VectorXd blo, bhi;
            split_obstacle(c, blo, bhi);
            return blo.dot(h2_metric_ * blo) + bhi.dot(h2_metric_ * bhi);
        }
    }
    return 0.0;
}

double ControlDriver::relative_control_error(const Eigen::VectorXd& c,
                                             const Eigen::VectorXd& c_ref) const {
    return std::sqrt(control_norm_sq(c - c_ref) / std::max(control_norm_sq(c_ref), 1e-300));
}

double ControlDriver::cost(const Eigen::VectorXd& c, const SolveOptions& opts) const {
    const HviSolution sol = control_to_state(c, opts);
    Eigen::VectorXd d = base_->stack(sol.u, sol.v) - base_->stack(spec_.target_u, spec_.target_v);
    return 0.5 * base_->e_norm_sq(d) + 0.5 * spec_.rho * control_norm_sq(c);
}

ControlResult ControlDriver::minimize(const MinimizeOptions& opts) const {
    const int dim = control_dim();
    ControlResult result;
    result.state_solves = 0;

    HviProblem work = *base_;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(base_->n_dofs());

    auto eval = [&](const Eigen::VectorXd& c, bool update_warm) {
        apply_control(work, c);
        SolveOptions so = opts.state_opts;
        so.start = warm;
        so.check_residual = false;
        const HviSolution sol = work.solve(so);
        result.state_solves++;
        if (update_warm) warm = work.stack(sol.u, sol.v);
        Eigen::VectorXd d = work.stack(sol.u, sol.v) - work.stack(spec_.target_u, spec_.target_v);
        return 0.5 * work.e_norm_sq(d) + 0.5 * spec_.rho * control_norm_sq(c);
    };

    Eigen::VectorXd x = opts.start ? *opts.start : Eigen::VectorXd::Zero(dim);
    if (x.size() != dim) throw std::invalid_argument("minimize: start size mismatch");
    x = project_admissible(x);
    double f = eval(x, true);
    result.cost_trajectory.push_back(f);

    auto fd_gradient = [&](const Eigen::VectorXd& xc) {
        Eigen::VectorXd g(dim);
        for (int i = 0; i < dim; ++i) {
            const double h = opts.fd_step * (1.0 + std::abs(xc(i)));
            Eigen::VectorXd xp = xc, xm = xc;
            xp(i) += h;
            xm(i) -= h;
            xp = project_admissible(xp);
            xm = project_admissible(xm);
            const double fp = eval(xp, false);
            const double fm = eval(xm, false);
            const double dx = xp(i) - xm(i);
            g(i) = dx != 0.0 ? (fp - fm) / dx : 0.0;
        }
        return g;
    };

    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd g = fd_gradient(x);

    for (int iter = 0; iter < 500; ++iter) {
        if (result.state_solves >= opts.max_evals) {
            result.budget_exhausted = true;
            break;
        }
        if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol * (1.0 + std::abs(f))) break;

        Eigen::VectorXd d = -Hinv * g;
        if (g.dot(d) > -1e-16) {
            Hinv.setIdentity();
            d = -g;
        }

        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd xt;
        double ft = f;
        for (int ls = 0; ls < 30; ++ls) {
            xt = project_admissible(x + t * d);
            ft = eval(xt, false);
            if (ft <= f + 1e-4 * t * g.dot(d) || ft < f - 1e-14 * (1.0 + std::abs(f))) {
                accepted = true;
                break;
            }
            t *= 0.5;
            if (result.state_solves >= opts.max_evals) break;
        }
        if (!accepted) {
            if (Hinv.isIdentity(1e-14)) break;  // stagnated even on steepest descent
            Hinv.setIdentity();
            continue;
        }

        const Eigen::VectorXd s = xt - x;
        x = xt;
        f = ft;
        eval(x, true);  // refresh the warm state at the accepted point
        result.cost_trajectory.push_back(f);
        if (s.norm() <= opts.step_tol * (1.0 + x.norm())) break;

        const Eigen::VectorXd g_new = fd_gradient(x);
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
            Hinv = (I - s * y.transpose() / sy) * Hinv * (I - y * s.transpose() / sy) +
                   s * s.transpose() / sy;
        }
        g = g_new;
    }

    if (result.state_solves >= opts.max_evals) result.budget_exhausted = true;
    result.control = x;
    result.final_cost = f;
    SolveOptions so = opts.state_opts;
    so.start = warm;
    apply_control(work, x);
    result.final_state = work.solve(so);
    Eigen::VectorXd d = work.stack(result.final_state.u, result.final_state.v) -
                        work.stack(spec_.target_u, spec_.target_v);
    result.final_misfit = 0.5 * work.e_norm_sq(d);
    return result;
}

ControlSpec ControlDriver::inverse_crime_setup(const HviProblem& base, ControlKind kind,
                                               const Eigen::VectorXd& true_control, double rho,
                                               const ControlGrid& grid, const SolveOptions& opts) {
    ControlSpec spec;
    spec.kind = kind;
    spec.grid = grid;
    spec.rho = rho;
    spec.target_u = Eigen::VectorXd::Zero(base.n_u());
    spec.target_v = Eigen::VectorXd::Zero(base.n_v());
    ControlDriver tmp(base, spec);
    const HviSolution sol = tmp.control_to_state(tmp.project_admissible(true_control), opts);
    if (!sol.converged) throw std::runtime_error("inverse_crime_setup: state solve failed");
    spec.target_u = sol.u;
    spec.target_v = sol.v;
    return spec;
}

}  // namespace hvibem
